"""Deterministic rule-based stand-in for the language model.

:func:`answer` reads the numbered extracts back out of a prompt and replies
in the same single-line JSON shape the prompts ask for. It is a pure
function of the prompt text. :class:`OfflineBackend` wraps it for the
dispatcher and can inject seeded faults (rate limits, broken JSON) to
exercise retry paths. :func:`serve` exposes it over HTTP using the
chat-completions wire format.
"""

from __future__ import annotations

import json
import logging
import random
import re
import threading
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .dispatch import RATE_LIMIT, FinishState, LlmJob, LlmResult
from .metrics import estimate_tokens
from .prompts import split_prompt

log = logging.getLogger(__name__)

NOT_FOUND = "Not Found"

_MONEY_RE = re.compile(
    r"\$\s*(?P<num>\d{1,3}(?:,\d{3})+(?:\.\d+)?|\d+(?:\.\d+)?)"
    r"(?:\s+(?P<unit>thousand|million|billion)\b)?", re.I)
_RATIO_RE = re.compile(
    r"(?<![\d.,$])(?P<num>\d{1,3}(?:,\d{3})*(?:\.\d+)?|\d+(?:\.\d+)?)\s*"
    r"(?::\s*1(?!\d)|to\s+(?:1|one)\b|times\b|x\b)", re.I)
_MEDIAN_WORD_RE = re.compile(r"(?i)median")
_UNITS = {"thousand": Decimal(10**3), "million": Decimal(10**6), "billion": Decimal(10**9)}


def _json(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


@dataclass(frozen=True)
class _Amount:
    raw: str
    value: Decimal
    pos: int


def _amounts(text: str) -> list[_Amount]:
    out = []
    for m in _MONEY_RE.finditer(text):
        num = m.group("num")
        try:
            value = Decimal(num.replace(",", ""))
        except InvalidOperation:
            continue
        raw = num
        unit = m.group("unit")
        if unit:
            value *= _UNITS[unit.lower()]
            raw = f"{num} {unit}"
        out.append(_Amount(raw, value, m.start()))
    return out


def _first_ratio(text: str) -> tuple[str, Decimal] | None:
    m = _RATIO_RE.search(text)
    if m:
        num = m.group("num")
        return num, Decimal(num.replace(",", ""))
    return None


def payratio_triple(text: str) -> list[str]:
    """Best guess at (CEO pay, median pay, ratio) for one extract."""
    amounts = _amounts(text)
    ratio = _first_ratio(text)
    if not amounts:
        return [NOT_FOUND, NOT_FOUND, ratio[0] if ratio else NOT_FOUND]
    if ratio is not None and ratio[1] > 0:
        best = None
        for ceo in amounts:
            for med in amounts:
                if med.value <= 0 or ceo is med:
                    continue
                err = abs(ceo.value / med.value - ratio[1]) / ratio[1]
                key = (err, ceo.pos, med.pos)
                if best is None or key < best[0]:
                    best = (key, ceo, med)
        if best is not None and best[0][0] <= Decimal("0.05"):
            return [best[1].raw, best[2].raw, ratio[0]]
    # no usable ratio: largest figure for the CEO, the one nearest "median" for the employee
    ceo = max(amounts, key=lambda a: (a.value, -a.pos))
    median = None
    marks = [m.start() for m in _MEDIAN_WORD_RE.finditer(text)]
    if marks:
        candidates = [a for a in amounts if a is not ceo]
        if candidates:
            median = min(candidates, key=lambda a: (min(abs(a.pos - k) for k in marks), a.pos))
    return [ceo.raw, median.raw if median else NOT_FOUND, ratio[0] if ratio else NOT_FOUND]


# -- CAM heuristics ---------------------------------------------------------

_CAM_HEADING_RE = re.compile(r"(?i)^critical\s+audit\s+matters?$")
_BOILERPLATE_RE = re.compile(
    r"(?i)communicated or required to be communicated|does not alter in any way"
    r"|there (?:are|were) no critical audit matters|we determined that there are no critical")
_DESC_LABEL_RE = re.compile(
    r"(?i)^(?:critical audit matter description|description of the (?:critical audit )?matter"
    r"|description)\b[:.]?\s*")
_PROC_LABEL_RE = re.compile(
    r"(?i)^(?:how we addressed the (?:critical audit )?matter(?: in (?:our|the) audit)?"
    r"|how the critical audit matter was addressed(?: in the audit)?"
    r"|audit response|procedures performed)\b[:.]?\s*")
_PROC_START_RE = re.compile(
    r"(?i)^(?:the (?:following are the )?primary procedures we performed"
    r"|our audit procedures (?:related to|to address|included)"
    r"|addressing the matter involved|to address this (?:critical audit )?matter"
    r"|we addressed this (?:critical audit )?matter)")
_STOP_RE = re.compile(
    r"(?i)^(?:/s/|we have served as|report of independent registered|consolidated balance sheets?$"
    r"|consolidated statements? of)")


def _is_title(line: str) -> bool:
    if len(line) > 200 or len(line.split()) > 25:
        return False
    if line.endswith((".", ":", ";", ",")):
        return False
    return bool(re.match(r"[A-Z0-9\"'(]", line))


def cam_entries(text: str) -> list[list[str]]:
    """Split an extract into [title, description, procedure] triples."""
    cams: list[dict] = []
    cur: dict | None = None
    section = None
    for raw_line in text.splitlines():
        line = raw_line.strip()
        if not line:
            continue
        if _STOP_RE.match(line):
            break
        if _CAM_HEADING_RE.match(line) or _BOILERPLATE_RE.search(line):
            continue
        m = _DESC_LABEL_RE.match(line)
        if m and cur is not None:
            section = "description"
            line = line[m.end():].strip()
            if not line:
                continue
        else:
            m = _PROC_LABEL_RE.match(line)
            if m and cur is not None:
                section = "procedure"
                line = line[m.end():].strip()
                if not line:
                    continue
            elif _is_title(line):
                cur = {"title": line, "description": [], "procedure": []}
                cams.append(cur)
                section = "description"
                continue
        if cur is None:
            continue  # introductory text before the first CAM title
        if section == "description" and _PROC_START_RE.match(line):
            section = "procedure"
        cur[section].append(line)
    out = []
    for c in cams:
        desc = "\n\n".join(c["description"]) or NOT_FOUND
        proc = "\n\n".join(c["procedure"]) or NOT_FOUND
        if desc == NOT_FOUND and proc == NOT_FOUND:
            continue  # a stray short line, not a CAM
        out.append([c["title"], desc, proc])
    return out


def _task_of(preamble: str) -> str | None:
    low = preamble.lower()
    if "critical audit matter" in low:
        return "cam"
    if "pay ratio" in low:
        return "payratio"
    return None


def answer(prompt_text: str) -> str:
    """Reply to a prompt built by :mod:`secextract.prompts`."""
    preamble, extracts = split_prompt(prompt_text)
    task = _task_of(preamble)
    if task is None or not extracts:
        return _json({"error": "unrecognized prompt"})
    reply: dict[str, list[str]] = {}
    for n, text in enumerate(extracts, 1):
        if task == "payratio":
            reply[f"#{n}_1"] = payratio_triple(text)
        else:
            entries = cam_entries(text)
            if not entries:
                reply[f"#{n}_1"] = ["1", NOT_FOUND, NOT_FOUND, NOT_FOUND]
            for k, (title, desc, proc) in enumerate(entries, 1):
                reply[f"#{n}_{k}"] = [str(k), title, desc, proc]
    return _json(reply)


class OfflineBackend:
    """Dispatcher backend around :func:`answer` with optional seeded faults."""

    def __init__(self, seed: int = 0, p_malformed: float = 0.0, p_rate_limit: float = 0.0) -> None:
        if not (0 <= p_malformed <= 1 and 0 <= p_rate_limit <= 1):
            raise ValueError("fault probabilities must lie in [0, 1]")
        self.seed = seed
        self.p_malformed = p_malformed
        self.p_rate_limit = p_rate_limit
        self.calls = 0
        self._lock = threading.Lock()

    def __call__(self, job: LlmJob) -> LlmResult:
        with self._lock:
            self.calls += 1
        rng = random.Random(f"{self.seed}:{job.task_id}:{job.attempts}")
        if rng.random() < self.p_rate_limit:
            return LlmResult(job.task_id, "", FinishState.API_ERROR, error_class=RATE_LIMIT,
                             message="emulated rate limit")
        reply = answer(job.prompt_text)
        if rng.random() < self.p_malformed:
            reply = reply[: max(1, len(reply) // 2)]
        return LlmResult(job.task_id, reply, FinishState.OK,
                         (estimate_tokens(job.prompt_text), estimate_tokens(reply)))


def completion_body(content: str, model: str, prompt: str) -> dict:
    pt, ct = estimate_tokens(prompt), estimate_tokens(content)
    return {
        "id": "offline-0",
        "object": "chat.completion",
        "model": model,
        "choices": [{"index": 0, "finish_reason": "stop",
                     "message": {"role": "assistant", "content": content}}],
        "usage": {"prompt_tokens": pt, "completion_tokens": ct, "total_tokens": pt + ct},
    }


class _Handler(BaseHTTPRequestHandler):
    def do_POST(self) -> None:  # noqa: N802 - http.server naming
        length = int(self.headers.get("Content-Length") or 0)
        try:
            body = json.loads(self.rfile.read(length) or b"{}")
            prompt = body["messages"][-1]["content"]
        except (ValueError, KeyError, IndexError, TypeError):
            self._send(400, {"error": {"type": "invalid_request", "message": "bad request body"}})
            return
        self._send(200, completion_body(answer(prompt), body.get("model", "offline"), prompt))

    def _send(self, status: int, payload: dict) -> None:
        data = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, fmt: str, *args) -> None:
        log.debug("offline server: " + fmt, *args)


def serve(host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    """Start the offline endpoint on a background thread; returns the server.

    The chat-completions URL is ``http://host:port/v1/chat/completions``.
    Call ``shutdown()`` on the result to stop it.
    """
    server = ThreadingHTTPServer((host, port), _Handler)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    return server
