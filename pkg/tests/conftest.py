from __future__ import annotations

import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from importlib import resources
from pathlib import Path
from typing import Callable

import pytest

from secextract.corpus import build_corpus
from secextract.parsing import html_to_text, cleanup_text, ParsedDocument


def sample_html(name: str) -> str:
    return resources.files("secextract").joinpath(f"data/samples/{name}.html").read_text("utf-8")


def sample_doc(name: str) -> ParsedDocument:
    doc = html_to_text(sample_html(name), name)
    doc.text = cleanup_text(doc.text)
    return doc


@dataclass
class Recorded:
    method: str
    path: str
    headers: dict
    body: bytes


@dataclass
class MockServer:
    url: str
    requests: list[Recorded] = field(default_factory=list)


Reply = tuple[int, dict, bytes]


@pytest.fixture
def mock_http():
    """Start a local HTTP server driven by a handler ``f(Recorded) -> (status, headers, body)``."""
    servers = []

    def start(handler: Callable[[Recorded], Reply]) -> MockServer:
        state = MockServer("")
        lock = threading.Lock()

        class H(BaseHTTPRequestHandler):
            def _serve(self):
                n = int(self.headers.get("Content-Length") or 0)
                rec = Recorded(self.command, self.path, dict(self.headers), self.rfile.read(n))
                with lock:
                    state.requests.append(rec)
                status, headers, body = handler(rec)
                self.send_response(status)
                for k, v in headers.items():
                    self.send_header(k, v)
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            do_GET = do_POST = _serve

            def log_message(self, *args):
                pass

        srv = ThreadingHTTPServer(("127.0.0.1", 0), H)
        threading.Thread(target=srv.serve_forever, daemon=True).start()
        servers.append(srv)
        state.url = f"http://127.0.0.1:{srv.server_address[1]}"
        return state

    yield start
    for s in servers:
        s.shutdown()
        s.server_close()


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("corpus")
    build_corpus(root)
    return root


def check_trace(trace, rpm: int, tpm: int, max_outstanding: int, window: float = 60.0) -> list[str]:
    """Independent check of a dispatch trace; returns a list of violations.

    Two starts share a window when the later one begins less than ``window``
    seconds after the earlier one.
    """
    problems = []
    starts = [e for e in trace if e.kind == "start"]
    lo, tokens = 0, 0
    for j, ev in enumerate(starts):
        tokens += ev.tokens
        while starts[lo].time + window <= ev.time:
            tokens -= starts[lo].tokens
            lo += 1
        if j - lo + 1 > rpm:
            problems.append(f"{j - lo + 1} requests in the window ending {ev.time:.3f}")
        if tokens > tpm:
            problems.append(f"{tokens} tokens in the window ending {ev.time:.3f}")
    in_flight = 0
    for ev in trace:
        in_flight += 1 if ev.kind == "start" else -1
        if in_flight != ev.in_flight:
            problems.append(f"in-flight count mismatch at {ev.time:.3f}")
        if in_flight > max_outstanding:
            problems.append(f"{in_flight} outstanding at {ev.time:.3f}")
    return problems


def scripted_backend(failures_per_job: int, error_class: str = "server_error"):
    """Backend that fails every task ``failures_per_job`` times, then answers."""
    from secextract.dispatch import FinishState, LlmResult

    seen: dict[int, int] = {}
    lock = threading.Lock()

    def call(job):
        with lock:
            seen[job.task_id] = seen.get(job.task_id, 0) + 1
            n = seen[job.task_id]
        if n <= failures_per_job:
            return LlmResult(job.task_id, "", FinishState.API_ERROR, error_class=error_class,
                             message=f"scripted failure {n}")
        return LlmResult(job.task_id, f'{{"#1_1": "{job.task_id}"}}', FinishState.OK, (1, 1))

    call.calls = seen
    return call


ACCEPTANCE: dict[int, tuple[str, str, float]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        status, title, secs = ACCEPTANCE[n]
        terminalreporter.write_line(f"{status} criterion {n}: {title} ({secs:.2f}s)")
