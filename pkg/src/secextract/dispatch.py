"""Rate-limited dispatch of prompt batches with retry, cooldown and resume.

The loop holds at most one job ready to start. A job starts only when the
request budget, the token budget, the outstanding-request cap and any
rate-limit cooldown all allow it. Failed attempts go to a retry queue that
is drained before new jobs. Time comes from an injected clock so the whole
loop can run against :class:`~secextract.clock.SimulatedClock`.
"""

from __future__ import annotations

import csv
import heapq
import logging
import os
import queue
import threading
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Protocol, Sequence

from .clock import SystemClock
from .csvio import read_rows, write_rows

log = logging.getLogger(__name__)

DEFAULT_MAX_ATTEMPTS = 5
DEFAULT_COOLDOWN_S = 15.0
DEFAULT_MAX_OUTSTANDING = 500
WINDOW_S = 60.0
DAY_S = 86400.0


class FinishState(str, Enum):
    OK = "Ok"
    API_ERROR = "ApiError"
    FORMAT_ERROR = "FormatError"


class FormatError(Exception):
    """A reply that does not follow the requested output format."""


class ApiError(Exception):
    def __init__(self, error_class: str, message: str = "") -> None:
        super().__init__(message or error_class)
        self.error_class = error_class


RATE_LIMIT = "rate_limit"


@dataclass
class LlmJob:
    task_id: int
    batch_id: str
    prompt_text: str
    token_estimate: int
    member_doc_ids: tuple[str, ...] = ()
    member_keys: tuple[str, ...] = ()
    attempts: int = 0
    format_failures: int = 0
    variant: str = "unmodified"
    payload: object = None


@dataclass
class LlmResult:
    task_id: int
    raw_response: str
    finish_state: FinishState
    usage: tuple[int | None, int | None] | None = None
    error_class: str = ""
    message: str = ""

    def __post_init__(self) -> None:
        if self.finish_state is FinishState.OK and not self.raw_response:
            raise ValueError("an Ok result needs a non-empty response")


Backend = Callable[[LlmJob], LlmResult]


class RateBudget:
    """Requests and tokens started within the trailing window.

    Capacity is consumed when a request starts and released once that start
    is a full window in the past, so no window of that length ever holds
    more than the capacity. ``rpd`` optionally adds a per-day request cap.
    """

    def __init__(self, rpm: int, tpm: int, rpd: int | None = None,
                 window: float = WINDOW_S) -> None:
        if rpm <= 0 or tpm <= 0 or (rpd is not None and rpd <= 0):
            raise ValueError("budget capacities must be positive")
        self.rpm_capacity = rpm
        self.tpm_capacity = tpm
        self.rpd_capacity = rpd
        self.window = window
        self._minute: deque[tuple[float, int]] = deque()
        self._minute_tokens = 0
        self._day: deque[float] = deque()

    def _expire(self, now: float) -> None:
        while self._minute and self._minute[0][0] + self.window <= now:
            _, tokens = self._minute.popleft()
            self._minute_tokens -= tokens
        while self._day and self._day[0] + DAY_S <= now:
            self._day.popleft()

    def rpm_available(self, now: float) -> int:
        self._expire(now)
        return self.rpm_capacity - len(self._minute)

    def tpm_available(self, now: float) -> int:
        self._expire(now)
        return self.tpm_capacity - self._minute_tokens

    def can_start(self, tokens: int, now: float) -> bool:
        self._expire(now)
        if self.rpd_capacity is not None and len(self._day) >= self.rpd_capacity:
            return False
        return (len(self._minute) < self.rpm_capacity
                and self._minute_tokens + tokens <= self.tpm_capacity)

    def consume(self, tokens: int, now: float) -> None:
        if tokens > self.tpm_capacity:
            raise ValueError("request exceeds the token budget outright")
        self._minute.append((now, tokens))
        self._minute_tokens += tokens
        if self.rpd_capacity is not None:
            self._day.append(now)

    def next_available(self, tokens: int, now: float) -> float:
        """Earliest time at which ``can_start(tokens)`` can become true."""
        self._expire(now)
        t = now
        if len(self._minute) >= self.rpm_capacity:
            t = max(t, self._minute[len(self._minute) - self.rpm_capacity][0] + self.window)
        excess = self._minute_tokens + tokens - self.tpm_capacity
        if excess > 0:
            freed = 0
            for start, n in self._minute:
                freed += n
                if freed >= excess:
                    t = max(t, start + self.window)
                    break
        if self.rpd_capacity is not None and len(self._day) >= self.rpd_capacity:
            t = max(t, self._day[len(self._day) - self.rpd_capacity] + DAY_S)
        return t


class Runner(Protocol):
    def submit(self, job: LlmJob, now: float) -> None: ...
    def poll(self, now: float) -> list[tuple[LlmJob, LlmResult]]: ...
    def next_due(self) -> float | None: ...
    def close(self) -> None: ...


def _safe_call(backend: Backend, job: LlmJob) -> LlmResult:
    try:
        result = backend(job)
    except ApiError as e:
        return LlmResult(job.task_id, "", FinishState.API_ERROR, error_class=e.error_class,
                         message=str(e))
    except FormatError as e:
        return LlmResult(job.task_id, "", FinishState.FORMAT_ERROR, error_class="format",
                         message=str(e))
    except Exception as e:  # noqa: BLE001 - any backend failure is an API error
        return LlmResult(job.task_id, "", FinishState.API_ERROR,
                         error_class=type(e).__name__, message=str(e))
    return result


class ThreadRunner:
    """Runs backend calls on a thread pool; completions are collected by the loop."""

    def __init__(self, backend: Backend, workers: int = 16) -> None:
        self.backend = backend
        self._pool = ThreadPoolExecutor(max_workers=workers, thread_name_prefix="dispatch")
        self._done: queue.SimpleQueue = queue.SimpleQueue()

    def submit(self, job: LlmJob, now: float) -> None:
        fut = self._pool.submit(_safe_call, self.backend, job)
        fut.add_done_callback(lambda f, j=job: self._done.put((j, f.result())))

    def poll(self, now: float) -> list[tuple[LlmJob, LlmResult]]:
        out = []
        while True:
            try:
                out.append(self._done.get_nowait())
            except queue.Empty:
                return out

    def next_due(self) -> float | None:
        return None

    def close(self) -> None:
        self._pool.shutdown(wait=True)


class SimulatedRunner:
    """Calls the backend at submit time and releases the result after a latency.

    Meant for use with a simulated clock: completions are returned by
    :meth:`poll` once the clock reaches their due time.
    """

    def __init__(self, backend: Backend, latency: Callable[[LlmJob], float] | float = 1.0) -> None:
        self.backend = backend
        self.latency = latency if callable(latency) else (lambda job, v=latency: v)
        self._pending: list[tuple[float, int, LlmJob, LlmResult]] = []
        self._seq = 0

    def submit(self, job: LlmJob, now: float) -> None:
        result = _safe_call(self.backend, job)
        self._seq += 1
        heapq.heappush(self._pending, (now + self.latency(job), self._seq, job, result))

    def poll(self, now: float) -> list[tuple[LlmJob, LlmResult]]:
        out = []
        while self._pending and self._pending[0][0] <= now:
            _, _, job, result = heapq.heappop(self._pending)
            out.append((job, result))
        return out

    def next_due(self) -> float | None:
        return self._pending[0][0] if self._pending else None

    def close(self) -> None:
        pass


@dataclass
class TraceEvent:
    kind: str  # "start" or "finish"
    time: float
    task_id: int
    tokens: int
    in_flight: int


RESULT_COLUMNS = ["task_id", "batch_id", "doc_ids", "member_keys", "finish_state", "attempts",
                  "error_class", "input_tokens", "output_tokens", "raw_response"]
API_ERROR_COLUMNS = ["task_id", "batch_id", "doc_ids", "attempt", "error_class", "message"]
FORMAT_ERROR_COLUMNS = ["task_id", "batch_id", "doc_ids", "attempt", "variant", "message",
                        "raw_response"]


class _CsvAppender:
    """Append-only CSV writer; a header is written when the file is new."""

    def __init__(self, path: Path | None, columns: Sequence[str]) -> None:
        self.path = path
        self.columns = list(columns)
        self._lock = threading.Lock()
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            if not path.exists() or path.stat().st_size == 0:
                with open(path, "w", newline="", encoding="utf-8") as fh:
                    csv.writer(fh, lineterminator="\n").writerow(self.columns)

    def append(self, row: dict) -> None:
        if self.path is None:
            return
        with self._lock, open(self.path, "a", newline="", encoding="utf-8") as fh:
            csv.writer(fh, lineterminator="\n").writerow(
                ["" if row.get(c) is None else row[c] for c in self.columns])


def _sort_key(row: dict) -> tuple:
    def as_int(v) -> int:
        try:
            return int(v)
        except (TypeError, ValueError):
            return -1
    return as_int(row.get("task_id")), as_int(row.get("attempt"))


def finalize_results(path: str | os.PathLike) -> list[dict]:
    """Rewrite the result file ordered by task_id, one row per task.

    An Ok row wins over failure rows for the same task; among failures the
    last one written wins.
    """
    path = Path(path)
    if not path.exists():
        return []
    best: dict[str, dict] = {}
    for row in read_rows(path):
        tid = row.get("task_id")
        if not tid:
            continue
        prev = best.get(tid)
        if prev is None or prev.get("finish_state") != FinishState.OK.value:
            best[tid] = row
    rows = sorted(best.values(), key=_sort_key)
    write_rows(path, RESULT_COLUMNS, rows)
    return rows


def finalize_log(path: str | os.PathLike, columns: Sequence[str]) -> None:
    path = Path(path)
    if not path.exists():
        write_rows(path, columns, [])
        return
    rows = read_rows(path)
    unique = {tuple(r.get(c, "") for c in columns): r for r in rows}
    write_rows(path, columns, sorted(unique.values(), key=_sort_key))


def completed_keys(output_file: str | os.PathLike) -> set[str]:
    """Member keys (``doc_id#extract_index``) with an Ok row in ``output_file``."""
    path = Path(output_file)
    done: set[str] = set()
    if not path.exists():
        return done
    try:
        rows = read_rows(path)
    except (csv.Error, UnicodeDecodeError) as e:
        log.warning("unreadable result file %s (%s); treating every job as pending", path, e)
        return done
    for n, row in enumerate(rows, 2):
        state = row.get("finish_state")
        keys = row.get("member_keys") or row.get("doc_ids")
        if state is None or keys is None or not row.get("task_id"):
            log.warning("%s line %d: corrupt result row ignored", path, n)
            continue
        if state == FinishState.OK.value and row.get("raw_response"):
            done.update(k for k in keys.split(";") if k)
    return done


def resume_filter(jobs: Iterable[LlmJob], output_file: str | os.PathLike) -> list[LlmJob]:
    """Drop jobs whose every member already has an Ok result; order is preserved."""
    done = completed_keys(output_file)
    pending = []
    for job in jobs:
        keys = job.member_keys or job.member_doc_ids
        if not keys or not all(k in done for k in keys):
            pending.append(job)
    return pending


@dataclass
class DispatchOutcome:
    results: list[LlmResult] = field(default_factory=list)
    failures: list[LlmResult] = field(default_factory=list)
    api_errors: list[dict] = field(default_factory=list)
    format_errors: list[dict] = field(default_factory=list)
    requests_issued: int = 0
    elapsed: float = 0.0
    trace: list[TraceEvent] = field(default_factory=list)


def dispatch(jobs: Sequence[LlmJob], budget: RateBudget, backend: Backend | None = None, *,
             max_attempts: int = DEFAULT_MAX_ATTEMPTS, cooldown_s: float = DEFAULT_COOLDOWN_S,
             max_outstanding: int = DEFAULT_MAX_OUTSTANDING, clock=None,
             runner: Runner | None = None, output_file: str | os.PathLike | None = None,
             api_error_file: str | os.PathLike | None = None,
             format_error_file: str | os.PathLike | None = None,
             validate: Callable[[LlmJob, LlmResult], None] | None = None,
             rebuild: Callable[[LlmJob, int], tuple[str, int, str]] | None = None,
             poll_interval: float = 0.01, record_trace: bool = False) -> DispatchOutcome:
    """Run every job to a terminal state.

    ``validate(job, result)`` may raise :class:`FormatError` to reject an Ok
    reply. ``rebuild(job, n_format_failures)`` returns ``(prompt_text,
    token_estimate, variant)`` for the next attempt after a format failure.
    """
    if max_attempts < 1 or max_outstanding < 1 or cooldown_s < 0:
        raise ValueError("invalid dispatch limits")
    clock = clock or SystemClock()
    if runner is None:
        if backend is None:
            raise ValueError("need a backend or a runner")
        runner = ThreadRunner(backend, workers=min(max_outstanding, 32))

    results = _CsvAppender(Path(output_file) if output_file else None, RESULT_COLUMNS)
    api_log = _CsvAppender(Path(api_error_file) if api_error_file else None, API_ERROR_COLUMNS)
    fmt_log = _CsvAppender(Path(format_error_file) if format_error_file else None,
                           FORMAT_ERROR_COLUMNS)

    out = DispatchOutcome()
    fresh = deque(jobs)
    retry: deque[LlmJob] = deque()
    next_job: LlmJob | None = None
    in_flight = 0
    cooldown_until = float("-inf")
    started_at = clock.now()

    def result_row(job: LlmJob, res: LlmResult) -> dict:
        usage = res.usage or (None, None)
        return {"task_id": job.task_id, "batch_id": job.batch_id,
                "doc_ids": ";".join(dict.fromkeys(job.member_doc_ids)),
                "member_keys": ";".join(job.member_keys or job.member_doc_ids),
                "finish_state": res.finish_state.value, "attempts": job.attempts,
                "error_class": res.error_class, "input_tokens": usage[0],
                "output_tokens": usage[1], "raw_response": res.raw_response}

    def fail_terminal(job: LlmJob, res: LlmResult) -> None:
        out.failures.append(res)
        results.append(result_row(job, res))
        log.error("task %s failed after %d attempts: %s %s", job.task_id, job.attempts,
                  res.error_class, res.message)

    def handle(job: LlmJob, res: LlmResult, now: float) -> None:
        nonlocal cooldown_until
        if res.finish_state is FinishState.OK and validate is not None:
            try:
                validate(job, res)
            except FormatError as e:
                res = LlmResult(res.task_id, res.raw_response, FinishState.FORMAT_ERROR,
                                res.usage, "format", str(e))
        if res.finish_state is FinishState.OK:
            out.results.append(res)
            results.append(result_row(job, res))
            return
        doc_ids = ";".join(dict.fromkeys(job.member_doc_ids))
        if res.finish_state is FinishState.API_ERROR:
            row = {"task_id": job.task_id, "batch_id": job.batch_id, "doc_ids": doc_ids,
                   "attempt": job.attempts, "error_class": res.error_class,
                   "message": res.message}
            out.api_errors.append(row)
            api_log.append(row)
            if res.error_class == RATE_LIMIT:
                cooldown_until = max(cooldown_until, now + cooldown_s)
        else:
            row = {"task_id": job.task_id, "batch_id": job.batch_id, "doc_ids": doc_ids,
                   "attempt": job.attempts, "variant": job.variant, "message": res.message,
                   "raw_response": res.raw_response}
            out.format_errors.append(row)
            fmt_log.append(row)
            job.format_failures += 1
        if job.attempts >= max_attempts:
            fail_terminal(job, res)
            return
        if res.finish_state is FinishState.FORMAT_ERROR and rebuild is not None:
            job.prompt_text, job.token_estimate, job.variant = rebuild(job, job.format_failures)
        retry.append(job)

    try:
        while True:
            now = clock.now()
            for job, res in runner.poll(now):
                in_flight -= 1
                if record_trace:
                    out.trace.append(TraceEvent("finish", now, job.task_id, job.token_estimate,
                                                in_flight))
                handle(job, res, now)

            if next_job is None:
                if retry:
                    next_job = retry.popleft()
                elif fresh:
                    next_job = fresh.popleft()
            if next_job is not None and next_job.token_estimate > budget.tpm_capacity:
                res = LlmResult(next_job.task_id, "", FinishState.API_ERROR,
                                error_class="token_budget",
                                message="token estimate exceeds the per-minute token budget")
                fail_terminal(next_job, res)
                next_job = None
                continue

            if (next_job is not None and now >= cooldown_until and in_flight < max_outstanding
                    and budget.can_start(next_job.token_estimate, now)):
                budget.consume(next_job.token_estimate, now)
                next_job.attempts += 1
                in_flight += 1
                out.requests_issued += 1
                if record_trace:
                    out.trace.append(TraceEvent("start", now, next_job.task_id,
                                                next_job.token_estimate, in_flight))
                runner.submit(next_job, now)
                next_job = None
                continue

            if next_job is None and not retry and not fresh and in_flight == 0:
                break

            due = runner.next_due()
            wake = [due if due is not None else now + poll_interval]
            if next_job is not None and in_flight < max_outstanding:
                wake.append(cooldown_until if now < cooldown_until
                            else budget.next_available(next_job.token_estimate, now))
            target = min(wake)
            clock.sleep(max(target - now, 0.0))
    finally:
        runner.close()

    out.elapsed = clock.now() - started_at
    if output_file:
        finalize_results(output_file)
    if api_error_file:
        finalize_log(api_error_file, API_ERROR_COLUMNS)
    if format_error_file:
        finalize_log(format_error_file, FORMAT_ERROR_COLUMNS)
    return out
