"""Pipeline stages over a :class:`~secextract.config.PipelineConfig`.

Every stage reads declared input files and writes declared output files
under ``out_dir``. Deterministic stages record a fingerprint of their
inputs and outputs in ``out_dir/.stamps``; a rerun with unchanged inputs
and intact outputs is skipped. Dispatch is not stamped: it resumes from its
own result file instead.

Layout::

    out/filings.csv                    downloaded filings
    out/parsed/<doc_id>.txt            plain text, plus parsed/manifest.csv
    out/<task>/extracts.csv            extracts sent to the model
    out/<task>/extraction_log.csv      per-document extraction outcome
    out/<task>/jobs.csv                prompt batches
    out/<task>/responses.csv           one final row per job
    out/<task>/api_errors.csv          every failed API attempt
    out/<task>/format_errors.csv       every reply that failed to parse
    out/<task>/records.csv             parsed replies, before merging
    out/payratio/payratio.csv          merged results (cam/cam.csv for CAMs)
    out/<task>/validation_report.txt   accuracy checks
    out/<task>/run_report.txt          token, cost and time summary
    out/logs/<stage>.log
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, replace
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Callable, Iterable

from . import cam as cam_mod
from . import payratio as pay_mod
from .clock import SimulatedClock
from .config import TASK_FORMS, PipelineConfig
from .csvio import read_rows, write_rows
from .dispatch import (FinishState, FormatError, LlmJob, LlmResult, RateBudget, SimulatedRunner, dispatch, resume_filter)
from .edgar import (EdgarClient, FilingRecord, cache_path_for, download_filing, expand_forms,
                    fetch_index, quarter_range, read_manifest, resolve_document_url,
                    write_manifest)
from .extracts import read_extracts, split_member_key, write_extracts
from .metrics import UsageRow, format_run_report, get_estimator, run_report, write_run_report_csv
from .parsing import parse_file, read_parsed, write_parsed
from .patterns import load_patterns
from .prompts import (PromptBatch, Task, example_contamination, load_template, make_batches,
                      rebuild_prompt)
from .responses import (CamRecord, make_payratio_record, merge_cam, merge_payratio,
                        parse_cam_response, parse_payratio_response, read_cam_csv,
                        read_payratio_csv, write_cam_csv, write_payratio_csv)
from .validation import (compare_to_benchmark, format_consistency_table, format_similarity_table,
                         format_stats_table, hallucination_check, internal_consistency,
                         summarize, summarize_by_year)

log = logging.getLogger(__name__)

STAGES = ("fetch-index", "download", "parse", "extract", "build-prompts", "dispatch",
          "parse-responses", "merge", "validate", "report")

JOB_COLUMNS = ["task_id", "batch_id", "member_keys", "token_estimate", "prompt_text"]
CAM_RECORD_COLUMNS = ["doc_id", "extract_index", "entry_index", "cam_number", "title",
                      "description", "procedure"]
PAY_RECORD_COLUMNS = ["doc_id", "extract_index", "entry_index", "ceo_pay_raw", "median_pay_raw",
                      "ratio_raw"]
OFFLINE_LATENCY_S = 1.0


class StageError(RuntimeError):
    """A stage finished with failures; ``logs`` lists files worth reading."""

    def __init__(self, stage: str, message: str, logs: Iterable[Path] = ()) -> None:
        super().__init__(f"{stage}: {message}")
        self.stage = stage
        self.logs = [Path(p) for p in logs]


@dataclass
class StageResult:
    stage: str
    task: str | None
    skipped: bool = False
    message: str = ""


# -- fingerprints -------------------------------------------------------------

def _hash_file(path: Path, h) -> None:
    h.update(str(path.name).encode())
    if path.is_dir():
        for p in sorted(path.rglob("*")):
            if p.is_file():
                h.update(str(p.relative_to(path)).encode())
                h.update(p.read_bytes())
    elif path.exists():
        h.update(path.read_bytes())
    else:
        h.update(b"<missing>")


def fingerprint(paths: Iterable[Path], params: object = None) -> str:
    h = hashlib.sha256()
    h.update(json.dumps(params, sort_keys=True, default=str).encode())
    for p in paths:
        _hash_file(Path(p), h)
    return h.hexdigest()


class Pipeline:
    def __init__(self, cfg: PipelineConfig, backend: Callable[[LlmJob], LlmResult] | None = None,
                 clock=None) -> None:
        self.cfg = cfg
        self.out = cfg.out_dir
        self.patterns = load_patterns(cfg.patterns)
        self.estimator = get_estimator(cfg.estimator)
        self._backend = backend
        self._clock = clock
        self.last_dispatch = None

    # paths
    @property
    def filings_csv(self) -> Path:
        return self.out / "filings.csv"

    @property
    def parsed_dir(self) -> Path:
        return self.out / "parsed"

    def tdir(self, task: str) -> Path:
        return self.cfg.task_dir(task)

    def final_csv(self, task: str) -> Path:
        return self.tdir(task) / ("payratio.csv" if task == "payratio" else "cam.csv")

    # stamping
    def _stamp_path(self, name: str) -> Path:
        return self.out / ".stamps" / f"{name}.json"

    def _run_stamped(self, name: str, inputs: list[Path], outputs: list[Path], params: object,
                     body: Callable[[], str]) -> StageResult:
        stage, _, task = name.partition(".")
        key = fingerprint(inputs, params)
        stamp = self._stamp_path(name)
        if stamp.exists() and all(p.exists() for p in outputs):
            try:
                saved = json.loads(stamp.read_text())
            except ValueError:
                saved = {}
            if saved.get("inputs") == key and saved.get("outputs") == fingerprint(outputs):
                log.info("%s: up to date, skipped", name)
                return StageResult(stage, task or None, True, "up to date")
        message = body()
        stamp.parent.mkdir(parents=True, exist_ok=True)
        stamp.write_text(json.dumps({"inputs": key, "outputs": fingerprint(outputs)}))
        return StageResult(stage, task or None, False, message)

    # -- stages ---------------------------------------------------------------

    def fetch_index(self) -> StageResult:
        e = self.cfg.edgar
        if not e.quarters:
            raise StageError("fetch-index", "edgar.quarters is not configured")
        if not e.user_agent:
            raise StageError("fetch-index", "edgar.user_agent is not configured")

        def body() -> str:
            client = EdgarClient(e.user_agent, e.base_url, e.max_per_second)
            forms = [TASK_FORMS[t] for t in self.cfg.tasks]
            records = fetch_index(quarter_range(*e.quarters), forms, client)
            if e.ciks:
                wanted = set(e.ciks)
                records = [r for r in records if r.cik in wanted]
            write_manifest(records, self.cfg.manifest)
            return f"{len(records)} filings indexed"

        params = {"quarters": e.quarters, "ciks": e.ciks, "tasks": self.cfg.tasks}
        return self._run_stamped("fetch-index", [], [self.cfg.manifest], params, body)

    def download(self) -> StageResult:
        if not self.cfg.manifest.exists():
            raise StageError("download", f"manifest {self.cfg.manifest} not found")

        def body() -> str:
            records = read_manifest(self.cfg.manifest)
            forms = set().union(*(expand_forms([TASK_FORMS[t]]) for t in self.cfg.tasks))
            records = [r for r in records if r.form_type in forms]
            client = None
            done: list[FilingRecord] = []
            for r in records:
                if not cache_path_for(r, self.cfg.cache_dir).exists():
                    if client is None:
                        e = self.cfg.edgar
                        if not e.user_agent:
                            raise StageError("download", "edgar.user_agent is needed to "
                                             "download uncached filings")
                        client = EdgarClient(e.user_agent, e.base_url, e.max_per_second)
                    if not r.document_url:
                        r = resolve_document_url(r, client)
                        if r.status == "unresolved":
                            done.append(r)
                            continue
                r = download_filing(r, self.cfg.cache_dir, client)
                # relative path keeps the file independent of where the cache lives
                done.append(replace(r, cache_path=str(Path(str(r.cik)) / f"{r.accession}.htm")
                                    if r.status == "downloaded" else None))
            write_manifest(done, self.filings_csv)
            bad = [r for r in done if r.status != "downloaded"]
            if bad:
                raise StageError("download", f"{len(bad)} filings not downloaded",
                                 [self.filings_csv, self.out / "logs" / "download.log"])
            return f"{len(done)} filings in cache"

        return self._run_stamped("download", [self.cfg.manifest], [self.filings_csv],
                                 {"tasks": self.cfg.tasks, "cache": str(self.cfg.cache_dir)},
                                 body)

    def _filings(self) -> list[FilingRecord]:
        if not self.filings_csv.exists():
            raise StageError("parse", f"{self.filings_csv} not found; run download first")
        return [r for r in read_manifest(self.filings_csv) if r.status == "downloaded"]

    def parse(self) -> StageResult:
        filings = self._filings()
        inputs = [self.filings_csv] + [cache_path_for(r, self.cfg.cache_dir) for r in filings]

        def body() -> str:
            docs = []
            for r in filings:
                doc = parse_file(cache_path_for(r, self.cfg.cache_dir), r.doc_id)
                for w in doc.warnings:
                    log.warning("%s: %s", r.doc_id, w)
                docs.append(doc)
            write_parsed(docs, self.parsed_dir, self.parsed_dir / "manifest.csv")
            return f"{len(docs)} documents parsed"

        return self._run_stamped("parse", inputs, [self.parsed_dir], None, body)

    def _docs_for(self, task: str) -> list[FilingRecord]:
        forms = expand_forms([TASK_FORMS[task]])
        return [r for r in self._filings() if r.form_type in forms]

    def extract(self, task: str) -> StageResult:
        if not (self.parsed_dir / "manifest.csv").exists():
            raise StageError("extract", "parsed documents not found; run parse first")
        d = self.tdir(task)
        outputs = [d / "extracts.csv", d / "extraction_log.csv"]
        params = {"task": task, "estimator": self.cfg.estimator}
        inputs = [self.parsed_dir] + ([self.cfg.patterns] if self.cfg.patterns else [])

        def body() -> str:
            extracts, log_rows = [], []
            docs = [read_parsed(self.parsed_dir, r.doc_id) for r in self._docs_for(task)]
            if task == "payratio":
                for doc in docs:
                    xlog, xs = pay_mod.extract_single_file(doc, self.patterns, self.estimator)
                    log_rows.append(xlog.as_row())
                    extracts.extend(xs)
                write_rows(outputs[1], pay_mod.LOG_COLUMNS, log_rows)
            else:
                for doc in docs:
                    x = cam_mod.extract_cam(doc, patterns=self.patterns)
                    log_rows.append(cam_mod.cam_log_row(x))
                    if x.text.strip():
                        extracts.append(x.to_text_extract(self.estimator))
                write_rows(outputs[1], cam_mod.CAM_LOG_COLUMNS, log_rows)
            write_extracts(extracts, outputs[0])
            return f"{len(extracts)} extracts from {len(docs)} documents"

        return self._run_stamped(f"extract.{task}", inputs, outputs, params, body)

    def _template(self, task: str) -> str:
        return load_template(task, self.cfg.templates.get(task))

    def _batches(self, task: str) -> list[PromptBatch]:
        extracts = read_extracts(self.tdir(task) / "extracts.csv")
        return make_batches(extracts, task, self.cfg.batch_for(task), self._template(task),
                            self.estimator)

    def build_prompts(self, task: str) -> StageResult:
        src = self.tdir(task) / "extracts.csv"
        if not src.exists():
            raise StageError("build-prompts", f"{src} not found; run extract first")
        out = self.tdir(task) / "jobs.csv"
        params = {"batch": self.cfg.batch_for(task), "estimator": self.cfg.estimator}
        inputs = [src] + ([self.cfg.templates[task]] if task in self.cfg.templates else [])

        def body() -> str:
            batches = self._batches(task)
            write_rows(out, JOB_COLUMNS, [
                {"task_id": n, "batch_id": b.batch_id, "member_keys": ";".join(b.member_keys),
                 "token_estimate": b.prompt_token_estimate, "prompt_text": b.prompt_text}
                for n, b in enumerate(batches, 1)])
            return f"{len(batches)} prompt batches"

        return self._run_stamped(f"build-prompts.{task}", inputs, [out], params, body)

    def _jobs(self, task: str) -> list[LlmJob]:
        path = self.tdir(task) / "jobs.csv"
        if not path.exists():
            raise StageError("dispatch", f"{path} not found; run build-prompts first")
        batches = {b.batch_id: b for b in self._batches(task)}
        jobs = []
        for row in read_rows(path):
            keys = tuple(k for k in row["member_keys"].split(";") if k)
            batch = batches.get(row["batch_id"])
            jobs.append(LlmJob(int(row["task_id"]), row["batch_id"], row["prompt_text"],
                               int(row["token_estimate"]),
                               tuple(split_member_key(k)[0] for k in keys), keys,
                               payload=batch))
        return jobs

    def _make_backend(self):
        if self._backend is not None:
            return self._backend
        b = self.cfg.backend
        if b.kind == "offline":
            from .offline import OfflineBackend
            return OfflineBackend(b.seed or self.cfg.seed, b.p_malformed, b.p_rate_limit)
        from .llm_client import EndpointConfig, HttpBackend
        return HttpBackend(EndpointConfig(b.url, b.model, b.api_key_env, b.temperature, b.seed,
                                          b.timeout))

    def dispatch(self, task: str) -> StageResult:
        d = self.tdir(task)
        responses = d / "responses.csv"
        jobs = self._jobs(task)
        pending = resume_filter(jobs, responses)
        message = f"{len(pending)} pending jobs"
        log.info("dispatch.%s: %s", task, message)
        if not pending:
            return StageResult("dispatch", task, True, message)

        t = Task(task)
        template = self._template(task)
        parse = parse_payratio_response if t is Task.PAY_RATIO else parse_cam_response

        def validate(job: LlmJob, res: LlmResult) -> None:
            batch: PromptBatch = job.payload
            records = parse(res.raw_response, batch.members)
            if job.variant == "example":
                for r in records:
                    values = ([r.ceo_pay_raw, r.median_pay_raw, r.ratio_raw]
                              if t is Task.PAY_RATIO else [r.title or ""])
                    if example_contamination(t, values, "\n".join(batch.member_texts)):
                        raise FormatError("reply repeats the worked example")

        def rebuild(job: LlmJob, n: int) -> tuple[str, int, str]:
            v = rebuild_prompt(job.payload, n, template, self.cfg.escalation)
            for w in v.warnings:
                log.warning("task %s: %s", job.task_id, w)
            return v.prompt_text, self.estimator(v.prompt_text), v.variant

        b = self.cfg.budget
        budget = RateBudget(b.rpm, b.tpm, b.rpd)
        backend = self._make_backend()
        kw = {}
        if self._clock is not None:
            kw["clock"] = self._clock
        elif self.cfg.backend.kind == "offline" and self._backend is None:
            # the offline backend has no real latency; simulated time keeps the run
            # fast and its timing reproducible
            kw["clock"] = SimulatedClock()
            kw["runner"] = SimulatedRunner(backend, OFFLINE_LATENCY_S)
        outcome = dispatch(pending, budget, backend, max_attempts=self.cfg.max_attempts,
                           cooldown_s=self.cfg.cooldown_s, max_outstanding=b.max_outstanding,
                           output_file=responses, api_error_file=d / "api_errors.csv",
                           format_error_file=d / "format_errors.csv",
                           validate=validate, rebuild=rebuild, **kw)
        self.last_dispatch = outcome
        stats_path = d / "dispatch_stats.json"
        prev = json.loads(stats_path.read_text()) if stats_path.exists() else {}
        stats = {"elapsed_s": prev.get("elapsed_s", 0.0) + outcome.elapsed,
                 "requests": prev.get("requests", 0) + outcome.requests_issued}
        stats_path.write_text(json.dumps(stats, sort_keys=True) + "\n")
        if outcome.failures:
            raise StageError("dispatch", f"{len(outcome.failures)} of {len(pending)} jobs failed",
                             [d / "api_errors.csv", d / "format_errors.csv", responses])
        return StageResult("dispatch", task, False,
                           f"{message}; {outcome.requests_issued} requests issued")

    def parse_responses(self, task: str) -> StageResult:
        d = self.tdir(task)
        src = d / "responses.csv"
        if not src.exists():
            raise StageError("parse-responses", f"{src} not found; run dispatch first")
        out = d / "records.csv"

        def body() -> str:
            members = {b.batch_id: b.members for b in self._batches(task)}
            bad = []
            rows = []
            for row in read_rows(src):
                if row["finish_state"] != FinishState.OK.value:
                    continue
                try:
                    if task == "payratio":
                        recs = parse_payratio_response(row["raw_response"],
                                                       members[row["batch_id"]])
                        rows += [{c: getattr(r, c) for c in PAY_RECORD_COLUMNS} for r in recs]
                    else:
                        recs = parse_cam_response(row["raw_response"], members[row["batch_id"]])
                        rows += [{c: getattr(r, c) for c in CAM_RECORD_COLUMNS} for r in recs]
                except (FormatError, KeyError) as e:
                    bad.append(row["task_id"])
                    log.error("task %s: unusable reply: %s", row["task_id"], e)
            rows.sort(key=lambda r: (r["doc_id"], int(r["extract_index"]), int(r["entry_index"])))
            write_rows(out, PAY_RECORD_COLUMNS if task == "payratio" else CAM_RECORD_COLUMNS,
                       rows)
            if bad:
                raise StageError("parse-responses", f"{len(bad)} replies could not be parsed",
                                 [d / "format_errors.csv"])
            return f"{len(rows)} records"

        return self._run_stamped(f"parse-responses.{task}", [src], [out], None, body)

    def _records(self, task: str) -> list:
        rows = read_rows(self.tdir(task) / "records.csv")
        if task == "payratio":
            return [make_payratio_record(r["doc_id"], int(r["extract_index"]),
                                         int(r["entry_index"]),
                                         [r["ceo_pay_raw"], r["median_pay_raw"], r["ratio_raw"]])
                    for r in rows]
        return [CamRecord(r["doc_id"], int(r["extract_index"]), int(r["entry_index"]),
                          int(r["cam_number"]), r["title"] or None, r["description"] or None,
                          r["procedure"] or None) for r in rows]

    def _meta(self) -> dict[str, dict[str, str]]:
        return {r.doc_id: {"cik": str(r.cik), "filing_date": r.filing_date.isoformat()}
                for r in read_manifest(self.filings_csv)}

    def merge(self, task: str) -> StageResult:
        src = self.tdir(task) / "records.csv"
        if not src.exists():
            raise StageError("merge", f"{src} not found; run parse-responses first")
        out = self.final_csv(task)

        def body() -> str:
            recs = self._records(task)
            if task == "payratio":
                merged = merge_payratio(recs)
                write_payratio_csv(merged, out, self._meta())
            else:
                merged = merge_cam(recs)
                write_cam_csv(merged, out, self._meta())
            return f"{len(merged)} rows"

        return self._run_stamped(f"merge.{task}", [src, self.filings_csv], [out], None, body)

    def validate(self, task: str) -> StageResult:
        src = self.final_csv(task)
        if not src.exists():
            raise StageError("validate", f"{src} not found; run merge first")
        d = self.tdir(task)
        report_path = d / "validation_report.txt"
        truth = self.cfg.truth.get(task)
        inputs = [src, d / "extracts.csv"] + ([truth] if truth else [])
        outputs = [report_path, d / "validation_detail.csv"]

        def body() -> str:
            if task == "payratio":
                text, ok = self._validate_payratio(src, d, truth)
            else:
                text, ok = self._validate_cam(src, d, truth)
            report_path.write_text(text, encoding="utf-8")
            return "all checks passed" if ok else "some checks flagged records; see report"

        return self._run_stamped(f"validate.{task}", inputs, outputs, None, body)

    def _validate_payratio(self, src: Path, d: Path, truth: Path | None) -> tuple[str, bool]:
        records = read_payratio_csv(src)
        consistency = internal_consistency(records)
        texts = {e.key: e.text for e in read_extracts(d / "extracts.csv")}
        detail = []
        for r in records:
            res = hallucination_check(r, texts.get(f"{r.doc_id}#{r.extract_index}", ""))
            detail.append({"doc_id": r.doc_id, "extract_index": r.extract_index,
                           "entry_index": r.entry_index, "check": "hallucination",
                           "passed": int(res.passed), "detail": "; ".join(res.reasons)})
        parts = [format_consistency_table(consistency), ""]
        n_pass = sum(row["passed"] for row in detail)
        parts.append(f"Hallucination check: {n_pass} of {len(detail)} records passed\n")
        ok = n_pass == len(detail)
        if truth and truth.exists():
            by_doc = {}
            for r in records:
                by_doc.setdefault(r.doc_id, []).append(r)
            expected = read_rows(truth)
            matched = 0
            for t in expected:
                got = by_doc.get(t["doc_id"], [])
                hit = any(_same(r.ceo_pay, t["ceo_pay"]) and _same(r.median_pay, t["median_pay"])
                          and _same(r.ratio_value, t["ratio_value"]) for r in got)
                matched += hit
                detail.append({"doc_id": t["doc_id"], "extract_index": "", "entry_index": "",
                               "check": "ground_truth", "passed": int(hit),
                               "detail": "" if hit else "values differ from ground truth"})
            parts.append(f"Ground truth: {matched} of {len(expected)} filings match exactly\n")
            ok = ok and matched == len(expected)
        year_of = {doc: m["filing_date"][:4] for doc, m in self._meta().items()}
        parts.append(format_stats_table(summarize(records, max_diff=1)))
        for year, rows in summarize_by_year(records, year_of, max_diff=1).items():
            parts.append(f"Filing year {year}\n")
            parts.append(format_stats_table(rows))
        write_rows(d / "validation_detail.csv",
                   ["doc_id", "extract_index", "entry_index", "check", "passed", "detail"], detail)
        return "\n".join(parts), ok

    def _validate_cam(self, src: Path, d: Path, truth: Path | None) -> tuple[str, bool]:
        records = read_cam_csv(src)
        detail = []
        if not truth or not truth.exists():
            write_rows(d / "validation_detail.csv", ["doc_id", "cam_number", "component",
                                                     "similarity"], detail)
            return f"{len(records)} CAMs collected; no benchmark configured\n", True
        report = compare_to_benchmark(records, truth)
        for b, c, sims in report.pairs:
            for comp, s in sims.items():
                detail.append({"doc_id": b.doc_id, "cam_number": b.cam_number,
                               "component": comp, "similarity": f"{s:.4f}"})
        for b in report.missed:
            for comp in ("Title", "Description", "Procedure"):
                detail.append({"doc_id": b.doc_id, "cam_number": b.cam_number,
                               "component": comp, "similarity": "Missed"})
        write_rows(d / "validation_detail.csv", ["doc_id", "cam_number", "component",
                                                 "similarity"], detail)
        ok = not report.missed and all(r.similarity == 1.0 for r in report.rows)
        return format_similarity_table(report), ok

    def report(self, task: str) -> StageResult:
        d = self.tdir(task)
        src = d / "responses.csv"
        extracts_csv = d / "extracts.csv"
        if not src.exists() or not extracts_csv.exists():
            raise StageError("report", "responses or extracts missing; run dispatch first")
        stats = d / "dispatch_stats.json"
        outputs = [d / "run_report.txt", d / "run_report.csv"]

        def body() -> str:
            extracts = read_extracts(extracts_csv)
            usage = [UsageRow(_int(r["input_tokens"]), _int(r["output_tokens"]),
                              r["raw_response"]) for r in read_rows(src)]
            elapsed = json.loads(stats.read_text())["elapsed_s"] if stats.exists() else None
            n = len(extracts)
            avg = sum(e.token_estimate for e in extracts) / n if n else 0.0
            rep = run_report(self.estimator(self._template(task)), n, avg,
                             self.cfg.batch_for(task), usage, elapsed, self.cfg.prices,
                             self.estimator)
            title = "Pay ratio task metrics" if task == "payratio" else "CAM task metrics"
            outputs[0].write_text(format_run_report(rep, title), encoding="utf-8")
            write_run_report_csv(rep, outputs[1])
            return f"{rep.n_requests} requests, ${rep.cost_usd:.2f} estimated"

        params = {"prices": [self.cfg.prices.usd_per_1m_input, self.cfg.prices.usd_per_1m_output],
                  "batch": self.cfg.batch_for(task)}
        return self._run_stamped(f"report.{task}", [src, extracts_csv, stats], outputs, params,
                                 body)

    # -- composition ----------------------------------------------------------

    def run_stage(self, stage: str, task: str | None = None) -> list[StageResult]:
        if stage not in STAGES:
            raise ValueError(f"unknown stage {stage!r}")
        method = getattr(self, stage.replace("-", "_"))
        if stage in ("fetch-index", "download", "parse"):
            return [method()]
        tasks = [task] if task else list(self.cfg.tasks)
        return [method(t) for t in tasks]

    def run_all(self, task: str | None = None, fetch: bool = False) -> list[StageResult]:
        results = []
        for stage in STAGES:
            if stage == "fetch-index" and not fetch:
                continue
            results += self.run_stage(stage, task)
        return results


def _int(v: str) -> int | None:
    try:
        return int(v)
    except (TypeError, ValueError):
        return None


def _same(value, expected: str) -> bool:
    try:
        return value is not None and Decimal(value) == Decimal(expected)
    except InvalidOperation:
        return False

