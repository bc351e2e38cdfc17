"""Command line entry point: one subcommand per pipeline stage plus run-all.

Exit codes: 0 success, 2 usage or configuration error, 3 stage failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .pipeline import STAGES, Pipeline, StageError

EXIT_OK, EXIT_USAGE, EXIT_STAGE = 0, 2, 3

log = logging.getLogger("secextract")

_HELP = {
    "fetch-index": "download EDGAR full-index files and write the filing manifest",
    "download": "download manifest filings into the cache (cached files are reused)",
    "parse": "convert cached HTML filings to plain text",
    "extract": "cut pay-ratio windows or auditor-report CAM sections out of each document",
    "build-prompts": "pack extracts into prompt batches",
    "dispatch": "send pending prompt batches to the model under the rate budget",
    "parse-responses": "parse model replies into records",
    "merge": "merge records into one result file per task",
    "validate": "run consistency, hallucination and benchmark checks",
    "report": "summarize tokens, cost and processing time",
}


def _add_common(p: argparse.ArgumentParser, with_task: bool = True) -> None:
    p.add_argument("-c", "--config", required=True, help="pipeline YAML config file")
    if with_task:
        p.add_argument("--task", choices=["payratio", "cam", "both"],
                       help="task to run (default: the config's task)")
    p.add_argument("--backend", choices=["offline", "live"],
                   help="override backend.kind from the config")
    p.add_argument("--out-dir", help="override out_dir from the config")
    p.add_argument("--seed", type=int, help="override the run seed")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="secextract",
        description="Extract CEO pay ratios and critical audit matters from SEC filings.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for stage in STAGES:
        p = sub.add_parser(stage, help=_HELP[stage], description=_HELP[stage])
        _add_common(p, with_task=stage not in ("fetch-index", "download", "parse"))
    p = sub.add_parser("run-all", help="run every stage from download to report",
                       description="Run download through report; add --fetch to start from "
                                   "the EDGAR index.")
    _add_common(p)
    p.add_argument("--fetch", action="store_true", help="also run fetch-index first")

    p = sub.add_parser("demo-corpus", help="write the bundled fixture corpus and its config",
                       description="Write sample and synthetic filings with ground truth, plus a "
                                   "config.yaml that runs them through the offline backend.")
    p.add_argument("directory", help="target directory")
    p.add_argument("--seed", type=int, default=7, help="corpus RNG seed (default 7)")
    return parser


def _setup_logging(out_dir: Path, stage: str, verbose: bool) -> logging.Handler:
    root = logging.getLogger()
    root.setLevel(logging.DEBUG)
    if not any(getattr(h, "_secextract_console", False) for h in root.handlers):
        console = logging.StreamHandler(sys.stderr)
        console.setLevel(logging.DEBUG if verbose else logging.WARNING)
        console.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
        console._secextract_console = True
        root.addHandler(console)
    log_dir = out_dir / "logs"
    log_dir.mkdir(parents=True, exist_ok=True)
    fh = logging.FileHandler(log_dir / f"{stage}.log", encoding="utf-8")
    fh.setLevel(logging.INFO)
    fh.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    root.addHandler(fh)
    return fh


def _overrides(args: argparse.Namespace) -> dict:
    out = {"backend.kind": args.backend, "seed": args.seed,
           "task": getattr(args, "task", None)}
    if args.out_dir:
        out["out_dir"] = str(Path(args.out_dir).resolve())
    return out


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == "demo-corpus":
        from .corpus import build_corpus
        filings = build_corpus(args.directory, args.seed)
        print(f"wrote {len(filings)} filings to {args.directory}")
        print(f"next: secextract run-all -c {Path(args.directory) / 'config.yaml'}")
        return EXIT_OK

    try:
        cfg = load_config(args.config, _overrides(args))
    except ConfigError as e:
        print(f"secextract: error: {e}", file=sys.stderr)
        return EXIT_USAGE

    handler = _setup_logging(cfg.out_dir, args.command, args.verbose)
    try:
        pipe = Pipeline(cfg)
        task = None if getattr(args, "task", None) in (None, "both") else args.task
        if args.command == "run-all":
            results = pipe.run_all(task, fetch=args.fetch)
        else:
            results = pipe.run_stage(args.command, task)
        for r in results:
            label = r.stage + (f" [{r.task}]" if r.task else "")
            print(f"{label}: {'skipped, ' if r.skipped and r.stage != 'dispatch' else ''}"
                  f"{r.message}")
        return EXIT_OK
    except StageError as e:
        print(f"secextract: {e}", file=sys.stderr)
        for p in e.logs:
            print(f"  see {p}", file=sys.stderr)
        return EXIT_STAGE
    except ConfigError as e:
        print(f"secextract: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:  # any other failure is a stage failure, not a crash
        log.exception("%s failed", args.command)
        print(f"secextract: {args.command} failed: {e}", file=sys.stderr)
        print(f"  see {cfg.out_dir / 'logs' / (args.command + '.log')}", file=sys.stderr)
        return EXIT_STAGE
    finally:
        logging.getLogger().removeHandler(handler)
        handler.close()


if __name__ == "__main__":
    sys.exit(main())
