"""Token estimates, run accounting and API cost.

The run totals follow the bookkeeping used to plan a batch job:

    n_requests          = ceil(total_extracts / batch_size)
    total_prompt_tokens = prompt_tokens_per_request * n_requests
    total_input_tokens  = total_prompt_tokens + total_extract_tokens
"""

from __future__ import annotations

import csv
import math
import os
import re
from dataclasses import asdict, dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Callable, Iterable

TokenEstimator = Callable[[str], int]

_PIECE_RE = re.compile(r"[A-Za-z]+|\d{1,3}|[^\sA-Za-z\d]+")


def estimate_tokens(text: str) -> int:
    """Default estimator: one token per four characters, rounded up."""
    return math.ceil(len(text) / 4)


def estimate_tokens_wordpiece(text: str) -> int:
    """Count pre-tokenizer pieces: letter runs, 1-3 digit groups, symbol runs.

    Tracks BPE counts of English prose (where most words are a single
    token) more closely than the character heuristic.
    """
    return len(_PIECE_RE.findall(text))


def tiktoken_estimator(encoding: str = "o200k_base") -> TokenEstimator:
    """Exact counts via ``tiktoken``; raises if the package or encoding is unavailable."""
    import tiktoken

    enc = tiktoken.get_encoding(encoding)
    return lambda text: len(enc.encode(text))


def get_estimator(name: str = "chars4") -> TokenEstimator:
    if name == "chars4":
        return estimate_tokens
    if name == "wordpiece":
        return estimate_tokens_wordpiece
    if name.startswith("tiktoken"):
        _, _, enc = name.partition(":")
        return tiktoken_estimator(enc or "o200k_base")
    raise ValueError(f"unknown token estimator {name!r}")


@dataclass(frozen=True)
class PriceSheet:
    usd_per_1m_input: float
    usd_per_1m_output: float

    def __post_init__(self) -> None:
        if self.usd_per_1m_input < 0 or self.usd_per_1m_output < 0:
            raise ValueError("prices must be non-negative")


def estimate_cost(input_tokens: float, output_tokens: float, prices: PriceSheet) -> float:
    if input_tokens < 0 or output_tokens < 0:
        raise ValueError("token counts must be non-negative")
    return (input_tokens / 1e6 * prices.usd_per_1m_input
            + output_tokens / 1e6 * prices.usd_per_1m_output)


def millions(n: float) -> float:
    """Millions to two decimals, rounding halves up (5,225,000 -> 5.23)."""
    return float((Decimal(str(n)) / 1_000_000).quantize(Decimal("0.01"), ROUND_HALF_UP))


@dataclass
class RunReport:
    prompt_tokens_per_request: int
    total_extracts: int
    avg_tokens_per_extract: float
    batch_size: int
    n_requests: int
    total_prompt_tokens: int
    total_extract_tokens: int
    total_input_tokens: int
    total_output_tokens: int | None = None
    elapsed: float | None = None
    cost_usd: float | None = None
    flags: list[str] = field(default_factory=list)


@dataclass
class UsageRow:
    input_tokens: int | None
    output_tokens: int | None
    raw_response: str = ""


def run_report(prompt_tokens_per_request: int, total_extracts: int,
               avg_tokens_per_extract: float, batch_size: int,
               usage: Iterable[UsageRow] | None = None, elapsed: float | None = None,
               prices: PriceSheet | None = None,
               estimator: TokenEstimator = estimate_tokens) -> RunReport:
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    n_requests = math.ceil(total_extracts / batch_size)
    total_prompt = prompt_tokens_per_request * n_requests
    total_extract = round(avg_tokens_per_extract * total_extracts)
    report = RunReport(
        prompt_tokens_per_request=prompt_tokens_per_request,
        total_extracts=total_extracts,
        avg_tokens_per_extract=avg_tokens_per_extract,
        batch_size=batch_size,
        n_requests=n_requests,
        total_prompt_tokens=total_prompt,
        total_extract_tokens=total_extract,
        total_input_tokens=total_prompt + total_extract,
        elapsed=elapsed,
    )
    if usage is not None:
        out_total = 0
        for row in usage:
            if row.output_tokens is None:
                if "output_tokens_estimated" not in report.flags:
                    report.flags.append("output_tokens_estimated")
                out_total += estimator(row.raw_response)
            else:
                out_total += row.output_tokens
        report.total_output_tokens = out_total
    if prices is not None:
        report.cost_usd = estimate_cost(report.total_input_tokens,
                                        report.total_output_tokens or 0, prices)
    return report


def format_run_report(report: RunReport, title: str = "LLM task metrics") -> str:
    rows = [
        ("Prompt tokens", f"{report.prompt_tokens_per_request:,}", "tokens"),
        ("Total extracts", f"{report.total_extracts:,}", "extracts"),
        ("Average tokens per extract", f"{report.avg_tokens_per_extract:,.0f}", "tokens/extract"),
        ("Batch size", f"{report.batch_size}", "extracts/request"),
        ("Number of requests", f"{report.n_requests:,}", "requests"),
        ("Total prompt tokens", f"{millions(report.total_prompt_tokens):.2f}M", "million tokens"),
        ("Total extract tokens", f"{millions(report.total_extract_tokens):.2f}M", "million tokens"),
        ("Total input tokens", f"{millions(report.total_input_tokens):.2f}M", "million tokens"),
    ]
    if report.total_output_tokens is not None:
        rows.append(("Total output tokens", f"{millions(report.total_output_tokens):.2f}M",
                     "million tokens"))
    if report.elapsed is not None:
        rows.append(("Total processing time", f"{round(report.elapsed / 60)}", "minutes"))
    if report.cost_usd is not None:
        rows.append(("Total API cost", f"${report.cost_usd:,.2f}", "USD"))
    w0 = max(len(r[0]) for r in rows)
    w1 = max(len(r[1]) for r in rows)
    lines = [title, "", f"{'Description':<{w0}}  {'Value':>{w1}}  Unit"]
    lines += [f"{a:<{w0}}  {b:>{w1}}  {c}" for a, b, c in rows]
    if report.flags:
        lines += ["", "Flags: " + ", ".join(report.flags)]
    return "\n".join(lines) + "\n"


def write_run_report_csv(report: RunReport, path: str | os.PathLike) -> None:
    data = asdict(report)
    # whole minutes keep the file stable across reruns of a fast offline job
    elapsed = data.pop("elapsed")
    data["elapsed_minutes"] = "" if elapsed is None else round(elapsed / 60)
    data["flags"] = ";".join(data["flags"])
    if data["cost_usd"] is not None:
        data["cost_usd"] = f"{data['cost_usd']:.4f}"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["metric", "value"])
        for k, v in data.items():
            w.writerow([k, "" if v is None else v])
