"""Accuracy checks for collected records.

* internal consistency: how far the reported ratio is from CEO pay divided
  by median pay, bucketed;
* hallucination check: whether the figures occur in the source extract, and
  near the words that should accompany them;
* cosine similarity of CAM components against a hand-verified benchmark;
* descriptive statistics with nearest-rank percentiles.
"""

from __future__ import annotations

import math
import os
import re
import statistics
from collections import Counter
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Iterable, Mapping, Sequence

from .csvio import read_rows
from .responses import NOT_FOUND, CamRecord, PayRatioRecord

BUCKETS = ("<=1", "1-2", "2-5", ">5")
INCOMPLETE = "incomplete"
PROXIMITY_CHARS = 200
COMPONENTS = ("Title", "Description", "Procedure")


# -- internal consistency -----------------------------------------------------

def ratio_difference(r: PayRatioRecord) -> Decimal | None:
    """``|ratio - ceo / median|`` or None when it cannot be computed."""
    if not r.complete or r.ratio_is_percent or r.median_pay == 0:
        return None
    return abs(r.ratio_value - r.ceo_pay / r.median_pay)


def bucket_of(d: Decimal | float) -> str:
    if d <= 1:
        return "<=1"
    if d <= 2:
        return "1-2"
    if d <= 5:
        return "2-5"
    return ">5"


@dataclass(frozen=True)
class ConsistencyBucket:
    label: str
    count: int
    percentage: float


@dataclass
class ConsistencyReport:
    buckets: list[ConsistencyBucket]
    differences: dict[tuple[str, int, int], Decimal | None]
    flags: dict[tuple[str, int, int], str] = field(default_factory=dict)

    @property
    def complete(self) -> int:
        return sum(b.count for b in self.buckets if b.label != INCOMPLETE)

    def count(self, label: str) -> int:
        return next(b.count for b in self.buckets if b.label == label)

    def percentage(self, label: str) -> float:
        return next(b.percentage for b in self.buckets if b.label == label)


def internal_consistency(records: Iterable[PayRatioRecord]) -> ConsistencyReport:
    counts = Counter()
    diffs: dict[tuple[str, int, int], Decimal | None] = {}
    flags: dict[tuple[str, int, int], str] = {}
    total = 0
    for r in records:
        total += 1
        key = (r.doc_id, r.extract_index, r.entry_index)
        d = ratio_difference(r)
        diffs[key] = d
        if d is None:
            counts[INCOMPLETE] += 1
            if r.complete and r.median_pay == 0:
                flags[key] = "divide_by_zero"
            elif r.ratio_is_percent:
                flags[key] = "percent_ratio"
            continue
        counts[bucket_of(d)] += 1
    complete = total - counts[INCOMPLETE]
    buckets = [ConsistencyBucket(b, counts[b], 100.0 * counts[b] / complete if complete else 0.0)
               for b in BUCKETS]
    buckets.append(ConsistencyBucket(INCOMPLETE, counts[INCOMPLETE],
                                     100.0 * counts[INCOMPLETE] / total if total else 0.0))
    return ConsistencyReport(buckets, diffs, flags)


def format_consistency_table(report: ConsistencyReport) -> str:
    lines = ["Internal consistency: |reported ratio - CEO pay / median pay|", "",
             f"{'Difference':<12}{'N':>8}{'%':>9}"]
    for b in report.buckets[:-1]:
        lines.append(f"{b.label:<12}{b.count:>8}{b.percentage:>8.2f}%")
    lines.append(f"{'Total':<12}{report.complete:>8}{(100.0 if report.complete else 0.0):>8.2f}%")
    inc = report.buckets[-1]
    lines.append(f"{'Incomplete':<12}{inc.count:>8}")
    return "\n".join(lines) + "\n"


# -- hallucination check ------------------------------------------------------

_NUMBER_RE = re.compile(r"\d[\d,]*(?:\.\d+)?")
_MEDIAN_KW = re.compile(r"(?i)median|employee|worker")
_RATIO_KW = re.compile(r"(?i)ratio")


def number_pattern(raw: str) -> re.Pattern | None:
    """Regex for the numeric part of ``raw`` that tolerates comma placement."""
    m = _NUMBER_RE.search(raw or "")
    if not m:
        return None
    digits = m.group(0).replace(",", "").rstrip(".")
    parts = []
    for ch in digits:
        if ch == ".":
            parts.append(r"\.")
        else:
            if parts and parts[-1] != r"\.":
                parts.append(",?")
            parts.append(ch)
    return re.compile(r"(?<![\d.])" + "".join(parts) + r"(?![\d])")


@dataclass
class HallucinationResult:
    passed: bool
    step1: bool
    step2: bool
    reasons: list[str] = field(default_factory=list)


def _near(spans: list[tuple[int, int]], keywords: re.Pattern, text: str, window: int) -> bool:
    kws = [(m.start(), m.end()) for m in keywords.finditer(text)]
    for s, e in spans:
        for ks, ke in kws:
            gap = max(ks - e, s - ke, 0)
            if gap <= window:
                return True
    return False


def hallucination_check(record: PayRatioRecord, source_text: str,
                        window: int = PROXIMITY_CHARS) -> HallucinationResult:
    reasons: list[str] = []
    spans: dict[str, list[tuple[int, int]]] = {}
    for name, raw in (("ceo_pay", record.ceo_pay_raw), ("median_pay", record.median_pay_raw),
                      ("ratio", record.ratio_raw)):
        if not raw or raw.strip() == NOT_FOUND:
            continue
        pat = number_pattern(raw)
        if pat is None:
            reasons.append(f"{name}: no number in {raw!r}")
            continue
        found = [(m.start(), m.end()) for m in pat.finditer(source_text)]
        if not found:
            reasons.append(f"{name}: {raw!r} not in extract")
        spans[name] = found
    step1 = not reasons
    step2 = True
    if step1:
        if spans.get("median_pay") and not _near(spans["median_pay"], _MEDIAN_KW, source_text,
                                                   window):
            step2 = False
            reasons.append(f"median_pay: no median/employee/worker within {window} chars")
        if spans.get("ratio") and not _near(spans["ratio"], _RATIO_KW, source_text, window):
            step2 = False
            reasons.append(f"ratio: no 'ratio' within {window} chars")
    else:
        step2 = False
    return HallucinationResult(step1 and step2, step1, step2, reasons)


# -- cosine similarity --------------------------------------------------------

_MOJIBAKE = {"\u00e2\u20ac\u201d": "-", "\u00e2\u20ac\u201c": "-", "\u00e2\u20ac\u2122": "'",
             "\u00e2\u20ac\u02dc": "'", "\u00e2\u20ac\u0153": '"', "\u00e2\u20ac\u009d": '"'}
_CHAR_MAP = str.maketrans({
    "\u2010": "-", "\u2011": "-", "\u2012": "-", "\u2013": "-", "\u2014": "-", "\u2015": "-",
    "\u2212": "-", "\u2018": "'", "\u2019": "'", "\u201a": "'", "\u201b": "'", "\u201c": '"',
    "\u201d": '"', "\u201e": '"', "\u201f": '"', "\u00a0": " ",
})
_TOKEN_RE = re.compile(r"[^\W_]+")


def canonical_tokens(text: str) -> list[str]:
    for bad, good in _MOJIBAKE.items():
        text = text.replace(bad, good)
    return _TOKEN_RE.findall(text.translate(_CHAR_MAP).lower())


def raw_tokens(text: str) -> list[str]:
    return text.split()


def cosine_similarity(text_a: str, text_b: str, canonical: bool = True) -> float:
    """Cosine of unigram term-frequency vectors; 0.0 if either side has no tokens."""
    tok = canonical_tokens if canonical else raw_tokens
    a, b = Counter(tok(text_a or "")), Counter(tok(text_b or ""))
    if not a or not b:
        return 0.0
    dot = sum(n * b[t] for t, n in a.items() if t in b)
    na = sum(n * n for n in a.values())
    nb = sum(n * n for n in b.values())
    return min(1.0, dot / math.sqrt(na * nb))


# -- benchmark comparison -----------------------------------------------------

@dataclass(frozen=True)
class BenchmarkCam:
    doc_id: str
    cam_number: int
    title: str | None
    description: str | None
    procedure: str | None


@dataclass(frozen=True)
class SimilarityRow:
    component: str
    similarity: float | None  # None marks the Missed row
    count: int


@dataclass
class BenchmarkReport:
    rows: list[SimilarityRow]
    missed: list[BenchmarkCam]
    pairs: list[tuple[BenchmarkCam, CamRecord, dict[str, float]]]
    total: int

    def histogram(self, component: str) -> dict[float | None, int]:
        return {r.similarity: r.count for r in self.rows if r.component == component}

    def missed_rows(self) -> list[SimilarityRow]:
        return [r for r in self.rows if r.similarity is None]


def _cell(v: str | None) -> str | None:
    if v is None:
        return None
    v = v.strip()
    return None if not v or v == NOT_FOUND else v


def load_benchmark(path_or_rows: str | os.PathLike | Iterable[Mapping[str, str]]
                   ) -> list[BenchmarkCam]:
    rows = read_rows(path_or_rows) if isinstance(path_or_rows, (str, os.PathLike)) else path_or_rows
    return [BenchmarkCam(r["doc_id"], int(r["cam_number"]), _cell(r.get("title")),
                         _cell(r.get("description")), _cell(r.get("procedure"))) for r in rows]


def _component_similarity(a: str | None, b: str | None) -> float:
    if a is None and b is None:
        return 1.0  # both sides agree the component is absent
    return cosine_similarity(a or "", b or "")


def compare_to_benchmark(collected: Iterable[CamRecord],
                         benchmark: str | os.PathLike | Iterable[Mapping[str, str]]
                         | Sequence[BenchmarkCam]) -> BenchmarkReport:
    """Align collected CAMs to benchmark CAMs and histogram the similarities.

    Alignment is per document and greedy on title similarity (description
    similarity breaks ties). Benchmark CAMs left without a partner are Missed.
    """
    if isinstance(benchmark, (str, os.PathLike)):
        bench = load_benchmark(benchmark)
    else:
        bench = list(benchmark)
        if bench and not isinstance(bench[0], BenchmarkCam):
            bench = load_benchmark(bench)
    by_doc_c: dict[str, list[CamRecord]] = {}
    for c in collected:
        if not c.declared_miss:
            by_doc_c.setdefault(c.doc_id, []).append(c)
    by_doc_b: dict[str, list[BenchmarkCam]] = {}
    for b in bench:
        by_doc_b.setdefault(b.doc_id, []).append(b)

    pairs = []
    missed: list[BenchmarkCam] = []
    for doc_id in sorted(by_doc_b):
        bs = sorted(by_doc_b[doc_id], key=lambda b: b.cam_number)
        cs = sorted(by_doc_c.get(doc_id, []), key=lambda c: c.cam_number)
        scored = []
        for i, b in enumerate(bs):
            for j, c in enumerate(cs):
                score = (_component_similarity(b.title, c.title),
                         _component_similarity(b.description, c.description))
                scored.append((-score[0], -score[1], i, j))
        scored.sort()
        used_b, used_c = set(), set()
        for _, _, i, j in scored:
            if i in used_b or j in used_c:
                continue
            used_b.add(i)
            used_c.add(j)
            b, c = bs[i], cs[j]
            sims = {"Title": _component_similarity(b.title, c.title),
                    "Description": _component_similarity(b.description, c.description),
                    "Procedure": _component_similarity(b.procedure, c.procedure)}
            pairs.append((b, c, sims))
        missed.extend(b for i, b in enumerate(bs) if i not in used_b)

    rows: list[SimilarityRow] = []
    for comp in COMPONENTS:
        hist = Counter(round(sims[comp], 2) for _, _, sims in pairs)
        rows.extend(SimilarityRow(comp, s, n) for s, n in sorted(hist.items(), reverse=True))
        if missed:
            rows.append(SimilarityRow(comp, None, len(missed)))
    return BenchmarkReport(rows, missed, pairs, len(bench))


def format_similarity_table(report: BenchmarkReport) -> str:
    sims = sorted({r.similarity for r in report.rows if r.similarity is not None}, reverse=True)
    total = report.total or 1
    head = f"{'Similarity':<12}" + "".join(f"{c:>14}{'%':>8}" for c in COMPONENTS)
    lines = ["CAM components: cosine similarity against benchmark", "", head]

    def line(label: str, key) -> str:
        cells = []
        for comp in COMPONENTS:
            n = report.histogram(comp).get(key, 0)
            cells.append(f"{n:>14}{100.0 * n / total:>7.2f}%")
        return f"{label:<12}" + "".join(cells)

    for s in sims:
        lines.append(line(f"{s:.2f}", s))
    if report.missed:
        lines.append(line("Missed", None))
    lines.append(f"{'Total':<12}" + "".join(f"{report.total:>14}{'100.00':>7}%" for _ in COMPONENTS))
    return "\n".join(lines) + "\n"


# -- descriptive statistics ---------------------------------------------------

STAT_FIELDS = ("ceo_pay", "median_pay", "ratio_value")


def nearest_rank(sorted_values: Sequence[float], pct: int) -> float:
    """Nearest-rank percentile of already sorted values (``pct`` in 1..100)."""
    n = len(sorted_values)
    rank = max(1, -(-pct * n // 100))  # ceil(pct * n / 100) in integers
    return sorted_values[rank - 1]


@dataclass(frozen=True)
class StatsRow:
    variable: str
    n: int
    mean: float
    median: float
    std: float
    p5: float
    p25: float
    p75: float
    p95: float


def _eligible(records: Iterable[PayRatioRecord], max_diff: float | None) -> list[PayRatioRecord]:
    out = []
    for r in records:
        d = ratio_difference(r)
        if d is None:
            continue
        if max_diff is not None and d > Decimal(str(max_diff)):
            continue
        out.append(r)
    return out


def summarize(records: Iterable[PayRatioRecord], max_diff: float | None = None,
              fields: Sequence[str] = STAT_FIELDS) -> list[StatsRow]:
    recs = _eligible(records, max_diff)
    if not recs:
        return []
    rows = []
    for f in fields:
        vals = sorted(float(getattr(r, f)) for r in recs)
        std = statistics.stdev(vals) if len(vals) > 1 else 0.0
        rows.append(StatsRow(f, len(vals), statistics.fmean(vals), statistics.median(vals), std,
                             nearest_rank(vals, 5), nearest_rank(vals, 25),
                             nearest_rank(vals, 75), nearest_rank(vals, 95)))
    return rows


def summarize_by_year(records: Iterable[PayRatioRecord], year_of: Mapping[str, str],
                      max_diff: float | None = None) -> dict[str, list[StatsRow]]:
    groups: dict[str, list[PayRatioRecord]] = {}
    for r in _eligible(records, max_diff):
        groups.setdefault(year_of.get(r.doc_id, ""), []).append(r)
    return {y: summarize(rs) for y, rs in sorted(groups.items())}


def year_histogram(records: Iterable[PayRatioRecord], year_of: Mapping[str, str],
                   max_diff: float | None = None) -> dict[str, int]:
    docs: dict[str, str] = {}
    for r in _eligible(records, max_diff):
        docs[r.doc_id] = year_of.get(r.doc_id, "")
    return dict(sorted(Counter(docs.values()).items()))


def format_stats_table(rows: Sequence[StatsRow]) -> str:
    cols = ["N", "Mean", "Median", "Std", "P5", "P25", "P75", "P95"]
    lines = ["Descriptive statistics", "", f"{'Variable':<12}" + "".join(f"{c:>14}" for c in cols)]
    for r in rows:
        vals = [r.n, r.mean, r.median, r.std, r.p5, r.p25, r.p75, r.p95]
        lines.append(f"{r.variable:<12}" + f"{r.n:>14}"
                     + "".join(f"{v:>14,.2f}" for v in vals[1:]))
    return "\n".join(lines) + "\n"
