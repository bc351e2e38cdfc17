"""Locate CEO pay-ratio disclosures in proxy statement text.

Two windowing strategies are used. The primary one anchors on pay-ratio
headings; each heading yields ``text[i - pre : i + window]``. Only heading
windows that mention both the median employee and a ratio are kept. When
none survive, the earliest "median employee" mention is windowed instead.
Documents that declare the rule inapplicable, or that have no employees,
produce no extracts at all.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .extracts import ExtractMethod, TextExtract, strip_extract
from .metrics import TokenEstimator, estimate_tokens
from .parsing import ParsedDocument
from .patterns import PatternSet, load_patterns

HEADING_PRE_CHARS = 1000
HEADING_WINDOW_CHARS = 7000
MEDIAN_PRE_CHARS = 1000
MEDIAN_AFTER_CHARS = 7000


@dataclass(frozen=True)
class DocumentFlags:
    is_smaller_reporting: bool = False
    no_employees: bool = False
    ratio_heading_found: bool = False
    ratio_text_found: bool = False
    median_employee_found: bool = False
    have_median: bool = False
    ratio_not_applicable: bool = False


@dataclass
class ExtractionLog:
    doc_id: str
    flags: DocumentFlags = field(default_factory=DocumentFlags)
    total_num_extracts: int = 0
    num_final_extracts: int = 0

    def as_row(self) -> dict:
        row = {"doc_id": self.doc_id}
        row.update({k: int(v) for k, v in self.flags.__dict__.items()})
        row["total_num_extracts"] = self.total_num_extracts
        row["num_final_extracts"] = self.num_final_extracts
        return row


LOG_COLUMNS = ["doc_id", *DocumentFlags.__dataclass_fields__, "total_num_extracts",
               "num_final_extracts"]


def classify_document(text: str, patterns: PatternSet | None = None) -> DocumentFlags:
    p = patterns or load_patterns()
    return DocumentFlags(
        is_smaller_reporting=p["payratio.smaller_reporting"].search(text),
        no_employees=p["payratio.no_employees"].search(text),
        ratio_heading_found=p["payratio.heading"].search(text),
        ratio_text_found=p["payratio.pay_ratio_text"].search(text),
        median_employee_found=p["payratio.median_employee"].search(text),
        have_median=p["payratio.have_median"].search(text),
        ratio_not_applicable=p["payratio.ratio_not_applicable"].search(text),
    )


def _window(text: str, starts: list[int], pre: int, after: int, method: ExtractMethod,
            doc_id: str, estimator: TokenEstimator) -> list[TextExtract]:
    out = []
    for i, start in enumerate(starts, 1):
        beg = max(start - pre, 0)
        end = min(start + after, len(text))
        piece = text[beg:end]
        out.append(TextExtract(doc_id, i, method, (beg, end), piece, estimator(piece)))
    return out


def extract_by_heading(text: str, pre_chars: int = HEADING_PRE_CHARS,
                       window_chars: int = HEADING_WINDOW_CHARS, *, doc_id: str = "",
                       patterns: PatternSet | None = None,
                       estimator: TokenEstimator = estimate_tokens) -> list[TextExtract]:
    """One window per pay-ratio heading match; overlapping windows are kept."""
    if pre_chars < 0 or window_chars <= 0:
        raise ValueError("window parameters must be positive")
    p = patterns or load_patterns()
    starts = p["payratio.heading"].starts(text)
    return _window(text, starts, pre_chars, window_chars, ExtractMethod.HEADING, doc_id, estimator)


def extract_by_median_employee(text: str, pre_chars: int = MEDIAN_PRE_CHARS,
                               after_chars: int = MEDIAN_AFTER_CHARS,
                               num_extracts: int | None = 1, *, doc_id: str = "",
                               patterns: PatternSet | None = None,
                               estimator: TokenEstimator = estimate_tokens) -> list[TextExtract]:
    """Window around "median employee" mentions, earliest first.

    ``num_extracts=None`` windows every mention.
    """
    if pre_chars < 0 or after_chars <= 0:
        raise ValueError("window parameters must be positive")
    p = patterns or load_patterns()
    starts = p["payratio.median_employee"].starts(text)
    if num_extracts is not None:
        starts = starts[:num_extracts]
    return _window(text, starts, pre_chars, after_chars, ExtractMethod.MEDIAN_EMPLOYEE,
                   doc_id, estimator)


def extract_single_file(doc: ParsedDocument, patterns: PatternSet | None = None,
                        estimator: TokenEstimator = estimate_tokens
                        ) -> tuple[ExtractionLog, list[TextExtract]]:
    p = patterns or load_patterns()
    text = doc.text
    flags = classify_document(text, p)
    log = ExtractionLog(doc.doc_id, flags)
    if flags.ratio_not_applicable or flags.no_employees:
        return log, []

    heading_extracts: list[TextExtract] = []
    heading_num = 0
    if flags.ratio_heading_found:
        found = [e for e in extract_by_heading(text, HEADING_PRE_CHARS, HEADING_WINDOW_CHARS,
                                               doc_id=doc.doc_id, patterns=p, estimator=estimator)
                 if e.text]
        heading_num = len(found)
        median_rx, ratio_rx = p["payratio.median_employee"], p["payratio.ratio_mention"]
        heading_extracts = [e for e in found if median_rx.search(e.text) and ratio_rx.search(e.text)]

    median_extracts: list[TextExtract] = []
    if not heading_extracts:
        median_extracts = extract_by_median_employee(text, MEDIAN_PRE_CHARS, MEDIAN_AFTER_CHARS, 1,
                                                     doc_id=doc.doc_id, patterns=p,
                                                     estimator=estimator)

    log.total_num_extracts = heading_num + len(median_extracts)
    final: list[TextExtract] = []
    for e in heading_extracts + median_extracts:
        stripped, beg, end = strip_extract(e.text, *e.span)
        if stripped:
            final.append(TextExtract(doc.doc_id, len(final) + 1, e.method, (beg, end),
                                     stripped, estimator(stripped)))
    log.num_final_extracts = len(final)
    return log, final
