"""Locate the auditor's report in 10-K text and cut out its CAM section.

The report is bracketed by its opening ("We have audited the accompanying")
and the tenure sentence ("We have served as the auditor"). When both
bracket the first "Critical Audit Matters" heading and the report is no
longer than 18,000 characters, the whole report plus a 100-character tail is
taken; with only the closing sentence in reach, the text from the heading to
that sentence is taken; otherwise a fixed 15,000 characters after the
heading stand in for the report.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .extracts import ExtractMethod, TextExtract
from .metrics import TokenEstimator, estimate_tokens
from .parsing import ParsedDocument
from .patterns import PatternSet, load_patterns

EST_CHARS = 15000
MAX_REPORT_CHARS = 18000
CAM_END_LIMIT = 15000
TAIL_CHARS = 100


class ReportStatus(str, Enum):
    BEG_END = "BegEnd"
    CAM_EST = "CamEst"
    CAM_END = "CamEnd"
    NO_CAM = "NoCam"


class CamStatus(str, Enum):
    FOUND = "CamFound"
    NOT_FOUND = "CamNotFound"


@dataclass(frozen=True)
class CamExtraction:
    doc_id: str
    report_status: ReportStatus
    cam_status: CamStatus | None
    span: tuple[int, int] | None
    text: str

    def to_text_extract(self, estimator: TokenEstimator = estimate_tokens,
                        extract_index: int = 1) -> TextExtract:
        if self.report_status is ReportStatus.NO_CAM or self.span is None:
            raise ValueError(f"{self.doc_id}: no CAM section to convert")
        method = (ExtractMethod.CAM_ESTIMATE if self.report_status is ReportStatus.CAM_EST
                  else ExtractMethod.CAM_REPORT)
        return TextExtract(self.doc_id, extract_index, method, self.span, self.text,
                           estimator(self.text))


def locate_report_span(text: str, est_chars: int = EST_CHARS,
                       patterns: PatternSet | None = None) -> tuple[int, int, ReportStatus]:
    """Return ``(start, end, status)``; ``end`` is clamped to the text length."""
    p = patterns or load_patterns()
    cams = p["cam.cam_heading"].starts(text)
    if not cams:
        return 0, 0, ReportStatus.NO_CAM
    starts = p["cam.report_start"].starts(text)
    ends = p["cam.report_end"].starts(text)
    cam = min(cams)
    n = len(text)

    def est():
        return cam, min(cam + est_chars, n), ReportStatus.CAM_EST

    if starts and ends:
        s, e = min(starts), max(ends)
        if s < cam < e:
            if e - s <= MAX_REPORT_CHARS:
                return s, min(e + TAIL_CHARS, n), ReportStatus.BEG_END
            return est()
    if not starts and ends:
        e = max(ends)
        if cam < e and e - cam < CAM_END_LIMIT:
            return cam, min(e + TAIL_CHARS, n), ReportStatus.CAM_END
        return est()
    return est()


def locate_audit_report(text: str, est_chars: int = EST_CHARS,
                        patterns: PatternSet | None = None) -> tuple[str, ReportStatus]:
    start, end, status = locate_report_span(text, est_chars, patterns)
    return text[start:end], status


def isolate_cam_section(report_text: str,
                        patterns: PatternSet | None = None) -> tuple[str, CamStatus]:
    p = patterns or load_patterns()
    cams = p["cam.cam_heading"].starts(report_text)
    if cams:
        return report_text[min(cams):], CamStatus.FOUND
    return report_text, CamStatus.NOT_FOUND


def extract_cam(doc: ParsedDocument, est_chars: int = EST_CHARS,
                patterns: PatternSet | None = None) -> CamExtraction:
    p = patterns or load_patterns()
    start, end, status = locate_report_span(doc.text, est_chars, p)
    if status is ReportStatus.NO_CAM:
        return CamExtraction(doc.doc_id, status, None, None, "")
    report = doc.text[start:end]
    cam_text, cam_status = isolate_cam_section(report, p)
    offset = len(report) - len(cam_text)
    return CamExtraction(doc.doc_id, status, cam_status, (start + offset, end), cam_text)


CAM_LOG_COLUMNS = ["doc_id", "report_status", "cam_status", "start_char", "end_char", "chars"]


def cam_log_row(x: CamExtraction) -> dict:
    return {"doc_id": x.doc_id, "report_status": x.report_status.value,
            "cam_status": x.cam_status.value if x.cam_status else "",
            "start_char": x.span[0] if x.span else "", "end_char": x.span[1] if x.span else "",
            "chars": len(x.text)}
