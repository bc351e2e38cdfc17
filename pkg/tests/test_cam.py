from __future__ import annotations

import pytest

from secextract.cam import (CamStatus, ReportStatus, extract_cam, isolate_cam_section,
                            locate_report_span)
from secextract.corpus import all_filings
from secextract.extracts import ExtractMethod
from secextract.parsing import ParsedDocument, cleanup_text, html_to_text

START = "We have audited the accompanying"
END = "We have served as the Company's auditor since 2009."
HEAD = "\nCritical Audit Matters\n"


def place(total: int, items: dict[int, str]) -> str:
    buf = list("." * total)
    for at, s in items.items():
        buf[at:at + len(s)] = s
    return "".join(buf)[:total]


def test_beg_end_report_with_tail():
    text = place(20000, {100: START, 4999: HEAD, 15000: END})
    assert locate_report_span(text) == (100, 15100, ReportStatus.BEG_END)


def test_cam_end_without_opening_marker():
    text = place(20000, {1999: HEAD, 12000: END})
    assert locate_report_span(text) == (2000, 12100, ReportStatus.CAM_END)


def test_overlong_report_falls_back_to_estimate():
    text = place(40000, {100: START, 4999: HEAD, 25000: END})
    assert locate_report_span(text) == (5000, 20000, ReportStatus.CAM_EST)


def test_estimate_clamped_to_text_length():
    text = place(8000, {1999: HEAD})
    assert locate_report_span(text) == (2000, 8000, ReportStatus.CAM_EST)


def test_no_cam_heading():
    text = place(20000, {100: START, 15000: END})
    assert locate_report_span(text)[2] is ReportStatus.NO_CAM
    x = extract_cam(ParsedDocument("d", text))
    assert x.text == "" and x.span is None and x.cam_status is None
    with pytest.raises(ValueError):
        x.to_text_extract()


def test_isolate_drops_text_before_heading():
    report = "Opinion paragraph.\nCritical Audit Matters\nGoodwill impairment ..."
    section, status = isolate_cam_section(report)
    assert section == "Critical Audit Matters\nGoodwill impairment ..."
    assert status is CamStatus.FOUND
    assert isolate_cam_section("no heading") == ("no heading", CamStatus.NOT_FOUND)


def test_span_points_at_cam_section():
    text = place(20000, {100: START, 4999: HEAD, 15000: END})
    x = extract_cam(ParsedDocument("d", text))
    assert x.span == (5000, 15100)
    assert text[x.span[0]:x.span[1]] == x.text
    e = x.to_text_extract()
    assert e.method is ExtractMethod.CAM_REPORT and e.token_estimate > 0


def _corpus_doc(kind: str):
    f = next(f for f in all_filings(7) if f.kind == kind)
    doc = html_to_text(f.html, f.record.doc_id)
    doc.text = cleanup_text(doc.text)
    return f, doc


def test_cam_ethan_allen_2021_report_bracketed():
    f, doc = _corpus_doc("cam_ethan_allen_2021")
    x = extract_cam(doc)
    assert x.report_status.value == f.expected_status == "BegEnd"
    assert x.text.startswith("Critical Audit Matters")
    assert f.cams[0].title in x.text
    assert "We have served as the Company's auditor since" in x.text
    assert "Consolidated Balance Sheets" not in x.text


def test_cam_pagerduty_2022_cam_end():
    f, doc = _corpus_doc("cam_pagerduty_2022")
    x = extract_cam(doc)
    assert x.report_status is ReportStatus.CAM_END
    assert "Description of the Matter" in x.text
    assert "How We Addressed the Matter in Our Audit" in x.text


def test_corpus_statuses_match_construction():
    for f in all_filings(7):
        if f.record.form_type != "10-K":
            continue
        doc = html_to_text(f.html, f.record.doc_id)
        doc.text = cleanup_text(doc.text)
        assert extract_cam(doc).report_status.value == f.expected_status, f.kind
