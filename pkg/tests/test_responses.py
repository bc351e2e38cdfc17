from __future__ import annotations

import json
import random
from decimal import Decimal

import pytest
from hypothesis import given
from hypothesis import strategies as st

from secextract.dispatch import FormatError
from secextract.responses import (CamRecord, make_payratio_record, merge_cam, merge_payratio,
                                  normalize_money, normalize_ratio, parse_cam_response,
                                  parse_payratio_response, read_cam_csv, read_payratio_csv,
                                  render_with_commas, write_cam_csv, write_payratio_csv)

ONE = [("d1", 1)]
TWO = [("d1", 1), ("d2", 1)]


@pytest.mark.parametrize("raw,expected", [
    ("20,399,972", Decimal(20399972)), ("86,933", Decimal(86933)),
    ("30 million", Decimal(30_000_000)), ("75 thousand", Decimal(75_000)),
    ("0", Decimal(0)), ("Not Found", None), ("$1,234.50", Decimal("1234.50")),
    ("2 billion", Decimal(2_000_000_000)),
])
def test_normalize_money(raw, expected):
    assert normalize_money(raw) == expected


def test_normalize_money_unparsable_warns():
    warnings: list[str] = []
    assert normalize_money("about twelve", warnings) is None
    assert warnings


@pytest.mark.parametrize("raw,expected", [
    ("43:13", (Decimal(43), False)), ("2.7%", (Decimal("2.7"), True)),
    ("58.60", (Decimal("58.60"), False)), ("17.0 to 1", (Decimal("17.0"), False)),
    ("51:1", (Decimal(51), False)), ("390 times", (Decimal(390), False)),
    ("1,024 to one", (Decimal(1024), False)), ("Not Found", (None, False)),
    ("0", (Decimal(0), False)),
])
def test_normalize_ratio(raw, expected):
    assert normalize_ratio(raw) == expected


def test_normalize_ratio_unparsable_warns():
    warnings: list[str] = []
    assert normalize_ratio("n/a", warnings) == (None, False)
    assert warnings


@given(st.integers(min_value=0, max_value=10**12))
def test_comma_digits_roundtrip(n):
    raw = f"{n:,}"
    assert render_with_commas(normalize_money(raw)) == raw


def test_parse_single_entry():
    [r] = parse_payratio_response('{"#1_1": ["5,000,000","50,000","100"]}', ONE)
    assert (r.doc_id, r.extract_index, r.entry_index) == ("d1", 1, 1)
    assert r.ratio_value == 100 and r.ceo_pay == 5_000_000 and r.ceo_pay_raw == "5,000,000"


def test_parse_multiple_ratios():
    raw = json.dumps({"#1_1": ["1", "2", "3"], "#1_2": ["4", "5", "6"], "#1_3": ["7", "8", "9"]})
    assert [r.entry_index for r in parse_payratio_response(raw, ONE)] == [1, 2, 3]


def test_parse_maps_members():
    raw = '{"#2_1": ["1","2","3"], "#1_1": ["4","5","6"]}'
    assert [r.doc_id for r in parse_payratio_response(raw, TWO)] == ["d1", "d2"]


@pytest.mark.parametrize("raw", [
    '{"#4_1": ["1","2","3"]}',               # extract number outside the batch
    '{"#1_1": ["1","2"]}',                   # wrong arity
    '{"#1_1": [["1","2","3"]]}',             # nested list
    '{"#1_1": ["1","2","3"]',                # truncated
    '["1","2","3"]',                         # not an object
    '{}',
    '{"error": "unrecognized prompt"}',
    '{"1_1": ["1","2","3"]}',                # bad key
])
def test_format_errors(raw):
    with pytest.raises(FormatError):
        parse_payratio_response(raw, TWO)


def test_fenced_reply_accepted():
    [r] = parse_payratio_response('```json\n{"#1_1": ["1","2","3"]}\n```', ONE)
    assert r.ratio_value == 3


def test_parse_cam_two_entries_and_missing_title():
    raw = json.dumps({"#1_1": ["1", "Goodwill", "desc", "proc"],
                      "#1_2": ["2", "Not Found", "body \"quoted\" text", "proc 2"]})
    recs = parse_cam_response(raw, ONE)
    assert [r.cam_number for r in recs] == [1, 2]
    assert recs[1].title is None
    assert recs[1].description == 'body "quoted" text'


def test_parse_cam_escaped_quotes_literal():
    raw = r'{"#1_1": ["1", "Title", "the \"fair value\" estimate", "Not Found"]}'
    [r] = parse_cam_response(raw, ONE)
    assert r.description == 'the "fair value" estimate' and r.procedure is None


def rec(idx, vals, entry=1, doc="d1"):
    return make_payratio_record(doc, idx, entry, vals)


def test_merge_identical_collapsed():
    out = merge_payratio([rec(1, ["1,000", "10", "100"]), rec(2, ["1,000", "10", "100"])])
    assert len(out) == 1 and out[0].flags == ()


def test_merge_prefers_complete():
    nf = ["Not Found"] * 3
    out = merge_payratio([rec(1, nf), rec(2, ["1,000", "10", "100"])])
    assert [(r.extract_index, r.ratio_value) for r in out] == [(2, 100)]


def test_merge_conflict_flagged():
    out = merge_payratio([rec(1, ["1,000", "10", "100"]), rec(2, ["2,000", "10", "200"])])
    assert len(out) == 2 and all("conflict" in r.flags for r in out)


def test_merge_multi_ratio_and_not_found():
    out = merge_payratio([rec(1, ["1,000", "10", "100"], 1), rec(1, ["900", "10", "90"], 2),
                          rec(1, ["Not Found"] * 3, 1, doc="d2")])
    assert [r.flags for r in out] == [("multi_ratio",), ("multi_ratio",), ("not_found",)]


pay_values = st.sampled_from(["1,000", "2,000", "10", "Not Found", "100", "30 million"])
pay_records = st.lists(
    st.builds(lambda d, i, e, v: make_payratio_record(d, i, e, v), st.sampled_from(["a", "b"]),
              st.integers(1, 3), st.integers(1, 2), st.lists(pay_values, min_size=3, max_size=3)),
    max_size=12)


@given(pay_records, st.randoms())
def test_merge_payratio_idempotent_and_order_free(records, rnd):
    once = merge_payratio(records)
    assert merge_payratio(once) == once
    shuffled = list(records)
    rnd.shuffle(shuffled)
    assert merge_payratio(shuffled) == once


def cam(idx, n, title, doc="d1"):
    return CamRecord(doc, idx, n, n, title, f"{title} description", "procedure")


def test_merge_cam_concatenates_and_dedups():
    recs = [cam(2, 1, "C"), cam(1, 2, "B"), cam(1, 1, "A"), cam(2, 2, "A"),
            CamRecord("d1", 3, 1, 1, None, None, None)]
    out = merge_cam(recs)
    assert [(r.cam_number, r.title) for r in out] == [(1, "A"), (2, "B"), (3, "C")]
    assert merge_cam(out) == out
    shuffled = list(recs)
    random.Random(3).shuffle(shuffled)
    assert merge_cam(shuffled) == out


def test_csv_roundtrip(tmp_path):
    recs = merge_payratio([rec(1, ["$6,273,391", "$122,236", "51"]),
                           rec(1, ["1,000", "10", "2.7%"], doc="d2")])
    write_payratio_csv(recs, tmp_path / "p.csv", {"d1": {"cik": "1", "filing_date": "2022-04-01"}})
    back = read_payratio_csv(tmp_path / "p.csv")
    assert [(r.ceo_pay, r.median_pay, r.ratio_value, r.ratio_is_percent) for r in back] == \
        [(r.ceo_pay, r.median_pay, r.ratio_value, r.ratio_is_percent) for r in recs]
    cams = merge_cam([cam(1, 1, "Title, with \"quotes\"\nand a newline")])
    write_cam_csv(cams, tmp_path / "c.csv")
    assert read_cam_csv(tmp_path / "c.csv")[0].title == cams[0].title
