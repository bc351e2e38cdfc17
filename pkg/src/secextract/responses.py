"""Turn raw model replies into typed records, normalize them, and merge per document."""

from __future__ import annotations

import json
import logging
import os
import re
from dataclasses import dataclass, field, replace
from decimal import Decimal, InvalidOperation
from typing import Iterable, Mapping, Sequence

from .csvio import read_rows, write_rows
from .dispatch import FormatError

log = logging.getLogger(__name__)

NOT_FOUND = "Not Found"

_KEY_RE = re.compile(r"^#(\d+)_(\d+)$")
_FENCE_RE = re.compile(r"^```[a-zA-Z]*\s*\n?(.*?)\n?```$", re.S)
_MONEY_RE = re.compile(
    r"^\(?\s*(?:US)?\$?\s*(\d{1,3}(?:,\d{3})+(?:\.\d+)?|\d*\.?\d+)\s*"
    r"(thousand|million|billion)?\s*\)?$", re.I)
_RATIO_NUM = r"(\d{1,3}(?:,\d{3})+(?:\.\d+)?|\d*\.?\d+)"
_RATIO_RE = re.compile(
    rf"^{_RATIO_NUM}\s*(?::\s*\d+|to\s+(?:1|one)|to1|times|x)?$", re.I)
_PERCENT_RE = re.compile(rf"^{_RATIO_NUM}\s*%$")
_UNITS = {"thousand": Decimal(10**3), "million": Decimal(10**6), "billion": Decimal(10**9)}


def _is_not_found(raw: str) -> bool:
    return raw.strip().lower() in ("not found", "")


def normalize_money(raw: str, warnings: list[str] | None = None) -> Decimal | None:
    """``"20,399,972"`` -> 20399972, ``"30 million"`` -> 30000000, ``"Not Found"`` -> None."""
    if raw is None or _is_not_found(raw):
        return None
    m = _MONEY_RE.match(raw.strip())
    if not m:
        if warnings is not None:
            warnings.append(f"unparsable amount {raw!r}")
        return None
    value = Decimal(m.group(1).replace(",", ""))
    if m.group(2):
        value *= _UNITS[m.group(2).lower()]
    return value


def normalize_ratio(raw: str, warnings: list[str] | None = None) -> tuple[Decimal | None, bool]:
    """Return ``(value, is_percent)``.

    ``"17.0 to 1"``, ``"17:1"`` and ``"17 times"`` all reduce to 17. A
    trailing ``:NN`` is read as a footnote marker, so ``"43:13"`` gives 43.
    """
    if raw is None or _is_not_found(raw):
        return None, False
    s = raw.strip()
    m = _PERCENT_RE.match(s)
    if m:
        return Decimal(m.group(1).replace(",", "")), True
    m = _RATIO_RE.match(s)
    if m:
        return Decimal(m.group(1).replace(",", "")), False
    if warnings is not None:
        warnings.append(f"unparsable ratio {raw!r}")
    return None, False


def render_decimal(value: Decimal | None) -> str:
    if value is None:
        return ""
    if value == value.to_integral_value():
        return str(int(value))
    return format(value.normalize(), "f")


def render_with_commas(value: Decimal) -> str:
    return f"{value:,}"


@dataclass(frozen=True)
class PayRatioRecord:
    doc_id: str
    extract_index: int
    entry_index: int
    ceo_pay_raw: str
    median_pay_raw: str
    ratio_raw: str
    ceo_pay: Decimal | None = None
    median_pay: Decimal | None = None
    ratio_value: Decimal | None = None
    ratio_is_percent: bool = False
    flags: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()

    @property
    def complete(self) -> bool:
        return None not in (self.ceo_pay, self.median_pay, self.ratio_value)

    @property
    def n_present(self) -> int:
        return sum(v is not None for v in (self.ceo_pay, self.median_pay, self.ratio_value))

    @property
    def values_key(self) -> tuple:
        return (self.ceo_pay, self.median_pay, self.ratio_value, self.ratio_is_percent)


def make_payratio_record(doc_id: str, extract_index: int, entry_index: int,
                         values: Sequence[str]) -> PayRatioRecord:
    warnings: list[str] = []
    ceo_raw, med_raw, ratio_raw = values
    ratio, pct = normalize_ratio(ratio_raw, warnings)
    return PayRatioRecord(doc_id, extract_index, entry_index, ceo_raw, med_raw, ratio_raw,
                          normalize_money(ceo_raw, warnings), normalize_money(med_raw, warnings),
                          ratio, pct, (), tuple(warnings))


@dataclass(frozen=True)
class CamRecord:
    doc_id: str
    extract_index: int
    entry_index: int
    cam_number: int
    title: str | None
    description: str | None
    procedure: str | None

    @property
    def declared_miss(self) -> bool:
        return self.title is None and self.description is None and self.procedure is None


def _decode(raw: str) -> dict:
    text = (raw or "").strip()
    m = _FENCE_RE.match(text)
    if m:
        text = m.group(1).strip()
    if text.startswith("json\n"):
        text = text[5:]
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(f"reply is not valid JSON: {e}") from None
    if not isinstance(obj, dict):
        raise FormatError("reply is not a JSON object")
    if "error" in obj and not any(_KEY_RE.match(k) for k in obj):
        raise FormatError(f"backend reported an error: {obj['error']}")
    if not obj:
        raise FormatError("reply is an empty object")
    return obj


def _entries(raw: str, members: Sequence[tuple[str, int]], arity: int):
    obj = _decode(raw)
    out = []
    for key, value in obj.items():
        m = _KEY_RE.match(key)
        if not m:
            raise FormatError(f"unexpected key {key!r}")
        n, x = int(m.group(1)), int(m.group(2))
        if not 1 <= n <= len(members):
            raise FormatError(f"key {key!r} refers to extract {n} of a {len(members)}-extract batch")
        if x < 1:
            raise FormatError(f"key {key!r} has an invalid entry number")
        if not isinstance(value, list):
            raise FormatError(f"value of {key!r} is not a list")
        if any(isinstance(v, (list, dict)) for v in value):
            raise FormatError(f"value of {key!r} is a nested list")
        if len(value) != arity:
            raise FormatError(f"value of {key!r} has {len(value)} elements, expected {arity}")
        doc_id, extract_index = members[n - 1]
        out.append((n, x, doc_id, extract_index, ["" if v is None else str(v) for v in value]))
    out.sort(key=lambda t: (t[0], t[1]))
    return out


def parse_payratio_response(raw: str, batch_members: Sequence[tuple[str, int]]
                            ) -> list[PayRatioRecord]:
    return [make_payratio_record(doc_id, idx, x, values)
            for _, x, doc_id, idx, values in _entries(raw, batch_members, 3)]


def _field(v: str) -> str | None:
    return None if _is_not_found(v) else v


def parse_cam_response(raw: str, batch_members: Sequence[tuple[str, int]]) -> list[CamRecord]:
    out = []
    for _, x, doc_id, idx, values in _entries(raw, batch_members, 4):
        try:
            number = int(str(values[0]).strip())
        except ValueError:
            number = x
        if number < 1:
            raise FormatError(f"CAM number {values[0]!r} is not positive")
        out.append(CamRecord(doc_id, idx, x, number, _field(values[1]), _field(values[2]),
                             _field(values[3])))
    return out


# -- merging ----------------------------------------------------------------

def merge_payratio(records: Iterable[PayRatioRecord]) -> list[PayRatioRecord]:
    """One canonical set of values per document.

    Complete entries beat partial ones, and the lowest extract index wins.
    Several distinct entries from that extract are all kept and flagged
    ``multi_ratio``. Distinct complete entries from other extracts are kept
    too, and every row of that document is flagged ``conflict``.
    """
    by_doc: dict[str, list[PayRatioRecord]] = {}
    for r in records:
        by_doc.setdefault(r.doc_id, []).append(r)
    out: list[PayRatioRecord] = []
    for doc_id in sorted(by_doc):
        recs = sorted(by_doc[doc_id], key=lambda r: (r.extract_index, r.entry_index,
                                                     r.ceo_pay_raw, r.median_pay_raw, r.ratio_raw))
        best_n = max(r.n_present for r in recs)
        if best_n == 0:
            first = recs[0]
            out.append(replace(first, flags=("not_found",)))
            continue
        cands = [r for r in recs if r.n_present == best_n]
        chosen = min(r.extract_index for r in cands)
        seen: dict[tuple, PayRatioRecord] = {}
        primary, others = [], []
        for r in cands:
            if r.values_key in seen:
                continue
            seen[r.values_key] = r
            (primary if r.extract_index == chosen else others).append(r)
        if best_n < 3:
            others = []  # partial answers from other extracts are not a conflict
        flags: list[str] = []
        if len(primary) > 1:
            flags.append("multi_ratio")
        if others:
            flags.append("conflict")
        if best_n < 3:
            flags.append("incomplete")
        out.extend(replace(r, flags=tuple(flags)) for r in primary + others)
    return out


def merge_cam(records: Iterable[CamRecord]) -> list[CamRecord]:
    """Concatenate CAMs per document, drop duplicates and misses, renumber 1..k."""
    by_doc: dict[str, list[CamRecord]] = {}
    for r in records:
        by_doc.setdefault(r.doc_id, []).append(r)
    out: list[CamRecord] = []
    for doc_id in sorted(by_doc):
        recs = sorted(by_doc[doc_id], key=lambda r: (r.extract_index, r.cam_number, r.entry_index,
                                                     r.title or "", r.description or "",
                                                     r.procedure or ""))
        seen = set()
        k = 0
        for r in recs:
            key = (r.title, r.description, r.procedure)
            if r.declared_miss or key in seen:
                continue
            seen.add(key)
            k += 1
            out.append(replace(r, cam_number=k, extract_index=min(x.extract_index for x in recs),
                               entry_index=k))
    return out


def merge_records(records: Iterable[PayRatioRecord | CamRecord]) -> list:
    records = list(records)
    if records and isinstance(records[0], CamRecord):
        return merge_cam(records)
    return merge_payratio(records)


# -- output -----------------------------------------------------------------

PAYRATIO_COLUMNS = ["doc_id", "cik", "filing_date", "ceo_pay", "median_pay", "ratio_value",
                    "ratio_is_percent", "flags", "extract_index", "entry_index", "ceo_pay_raw",
                    "median_pay_raw", "ratio_raw"]
CAM_COLUMNS = ["doc_id", "cik", "filing_date", "cam_number", "title", "description", "procedure"]


def payratio_row(r: PayRatioRecord, meta: Mapping[str, Mapping[str, str]] | None = None) -> dict:
    m = (meta or {}).get(r.doc_id, {})
    return {"doc_id": r.doc_id, "cik": m.get("cik", ""), "filing_date": m.get("filing_date", ""),
            "ceo_pay": render_decimal(r.ceo_pay), "median_pay": render_decimal(r.median_pay),
            "ratio_value": render_decimal(r.ratio_value),
            "ratio_is_percent": int(r.ratio_is_percent), "flags": ";".join(r.flags),
            "extract_index": r.extract_index, "entry_index": r.entry_index,
            "ceo_pay_raw": r.ceo_pay_raw, "median_pay_raw": r.median_pay_raw,
            "ratio_raw": r.ratio_raw}


def write_payratio_csv(records: Iterable[PayRatioRecord], path: str | os.PathLike,
                       meta: Mapping[str, Mapping[str, str]] | None = None) -> None:
    write_rows(path, PAYRATIO_COLUMNS, [payratio_row(r, meta) for r in records])


def write_cam_csv(records: Iterable[CamRecord], path: str | os.PathLike,
                  meta: Mapping[str, Mapping[str, str]] | None = None) -> None:
    rows = []
    for r in records:
        m = (meta or {}).get(r.doc_id, {})
        rows.append({"doc_id": r.doc_id, "cik": m.get("cik", ""),
                     "filing_date": m.get("filing_date", ""), "cam_number": r.cam_number,
                     "title": r.title, "description": r.description, "procedure": r.procedure})
    write_rows(path, CAM_COLUMNS, rows)


def read_payratio_csv(path: str | os.PathLike) -> list[PayRatioRecord]:
    out = []
    for row in read_rows(path):
        def dec(v: str) -> Decimal | None:
            try:
                return Decimal(v) if v else None
            except InvalidOperation:
                return None
        out.append(PayRatioRecord(
            row["doc_id"], int(row.get("extract_index") or 1), int(row.get("entry_index") or 1),
            row.get("ceo_pay_raw", ""), row.get("median_pay_raw", ""), row.get("ratio_raw", ""),
            dec(row["ceo_pay"]), dec(row["median_pay"]), dec(row["ratio_value"]),
            row.get("ratio_is_percent") == "1",
            tuple(f for f in row.get("flags", "").split(";") if f)))
    return out


def read_cam_csv(path: str | os.PathLike) -> list[CamRecord]:
    return [CamRecord(row["doc_id"], 1, int(row["cam_number"]), int(row["cam_number"]),
                      row["title"] or None, row["description"] or None, row["procedure"] or None)
            for row in read_rows(path)]


@dataclass
class ParseStats:
    responses: int = 0
    records: int = 0
    format_errors: list[str] = field(default_factory=list)
