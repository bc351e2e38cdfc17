"""The text window sent to the model, shared by both extraction tasks."""

from __future__ import annotations

import os
from dataclasses import dataclass
from enum import Enum
from typing import Iterable

from .csvio import read_rows, write_rows


class ExtractMethod(str, Enum):
    HEADING = "Heading"
    MEDIAN_EMPLOYEE = "MedianEmployee"
    CAM_REPORT = "CamReport"
    CAM_ESTIMATE = "CamEstimate"


@dataclass(frozen=True)
class TextExtract:
    doc_id: str
    extract_index: int
    method: ExtractMethod
    span: tuple[int, int]
    text: str
    token_estimate: int = 0

    @property
    def key(self) -> str:
        return member_key(self.doc_id, self.extract_index)


def member_key(doc_id: str, extract_index: int) -> str:
    return f"{doc_id}#{extract_index}"


def split_member_key(key: str) -> tuple[str, int]:
    doc_id, _, idx = key.rpartition("#")
    return doc_id, int(idx)


def strip_extract(text: str, start: int, end: int) -> tuple[str, int, int]:
    """Strip surrounding whitespace while keeping the span aligned with the text."""
    lead = len(text) - len(text.lstrip())
    trail = len(text) - len(text.rstrip())
    stripped = text.strip()
    if not stripped:
        return "", start, start
    return stripped, start + lead, end - trail


EXTRACT_COLUMNS = ["doc_id", "extract_index", "method", "start_char", "end_char",
                   "token_estimate", "text"]


def extract_row(e: TextExtract) -> dict:
    return {"doc_id": e.doc_id, "extract_index": e.extract_index, "method": e.method.value,
            "start_char": e.span[0], "end_char": e.span[1],
            "token_estimate": e.token_estimate, "text": e.text}


def write_extracts(extracts: Iterable[TextExtract], path: str | os.PathLike,
                   extra: dict[str, dict] | None = None) -> None:
    """Write extracts; ``extra`` maps extract key -> additional column values."""
    extra = extra or {}
    extra_cols: list[str] = []
    for values in extra.values():
        for c in values:
            if c not in extra_cols:
                extra_cols.append(c)
    rows = []
    for e in extracts:
        row = extract_row(e)
        row.update(extra.get(e.key, {}))
        rows.append(row)
    cols = EXTRACT_COLUMNS[:-1] + extra_cols + ["text"]
    write_rows(path, cols, rows)


def read_extracts(path: str | os.PathLike) -> list[TextExtract]:
    out = []
    for row in read_rows(path):
        out.append(TextExtract(
            doc_id=row["doc_id"],
            extract_index=int(row["extract_index"]),
            method=ExtractMethod(row["method"]),
            span=(int(row["start_char"]), int(row["end_char"])),
            text=row["text"],
            token_estimate=int(row.get("token_estimate") or 0),
        ))
    return out
