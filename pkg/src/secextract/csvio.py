"""Small CSV helpers shared by the pipeline stages."""

from __future__ import annotations

import csv
import os
import sys
from pathlib import Path
from typing import Iterable, Mapping, Sequence

# extracts and raw model replies can exceed the default 128 KiB field cap
csv.field_size_limit(min(sys.maxsize, 2**31 - 1))


def write_rows(path: str | os.PathLike, columns: Sequence[str],
               rows: Iterable[Mapping | Sequence]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            if isinstance(row, Mapping):
                row = ["" if row.get(c) is None else row.get(c) for c in columns]
            w.writerow(row)
    os.replace(tmp, path)


def read_rows(path: str | os.PathLike) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
