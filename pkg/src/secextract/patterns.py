"""Regex configuration for section windowing.

Patterns live in a JSON file (``data/patterns.json`` by default) so they can
be tuned without code changes. Each named entry is a list of regexes; a
location matches the entry if any of its regexes matches there.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources


@dataclass(frozen=True)
class PatternGroup:
    name: str
    regexes: tuple[re.Pattern, ...]

    def starts(self, text: str) -> list[int]:
        """Sorted, de-duplicated start offsets of every match."""
        found = {m.start() for rx in self.regexes for m in rx.finditer(text)}
        return sorted(found)

    def search(self, text: str) -> bool:
        return any(rx.search(text) for rx in self.regexes)


class PatternSet:
    def __init__(self, config: dict) -> None:
        self.config = config
        self.groups: dict[str, PatternGroup] = {}
        for task, entries in config.items():
            for name, regexes in entries.items():
                if isinstance(regexes, str):
                    regexes = [regexes]
                key = f"{task}.{name}"
                self.groups[key] = PatternGroup(key, tuple(re.compile(r) for r in regexes))

    def __getitem__(self, key: str) -> PatternGroup:
        try:
            return self.groups[key]
        except KeyError:
            raise KeyError(f"pattern group {key!r} missing from pattern config") from None


@lru_cache(maxsize=1)
def default_patterns() -> PatternSet:
    text = resources.files("secextract").joinpath("data/patterns.json").read_text(encoding="utf-8")
    return PatternSet(json.loads(text))


def load_patterns(path: str | os.PathLike | None = None) -> PatternSet:
    """Default patterns, with any groups from ``path`` overriding them."""
    if path is None:
        return default_patterns()
    with open(path, encoding="utf-8") as fh:
        override = json.load(fh)
    merged = {task: dict(entries) for task, entries in default_patterns().config.items()}
    for task, entries in override.items():
        merged.setdefault(task, {}).update(entries)
    return PatternSet(merged)
