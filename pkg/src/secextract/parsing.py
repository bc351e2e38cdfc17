"""HTML filing -> plain text, plus removal of page artefacts.

Block-level elements become line breaks, table cells on one row stay on one
line separated by a space, and horizontal whitespace is collapsed. Script,
style and hidden inline-XBRL header content is dropped.
"""

from __future__ import annotations

import csv
import html
import logging
import os
import re
from dataclasses import dataclass, field
from html.parser import HTMLParser
from pathlib import Path
from typing import Iterable

logger = logging.getLogger(__name__)

_SKIP_TAGS = {"script", "style", "head", "title", "noscript", "template", "ix:header", "xml"}
_PARA_TAGS = {"p", "h1", "h2", "h3", "h4", "h5", "h6", "table", "ul", "ol",
              "blockquote", "pre", "section", "article", "header", "footer", "center",
              "address", "figure", "form", "fieldset", "dl"}
_LINE_TAGS = {"div", "br", "tr", "li", "dt", "dd", "hr", "caption", "body", "html",
              "page", "document"}
_CELL_TAGS = {"td", "th"}

_HSPACE_RE = re.compile(r"[ \t\f\v\r\xa0\u2000-\u200a\u202f\u205f\u3000]+")
_TAG_RE = re.compile(r"<\s*/?\s*[A-Za-z][A-Za-z0-9:_-]*[^>]*>")

TOC_LINE_RE = re.compile(r"^\[?\s*table\s+of\s+contents\s*\]?(?:\(.*\))?$", re.I)
PAGE_NUMBER_RE = re.compile(r"^(?:F-)?\d{1,3}$")


@dataclass
class ParsedDocument:
    doc_id: str
    text: str
    warnings: list[str] = field(default_factory=list)

    @property
    def char_count(self) -> int:
        return len(self.text)


class _TextExtractor(HTMLParser):
    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.parts: list[str] = []
        self._skip_stack: list[str] = []

    def handle_starttag(self, tag, attrs):
        if tag in _SKIP_TAGS:
            self._skip_stack.append(tag)
            return
        if self._skip_stack:
            return
        self._boundary(tag)

    def handle_startendtag(self, tag, attrs):
        if not self._skip_stack and tag not in _SKIP_TAGS:
            self._boundary(tag)

    def handle_endtag(self, tag):
        if self._skip_stack:
            if tag == self._skip_stack[-1]:
                self._skip_stack.pop()
            elif tag in self._skip_stack:
                while self._skip_stack and self._skip_stack.pop() != tag:
                    pass
            return
        self._boundary(tag)

    def _boundary(self, tag):
        if tag in _PARA_TAGS:
            self.parts.append("\n\n")
        elif tag in _LINE_TAGS:
            self.parts.append("\n")
        elif tag in _CELL_TAGS:
            self.parts.append("\t")

    def handle_data(self, data):
        if not self._skip_stack:
            # source newlines inside running text are not line breaks in HTML
            self.parts.append(re.sub(r"[\r\n]+", " ", data))


def _decode(raw: bytes | str, warnings: list[str]) -> str:
    if isinstance(raw, str):
        return raw
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError:
        warnings.append("input is not valid UTF-8; undecodable bytes replaced")
        return raw.decode("utf-8", errors="replace")


def normalize_layout(text: str) -> str:
    """Collapse horizontal whitespace, strip lines, allow at most one blank line."""
    out: list[str] = []
    blank = False
    for line in text.split("\n"):
        line = _HSPACE_RE.sub(" ", line).strip()
        if not line:
            if out and not blank:
                out.append("")
            blank = True
            continue
        blank = False
        out.append(line)
    while out and not out[-1]:
        out.pop()
    return "\n".join(out)


def looks_like_html(text: str) -> bool:
    return bool(_TAG_RE.search(text[:20000]))


def html_to_text(raw_html: bytes | str, doc_id: str = "") -> ParsedDocument:
    warnings: list[str] = []
    text = _decode(raw_html, warnings)
    if not text.strip():
        warnings.append("empty input")
        return ParsedDocument(doc_id, "", warnings)
    if looks_like_html(text):
        parser = _TextExtractor()
        parser.feed(text)
        parser.close()
        text = "".join(parser.parts)
    else:
        text = html.unescape(text.replace("\r\n", "\n").replace("\r", "\n"))
    text = normalize_layout(text.replace("\t", " "))
    if not text:
        warnings.append("no text content after removing markup")
    return ParsedDocument(doc_id, text, warnings)


def _is_artifact(line: str) -> bool:
    s = line.strip()
    return bool(TOC_LINE_RE.match(s) or PAGE_NUMBER_RE.match(s))


def cleanup_text(text: str) -> str:
    """Drop table-of-contents marker lines and bare page numbers.

    A blank-line run that had a removed line inside it, or that is longer
    than two lines, becomes a single blank line. Everything else is returned
    untouched.
    """
    out: list[str] = []
    run: list[str] = []
    removed = False

    def flush() -> None:
        if run:
            out.extend(run if len(run) <= 2 and not removed else [""])

    for ln in text.split("\n"):
        if _is_artifact(ln):
            removed = True
        elif ln.strip():
            flush()
            run, removed = [], False
            out.append(ln)
        else:
            run.append(ln)
    flush()
    return "\n".join(out)


def parse_file(path: str | os.PathLike, doc_id: str) -> ParsedDocument:
    doc = html_to_text(Path(path).read_bytes(), doc_id)
    doc.text = cleanup_text(doc.text)
    return doc


def write_parsed(docs: Iterable[ParsedDocument], out_dir: str | os.PathLike,
                 manifest_path: str | os.PathLike) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(manifest_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["doc_id", "char_count", "warnings"])
        for d in docs:
            (out_dir / f"{d.doc_id}.txt").write_text(d.text, encoding="utf-8")
            w.writerow([d.doc_id, d.char_count, "; ".join(d.warnings)])


def read_parsed(out_dir: str | os.PathLike, doc_id: str) -> ParsedDocument:
    text = (Path(out_dir) / f"{doc_id}.txt").read_text(encoding="utf-8")
    return ParsedDocument(doc_id, text)
