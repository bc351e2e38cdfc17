"""EDGAR index retrieval, filing-page resolution and a local filing cache.

The quarterly full-index files (``master.idx`` pipe format, or the
fixed-width ``form.idx``/``company.idx``) enumerate every filing. Each row
points at a filing index page; the primary HTML document is picked off that
page and downloaded into ``<cache_dir>/<cik>/<accession>.htm``.

All traffic to a host goes through :class:`HostRateLimiter` and carries the
configured ``User-Agent`` (SEC fair-access policy asks for both).
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import os
import re
import threading
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import date
from html.parser import HTMLParser
from pathlib import Path
from typing import Iterable, Sequence
from urllib.parse import urljoin, urlparse

import requests

from .clock import SystemClock

logger = logging.getLogger(__name__)

SEC_BASE_URL = "https://www.sec.gov"
ACCESSION_RE = re.compile(r"^\d{10}-\d{2}-\d{6}$")

FORM_VARIANTS = {
    "DEF 14A": ("DEF 14A", "DEFM14A", "DEFC14A"),
    "10-K": ("10-K", "10-K405", "10-KT"),
}

MANIFEST_COLUMNS = ["cik", "accession", "form_type", "filing_date", "company",
                    "index_url", "document_url", "cache_path", "status"]


class EdgarFetchError(RuntimeError):
    """An HTTP request to EDGAR failed."""

    def __init__(self, url: str, message: str, retryable: bool = True) -> None:
        super().__init__(f"{message}: {url}")
        self.url = url
        self.retryable = retryable


def normalize_accession(value: str) -> str:
    """Return the dashed ``0001234567-YY-NNNNNN`` form of an accession number."""
    digits = re.sub(r"\D", "", value)
    if len(digits) != 18:
        raise ValueError(f"accession number must have 18 digits: {value!r}")
    return f"{digits[:10]}-{digits[10:12]}-{digits[12:]}"


@dataclass(frozen=True)
class FilingRecord:
    cik: int
    accession: str
    form_type: str
    filing_date: date
    index_url: str
    company: str = ""
    document_url: str | None = None
    cache_path: str | None = None
    status: str = "indexed"

    def __post_init__(self) -> None:
        if self.cik <= 0:
            raise ValueError(f"cik must be positive, got {self.cik}")
        acc = normalize_accession(self.accession)
        if acc != self.accession:
            object.__setattr__(self, "accession", acc)

    @property
    def doc_id(self) -> str:
        return f"{self.cik}_{self.accession}"

    @property
    def year(self) -> int:
        return self.filing_date.year


def filing_index_url(cik: int, accession: str, base_url: str = SEC_BASE_URL) -> str:
    acc = normalize_accession(accession)
    return f"{base_url}/Archives/edgar/data/{cik}/{acc.replace('-', '')}/{acc}-index.htm"


def expand_forms(form_filter: Iterable[str]) -> set[str]:
    """Map requested form names to the set of index form types they accept."""
    out: set[str] = set()
    for form in form_filter:
        key = " ".join(form.upper().split())
        out.update(FORM_VARIANTS.get(key, (key,)))
    return out


def quarter_range(start: str, end: str) -> list[tuple[int, int]]:
    """``quarter_range("2021Q3", "2022Q1")`` -> [(2021, 3), (2021, 4), (2022, 1)]."""
    def parse(s: str) -> tuple[int, int]:
        m = re.fullmatch(r"\s*(\d{4})\s*-?\s*[Qq](?:TR)?([1-4])\s*", s)
        if not m:
            raise ValueError(f"bad quarter {s!r}; expected e.g. 2021Q3")
        return int(m.group(1)), int(m.group(2))

    y, q = parse(start)
    y_end, q_end = parse(end)
    out = []
    while (y, q) <= (y_end, q_end):
        out.append((y, q))
        y, q = (y + 1, 1) if q == 4 else (y, q + 1)
    return out


# --------------------------------------------------------------------------
# rate limiting / HTTP


class HostRateLimiter:
    """Per-host request cap shared by all worker threads.

    Two rules hold together: consecutive requests to one host are at least
    ``1 / max_per_second`` apart, and no half-open one-second window holds
    more than ``max_per_second`` requests.
    """

    def __init__(self, max_per_second: float = 10.0, clock=None) -> None:
        if max_per_second <= 0:
            raise ValueError("max_per_second must be positive")
        self.max_per_second = max_per_second
        self.clock = clock or SystemClock()
        self._lock = threading.Lock()
        self._history: dict[str, deque[float]] = {}
        self.log: list[tuple[str, float]] = []

    def acquire(self, host: str) -> float:
        interval = 1.0 / self.max_per_second
        while True:
            with self._lock:
                now = self.clock.now()
                hist = self._history.setdefault(host, deque())
                while hist and now - hist[0] >= 1.0:
                    hist.popleft()
                waits = []
                if hist and now - hist[-1] < interval:
                    waits.append(hist[-1] + interval - now)
                if len(hist) >= self.max_per_second:
                    waits.append(hist[0] + 1.0 - now)
                if not waits:
                    hist.append(now)
                    self.log.append((host, now))
                    return now
                wait = max(max(waits), 1e-6)
            self.clock.sleep(wait)


class EdgarClient:
    """HTTP access to EDGAR with identification header, rate cap and retries."""

    def __init__(self, user_agent: str, base_url: str = SEC_BASE_URL,
                 max_per_second: float = 10.0, clock=None,
                 session: requests.Session | None = None,
                 max_retries: int = 3, timeout: float = 30.0) -> None:
        if not user_agent or not user_agent.strip():
            raise ValueError("EDGAR requires an identifying User-Agent (name and email)")
        self.base_url = base_url.rstrip("/")
        self.clock = clock or SystemClock()
        self.limiter = HostRateLimiter(max_per_second, self.clock)
        self.session = session or requests.Session()
        self.session.headers.update({"User-Agent": user_agent,
                                     "Accept-Encoding": "gzip, deflate"})
        self.max_retries = max_retries
        self.timeout = timeout
        self.request_count = 0

    def get(self, url: str) -> requests.Response:
        host = urlparse(url).netloc
        last_error = "request failed"
        for attempt in range(1, self.max_retries + 1):
            self.limiter.acquire(host)
            self.request_count += 1
            try:
                resp = self.session.get(url, timeout=self.timeout)
            except requests.RequestException as exc:
                last_error = f"network error ({exc.__class__.__name__})"
                logger.warning("GET %s failed on attempt %d: %s", url, attempt, exc)
            else:
                if resp.status_code != 429 and resp.status_code < 500:
                    return resp
                last_error = f"HTTP {resp.status_code}"
                logger.warning("GET %s returned %s on attempt %d", url, resp.status_code, attempt)
            self.clock.sleep(min(2.0 ** attempt, 30.0))
        raise EdgarFetchError(url, last_error, retryable=True)

    def get_text(self, url: str) -> str:
        resp = self.get(url)
        if resp.status_code >= 400:
            raise EdgarFetchError(url, f"HTTP {resp.status_code}", retryable=False)
        return resp.content.decode("utf-8", errors="replace")


# --------------------------------------------------------------------------
# index files

_FILENAME_RE = re.compile(r"edgar/data/(\d+)/(\d{10}-\d{2}-\d{6})\.txt$")


def _make_record(cik: str, company: str, form: str, filed: str, filename: str,
                 base_url: str) -> FilingRecord:
    m = _FILENAME_RE.search(filename.strip())
    if not m:
        raise ValueError(f"unrecognised filename {filename!r}")
    cik_i = int(cik)
    return FilingRecord(
        cik=cik_i,
        accession=m.group(2),
        form_type=" ".join(form.split()),
        filing_date=date.fromisoformat(filed.strip()),
        index_url=filing_index_url(cik_i, m.group(2), base_url),
        company=" ".join(company.split()),
    )


def parse_index(content: str, form_filter: Iterable[str],
                base_url: str = SEC_BASE_URL) -> tuple[list[FilingRecord], int]:
    """Parse one quarterly index file.

    Returns ``(records, skipped)`` where ``skipped`` counts data lines that
    could not be parsed. Both the pipe-delimited ``master.idx`` layout and
    the fixed-width ``form.idx``/``company.idx`` layouts are accepted.
    """
    forms = expand_forms(form_filter)
    lines = content.splitlines()
    sep = next((i for i, ln in enumerate(lines) if ln.strip() and set(ln.strip()) == {"-"}), None)
    if sep is None:
        return [], 0
    header_lines = [ln for ln in lines[:sep] if ln.strip()]
    header = header_lines[-1] if header_lines else ""
    records: list[FilingRecord] = []
    skipped = 0

    if "|" in header:
        for line in lines[sep + 1:]:
            if not line.strip():
                continue
            parts = line.split("|")
            if len(parts) != 5:
                skipped += 1
                continue
            cik, company, form, filed, filename = parts
            if " ".join(form.split()) not in forms:
                continue
            try:
                records.append(_make_record(cik, company, form, filed, filename, base_url))
            except ValueError:
                skipped += 1
        return records, skipped

    cols = {}
    for name in ("Form Type", "Company Name", "CIK", "Date Filed", "File Name"):
        pos = header.find(name)
        if pos < 0:
            raise ValueError(f"index header lacks column {name!r}")
        cols[name] = pos
    order = sorted(cols.items(), key=lambda kv: kv[1])
    # Values may overrun their column, so parse from the right-hand side:
    # file name, date and CIK never contain spaces.
    tail_re = re.compile(r"\s(\d+)\s+(\d{4}-\d{2}-\d{2})\s+(\S+)\s*$")
    form_first = order[0][0] == "Form Type"
    for line in lines[sep + 1:]:
        if not line.strip():
            continue
        m = tail_re.search(line)
        if not m:
            skipped += 1
            continue
        head = line[:m.start()].rstrip()
        split_at = cols["Company Name"] if form_first else cols["Form Type"]
        left, right = head[:split_at].strip(), head[split_at:].strip()
        form, company = (left, right) if form_first else (right, left)
        if not form:
            skipped += 1
            continue
        if " ".join(form.split()) not in forms:
            continue
        try:
            records.append(_make_record(m.group(1), company, form, m.group(2), m.group(3), base_url))
        except ValueError:
            skipped += 1
    return records, skipped


def sort_records(records: Iterable[FilingRecord]) -> list[FilingRecord]:
    unique = {r.accession: r for r in records}
    return sorted(unique.values(), key=lambda r: (r.filing_date, r.cik, r.accession))


def fetch_index(year_quarter_range: Sequence[tuple[int, int]], form_filter: Iterable[str],
                client: EdgarClient, index_name: str = "master.idx",
                stats: dict | None = None) -> list[FilingRecord]:
    """Download quarterly index files and return matching filings.

    Output is ordered by (filing_date, cik). When ``stats`` is given it
    receives ``parse_warnings`` (malformed lines skipped) and ``index_files``.
    """
    if not year_quarter_range:
        raise ValueError("year_quarter_range must not be empty")
    form_filter = list(form_filter)
    found: list[FilingRecord] = []
    warnings = 0
    for year, quarter in year_quarter_range:
        url = f"{client.base_url}/Archives/edgar/full-index/{year}/QTR{quarter}/{index_name}"
        text = client.get_text(url)
        recs, skipped = parse_index(text, form_filter, client.base_url)
        if skipped:
            logger.warning("%s: skipped %d malformed index lines", url, skipped)
        found.extend(recs)
        warnings += skipped
    if stats is not None:
        stats["parse_warnings"] = stats.get("parse_warnings", 0) + warnings
        stats["index_files"] = stats.get("index_files", 0) + len(year_quarter_range)
    return sort_records(found)


# --------------------------------------------------------------------------
# filing index page -> primary document

class _TableRows(HTMLParser):
    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.rows: list[list[tuple[str, str | None]]] = []
        self._row: list[tuple[str, str | None]] | None = None
        self._cell: list[str] | None = None
        self._href: str | None = None

    def handle_starttag(self, tag, attrs):
        if tag == "tr":
            self._row = []
        elif tag in ("td", "th") and self._row is not None:
            self._cell, self._href = [], None
        elif tag == "a" and self._cell is not None and self._href is None:
            self._href = dict(attrs).get("href")

    def handle_endtag(self, tag):
        if tag in ("td", "th") and self._row is not None and self._cell is not None:
            self._row.append((" ".join("".join(self._cell).split()), self._href))
            self._cell = None
        elif tag == "tr" and self._row is not None:
            if self._row:
                self.rows.append(self._row)
            self._row = None

    def handle_data(self, data):
        if self._cell is not None:
            self._cell.append(data)


def _clean_doc_href(href: str) -> str:
    # inline XBRL viewer links look like /ix?doc=/Archives/...
    m = re.search(r"[?&]doc=([^&]+)", href)
    return m.group(1) if m else href


def pick_primary_document(page_html: str, form_type: str, page_url: str) -> str | None:
    """Choose the primary HTML document listed on a filing index page."""
    parser = _TableRows()
    parser.feed(page_html)
    header: list[str] | None = None
    candidates = []
    for row in parser.rows:
        texts = [t.lower() for t, _ in row]
        if "document" in texts and "type" in texts:
            header = texts
            continue
        if header is None or len(row) != len(header):
            continue
        cells = dict(zip(header, row))
        doc_text, href = cells.get("document", ("", None))
        if not href:
            continue
        href = _clean_doc_href(href)
        if not re.search(r"\.html?$", href.split("?")[0], re.I):
            continue
        typ = " ".join(cells.get("type", ("", None))[0].upper().split())
        seq_text = cells.get("seq", ("", None))[0]
        seq = int(seq_text) if seq_text.isdigit() else 10_000
        if typ == " ".join(form_type.upper().split()):
            rank = 0
        elif typ.startswith(("EX-", "GRAPHIC", "ZIP", "XML")):
            continue
        else:
            rank = 1
        candidates.append((rank, seq, len(candidates), urljoin(page_url, href)))
    if not candidates:
        return None
    return min(candidates)[3]


def resolve_document_url(record: FilingRecord, client: EdgarClient | None = None,
                         page_html: str | None = None) -> FilingRecord:
    """Fill in ``document_url``; status becomes ``unresolved`` if nothing fits."""
    if page_html is None:
        if client is None:
            raise ValueError("need either a client or the filing page HTML")
        page_html = client.get_text(record.index_url)
    url = pick_primary_document(page_html, record.form_type, record.index_url)
    if url is None:
        logger.warning("no primary document for %s (%s)", record.doc_id, record.index_url)
        return dataclasses.replace(record, status="unresolved")
    return dataclasses.replace(record, document_url=url, status="resolved")


# --------------------------------------------------------------------------
# download / cache

def cache_path_for(record: FilingRecord, cache_dir: str | os.PathLike) -> Path:
    return Path(cache_dir) / str(record.cik) / f"{record.accession}.htm"


def download_filing(record: FilingRecord, cache_dir: str | os.PathLike,
                    client: EdgarClient | None = None) -> FilingRecord:
    """Fetch the primary document into the cache unless it is already there."""
    path = cache_path_for(record, cache_dir)
    if path.exists():
        return dataclasses.replace(record, cache_path=str(path), status="downloaded")
    if not record.document_url:
        raise ValueError(f"{record.doc_id}: document_url not resolved")
    if client is None:
        raise ValueError("client required to download uncached filings")
    try:
        resp = client.get(record.document_url)
    except EdgarFetchError as exc:
        logger.error("download failed for %s: %s", record.doc_id, exc)
        return dataclasses.replace(record, status="failed")
    if resp.status_code >= 400:
        logger.error("download failed for %s: HTTP %s", record.doc_id, resp.status_code)
        return dataclasses.replace(record, status="failed")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".part")
        tmp.write_bytes(resp.content)
        os.replace(tmp, path)
    except OSError as exc:
        raise OSError(f"cannot write filing cache file {path}: {exc}") from exc
    return dataclasses.replace(record, cache_path=str(path), status="downloaded")


def download_filings(records: Sequence[FilingRecord], cache_dir: str | os.PathLike,
                     client: EdgarClient | None = None, workers: int = 4) -> list[FilingRecord]:
    """Download many filings concurrently; order of the result matches input."""
    if workers <= 1 or len(records) <= 1:
        return [download_filing(r, cache_dir, client) for r in records]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda r: download_filing(r, cache_dir, client), records))


# --------------------------------------------------------------------------
# manifest CSV

def write_manifest(records: Iterable[FilingRecord], path: str | os.PathLike) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(MANIFEST_COLUMNS)
        for r in records:
            w.writerow([r.cik, r.accession, r.form_type, r.filing_date.isoformat(), r.company,
                        r.index_url, r.document_url or "", r.cache_path or "", r.status])


def read_manifest(path: str | os.PathLike) -> list[FilingRecord]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            cik = int(row["cik"])
            out.append(FilingRecord(
                cik=cik,
                accession=row["accession"],
                form_type=row["form_type"],
                filing_date=date.fromisoformat(row["filing_date"]),
                index_url=row.get("index_url") or filing_index_url(cik, row["accession"]),
                company=row.get("company", ""),
                document_url=row.get("document_url") or None,
                cache_path=row.get("cache_path") or None,
                status=row.get("status") or "indexed",
            ))
    return out
