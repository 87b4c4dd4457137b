"""Article intake and the rolling candidate pool.

Articles arrive as JSON lines, either from a local file or fetched from
a remote feed. Each record is validated, normalized and upserted; the
candidate pool for a given day is every article published within the
configured window before that day.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from datetime import date

import httpx

from .models import Article
from .storage import Store

log = logging.getLogger(__name__)

REQUIRED_FIELDS = ("article_id", "title", "abstract", "published")


@dataclass
class IngestReport:
    accepted: int = 0
    updated: int = 0
    rejected: list[dict] = field(default_factory=list)

    def reject(self, line_no: int, reason: str) -> None:
        self.rejected.append({"line": line_no, "reason": reason})


def parse_article(raw: dict) -> Article:
    """Build an Article from a raw feed record; raises ValueError."""
    missing = [f for f in REQUIRED_FIELDS if not raw.get(f)]
    if missing:
        raise ValueError("missing fields: " + ", ".join(missing))
    try:
        published = date.fromisoformat(str(raw["published"]))
    except ValueError:
        raise ValueError(f"bad published date: {raw['published']!r}")
    authors = raw.get("authors") or []
    categories = raw.get("categories") or []
    if not isinstance(authors, list) or not all(isinstance(a, str) for a in authors):
        raise ValueError("authors must be a list of strings")
    if not isinstance(categories, list) or not all(isinstance(c, str) for c in categories):
        raise ValueError("categories must be a list of strings")
    return Article(
        article_id=str(raw["article_id"]).strip(),
        title=str(raw["title"]).strip(),
        abstract=str(raw["abstract"]).strip(),
        authors=[a.strip() for a in authors],
        categories=[c.strip() for c in categories],
        published_date=published,
    )


def ingest_records(store: Store, lines: list[str], source: str = "file") -> IngestReport:
    """Validate and upsert feed records; malformed lines are reported, not fatal."""
    report = IngestReport()
    for line_no, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            report.reject(line_no, f"invalid JSON: {exc.msg}")
            continue
        if not isinstance(raw, dict):
            report.reject(line_no, "record is not an object")
            continue
        try:
            article = parse_article(raw)
        except ValueError as exc:
            report.reject(line_no, str(exc))
            continue
        existed = store.get_article(article.article_id) is not None
        store.upsert_article(article, source=source)
        if existed:
            report.updated += 1
        else:
            report.accepted += 1
    if report.rejected:
        log.warning("ingest: rejected %d of %d records", len(report.rejected), len(lines))
    return report


def ingest_file(store: Store, path: str) -> IngestReport:
    with open(path, encoding="utf-8") as fh:
        return ingest_records(store, fh.readlines(), source="file")


def ingest_remote(store: Store, url: str, timeout: float = 30.0) -> IngestReport:
    """Fetch a JSONL feed over HTTP and ingest it."""
    resp = httpx.get(url, timeout=timeout)
    resp.raise_for_status()
    return ingest_records(store, resp.text.splitlines(), source="remote")


def candidate_pool(store: Store, on_date: date, window_days: int) -> list[str]:
    """Article ids eligible for recommendation on on_date.

    An article qualifies while (on_date - published_date) is in
    [0, window_days) days; future-dated articles never qualify.
    """
    return store.article_ids_in_window(on_date, window_days)
