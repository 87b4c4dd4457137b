"""Embedded transactional store for all domain records.

Single SQLite database behind a narrow interface: profiles, articles,
systems, per-(user,system) recommendation stacks, impressions with slot
attribution, the deduplicated interaction log, feedback, library,
sessions, tracking tokens, the digest send ledger, and the job ledger.

All mutating operations run inside transactions guarded by a process
lock, so concurrent API handlers are safe; batch jobs serialize through
the job ledger.
"""

from __future__ import annotations

import itertools
import json
import sqlite3
import threading
import uuid
from contextlib import contextmanager
from datetime import date, datetime, timedelta, timezone
from functools import lru_cache

from .models import (
    Article,
    ExperimentalSystem,
    FeedbackRecord,
    Impression,
    InteractionEvent,
    Recommendation,
    Slot,
    TopicRecommendation,
    UserProfile,
    topic_key,
)

TOMBSTONE_USER = "[deleted]"


class StorageError(Exception):
    pass


class UnknownRecord(StorageError):
    pass


class DuplicateRecord(StorageError):
    pass


@lru_cache(maxsize=4096)
def _iso(dt: datetime) -> str:
    # Cached: bulk writes stamp thousands of rows with the same instant.
    return dt.astimezone(timezone.utc).isoformat()


def _parse_dt(text: str) -> datetime:
    return datetime.fromisoformat(text)


_SCHEMA = """
CREATE TABLE IF NOT EXISTS users (
    user_id TEXT PRIMARY KEY,
    email TEXT NOT NULL,
    name TEXT NOT NULL,
    digest_frequency TEXT NOT NULL,
    weekly_digest_day INTEGER,
    external_links TEXT NOT NULL,
    registered_at TEXT NOT NULL,
    active INTEGER NOT NULL DEFAULT 1,
    password_salt TEXT,
    password_hash TEXT
);
CREATE UNIQUE INDEX IF NOT EXISTS users_active_email ON users(email) WHERE active = 1;

CREATE TABLE IF NOT EXISTS user_topics (
    user_id TEXT NOT NULL,
    topic_key TEXT NOT NULL,
    display TEXT NOT NULL,
    position INTEGER NOT NULL,
    PRIMARY KEY (user_id, topic_key)
);

CREATE TABLE IF NOT EXISTS articles (
    article_id TEXT PRIMARY KEY,
    title TEXT NOT NULL,
    abstract TEXT NOT NULL,
    authors TEXT NOT NULL,
    categories TEXT NOT NULL,
    published TEXT NOT NULL,
    source TEXT NOT NULL DEFAULT 'file'
);
CREATE INDEX IF NOT EXISTS articles_published ON articles(published);

CREATE TABLE IF NOT EXISTS systems (
    system_id TEXT PRIMARY KEY,
    api_key TEXT NOT NULL UNIQUE,
    name TEXT NOT NULL UNIQUE,
    active INTEGER NOT NULL DEFAULT 1,
    impression_count INTEGER NOT NULL DEFAULT 0
);

CREATE TABLE IF NOT EXISTS article_stacks (
    user_id TEXT NOT NULL,
    system_id TEXT NOT NULL,
    article_id TEXT NOT NULL,
    score REAL NOT NULL,
    explanation TEXT NOT NULL,
    submitted_at TEXT NOT NULL,
    PRIMARY KEY (user_id, system_id, article_id)
);
CREATE INDEX IF NOT EXISTS article_stacks_user ON article_stacks(user_id);

CREATE TABLE IF NOT EXISTS topic_stacks (
    user_id TEXT NOT NULL,
    system_id TEXT NOT NULL,
    topic_key TEXT NOT NULL,
    display TEXT NOT NULL,
    score REAL NOT NULL,
    submitted_at TEXT NOT NULL,
    PRIMARY KEY (user_id, system_id, topic_key)
);

CREATE TABLE IF NOT EXISTS impressions (
    impression_id TEXT PRIMARY KEY,
    user_id TEXT NOT NULL,
    date TEXT NOT NULL,
    kind TEXT NOT NULL,
    slots TEXT NOT NULL,
    selected_systems TEXT NOT NULL,
    rng_seed INTEGER NOT NULL DEFAULT 0
);
CREATE INDEX IF NOT EXISTS impressions_user ON impressions(user_id, kind, date);
CREATE INDEX IF NOT EXISTS impressions_date ON impressions(date, kind);

CREATE TABLE IF NOT EXISTS shown_items (
    user_id TEXT NOT NULL,
    kind TEXT NOT NULL,
    item_id TEXT NOT NULL,
    PRIMARY KEY (user_id, kind, item_id)
);

CREATE TABLE IF NOT EXISTS events (
    event_id TEXT PRIMARY KEY,
    impression_id TEXT NOT NULL,
    user_id TEXT NOT NULL,
    item_id TEXT NOT NULL,
    type TEXT NOT NULL,
    occurred_at TEXT NOT NULL,
    UNIQUE (impression_id, item_id, type)
);
CREATE INDEX IF NOT EXISTS events_impression ON events(impression_id);
CREATE INDEX IF NOT EXISTS events_user ON events(user_id);

CREATE TABLE IF NOT EXISTS feedback (
    feedback_id INTEGER PRIMARY KEY AUTOINCREMENT,
    user_id TEXT NOT NULL,
    kind TEXT NOT NULL,
    article_id TEXT,
    relevance INTEGER,
    explanation_satisfaction INTEGER,
    explanation_persuasiveness INTEGER,
    explanation_transparency INTEGER,
    explanation_scrutability INTEGER,
    free_text TEXT NOT NULL DEFAULT '',
    submitted_at TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS feedback_user ON feedback(user_id);

CREATE TABLE IF NOT EXISTS library (
    user_id TEXT NOT NULL,
    article_id TEXT NOT NULL,
    saved_at TEXT NOT NULL,
    PRIMARY KEY (user_id, article_id)
);

CREATE TABLE IF NOT EXISTS rejected_topics (
    user_id TEXT NOT NULL,
    topic_key TEXT NOT NULL,
    PRIMARY KEY (user_id, topic_key)
);

CREATE TABLE IF NOT EXISTS sessions (
    token TEXT PRIMARY KEY,
    user_id TEXT NOT NULL,
    expires_at TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS sessions_user ON sessions(user_id);

CREATE TABLE IF NOT EXISTS tracking_tokens (
    token TEXT PRIMARY KEY,
    kind TEXT NOT NULL,
    user_id TEXT NOT NULL,
    impression_id TEXT,
    item_id TEXT,
    digest_date TEXT
);
CREATE INDEX IF NOT EXISTS tracking_user ON tracking_tokens(user_id);

CREATE TABLE IF NOT EXISTS digest_log (
    user_id TEXT NOT NULL,
    date TEXT NOT NULL,
    pixel_token TEXT NOT NULL,
    items TEXT NOT NULL,
    PRIMARY KEY (user_id, date)
);

CREATE TABLE IF NOT EXISTS job_ledger (
    entry_id INTEGER PRIMARY KEY AUTOINCREMENT,
    job TEXT NOT NULL,
    date TEXT NOT NULL,
    started_at TEXT NOT NULL,
    finished_at TEXT,
    outcome TEXT
);
"""


class Store:
    def __init__(self, path: str = ":memory:"):
        self.path = path
        self._con = sqlite3.connect(path, check_same_thread=False)
        self._con.row_factory = sqlite3.Row
        self._con.isolation_level = None  # explicit BEGIN/COMMIT
        self._lock = threading.RLock()
        self._tx_depth = 0
        # Read-through caches. Article rows are immutable between ingests;
        # impression rows are append-only apart from account deletion,
        # which clears the whole cache. Both are re-read constantly by
        # feed rendering and reward evaluation.
        self._article_cache: dict[str, Article] = {}
        self._impression_cache: dict[str, Impression] = {}
        # Sessions are checked on every authenticated request; expiry is
        # still compared per lookup, only the row fetch is skipped.
        self._session_cache: dict[str, tuple[str, datetime]] = {}
        with self._lock:
            if path != ":memory:":
                self._con.execute("PRAGMA journal_mode=WAL")
                self._con.execute("PRAGMA synchronous=NORMAL")
            self._con.executescript(_SCHEMA)

    def close(self) -> None:
        self._con.close()

    @contextmanager
    def tx(self):
        """Transaction scope; nests by joining the outermost transaction."""
        with self._lock:
            outer = self._tx_depth == 0
            if outer:
                self._con.execute("BEGIN IMMEDIATE")
            self._tx_depth += 1
            try:
                yield self._con
            except BaseException:
                self._tx_depth -= 1
                if outer:
                    self._con.execute("ROLLBACK")
                raise
            else:
                self._tx_depth -= 1
                if outer:
                    self._con.execute("COMMIT")

    def _q(self, sql: str, args: tuple = ()) -> list[sqlite3.Row]:
        with self._lock:
            return self._con.execute(sql, args).fetchall()

    def _q1(self, sql: str, args: tuple = ()) -> sqlite3.Row | None:
        with self._lock:
            return self._con.execute(sql, args).fetchone()

    # -- users ---------------------------------------------------------------

    def create_user(self, profile: UserProfile, password_salt: str | None = None,
                    password_hash: str | None = None) -> None:
        with self.tx() as con:
            if self._q1("SELECT 1 FROM users WHERE email = ? AND active = 1", (profile.email,)):
                raise DuplicateRecord(f"email already registered: {profile.email}")
            con.execute(
                "INSERT INTO users (user_id, email, name, digest_frequency, weekly_digest_day,"
                " external_links, registered_at, active, password_salt, password_hash)"
                " VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?)",
                (profile.user_id, profile.email, profile.name, profile.digest_frequency,
                 profile.weekly_digest_day, json.dumps(profile.external_links),
                 _iso(profile.registered_at), 1 if profile.active else 0,
                 password_salt, password_hash),
            )
            self._replace_topics(con, profile.user_id, profile.topics)

    def _replace_topics(self, con, user_id: str, topics: list[str]) -> None:
        con.execute("DELETE FROM user_topics WHERE user_id = ?", (user_id,))
        for pos, display in enumerate(topics):
            con.execute(
                "INSERT INTO user_topics (user_id, topic_key, display, position) VALUES (?, ?, ?, ?)",
                (user_id, topic_key(display), display, pos),
            )

    def _row_to_profile(self, row: sqlite3.Row) -> UserProfile:
        topics = [r["display"] for r in self._q(
            "SELECT display FROM user_topics WHERE user_id = ? ORDER BY position", (row["user_id"],))]
        return UserProfile(
            user_id=row["user_id"],
            email=row["email"],
            name=row["name"],
            topics=topics,
            digest_frequency=row["digest_frequency"],
            weekly_digest_day=row["weekly_digest_day"],
            external_links=json.loads(row["external_links"]),
            registered_at=_parse_dt(row["registered_at"]),
            active=bool(row["active"]),
        )

    def get_user(self, user_id: str) -> UserProfile:
        row = self._q1("SELECT * FROM users WHERE user_id = ?", (user_id,))
        if row is None:
            raise UnknownRecord(f"unknown user: {user_id}")
        return self._row_to_profile(row)

    def has_user(self, user_id: str) -> bool:
        return self._q1("SELECT 1 FROM users WHERE user_id = ?", (user_id,)) is not None

    def known_user_ids(self, ids: list[str]) -> set[str]:
        out: set[str] = set()
        distinct = list(dict.fromkeys(ids))
        for i in range(0, len(distinct), 500):
            chunk = distinct[i:i + 500]
            marks = ",".join("?" * len(chunk))
            rows = self._q(f"SELECT user_id FROM users WHERE user_id IN ({marks})",
                           tuple(chunk))
            out.update(r["user_id"] for r in rows)
        return out

    def user_credentials(self, email: str) -> tuple[str, str, str] | None:
        """(user_id, salt, hash) for an active user, or None."""
        row = self._q1(
            "SELECT user_id, password_salt, password_hash FROM users WHERE email = ? AND active = 1",
            (email,))
        if row is None or row["password_hash"] is None:
            return None
        return row["user_id"], row["password_salt"], row["password_hash"]

    def set_password(self, email: str, salt: str, hashed: str) -> str:
        """Operator password reset; returns the user id. Existing sessions
        stay valid, only the credential changes."""
        with self.tx() as con:
            row = self._q1("SELECT user_id FROM users WHERE email = ? AND active = 1", (email,))
            if row is None:
                raise UnknownRecord(f"no active user with email {email!r}")
            con.execute("UPDATE users SET password_salt = ?, password_hash = ? WHERE user_id = ?",
                        (salt, hashed, row["user_id"]))
            return row["user_id"]

    def update_profile(self, profile: UserProfile) -> None:
        with self.tx() as con:
            if not self.has_user(profile.user_id):
                raise UnknownRecord(f"unknown user: {profile.user_id}")
            clash = self._q1(
                "SELECT 1 FROM users WHERE email = ? AND active = 1 AND user_id != ?",
                (profile.email, profile.user_id))
            if clash:
                raise DuplicateRecord(f"email already registered: {profile.email}")
            con.execute(
                "UPDATE users SET email = ?, name = ?, digest_frequency = ?, weekly_digest_day = ?,"
                " external_links = ? WHERE user_id = ?",
                (profile.email, profile.name, profile.digest_frequency, profile.weekly_digest_day,
                 json.dumps(profile.external_links), profile.user_id),
            )
            self._replace_topics(con, profile.user_id, profile.topics)

    def add_profile_topic(self, user_id: str, display: str) -> bool:
        """Append a topic to the profile; False if already present."""
        with self.tx() as con:
            if not self.has_user(user_id):
                raise UnknownRecord(f"unknown user: {user_id}")
            key = topic_key(display)
            if self._q1("SELECT 1 FROM user_topics WHERE user_id = ? AND topic_key = ?", (user_id, key)):
                return False
            row = self._q1("SELECT COALESCE(MAX(position), -1) AS p FROM user_topics WHERE user_id = ?",
                           (user_id,))
            con.execute(
                "INSERT INTO user_topics (user_id, topic_key, display, position) VALUES (?, ?, ?, ?)",
                (user_id, key, display, row["p"] + 1),
            )
            return True

    def profile_topic_keys(self, user_id: str) -> set[str]:
        return {r["topic_key"] for r in self._q(
            "SELECT topic_key FROM user_topics WHERE user_id = ?", (user_id,))}

    def list_active_user_ids(self, offset: int = 0, limit: int | None = None) -> tuple[list[str], int]:
        total = self._q1("SELECT COUNT(*) AS n FROM users WHERE active = 1")["n"]
        sql = "SELECT user_id FROM users WHERE active = 1 ORDER BY user_id"
        args: tuple = ()
        if limit is not None:
            sql += " LIMIT ? OFFSET ?"
            args = (limit, offset)
        return [r["user_id"] for r in self._q(sql, args)], total

    def all_active_user_ids(self) -> list[str]:
        return self.list_active_user_ids()[0]

    # -- articles ------------------------------------------------------------

    def upsert_article(self, article: Article, source: str = "file") -> None:
        self._article_cache.pop(article.article_id, None)
        with self.tx() as con:
            con.execute(
                "INSERT INTO articles (article_id, title, abstract, authors, categories, published, source)"
                " VALUES (?, ?, ?, ?, ?, ?, ?)"
                " ON CONFLICT(article_id) DO UPDATE SET title = excluded.title,"
                " abstract = excluded.abstract, authors = excluded.authors,"
                " categories = excluded.categories, published = excluded.published,"
                " source = excluded.source",
                (article.article_id, article.title, article.abstract, json.dumps(article.authors),
                 json.dumps(article.categories), article.published_date.isoformat(), source),
            )

    def _row_to_article(self, row: sqlite3.Row) -> Article:
        return Article(
            article_id=row["article_id"],
            title=row["title"],
            abstract=row["abstract"],
            authors=json.loads(row["authors"]),
            categories=json.loads(row["categories"]),
            published_date=date.fromisoformat(row["published"]),
        )

    def _cache_article(self, article: Article) -> Article:
        if len(self._article_cache) > 20_000:
            self._article_cache.clear()
        self._article_cache[article.article_id] = article
        return article

    def get_article(self, article_id: str) -> Article | None:
        cached = self._article_cache.get(article_id)
        if cached is not None:
            return cached
        row = self._q1("SELECT * FROM articles WHERE article_id = ?", (article_id,))
        return self._cache_article(self._row_to_article(row)) if row else None

    def get_articles(self, ids: list[str]) -> dict[str, Article]:
        out: dict[str, Article] = {}
        missing: list[str] = []
        for article_id in ids:
            cached = self._article_cache.get(article_id)
            if cached is not None:
                out[article_id] = cached
            else:
                missing.append(article_id)
        for i in range(0, len(missing), 500):
            chunk = missing[i:i + 500]
            marks = ",".join("?" * len(chunk))
            for row in self._q(f"SELECT * FROM articles WHERE article_id IN ({marks})",
                               tuple(chunk)):
                out[row["article_id"]] = self._cache_article(self._row_to_article(row))
        return out

    def article_ids_in_window(self, on_date: date, window_days: int) -> list[str]:
        """Articles with on_date - published in [0, window_days) days."""
        earliest = on_date - timedelta(days=window_days - 1)
        rows = self._q(
            "SELECT article_id FROM articles WHERE published > ? AND published <= ? ORDER BY article_id",
            ((earliest - timedelta(days=1)).isoformat(), on_date.isoformat()),
        )
        return [r["article_id"] for r in rows]

    def article_count(self) -> int:
        return self._q1("SELECT COUNT(*) AS n FROM articles")["n"]

    def known_article_ids(self, ids: list[str]) -> set[str]:
        out: set[str] = set()
        distinct = list(dict.fromkeys(ids))
        for i in range(0, len(distinct), 500):
            chunk = distinct[i:i + 500]
            marks = ",".join("?" * len(chunk))
            rows = self._q(f"SELECT article_id FROM articles WHERE article_id IN ({marks})",
                           tuple(chunk))
            out.update(r["article_id"] for r in rows)
        return out

    # -- systems -------------------------------------------------------------

    def create_system(self, system: ExperimentalSystem) -> None:
        with self.tx() as con:
            if self._q1("SELECT 1 FROM systems WHERE name = ?", (system.name,)):
                raise DuplicateRecord(f"system name already in use: {system.name}")
            con.execute(
                "INSERT INTO systems (system_id, api_key, name, active, impression_count)"
                " VALUES (?, ?, ?, ?, ?)",
                (system.system_id, system.api_key, system.name,
                 1 if system.active else 0, system.impression_count),
            )

    def _row_to_system(self, row: sqlite3.Row) -> ExperimentalSystem:
        return ExperimentalSystem(
            system_id=row["system_id"], api_key=row["api_key"], name=row["name"],
            active=bool(row["active"]), impression_count=row["impression_count"],
        )

    def system_by_key(self, api_key: str) -> ExperimentalSystem | None:
        row = self._q1("SELECT * FROM systems WHERE api_key = ?", (api_key,))
        return self._row_to_system(row) if row else None

    def get_system(self, system_id: str) -> ExperimentalSystem:
        row = self._q1("SELECT * FROM systems WHERE system_id = ?", (system_id,))
        if row is None:
            raise UnknownRecord(f"unknown system: {system_id}")
        return self._row_to_system(row)

    def all_systems(self) -> list[ExperimentalSystem]:
        return [self._row_to_system(r) for r in self._q("SELECT * FROM systems ORDER BY system_id")]

    def active_system_ids(self) -> list[str]:
        return [r["system_id"] for r in self._q(
            "SELECT system_id FROM systems WHERE active = 1 ORDER BY system_id")]

    def set_system_active(self, system_id: str, active: bool) -> None:
        with self.tx() as con:
            cur = con.execute("UPDATE systems SET active = ? WHERE system_id = ?",
                              (1 if active else 0, system_id))
            if cur.rowcount == 0:
                raise UnknownRecord(f"unknown system: {system_id}")

    def impression_counts(self, system_ids: list[str]) -> dict[str, int]:
        out = {}
        for system_id in system_ids:
            row = self._q1("SELECT impression_count FROM systems WHERE system_id = ?", (system_id,))
            out[system_id] = row["impression_count"] if row else 0
        return out

    # -- recommendation stacks -----------------------------------------------

    def push_recommendations(self, recs: list[Recommendation]) -> int:
        """Stage validated article recommendations.

        Entries for articles the user has already been shown are silently
        dropped; a re-submission of the same (system, user, article)
        replaces the old score and explanation. Returns how many entries
        landed in a stack (updates included, shown-drops excluded).
        """
        rows = [(r.user_id, r.system_id, r.article_id, r.score, r.explanation,
                 _iso(r.submitted_at), r.user_id, r.article_id) for r in recs]
        with self.tx() as con:
            cur = con.executemany(
                "INSERT INTO article_stacks (user_id, system_id, article_id, score, explanation, submitted_at)"
                " SELECT ?, ?, ?, ?, ?, ? WHERE NOT EXISTS"
                " (SELECT 1 FROM shown_items WHERE user_id = ? AND kind = 'article' AND item_id = ?)"
                " ON CONFLICT(user_id, system_id, article_id) DO UPDATE SET"
                " score = excluded.score, explanation = excluded.explanation,"
                " submitted_at = excluded.submitted_at",
                rows)
            return max(cur.rowcount, 0)

    def push_topic_recommendations(self, recs: list[TopicRecommendation]) -> int:
        rows = [(r.user_id, r.system_id, topic_key(r.topic), r.topic, r.score,
                 _iso(r.submitted_at), r.user_id, topic_key(r.topic)) for r in recs]
        with self.tx() as con:
            cur = con.executemany(
                "INSERT INTO topic_stacks (user_id, system_id, topic_key, display, score, submitted_at)"
                " SELECT ?, ?, ?, ?, ?, ? WHERE NOT EXISTS"
                " (SELECT 1 FROM shown_items WHERE user_id = ? AND kind = 'topic' AND item_id = ?)"
                " ON CONFLICT(user_id, system_id, topic_key) DO UPDATE SET"
                " display = excluded.display, score = excluded.score,"
                " submitted_at = excluded.submitted_at",
                rows)
            return max(cur.rowcount, 0)

    def take_top_k(self, user_id: str, system_id: str, k: int) -> list[Recommendation]:
        """Top of the stack by score; ties by earlier submission then article id.

        Entries stay in the stack until the article is marked shown.
        """
        rows = self._q(
            "SELECT * FROM article_stacks WHERE user_id = ? AND system_id = ?"
            " ORDER BY score DESC, submitted_at ASC, article_id ASC LIMIT ?",
            (user_id, system_id, k))
        return [Recommendation(
            system_id=r["system_id"], user_id=r["user_id"], article_id=r["article_id"],
            score=r["score"], explanation=r["explanation"], submitted_at=_parse_dt(r["submitted_at"]),
        ) for r in rows]

    def take_topic_top_k(self, user_id: str, system_id: str, k: int) -> list[TopicRecommendation]:
        """Like take_top_k but for topics; filters topics the user rejected
        or already has in the profile."""
        rows = self._q(
            "SELECT * FROM topic_stacks WHERE user_id = ? AND system_id = ?"
            " AND topic_key NOT IN (SELECT topic_key FROM rejected_topics WHERE user_id = ?)"
            " AND topic_key NOT IN (SELECT topic_key FROM user_topics WHERE user_id = ?)"
            " ORDER BY score DESC, submitted_at ASC, topic_key ASC LIMIT ?",
            (user_id, system_id, user_id, user_id, k))
        return [TopicRecommendation(
            system_id=r["system_id"], user_id=r["user_id"], topic=r["display"],
            score=r["score"], submitted_at=_parse_dt(r["submitted_at"]),
        ) for r in rows]

    def article_stock_by_user(self) -> dict[str, list[str]]:
        """Systems holding article stock, per user, in one scan."""
        out: dict[str, list[str]] = {}
        rows = self._q(
            "SELECT DISTINCT user_id, system_id FROM article_stacks"
            " ORDER BY user_id, system_id")
        for row in rows:
            out.setdefault(row["user_id"], []).append(row["system_id"])
        return out

    def systems_with_stock(self, user_id: str, kind: str) -> list[str]:
        if kind == "article":
            rows = self._q(
                "SELECT DISTINCT system_id FROM article_stacks WHERE user_id = ? ORDER BY system_id",
                (user_id,))
            return [r["system_id"] for r in rows]
        rows = self._q(
            "SELECT DISTINCT system_id FROM topic_stacks WHERE user_id = ?"
            " AND topic_key NOT IN (SELECT topic_key FROM rejected_topics WHERE user_id = ?)"
            " AND topic_key NOT IN (SELECT topic_key FROM user_topics WHERE user_id = ?)"
            " ORDER BY system_id",
            (user_id, user_id, user_id))
        return [r["system_id"] for r in rows]

    def purge_expired_stack_entries(self, on_date: date, window_days: int) -> int:
        """Drop stack entries whose article fell out of the candidate window."""
        earliest = on_date - timedelta(days=window_days - 1)
        with self.tx() as con:
            cur = con.execute(
                "DELETE FROM article_stacks WHERE article_id IN"
                " (SELECT article_id FROM articles WHERE published < ?)",
                (earliest.isoformat(),))
            return cur.rowcount

    def stack_size(self, user_id: str, system_id: str) -> int:
        return self._q1(
            "SELECT COUNT(*) AS n FROM article_stacks WHERE user_id = ? AND system_id = ?",
            (user_id, system_id))["n"]

    # -- impressions ---------------------------------------------------------

    def next_impression_id(self, user_id: str, on_date: date, kind: str) -> str:
        n = self._q1(
            "SELECT COUNT(*) AS n FROM impressions WHERE user_id = ? AND date = ? AND kind = ?",
            (user_id, on_date.isoformat(), kind))["n"]
        return f"{kind}:{on_date.isoformat()}:{user_id}:{n}"

    def record_impression(self, impression: Impression) -> None:
        """Atomically persist an impression: store slots, mark items shown,
        drop them from every system's stack, and bump impression counts for
        all selected systems."""
        slots_json = json.dumps([
            {"rank": s.rank, "item_id": s.item_id, "system_id": s.system_id,
             "explanation": s.explanation}
            for s in impression.slots
        ])
        item_ids = [slot.item_id for slot in impression.slots]
        marks = ",".join("?" * len(item_ids))
        stack = "article_stacks" if impression.kind == "article" else "topic_stacks"
        key_col = "article_id" if impression.kind == "article" else "topic_key"
        with self.tx() as con:
            con.execute(
                "INSERT INTO impressions (impression_id, user_id, date, kind, slots, selected_systems, rng_seed)"
                " VALUES (?, ?, ?, ?, ?, ?, ?)",
                (impression.impression_id, impression.user_id, impression.date.isoformat(),
                 impression.kind, slots_json, json.dumps(impression.selected_systems),
                 impression.rng_seed),
            )
            con.executemany(
                "INSERT OR IGNORE INTO shown_items (user_id, kind, item_id) VALUES (?, ?, ?)",
                [(impression.user_id, impression.kind, item_id) for item_id in item_ids])
            if item_ids:
                con.execute(
                    f"DELETE FROM {stack} WHERE user_id = ? AND {key_col} IN ({marks})",
                    (impression.user_id, *item_ids))
            con.executemany(
                "UPDATE systems SET impression_count = impression_count + 1 WHERE system_id = ?",
                [(system_id,) for system_id in impression.selected_systems])
        self._cache_impression(impression)

    def _cache_impression(self, impression: Impression) -> Impression:
        # Only cache at depth 0: an entry written inside an open transaction
        # would survive that transaction's rollback.
        if self._tx_depth == 0:
            if len(self._impression_cache) > 20_000:
                self._impression_cache.clear()
            self._impression_cache[impression.impression_id] = impression
        return impression

    def _row_to_impression(self, row: sqlite3.Row) -> Impression:
        cached = self._impression_cache.get(row["impression_id"])
        if cached is not None:
            return cached
        slots = [Slot(rank=s["rank"], item_id=s["item_id"], system_id=s["system_id"],
                      explanation=s.get("explanation"))
                 for s in json.loads(row["slots"])]
        return self._cache_impression(Impression(
            impression_id=row["impression_id"], user_id=row["user_id"],
            date=date.fromisoformat(row["date"]), kind=row["kind"], slots=slots,
            selected_systems=json.loads(row["selected_systems"]), rng_seed=row["rng_seed"],
        ))

    def get_impression(self, impression_id: str) -> Impression:
        cached = self._impression_cache.get(impression_id)
        if cached is not None:
            return cached
        row = self._q1("SELECT * FROM impressions WHERE impression_id = ?", (impression_id,))
        if row is None:
            raise UnknownRecord(f"unknown impression: {impression_id}")
        return self._row_to_impression(row)

    def impressions_for_user(self, user_id: str, kind: str | None = None,
                             newest_first: bool = False, offset: int = 0,
                             limit: int | None = None) -> list[Impression]:
        sql = "SELECT * FROM impressions WHERE user_id = ?"
        args: list = [user_id]
        if kind is not None:
            sql += " AND kind = ?"
            args.append(kind)
        sql += " ORDER BY date {0}, impression_id {0}".format("DESC" if newest_first else "ASC")
        if limit is not None:
            sql += " LIMIT ? OFFSET ?"
            args += [limit, offset]
        return [self._row_to_impression(r) for r in self._q(sql, tuple(args))]

    def impression_count_for(self, user_id: str, kind: str) -> int:
        return self._q1(
            "SELECT COUNT(*) AS n FROM impressions WHERE user_id = ? AND kind = ?",
            (user_id, kind))["n"]

    def impressions_in_period(self, start: date, end: date, kind: str = "article") -> list[Impression]:
        rows = self._q(
            "SELECT * FROM impressions WHERE kind = ? AND date >= ? AND date <= ?"
            " ORDER BY date, impression_id",
            (kind, start.isoformat(), end.isoformat()))
        return [self._row_to_impression(r) for r in rows]

    def latest_topic_impression(self, user_id: str) -> Impression | None:
        row = self._q1(
            "SELECT * FROM impressions WHERE user_id = ? AND kind = 'topic'"
            " ORDER BY date DESC, impression_id DESC LIMIT 1",
            (user_id,))
        return self._row_to_impression(row) if row else None

    def shown_article_ids(self, user_id: str) -> list[str]:
        rows = self._q(
            "SELECT item_id FROM shown_items WHERE user_id = ? AND kind = 'article' ORDER BY item_id",
            (user_id,))
        return [r["item_id"] for r in rows]

    def shown_article_ids_many(self, user_ids: list[str]) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {}
        distinct = list(dict.fromkeys(user_ids))
        for i in range(0, len(distinct), 500):
            chunk = distinct[i:i + 500]
            marks = ",".join("?" * len(chunk))
            rows = self._q(
                f"SELECT user_id, item_id FROM shown_items"
                f" WHERE kind = 'article' AND user_id IN ({marks})"
                f" ORDER BY user_id, item_id",
                tuple(chunk))
            for row in rows:
                out.setdefault(row["user_id"], []).append(row["item_id"])
        return out

    # -- interaction log -----------------------------------------------------

    def record_interaction(self, event: InteractionEvent) -> str:
        """Append an event; returns "recorded" or "duplicate" (idempotent)."""
        with self.tx() as con:
            impression = self.get_impression(event.impression_id)
            slot_items = {slot.item_id for slot in impression.slots}
            if event.item_id not in slot_items:
                raise StorageError(
                    f"item {event.item_id} not in impression {event.impression_id}")
            dup = self._q1(
                "SELECT 1 FROM events WHERE impression_id = ? AND item_id = ? AND type = ?",
                (event.impression_id, event.item_id, event.type))
            if dup:
                return "duplicate"
            con.execute(
                "INSERT INTO events (event_id, impression_id, user_id, item_id, type, occurred_at)"
                " VALUES (?, ?, ?, ?, ?, ?)",
                (event.event_id, event.impression_id, event.user_id, event.item_id,
                 event.type, _iso(event.occurred_at)),
            )
            return "recorded"

    def record_seen_batch(self, impression: Impression, type_: str,
                          occurred_at: datetime) -> None:
        """Record a weight-0 exposure event for every slot at once; the
        per-(impression, item, type) uniqueness dedupes replays."""
        at = _iso(occurred_at)
        with self.tx() as con:
            con.executemany(
                "INSERT OR IGNORE INTO events (event_id, impression_id, user_id, item_id, type, occurred_at)"
                " VALUES (?, ?, ?, ?, ?, ?)",
                [(new_event_id(), impression.impression_id, impression.user_id,
                  slot.item_id, type_, at) for slot in impression.slots])

    def _row_to_event(self, row: sqlite3.Row) -> InteractionEvent:
        return InteractionEvent(
            event_id=row["event_id"], impression_id=row["impression_id"], user_id=row["user_id"],
            item_id=row["item_id"], type=row["type"], occurred_at=_parse_dt(row["occurred_at"]),
        )

    def events_for_impression(self, impression_id: str) -> list[InteractionEvent]:
        rows = self._q(
            "SELECT * FROM events WHERE impression_id = ? ORDER BY occurred_at, event_id",
            (impression_id,))
        return [self._row_to_event(r) for r in rows]

    def events_for_impressions(self, impression_ids: list[str]) -> dict[str, list[InteractionEvent]]:
        """Events grouped by impression, ordered as events_for_impression."""
        out: dict[str, list[InteractionEvent]] = {}
        distinct = list(dict.fromkeys(impression_ids))
        for i in range(0, len(distinct), 500):
            chunk = distinct[i:i + 500]
            marks = ",".join("?" * len(chunk))
            rows = self._q(
                f"SELECT * FROM events WHERE impression_id IN ({marks})"
                " ORDER BY impression_id, occurred_at, event_id",
                tuple(chunk))
            for row in rows:
                out.setdefault(row["impression_id"], []).append(self._row_to_event(row))
        return out

    def events_for_user(self, user_id: str) -> list[InteractionEvent]:
        rows = self._q("SELECT * FROM events WHERE user_id = ? ORDER BY event_id", (user_id,))
        return [self._row_to_event(r) for r in rows]

    def has_event(self, impression_id: str, item_id: str, type_: str) -> bool:
        return self._q1(
            "SELECT 1 FROM events WHERE impression_id = ? AND item_id = ? AND type = ?",
            (impression_id, item_id, type_)) is not None

    # -- feedback ------------------------------------------------------------

    def add_feedback(self, record: FeedbackRecord, submitted_at: datetime) -> None:
        with self.tx() as con:
            con.execute(
                "INSERT INTO feedback (user_id, kind, article_id, relevance,"
                " explanation_satisfaction, explanation_persuasiveness,"
                " explanation_transparency, explanation_scrutability, free_text, submitted_at)"
                " VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?)",
                (record.user_id, record.kind, record.article_id, record.relevance,
                 record.explanation_satisfaction, record.explanation_persuasiveness,
                 record.explanation_transparency, record.explanation_scrutability,
                 record.free_text, _iso(submitted_at)),
            )

    def feedback_for_user(self, user_id: str) -> list[dict]:
        rows = self._q(
            "SELECT kind, article_id, relevance, explanation_satisfaction,"
            " explanation_persuasiveness, explanation_transparency, explanation_scrutability,"
            " free_text, submitted_at FROM feedback WHERE user_id = ?"
            " ORDER BY submitted_at, feedback_id",
            (user_id,))
        return [dict(r) for r in rows]

    # -- library -------------------------------------------------------------

    def library_add(self, user_id: str, article_id: str, saved_at: datetime) -> None:
        with self.tx() as con:
            con.execute(
                "INSERT OR IGNORE INTO library (user_id, article_id, saved_at) VALUES (?, ?, ?)",
                (user_id, article_id, _iso(saved_at)))

    def library_remove(self, user_id: str, article_id: str) -> None:
        with self.tx() as con:
            con.execute("DELETE FROM library WHERE user_id = ? AND article_id = ?",
                        (user_id, article_id))

    def library_list(self, user_id: str) -> list[dict]:
        rows = self._q(
            "SELECT article_id, saved_at FROM library WHERE user_id = ? ORDER BY article_id",
            (user_id,))
        return [dict(r) for r in rows]

    # -- rejected topics -----------------------------------------------------

    def reject_topic(self, user_id: str, key: str) -> None:
        with self.tx() as con:
            con.execute("INSERT OR IGNORE INTO rejected_topics (user_id, topic_key) VALUES (?, ?)",
                        (user_id, key))

    def rejected_topic_keys(self, user_id: str) -> set[str]:
        return {r["topic_key"] for r in self._q(
            "SELECT topic_key FROM rejected_topics WHERE user_id = ?", (user_id,))}

    # -- sessions ------------------------------------------------------------

    def create_session(self, token: str, user_id: str, expires_at: datetime) -> None:
        with self.tx() as con:
            con.execute("INSERT INTO sessions (token, user_id, expires_at) VALUES (?, ?, ?)",
                        (token, user_id, _iso(expires_at)))
        if self._tx_depth == 0:
            self._session_cache[token] = (user_id, expires_at)

    def session_user(self, token: str, now: datetime) -> str | None:
        hit = self._session_cache.get(token)
        if hit is None:
            row = self._q1("SELECT user_id, expires_at FROM sessions WHERE token = ?", (token,))
            if row is None:
                return None
            hit = (row["user_id"], _parse_dt(row["expires_at"]))
            if self._tx_depth == 0:
                if len(self._session_cache) > 20_000:
                    self._session_cache.clear()
                self._session_cache[token] = hit
        user_id, expires_at = hit
        if expires_at <= now:
            return None
        return user_id

    def delete_sessions(self, user_id: str) -> None:
        with self.tx() as con:
            con.execute("DELETE FROM sessions WHERE user_id = ?", (user_id,))
        # Tokens are not indexed by user here; drop them all.
        self._session_cache.clear()

    def delete_session(self, token: str) -> None:
        with self.tx() as con:
            con.execute("DELETE FROM sessions WHERE token = ?", (token,))
        self._session_cache.pop(token, None)

    # -- tracking tokens -----------------------------------------------------

    def create_click_token(self, token: str, user_id: str, impression_id: str, item_id: str) -> None:
        with self.tx() as con:
            con.execute(
                "INSERT INTO tracking_tokens (token, kind, user_id, impression_id, item_id)"
                " VALUES (?, 'click', ?, ?, ?)",
                (token, user_id, impression_id, item_id))

    def create_pixel_token(self, token: str, user_id: str, digest_date: date) -> None:
        with self.tx() as con:
            con.execute(
                "INSERT INTO tracking_tokens (token, kind, user_id, digest_date)"
                " VALUES (?, 'pixel', ?, ?)",
                (token, user_id, digest_date.isoformat()))

    def get_tracking_token(self, token: str) -> dict | None:
        row = self._q1("SELECT * FROM tracking_tokens WHERE token = ?", (token,))
        return dict(row) if row else None

    # -- digest ledger -------------------------------------------------------

    def digest_sent(self, user_id: str, on_date: date) -> bool:
        return self._q1("SELECT 1 FROM digest_log WHERE user_id = ? AND date = ?",
                        (user_id, on_date.isoformat())) is not None

    def record_digest(self, user_id: str, on_date: date, pixel_token: str,
                      items: list[tuple[str, str]]) -> None:
        with self.tx() as con:
            con.execute(
                "INSERT INTO digest_log (user_id, date, pixel_token, items) VALUES (?, ?, ?, ?)",
                (user_id, on_date.isoformat(), pixel_token, json.dumps(items)))

    def digest_items(self, user_id: str, on_date: date) -> list[tuple[str, str]]:
        row = self._q1("SELECT items FROM digest_log WHERE user_id = ? AND date = ?",
                       (user_id, on_date.isoformat()))
        if row is None:
            return []
        return [tuple(pair) for pair in json.loads(row["items"])]

    # -- job ledger ----------------------------------------------------------

    def job_succeeded(self, job: str, on_date: date) -> bool:
        return self._q1(
            "SELECT 1 FROM job_ledger WHERE job = ? AND date = ? AND outcome = 'ok'",
            (job, on_date.isoformat())) is not None

    def start_job(self, job: str, on_date: date, now: datetime) -> int:
        with self.tx() as con:
            cur = con.execute(
                "INSERT INTO job_ledger (job, date, started_at) VALUES (?, ?, ?)",
                (job, on_date.isoformat(), _iso(now)))
            return cur.lastrowid

    def finish_job(self, entry_id: int, outcome: str, now: datetime) -> None:
        with self.tx() as con:
            con.execute("UPDATE job_ledger SET finished_at = ?, outcome = ? WHERE entry_id = ?",
                        (_iso(now), outcome, entry_id))

    def ledger_entries(self, on_date: date) -> list[dict]:
        rows = self._q(
            "SELECT job, date, started_at, finished_at, outcome FROM job_ledger"
            " WHERE date = ? ORDER BY entry_id",
            (on_date.isoformat(),))
        return [dict(r) for r in rows]

    # -- GDPR: export / delete -----------------------------------------------

    def export_user_data(self, user_id: str) -> dict:
        """Complete structured dump of everything stored about a user."""
        profile = self.get_user(user_id)  # raises on unknown
        row = self._q1("SELECT * FROM users WHERE user_id = ?", (user_id,))
        impressions = []
        for imp in sorted(self.impressions_for_user(user_id), key=lambda i: i.impression_id):
            impressions.append({
                "impression_id": imp.impression_id,
                "date": imp.date.isoformat(),
                "kind": imp.kind,
                "rng_seed": imp.rng_seed,
                "selected_systems": imp.selected_systems,
                "slots": [{"rank": s.rank, "item_id": s.item_id, "system_id": s.system_id,
                           "explanation": s.explanation} for s in imp.slots],
            })
        interactions = [{
            "event_id": e.event_id, "impression_id": e.impression_id, "item_id": e.item_id,
            "type": e.type, "occurred_at": _iso(e.occurred_at),
        } for e in self.events_for_user(user_id)]
        return {
            "profile": {
                "user_id": profile.user_id,
                "email": profile.email,
                "name": profile.name,
                "topics": profile.topics,
                "digest_frequency": profile.digest_frequency,
                "weekly_digest_day": profile.weekly_digest_day,
                "external_links": profile.external_links,
                "registered_at": row["registered_at"],
                "active": profile.active,
            },
            "impressions": impressions,
            "interactions": interactions,
            "feedback": self.feedback_for_user(user_id),
            "library": self.library_list(user_id),
        }

    @staticmethod
    def export_to_json(dump: dict) -> bytes:
        """Canonical serialization; identical dumps are byte-identical."""
        return (json.dumps(dump, sort_keys=True, indent=2, ensure_ascii=False) + "\n").encode()

    def import_user_data(self, dump: dict) -> None:
        """Reconstruct a user from an export dump (round-trip counterpart)."""
        p = dump["profile"]
        with self.tx() as con:
            profile = UserProfile(
                user_id=p["user_id"], email=p["email"], name=p["name"], topics=list(p["topics"]),
                digest_frequency=p["digest_frequency"], weekly_digest_day=p["weekly_digest_day"],
                external_links=list(p["external_links"]),
                registered_at=_parse_dt(p["registered_at"]), active=p["active"],
            )
            self.create_user(profile)
            for imp in dump["impressions"]:
                con.execute(
                    "INSERT INTO impressions (impression_id, user_id, date, kind, slots,"
                    " selected_systems, rng_seed) VALUES (?, ?, ?, ?, ?, ?, ?)",
                    (imp["impression_id"], p["user_id"], imp["date"], imp["kind"],
                     json.dumps(imp["slots"]), json.dumps(imp["selected_systems"]),
                     imp["rng_seed"]))
                for slot in imp["slots"]:
                    con.execute(
                        "INSERT OR IGNORE INTO shown_items (user_id, kind, item_id) VALUES (?, ?, ?)",
                        (p["user_id"], imp["kind"], slot["item_id"]))
            for ev in dump["interactions"]:
                con.execute(
                    "INSERT INTO events (event_id, impression_id, user_id, item_id, type, occurred_at)"
                    " VALUES (?, ?, ?, ?, ?, ?)",
                    (ev["event_id"], ev["impression_id"], p["user_id"], ev["item_id"],
                     ev["type"], ev["occurred_at"]))
            for fb in dump["feedback"]:
                con.execute(
                    "INSERT INTO feedback (user_id, kind, article_id, relevance,"
                    " explanation_satisfaction, explanation_persuasiveness,"
                    " explanation_transparency, explanation_scrutability, free_text, submitted_at)"
                    " VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?)",
                    (p["user_id"], fb["kind"], fb["article_id"], fb["relevance"],
                     fb["explanation_satisfaction"], fb["explanation_persuasiveness"],
                     fb["explanation_transparency"], fb["explanation_scrutability"],
                     fb["free_text"], fb["submitted_at"]))
            for item in dump["library"]:
                con.execute(
                    "INSERT INTO library (user_id, article_id, saved_at) VALUES (?, ?, ?)",
                    (p["user_id"], item["article_id"], item["saved_at"]))

    def delete_user(self, user_id: str) -> None:
        """Remove a user entirely; impressions and events are anonymized so
        system metrics survive."""
        with self.tx() as con:
            if not self.has_user(user_id):
                raise UnknownRecord(f"unknown user: {user_id}")
            con.execute("UPDATE impressions SET user_id = ? WHERE user_id = ?",
                        (TOMBSTONE_USER, user_id))
            con.execute("UPDATE events SET user_id = ? WHERE user_id = ?",
                        (TOMBSTONE_USER, user_id))
            for table in ("shown_items", "user_topics", "sessions", "library", "feedback", "article_stacks",
                          "topic_stacks", "rejected_topics", "tracking_tokens", "digest_log"):
                con.execute(f"DELETE FROM {table} WHERE user_id = ?", (user_id,))
            con.execute("DELETE FROM users WHERE user_id = ?", (user_id,))
        # Cached impressions still carry the pre-deletion user id, and the
        # user's session rows are gone.
        self._impression_cache.clear()
        self._session_cache.clear()


# Random per-process prefix plus a counter: unique without paying for
# fresh entropy on every event row.
_EVENT_PREFIX = uuid.uuid4().hex[:12]
_event_counter = itertools.count(1)


def new_event_id() -> str:
    return f"{_EVENT_PREFIX}{next(_event_counter):012x}"
