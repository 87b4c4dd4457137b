"""Shared domain types, validation, and canonicalization.

Everything here is a pure value type or a pure function; safe to use
from any number of concurrent callers.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from urllib.parse import urlparse

EMAIL_RE = re.compile(r"^[^@\s]+@[^@\s]+\.[^@\s]+$")

MAX_TOPIC_LEN = 200
MAX_EXPLANATION_LEN = 400

DIGEST_FREQUENCIES = ("daily", "weekly")

# Interaction taxonomy. Article events carry per-slot attribution through
# the impression; topic events attach to topic impressions.
ARTICLE_EVENT_TYPES = ("seen_email", "seen_web", "clicked_email", "clicked_web", "saved")
TOPIC_EVENT_TYPES = ("topic_accepted", "topic_rejected", "topic_refreshed", "topic_expired")
EVENT_TYPES = ARTICLE_EVENT_TYPES + TOPIC_EVENT_TYPES

FEEDBACK_KINDS = ("recommendation_feedback", "bug_report", "feature_request")
RATING_FIELDS = (
    "relevance",
    "explanation_satisfaction",
    "explanation_persuasiveness",
    "explanation_transparency",
    "explanation_scrutability",
)


class ValidationError(ValueError):
    """Carries the complete list of violations for a rejected candidate."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


def normalize_topic(text: str) -> str:
    """Display form of a topic: trimmed, internal whitespace collapsed."""
    return re.sub(r"\s+", " ", text.strip())


def topic_key(text: str) -> str:
    """Equality key for topics: normalized then case-folded."""
    return normalize_topic(text).casefold()


def validate_topic(text: str) -> str:
    """Return the normalized display form, or raise on a malformed topic."""
    if not isinstance(text, str):
        raise ValidationError([f"malformed topic: {text!r}"])
    norm = normalize_topic(text)
    if not norm:
        raise ValidationError(["malformed topic: empty after trimming"])
    if len(norm) > MAX_TOPIC_LEN:
        raise ValidationError([f"malformed topic: longer than {MAX_TOPIC_LEN} characters"])
    return norm


def balanced_markup(text: str) -> bool:
    """True when the ** boldface delimiters pair up (even count)."""
    return text.count("**") % 2 == 0


@dataclass
class UserProfile:
    user_id: str
    email: str
    name: str
    topics: list[str]  # display forms; unique and ordered by first appearance
    digest_frequency: str
    weekly_digest_day: int | None  # 0=Monday .. 6=Sunday, set iff weekly
    external_links: list[str]
    registered_at: datetime
    active: bool = True


@dataclass
class Article:
    article_id: str
    title: str
    abstract: str
    authors: list[str]
    categories: list[str]
    published_date: date


@dataclass
class ExperimentalSystem:
    system_id: str
    api_key: str
    name: str
    active: bool = True
    impression_count: int = 0


@dataclass
class Recommendation:
    system_id: str
    user_id: str
    article_id: str
    score: float
    explanation: str
    submitted_at: datetime


@dataclass
class TopicRecommendation:
    system_id: str
    user_id: str
    topic: str  # display form
    score: float
    submitted_at: datetime


@dataclass
class Slot:
    rank: int  # 1-based
    item_id: str  # article id or topic key
    system_id: str
    explanation: str | None = None


@dataclass
class Impression:
    impression_id: str
    user_id: str
    date: date
    kind: str  # "article" | "topic"
    slots: list[Slot]
    selected_systems: list[str]
    rng_seed: int = 0


@dataclass
class InteractionEvent:
    event_id: str
    impression_id: str
    user_id: str
    item_id: str
    type: str
    occurred_at: datetime


@dataclass
class FeedbackRecord:
    user_id: str
    kind: str
    article_id: str | None = None
    relevance: int | None = None
    explanation_satisfaction: int | None = None
    explanation_persuasiveness: int | None = None
    explanation_transparency: int | None = None
    explanation_scrutability: int | None = None
    free_text: str = ""


@dataclass
class ApiSettings:
    """API-wide knobs advertised to experimental systems via GET /."""

    user_batch_size: int = 100
    recommendation_batch_max: int = 100
    candidate_window_days: int = 7
    window_start_utc: str = "00:30"
    window_hours: float = 2.5
    top_k: int = 10

    def validate(self) -> None:
        errors = []
        for name in ("user_batch_size", "recommendation_batch_max", "candidate_window_days", "top_k"):
            if getattr(self, name) < 1:
                errors.append(f"{name} must be positive")
        if self.window_hours <= 0:
            errors.append("window_hours must be positive")
        if self.window_hours > 24:
            errors.append("window_hours must be at most 24")
        if parse_utc_time(self.window_start_utc) is None:
            errors.append(f"bad window_start_utc: {self.window_start_utc!r}")
        if errors:
            raise ValidationError(errors)

    def as_dict(self) -> dict:
        return {
            "user_batch_size": self.user_batch_size,
            "recommendation_batch_max": self.recommendation_batch_max,
            "candidate_window_days": self.candidate_window_days,
            "submission_window": {"start_utc": self.window_start_utc, "hours": self.window_hours},
            "top_k": self.top_k,
        }


def parse_utc_time(text: str) -> tuple[int, int] | None:
    """Parse "HH:MM" into (hour, minute), or None if malformed."""
    m = re.fullmatch(r"(\d{1,2}):(\d{2})", text.strip())
    if not m:
        return None
    hour, minute = int(m.group(1)), int(m.group(2))
    if hour > 23 or minute > 59:
        return None
    return hour, minute


def in_submission_window(now: datetime, settings: ApiSettings) -> bool:
    """Window membership: inclusive at start, exclusive at start + duration.

    Handles windows that wrap past midnight.
    """
    start = parse_utc_time(settings.window_start_utc)
    if start is None:
        raise ValueError(f"bad window_start_utc: {settings.window_start_utc!r}")
    start_min = start[0] * 60 + start[1]
    dur_min = settings.window_hours * 60
    now = now.astimezone(timezone.utc)
    now_min = now.hour * 60 + now.minute + now.second / 60 + now.microsecond / 6e7
    offset = (now_min - start_min) % (24 * 60)
    return offset < dur_min


def _dedupe_topics(raw: list) -> list[str]:
    """Validate and canonicalize a topic list, collapsing case-insensitive duplicates.

    Display keeps the first-seen casing.
    """
    seen: dict[str, str] = {}
    errors: list[str] = []
    for t in raw:
        try:
            norm = validate_topic(t)
        except ValidationError as exc:
            errors.extend(exc.errors)
            continue
        seen.setdefault(norm.casefold(), norm)
    if errors:
        raise ValidationError(errors)
    return list(seen.values())


def validate_user_profile(candidate: dict) -> UserProfile:
    """Build a canonicalized UserProfile, or raise with every violation found."""
    errors: list[str] = []

    email = str(candidate.get("email", "") or "").strip()
    if not EMAIL_RE.fullmatch(email):
        errors.append("invalid email")

    name = str(candidate.get("name", "") or "").strip()
    if not name:
        errors.append("empty name")

    topics: list[str] = []
    raw_topics = candidate.get("topics", [])
    if not isinstance(raw_topics, list):
        errors.append("topics must be a list")
    else:
        try:
            topics = _dedupe_topics(raw_topics)
        except ValidationError as exc:
            errors.extend(exc.errors)

    frequency = candidate.get("digest_frequency", "daily")
    weekly_day = candidate.get("weekly_digest_day")
    if frequency not in DIGEST_FREQUENCIES:
        errors.append(f"digest_frequency must be one of {DIGEST_FREQUENCIES}")
    if frequency == "weekly":
        if not isinstance(weekly_day, int) or not 0 <= weekly_day <= 6:
            errors.append("weekly digest frequency requires weekly_digest_day in 0..6")
    else:
        weekly_day = None

    links: list[str] = []
    raw_links = candidate.get("external_links", [])
    if not isinstance(raw_links, list):
        errors.append("external_links must be a list")
    else:
        for link in raw_links:
            parsed = urlparse(str(link))
            if parsed.scheme not in ("http", "https") or not parsed.netloc:
                errors.append(f"invalid link: {link!r}")
        links = sorted(set(str(l) for l in raw_links))

    if errors:
        raise ValidationError(errors)

    registered_at = candidate.get("registered_at") or utc_now()
    return UserProfile(
        user_id=candidate.get("user_id", ""),
        email=email,
        name=name,
        topics=topics,
        digest_frequency=frequency,
        weekly_digest_day=weekly_day,
        external_links=links,
        registered_at=registered_at,
        active=True,
    )


def validate_recommendation(candidate: dict, submitted_at: datetime | None = None) -> Recommendation:
    """Accept a raw article recommendation or raise on the first violated rule."""
    try:
        score = float(candidate.get("score"))
    except (TypeError, ValueError):
        raise ValidationError(["non-finite score"]) from None
    if not math.isfinite(score):
        raise ValidationError(["non-finite score"])

    explanation = candidate.get("explanation", "")
    if not isinstance(explanation, str) or not explanation:
        raise ValidationError(["empty explanation"])
    if len(explanation) > MAX_EXPLANATION_LEN:
        raise ValidationError([f"explanation longer than {MAX_EXPLANATION_LEN} characters"])
    if not balanced_markup(explanation):
        raise ValidationError(["unbalanced markup"])

    article_id = str(candidate.get("article_id", "") or "")
    if not article_id:
        raise ValidationError(["missing article_id"])

    return Recommendation(
        system_id=str(candidate.get("system_id", "")),
        user_id=str(candidate.get("user_id", "")),
        article_id=article_id,
        score=score,
        explanation=explanation,
        submitted_at=submitted_at or utc_now(),
    )


def validate_topic_recommendation(candidate: dict, submitted_at: datetime | None = None) -> TopicRecommendation:
    """Accept a raw topic recommendation or raise on the first violated rule."""
    try:
        score = float(candidate.get("score"))
    except (TypeError, ValueError):
        raise ValidationError(["non-finite score"]) from None
    if not math.isfinite(score):
        raise ValidationError(["non-finite score"])
    topic = validate_topic(candidate.get("topic", ""))
    return TopicRecommendation(
        system_id=str(candidate.get("system_id", "")),
        user_id=str(candidate.get("user_id", "")),
        topic=topic,
        score=score,
        submitted_at=submitted_at or utc_now(),
    )


def validate_feedback(candidate: dict) -> FeedbackRecord:
    """Validate a feedback submission; collects every violation."""
    errors: list[str] = []
    kind = candidate.get("kind", "recommendation_feedback")
    if kind not in FEEDBACK_KINDS:
        errors.append(f"kind must be one of {FEEDBACK_KINDS}")

    ratings = {}
    for field_name in RATING_FIELDS:
        value = candidate.get(field_name)
        if value is None:
            ratings[field_name] = None
            continue
        if not isinstance(value, int) or isinstance(value, bool) or not 1 <= value <= 5:
            errors.append(f"{field_name} must be an integer in 1..5")
        else:
            ratings[field_name] = value

    article_id = candidate.get("article_id")
    if kind == "recommendation_feedback" and not article_id:
        errors.append("recommendation_feedback requires article_id")

    if errors:
        raise ValidationError(errors)

    return FeedbackRecord(
        user_id=str(candidate.get("user_id", "")),
        kind=kind,
        article_id=str(article_id) if article_id else None,
        free_text=str(candidate.get("free_text", "") or ""),
        **ratings,
    )
