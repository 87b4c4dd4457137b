"""Digest emails: assembly, rendering and interaction tracking.

Daily users get that day's impression; weekly users get a deduplicated
union of the last seven days, delivered only on their chosen weekday.
Every article link goes through a tokenized redirect that records
clicked_email, and each mail embeds one tracking pixel that records
seen_email for the digest's items. Mails are written as RFC-5322 files
into an outbox directory; pointing the sink at SMTP instead is a
one-function swap.
"""

from __future__ import annotations

import base64
import html
import logging
import os
import secrets
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from email.message import EmailMessage

from .models import Article, InteractionEvent, utc_now
from .multileaver import JobAlreadyRan
from .storage import Store, new_event_id

log = logging.getLogger(__name__)

# Smallest transparent GIF there is; served for tracking pixels.
PIXEL_GIF = base64.b64decode("R0lGODlhAQABAIAAAAAAAP///yH5BAEAAAAALAAAAAABAAEAAAIBRAA7")


@dataclass
class DigestItem:
    article: Article
    explanation: str
    impression_id: str
    rank: int
    shown_on: date


@dataclass
class Digest:
    user_id: str
    date: date
    items: list[DigestItem]


def markup_to_html(text: str) -> str:
    """Escape HTML, then turn **span** pairs into <b> elements."""
    parts = html.escape(text, quote=False).split("**")
    return "".join(f"<b>{p}</b>" if i % 2 else p for i, p in enumerate(parts))


def strip_markup(text: str) -> str:
    return text.replace("**", "")


def build_digest(store: Store, user_id: str, on_date: date) -> Digest | None:
    """Assemble a user's digest for a date, or None when nothing is due.

    Daily frequency covers just on_date; weekly covers the 7 days ending
    at on_date, deduplicated by article, newest day first and by rank
    within a day, and is only built on the user's send day.
    """
    profile = store.get_user(user_id)
    if not profile.active:
        return None
    if profile.digest_frequency == "weekly":
        if on_date.weekday() != profile.weekly_digest_day:
            return None
        first_day = on_date - timedelta(days=6)
    else:
        first_day = on_date

    items: list[DigestItem] = []
    seen_articles: set[str] = set()
    impressions = [imp for imp in store.impressions_for_user(user_id, kind="article")
                   if first_day <= imp.date <= on_date]
    impressions.sort(key=lambda imp: (imp.date, imp.impression_id), reverse=True)
    for impression in impressions:
        for slot in impression.slots:
            if slot.item_id in seen_articles:
                continue
            article = store.get_article(slot.item_id)
            if article is None:
                continue
            seen_articles.add(slot.item_id)
            items.append(DigestItem(
                article=article,
                explanation=slot.explanation or "",
                impression_id=impression.impression_id,
                rank=slot.rank,
                shown_on=impression.date,
            ))
    if not items:
        return None
    return Digest(user_id=user_id, date=on_date, items=items)


def render_email(digest: Digest, links: list[str], pixel_url: str,
                 from_addr: str, to_addr: str):
    """Render a digest as a multipart mail: plain text plus HTML with
    tracked links, boldface explanation spans and the tracking pixel."""
    day = digest.date.isoformat()
    text_lines = [f"Recommended articles for {day}", ""]
    html_parts = [f"<h1>Recommended articles for {day}</h1>", "<ol>"]
    for item, link in zip(digest.items, links):
        authors = ", ".join(item.article.authors)
        text_lines.append(item.article.title)
        if authors:
            text_lines.append("  " + authors)
        if item.explanation:
            text_lines.append("  " + strip_markup(item.explanation))
        text_lines.append("  " + link)
        text_lines.append("")
        html_parts.append("<li>")
        html_parts.append(f'<a href="{html.escape(link, quote=True)}">'
                          f"{html.escape(item.article.title)}</a>")
        if authors:
            html_parts.append(f"<br><i>{html.escape(authors)}</i>")
        if item.explanation:
            html_parts.append(f"<br>{markup_to_html(item.explanation)}")
        html_parts.append("</li>")
    html_parts.append("</ol>")
    html_parts.append(f'<img src="{html.escape(pixel_url, quote=True)}" width="1" height="1" alt="">')

    msg = EmailMessage()
    msg["Subject"] = f"Your recommended articles for {day}"
    msg["From"] = from_addr
    msg["To"] = to_addr
    msg.set_content("\n".join(text_lines))
    msg.add_alternative("\n".join(html_parts), subtype="html")
    return msg


def send_digest(store: Store, digest: Digest, *, base_url: str, from_addr: str,
                outbox_dir: str) -> str:
    """Mint tracking tokens, record the send, and write the mail file.

    Returns the outbox path. Refuses nothing here: callers check the
    send ledger first.
    """
    profile = store.get_user(digest.user_id)
    links = []
    for item in digest.items:
        token = secrets.token_urlsafe(16)
        store.create_click_token(token, digest.user_id, item.impression_id,
                                 item.article.article_id)
        links.append(f"{base_url}/t/click/{token}")
    pixel_token = secrets.token_urlsafe(16)
    store.create_pixel_token(pixel_token, digest.user_id, digest.date)
    store.record_digest(digest.user_id, digest.date, pixel_token,
                        [(i.impression_id, i.article.article_id) for i in digest.items])

    msg = render_email(digest, links, f"{base_url}/t/pixel/{pixel_token}",
                       from_addr, profile.email)
    os.makedirs(outbox_dir, exist_ok=True)
    path = os.path.join(outbox_dir, f"{digest.date.isoformat()}_{digest.user_id}.eml")
    with open(path, "wb") as fh:
        fh.write(msg.as_bytes())
    return path


def run_digest_job(store: Store, on_date: date, *, base_url: str, from_addr: str,
                   outbox_dir: str, now: datetime | None = None) -> dict:
    """Send every due digest for a date, once; refuses a second run."""
    if store.job_succeeded("digest", on_date):
        raise JobAlreadyRan(f"digest already ran for {on_date.isoformat()}")
    entry = store.start_job("digest", on_date, now or utc_now())
    sent = 0
    skipped = 0
    try:
        for user_id in store.all_active_user_ids():
            if store.digest_sent(user_id, on_date):
                skipped += 1
                continue
            digest = build_digest(store, user_id, on_date)
            if digest is None:
                skipped += 1
                continue
            send_digest(store, digest, base_url=base_url, from_addr=from_addr,
                        outbox_dir=outbox_dir)
            sent += 1
    except BaseException:
        store.finish_job(entry, "failed", utc_now())
        raise
    store.finish_job(entry, "ok", utc_now())
    log.info("digest %s: sent %d, skipped %d", on_date.isoformat(), sent, skipped)
    return {"sent": sent, "skipped": skipped}


def resolve_tracking(store: Store, token: str, *, abstract_url_base: str,
                     now: datetime | None = None) -> tuple[str, str] | tuple[str, bytes] | None:
    """Resolve a tracking token to its effect.

    Click tokens record clicked_email (idempotently) and yield
    ("redirect", url); pixel tokens record seen_email for every digest
    item and yield ("pixel", gif bytes). Unknown tokens yield None and
    record nothing.
    """
    record = store.get_tracking_token(token)
    if record is None:
        return None
    now = now or utc_now()
    if record["kind"] == "click":
        store.record_interaction(InteractionEvent(
            event_id=new_event_id(), impression_id=record["impression_id"],
            user_id=record["user_id"], item_id=record["item_id"],
            type="clicked_email", occurred_at=now))
        return "redirect", f"{abstract_url_base}/{record['item_id']}"
    for impression_id, item_id in store.digest_items(record["user_id"],
                                                     date.fromisoformat(record["digest_date"])):
        store.record_interaction(InteractionEvent(
            event_id=new_event_id(), impression_id=impression_id,
            user_id=record["user_id"], item_id=item_id,
            type="seen_email", occurred_at=now))
    return "pixel", PIXEL_GIF
