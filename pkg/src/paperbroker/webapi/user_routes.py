"""User-facing API behind session auth.

Accounts and profiles, the recommendation feed (which records seen_web
on first render of an impression), explicit actions (click, save,
unsave), five-dimension feedback, the topic suggestion strip, the
personal library, and the data export / account deletion rights.
"""

from __future__ import annotations

from datetime import timedelta

from fastapi import APIRouter, HTTPException, Request, Response
from fastapi.responses import JSONResponse

from .. import multileaver
from ..auth import derive_user_id, hash_password, new_session_token, verify_password
from ..models import (
    TOPIC_EVENT_TYPES,
    InteractionEvent,
    ValidationError,
    topic_key,
    validate_feedback,
    validate_user_profile,
)
from ..storage import DuplicateRecord, StorageError, UnknownRecord, new_event_id
from .deps import get_config, get_store, json_body, now, require_user, session_token

router = APIRouter(prefix="/user")

FEED_PAGE_SIZE = 10
SESSION_DAYS = 30


# Feed and action sit first: they carry nearly all traffic and route
# matching walks the table in registration order.
@router.get("/feed")
async def feed(request: Request):
    user_id = require_user(request)
    store = get_store(request)
    config = get_config(request)
    try:
        page = int(request.query_params.get("page", "1"))
        page_size = int(request.query_params.get("page_size", str(FEED_PAGE_SIZE)))
    except ValueError:
        raise HTTPException(400, "bad page number")
    if page < 1 or not 1 <= page_size <= 50:
        raise HTTPException(400, "bad page number")

    total = store.impression_count_for(user_id, "article")
    total_pages = max(1, -(-total // page_size))
    window = store.impressions_for_user(user_id, kind="article", newest_first=True,
                                        offset=(page - 1) * page_size, limit=page_size)
    saved = {entry["article_id"] for entry in store.library_list(user_id)}
    articles = store.get_articles([slot.item_id for imp in window for slot in imp.slots])

    at = now(request)
    groups = []
    for impression in window:
        # The event log dedupes (impression, item, type), so repeat
        # renders add no second seen_web row.
        store.record_seen_batch(impression, "seen_web", at)
        items = []
        for slot in impression.slots:
            article = articles.get(slot.item_id)
            if article is None:
                continue
            items.append({
                "rank": slot.rank,
                "article_id": article.article_id,
                "title": article.title,
                "abstract": article.abstract,
                "authors": article.authors,
                "categories": article.categories,
                "published": article.published_date.isoformat(),
                "explanation": slot.explanation or "",
                "saved": article.article_id in saved,
                "url": f"{config.abstract_url_base}/{article.article_id}",
            })
        groups.append({
            "impression_id": impression.impression_id,
            "date": impression.date.isoformat(),
            "items": items,
        })
    return JSONResponse({"impressions": groups, "page": page, "total_pages": total_pages})


@router.post("/action")
async def record_action(request: Request):
    user_id = require_user(request)
    store = get_store(request)
    body = await json_body(request)
    impression_id = str(body.get("impression_id", ""))
    item_id = str(body.get("item_id", ""))
    action = body.get("action")
    if action not in ("clicked_web", "saved", "unsave"):
        raise HTTPException(400, "action must be clicked_web, saved or unsave")
    try:
        impression = store.get_impression(impression_id)
    except UnknownRecord:
        raise HTTPException(404, "unknown impression")
    if impression.user_id != user_id:
        raise HTTPException(403, "not your impression")

    at = now(request)
    if action == "unsave":
        # Library membership goes; the historical saved reward stays.
        store.library_remove(user_id, item_id)
        return JSONResponse({"status": "ok", "result": "removed"})
    try:
        outcome = store.record_interaction(InteractionEvent(
            event_id=new_event_id(), impression_id=impression_id, user_id=user_id,
            item_id=item_id, type=action, occurred_at=at))
    except StorageError as exc:
        raise HTTPException(400, str(exc))
    if action == "saved":
        store.library_add(user_id, item_id, at)
    return JSONResponse({"status": "ok", "result": outcome})


@router.post("/register")
async def register(request: Request):
    body = await json_body(request)
    errors: list[str] = []
    profile = None
    try:
        profile = validate_user_profile(body)
    except ValidationError as exc:
        errors.extend(exc.errors)
    password = body.get("password") or ""
    if not isinstance(password, str) or len(password) < 8:
        errors.append("password must be at least 8 characters")
    if errors:
        raise HTTPException(400, "; ".join(errors))

    profile.user_id = derive_user_id(profile.email)
    profile.registered_at = now(request)
    salt, digest = hash_password(password, get_config(request).pbkdf2_iterations)
    try:
        get_store(request).create_user(profile, salt, digest)
    except DuplicateRecord as exc:
        raise HTTPException(409, str(exc))
    return JSONResponse({"user_id": profile.user_id})


@router.post("/login")
async def login(request: Request):
    body = await json_body(request)
    email = str(body.get("email", "")).strip()
    password = str(body.get("password", ""))
    credentials = get_store(request).user_credentials(email)
    if credentials is None:
        raise HTTPException(401, "bad credentials")
    user_id, salt, stored = credentials
    if not verify_password(password, salt, stored):
        raise HTTPException(401, "bad credentials")
    token = new_session_token()
    expires_at = now(request) + timedelta(days=SESSION_DAYS)
    get_store(request).create_session(token, user_id, expires_at)
    return JSONResponse({"session_token": token, "user_id": user_id,
                         "expires_at": expires_at.isoformat()})


@router.post("/logout")
def logout(request: Request):
    require_user(request)
    token = session_token(request)
    if token:
        get_store(request).delete_session(token)
    return {"status": "signed out"}


@router.get("/profile")
def get_profile(request: Request):
    user_id = require_user(request)
    profile = get_store(request).get_user(user_id)
    return {
        "user_id": profile.user_id,
        "email": profile.email,
        "name": profile.name,
        "topics": profile.topics,
        "digest_frequency": profile.digest_frequency,
        "weekly_digest_day": profile.weekly_digest_day,
        "external_links": profile.external_links,
        "registered_at": profile.registered_at.isoformat(),
    }


@router.put("/profile")
async def update_profile(request: Request):
    user_id = require_user(request)
    store = get_store(request)
    current = store.get_user(user_id)
    body = await json_body(request)
    candidate = {
        "email": body.get("email", current.email),
        "name": body.get("name", current.name),
        "topics": body.get("topics", current.topics),
        "digest_frequency": body.get("digest_frequency", current.digest_frequency),
        "weekly_digest_day": body.get("weekly_digest_day", current.weekly_digest_day),
        "external_links": body.get("external_links", current.external_links),
        "registered_at": current.registered_at,
        "user_id": user_id,
    }
    try:
        profile = validate_user_profile(candidate)
    except ValidationError as exc:
        raise HTTPException(400, "; ".join(exc.errors))
    profile.user_id = user_id
    try:
        store.update_profile(profile)
    except DuplicateRecord as exc:
        raise HTTPException(409, str(exc))
    return get_profile(request)


@router.post("/feedback")
async def submit_feedback(request: Request):
    user_id = require_user(request)
    body = await json_body(request)
    try:
        record = validate_feedback({**body, "user_id": user_id})
    except ValidationError as exc:
        raise HTTPException(400, "; ".join(exc.errors))
    record.user_id = user_id
    get_store(request).add_feedback(record, now(request))
    return {"status": "ok"}


def _unresolved_topic_slots(store, impression):
    resolved = {e.item_id for e in store.events_for_impression(impression.impression_id)
                if e.type in TOPIC_EVENT_TYPES}
    return [slot for slot in impression.slots if slot.item_id not in resolved]


def _topic_state(request: Request, user_id: str, build_if_exhausted: bool = True) -> dict:
    """Current topic suggestion batch; serves a fresh one when the last
    batch is fully resolved and stock exists."""
    store = get_store(request)
    config = get_config(request)
    impression = store.latest_topic_impression(user_id)
    slots = _unresolved_topic_slots(store, impression) if impression else []
    if not slots and build_if_exhausted:
        on_date = now(request).date()
        sequence = len(store.impressions_for_user(user_id, kind="topic"))
        seed = multileaver.derive_seed(config.seed, on_date, user_id, f"topic:{sequence}")
        counts = store.impression_counts(store.active_system_ids())
        impression = multileaver.build_impression(
            store, user_id, on_date, "topic", counts,
            config.systems_per_impression, config.top_k, seed)
        slots = list(impression.slots) if impression else []
    profile = store.get_user(user_id)
    return {
        "impression_id": impression.impression_id if impression and slots else None,
        "topics": [{"key": slot.item_id, "topic": slot.explanation or slot.item_id}
                   for slot in slots],
        "profile_topics": profile.topics,
    }


@router.get("/topics")
async def topics(request: Request):
    user_id = require_user(request)
    return JSONResponse(_topic_state(request, user_id))


@router.post("/topics/action")
async def topic_action(request: Request):
    user_id = require_user(request)
    store = get_store(request)
    body = await json_body(request)
    action = body.get("action")
    if action not in ("accept", "reject", "refresh"):
        raise HTTPException(400, "action must be accept, reject or refresh")

    impression = store.latest_topic_impression(user_id)
    slots = _unresolved_topic_slots(store, impression) if impression else []
    at = now(request)

    if action == "refresh":
        for slot in slots:
            store.record_interaction(InteractionEvent(
                event_id=new_event_id(), impression_id=impression.impression_id,
                user_id=user_id, item_id=slot.item_id, type="topic_refreshed",
                occurred_at=at))
        return JSONResponse(_topic_state(request, user_id))

    key = topic_key(str(body.get("topic", "")))
    slot = next((s for s in slots if s.item_id == key), None)
    if slot is None:
        raise HTTPException(400, "unknown topic")
    event_type = "topic_accepted" if action == "accept" else "topic_rejected"
    store.record_interaction(InteractionEvent(
        event_id=new_event_id(), impression_id=impression.impression_id,
        user_id=user_id, item_id=slot.item_id, type=event_type, occurred_at=at))
    if action == "accept":
        store.add_profile_topic(user_id, slot.explanation or slot.item_id)
    else:
        store.reject_topic(user_id, key)
    return JSONResponse(_topic_state(request, user_id, build_if_exhausted=False))


@router.get("/library")
def library(request: Request):
    user_id = require_user(request)
    store = get_store(request)
    config = get_config(request)
    out = []
    for entry in store.library_list(user_id):
        article = store.get_article(entry["article_id"])
        if article is None:
            continue
        out.append({
            "article_id": article.article_id,
            "title": article.title,
            "authors": article.authors,
            "saved_at": entry["saved_at"],
            "url": f"{config.abstract_url_base}/{article.article_id}",
        })
    return {"articles": out}


@router.get("/export")
def export_data(request: Request):
    user_id = require_user(request)
    store = get_store(request)
    dump = store.export_user_data(user_id)
    return Response(
        content=store.export_to_json(dump),
        media_type="application/json",
        headers={"Content-Disposition": f'attachment; filename="{user_id}.json"'},
    )


@router.delete("/account")
def delete_account(request: Request):
    user_id = require_user(request)
    store = get_store(request)
    store.delete_sessions(user_id)
    store.delete_user(user_id)
    return {"status": "deleted"}
