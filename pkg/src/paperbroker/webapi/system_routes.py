"""Broker API for experimental systems.

Paths follow the documented client protocol: settings at the root,
user batches, user info, the candidate pool, article metadata, shown
items per user, and batched recommendation upload guarded by the daily
submission window.

Handlers are async and return JSONResponse directly; batch endpoints
see thousands of items per day, so responses skip the framework's
reflective serialization and lookups hit storage in bulk.
"""

from __future__ import annotations

from fastapi import APIRouter, HTTPException, Request
from fastapi.responses import JSONResponse

from ..ingestion import candidate_pool
from ..models import (
    ValidationError,
    in_submission_window,
    topic_key,
    validate_recommendation,
    validate_topic_recommendation,
)
from .deps import get_config, get_store, now, require_system

router = APIRouter()


def settings_payload(request: Request) -> dict:
    return get_config(request).settings().as_dict()


@router.get("/users")
async def list_users(request: Request):
    require_system(request)
    raw = request.query_params.get("from", "0")
    try:
        offset = int(raw)
    except ValueError:
        raise HTTPException(400, f"bad from offset: {raw!r}")
    if offset < 0:
        raise HTTPException(400, "from offset must be non-negative")
    config = get_config(request)
    ids, total = get_store(request).list_active_user_ids(offset, config.user_batch_size)
    next_offset = offset + len(ids)
    return JSONResponse({
        "user_ids": ids,
        "total": total,
        "next_offset": next_offset if next_offset < total else None,
    })


def _split_ids(request: Request, param: str) -> list[str]:
    raw = request.query_params.get(param, "")
    return [part for part in (p.strip() for p in raw.split(",")) if part]


@router.get("/user_info")
async def user_info(request: Request):
    require_system(request)
    store = get_store(request)
    ids = _split_ids(request, "ids")
    if len(ids) > get_config(request).user_batch_size:
        raise HTTPException(400, "too many ids")
    out = {}
    for user_id in ids:
        if not store.has_user(user_id):
            continue
        profile = store.get_user(user_id)
        if not profile.active:
            continue
        # Privacy: never expose email or name to systems.
        out[user_id] = {
            "topics": profile.topics,
            "external_links": profile.external_links,
            "registered_at": profile.registered_at.isoformat(),
        }
    return JSONResponse(out)


@router.get("/articles")
async def list_articles(request: Request):
    require_system(request)
    config = get_config(request)
    today = now(request).date()
    return JSONResponse({
        "date": today.isoformat(),
        "article_ids": candidate_pool(get_store(request), today, config.window_days),
    })


@router.get("/article_data")
async def article_data(request: Request):
    require_system(request)
    store = get_store(request)
    ids = _split_ids(request, "article_id")
    if len(ids) > get_config(request).recommendation_batch_max:
        raise HTTPException(400, "too many article ids")
    articles = store.get_articles(ids)
    return JSONResponse({article_id: {
        "title": article.title,
        "abstract": article.abstract,
        "authors": article.authors,
        "categories": article.categories,
        "published": article.published_date.isoformat(),
    } for article_id, article in articles.items()})


@router.get("/user_feedback/articles")
async def shown_articles(request: Request):
    require_system(request)
    store = get_store(request)
    ids = _split_ids(request, "user_id")
    if len(ids) > get_config(request).user_batch_size:
        raise HTTPException(400, "too many user ids")
    known = store.known_user_ids(ids)
    shown = store.shown_article_ids_many([i for i in ids if i in known])
    return JSONResponse({user_id: shown.get(user_id, [])
                         for user_id in ids if user_id in known})


@router.get("/user_feedback/topics")
async def shown_topics(request: Request):
    require_system(request)
    store = get_store(request)
    ids = _split_ids(request, "user_id")
    if len(ids) > get_config(request).user_batch_size:
        raise HTTPException(400, "too many user ids")
    out = {}
    for user_id in ids:
        if not store.has_user(user_id):
            continue
        shown = store.impressions_for_user(user_id, kind="topic")
        keys = sorted({slot.item_id for imp in shown for slot in imp.slots}
                      | store.rejected_topic_keys(user_id))
        out[user_id] = keys
    return JSONResponse(out)


async def _recommendation_payload(request: Request) -> dict:
    try:
        body = await request.json()
    except Exception:
        raise HTTPException(400, "request body must be JSON")
    if not isinstance(body, dict) or not all(isinstance(v, list) for v in body.values()):
        raise HTTPException(400, "payload must map user_id to a list of recommendations")
    return body


def _check_batch_and_window(request: Request, body: dict) -> None:
    config = get_config(request)
    total_items = sum(len(v) for v in body.values())
    if total_items > config.recommendation_batch_max:
        raise HTTPException(413, "batch larger than recommendation_batch_max")
    if not in_submission_window(now(request), config.settings()):
        raise HTTPException(403, "outside submission window")


@router.post("/recommendations/articles")
async def post_article_recommendations(request: Request):
    system = require_system(request)
    store = get_store(request)
    body = await _recommendation_payload(request)
    _check_batch_and_window(request, body)

    submitted_at = now(request)
    known_users = store.known_user_ids(list(body))
    pending = []  # (sequence, rec); article existence checked in bulk below
    rejected = []  # (sequence, report entry)
    sequence = 0
    for user_id, items in body.items():
        known_user = user_id in known_users
        for item in items:
            sequence += 1
            if not isinstance(item, dict):
                rejected.append((sequence, {"user_id": user_id, "article_id": None,
                                            "reason": "recommendation must be an object"}))
                continue
            article_id = item.get("article_id")
            if not known_user:
                rejected.append((sequence, {"user_id": user_id, "article_id": article_id,
                                            "reason": "unknown user"}))
                continue
            try:
                rec = validate_recommendation(
                    {**item, "system_id": system.system_id, "user_id": user_id},
                    submitted_at=submitted_at)
            except ValidationError as exc:
                rejected.append((sequence, {"user_id": user_id, "article_id": article_id,
                                            "reason": exc.errors[0]}))
                continue
            pending.append((sequence, rec))

    known_articles = store.known_article_ids([rec.article_id for _, rec in pending])
    valid = []
    for seq, rec in pending:
        if rec.article_id in known_articles:
            valid.append(rec)
        else:
            rejected.append((seq, {"user_id": rec.user_id, "article_id": rec.article_id,
                                   "reason": "unknown article"}))
    rejected.sort(key=lambda pair: pair[0])

    accepted = store.push_recommendations(valid)
    return JSONResponse({
        "accepted": accepted,
        "dropped_shown": len(valid) - accepted,
        "rejected": [entry for _, entry in rejected],
    })


@router.post("/recommendations/topics")
async def post_topic_recommendations(request: Request):
    system = require_system(request)
    store = get_store(request)
    body = await _recommendation_payload(request)
    _check_batch_and_window(request, body)

    submitted_at = now(request)
    known_users = store.known_user_ids(list(body))
    valid = []
    rejected = []
    for user_id, items in body.items():
        known_user = user_id in known_users
        profile_keys = store.profile_topic_keys(user_id) if known_user else set()
        for item in items:
            if not isinstance(item, dict):
                rejected.append({"user_id": user_id, "topic": None,
                                 "reason": "recommendation must be an object"})
                continue
            if not known_user:
                rejected.append({"user_id": user_id, "topic": item.get("topic"),
                                 "reason": "unknown user"})
                continue
            try:
                rec = validate_topic_recommendation(
                    {**item, "system_id": system.system_id, "user_id": user_id},
                    submitted_at=submitted_at)
            except ValidationError as exc:
                rejected.append({"user_id": user_id, "topic": item.get("topic"),
                                 "reason": exc.errors[0]})
                continue
            if topic_key(rec.topic) in profile_keys:
                rejected.append({"user_id": user_id, "topic": rec.topic,
                                 "reason": "topic already in profile"})
                continue
            valid.append(rec)
    accepted = store.push_topic_recommendations(valid)
    return JSONResponse({
        "accepted": accepted,
        "dropped_shown": len(valid) - accepted,
        "rejected": rejected,
    })
