"""Shared request helpers for the HTTP layer."""

from __future__ import annotations

from datetime import datetime

from fastapi import HTTPException, Request

from ..config import Config
from ..models import ExperimentalSystem
from ..storage import Store


def get_store(request: Request) -> Store:
    return request.app.state.store


def get_config(request: Request) -> Config:
    return request.app.state.config


def now(request: Request) -> datetime:
    return request.app.state.clock()


def require_system(request: Request) -> ExperimentalSystem:
    """Resolve the api-key header to an active experimental system."""
    api_key = request.headers.get("api-key")
    if not api_key:
        raise HTTPException(401, "missing api key")
    system = get_store(request).system_by_key(api_key)
    if system is None:
        raise HTTPException(401, "unknown api key")
    if not system.active:
        raise HTTPException(403, "system deactivated")
    return system


def session_token(request: Request) -> str | None:
    header = request.headers.get("authorization")
    if header:
        if header.lower().startswith("bearer "):
            return header[7:].strip()
        return header.strip()
    return request.cookies.get("session")


def require_user(request: Request) -> str:
    """Resolve the session (Authorization header or cookie) to a user id."""
    token = session_token(request)
    if not token:
        raise HTTPException(401, "not signed in")
    user_id = get_store(request).session_user(token, now(request))
    if user_id is None:
        raise HTTPException(401, "session expired or invalid")
    return user_id


async def json_body(request: Request) -> dict:
    try:
        body = await request.json()
    except Exception:
        raise HTTPException(400, "request body must be JSON")
    if not isinstance(body, dict):
        raise HTTPException(400, "request body must be a JSON object")
    return body
