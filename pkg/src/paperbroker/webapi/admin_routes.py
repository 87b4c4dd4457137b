"""Read-only admin endpoints for system owners.

The leaderboard is visible to every registered system, but competitor
identities are masked: the caller sees its own name and stable
"system-<n>" labels for everyone else.
"""

from __future__ import annotations

from datetime import date

from fastapi import APIRouter, HTTPException, Request

from ..evaluation import leaderboard
from .deps import get_config, get_store, require_system

router = APIRouter(prefix="/admin")


@router.get("/leaderboard")
def leaderboard_endpoint(request: Request):
    caller = require_system(request)
    store = get_store(request)
    config = get_config(request)
    params = request.query_params
    try:
        start = date.fromisoformat(params.get("from", ""))
        end = date.fromisoformat(params.get("to", ""))
    except ValueError:
        raise HTTPException(400, "from and to must be ISO dates")
    if end < start:
        raise HTTPException(400, "to before from")
    kind_param = params.get("kind", "articles")
    if kind_param not in ("articles", "topics"):
        raise HTTPException(400, "kind must be articles or topics")
    kind = "article" if kind_param == "articles" else "topic"

    pseudonyms = {system_id: f"system-{n}"
                  for n, system_id in enumerate(sorted(s.system_id for s in store.all_systems()), 1)}
    rows = []
    for card in leaderboard(store, (start, end), config.reward_weights, kind):
        if card.system_id == caller.system_id:
            label = caller.name
        else:
            label = pseudonyms.get(card.system_id, "system-?")
        rows.append({
            "system": label,
            "impressions": card.impressions,
            "mean_normalized_reward": card.mean_normalized_reward,
        })
    return {"from": start.isoformat(), "to": end.isoformat(), "kind": kind_param,
            "leaderboard": rows}
