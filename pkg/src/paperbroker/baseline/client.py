"""The broker client protocol, end to end.

One cycle walks the documented steps: fetch API settings, page through
users, fetch their profiles, fetch the candidate pool and article
metadata, ask which articles each user has already been shown, score
and explain locally, then upload recommendations in batches. Any HTTP
failure aborts with the step number it happened at.

The transport just needs get/post with params/json/headers (httpx.Client
and the in-process driver both qualify), so the same code runs against
a remote broker or an app object in tests.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .index import InvertedIndex
from .recommender import explain, top_k_for_user

log = logging.getLogger(__name__)


class ClientError(RuntimeError):
    pass


@dataclass
class CycleReport:
    users_seen: int = 0
    users_submitted: int = 0
    recommendations_submitted: int = 0
    batches_posted: int = 0
    rejected: list[dict] = field(default_factory=list)


def _call(transport, method: str, path: str, step: int, *, params=None,
          json=None, headers=None):
    try:
        if method == "GET":
            resp = transport.get(path, params=params, headers=headers)
        else:
            resp = transport.post(path, json=json, headers=headers)
    except Exception as exc:
        raise ClientError(f"step {step}: transport failure: {exc}") from exc
    if resp.status_code >= 400:
        try:
            detail = resp.json().get("error", "")
        except Exception:
            detail = ""
        raise ClientError(f"step {step}: HTTP {resp.status_code} {detail}".rstrip())
    return resp.json()


def _chunks(items: list, size: int):
    for i in range(0, len(items), size):
        yield items[i:i + size]


def run_client_cycle(transport, api_key: str) -> CycleReport:
    headers = {"api-key": api_key}
    report = CycleReport()

    # Step 1: settings.
    settings = _call(transport, "GET", "/", 1, headers=headers)
    user_batch = settings["user_batch_size"]
    rec_batch_max = settings["recommendation_batch_max"]
    top_k = settings["top_k"]

    # Step 4 is user-independent; fetch the pool and its metadata once.
    pool = _call(transport, "GET", "/articles", 4, headers=headers)["article_ids"]
    docs: dict[str, str] = {}
    for chunk in _chunks(pool, rec_batch_max):
        data = _call(transport, "GET", "/article_data", 5,
                     params={"article_id": ",".join(chunk)}, headers=headers)
        for article_id, fields in data.items():
            docs[article_id] = fields["title"] + " " + fields["abstract"]
    index = InvertedIndex.build(docs)

    pending: dict[str, list[dict]] = {}
    pending_count = 0

    def flush():
        nonlocal pending, pending_count
        if not pending:
            return
        result = _call(transport, "POST", "/recommendations/articles", 8,
                       json=pending, headers=headers)
        report.batches_posted += 1
        report.recommendations_submitted += result["accepted"]
        report.rejected.extend(result["rejected"])
        pending = {}
        pending_count = 0

    offset = 0
    while True:
        # Step 2: a batch of user ids.
        page = _call(transport, "GET", "/users", 2,
                     params={"from": offset}, headers=headers)
        user_ids = page["user_ids"]
        if not user_ids:
            break
        report.users_seen += len(user_ids)

        # Step 3: their profiles.
        info = _call(transport, "GET", "/user_info", 3,
                     params={"ids": ",".join(user_ids)}, headers=headers)

        # Step 6: already-shown articles, to filter before scoring.
        shown = _call(transport, "GET", "/user_feedback/articles", 6,
                      params={"user_id": ",".join(user_ids)}, headers=headers)

        for user_id in user_ids:
            profile = info.get(user_id)
            if profile is None:
                continue
            seen = set(shown.get(user_id, []))
            candidates = [a for a in pool if a in docs and a not in seen]
            # Step 7: score against the topic profile and explain.
            ranked = top_k_for_user(index, profile["topics"], candidates, top_k)
            if not ranked:
                continue
            recs = [{"article_id": s.article_id, "score": s.total_score,
                     "explanation": explain(s)} for s in ranked]
            if pending_count + len(recs) > rec_batch_max:
                flush()
            pending[user_id] = recs
            pending_count += len(recs)
            report.users_submitted += 1

        if page.get("next_offset") is None:
            break
        offset = page["next_offset"]

    # Step 8 (final flush); step 9 is the loop above.
    flush()
    log.info("cycle: %d users seen, %d submitted, %d recommendations",
             report.users_seen, report.users_submitted, report.recommendations_submitted)
    return report
