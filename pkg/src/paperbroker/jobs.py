"""Operator operations and the daily batch chain.

System registration (key shown exactly once), plus the four daily jobs:
ingest, interleave, digest, expire sweep. Each job records itself in
the job ledger and refuses to run twice for the same date, which makes
the whole chain replay-safe.
"""

from __future__ import annotations

import logging
from datetime import date, datetime, timedelta

from . import digest as digest_mod
from . import ingestion, multileaver
from .auth import derive_system_id, new_api_key
from .config import Config
from .models import TOPIC_EVENT_TYPES, ExperimentalSystem, InteractionEvent, utc_now
from .multileaver import JobAlreadyRan
from .storage import Store, new_event_id

log = logging.getLogger(__name__)

TOPIC_EXPIRY_DAYS = 7


def create_system(store: Store, name: str) -> dict:
    """Register an experimental system; the API key is returned here and
    never shown again."""
    name = name.strip()
    if not name:
        raise ValueError("system name must not be empty")
    system = ExperimentalSystem(
        system_id=derive_system_id(name),
        api_key=new_api_key(),
        name=name,
    )
    store.create_system(system)
    return {"system_id": system.system_id, "api_key": system.api_key, "name": name}


def run_ingest_job(store: Store, on_date: date, path: str | None,
                   now: datetime | None = None, remote_url: str | None = None) -> dict:
    if (path is None) == (remote_url is None):
        raise ValueError("exactly one of path and remote_url required")
    if store.job_succeeded("ingest", on_date):
        raise JobAlreadyRan(f"ingest already ran for {on_date.isoformat()}")
    entry = store.start_job("ingest", on_date, now or utc_now())
    try:
        if remote_url is not None:
            report = ingestion.ingest_remote(store, remote_url)
        else:
            report = ingestion.ingest_file(store, path)
    except BaseException:
        store.finish_job(entry, "failed", utc_now())
        raise
    store.finish_job(entry, "ok", utc_now())
    return {"accepted": report.accepted, "updated": report.updated,
            "rejected": report.rejected}


def expire_sweep(store: Store, on_date: date, window_days: int,
                 now: datetime | None = None) -> dict:
    """Purge stack entries whose articles left the candidate window, and
    mark week-old untouched topic suggestions as expired."""
    if store.job_succeeded("expire_sweep", on_date):
        raise JobAlreadyRan(f"expire_sweep already ran for {on_date.isoformat()}")
    at = now or utc_now()
    entry = store.start_job("expire_sweep", on_date, at)
    expired_topics = 0
    try:
        purged = store.purge_expired_stack_entries(on_date, window_days)
        cutoff = on_date - timedelta(days=TOPIC_EXPIRY_DAYS)
        for impression in store.impressions_in_period(date.min, cutoff, kind="topic"):
            resolved = {e.item_id for e in store.events_for_impression(impression.impression_id)
                        if e.type in TOPIC_EVENT_TYPES}
            for slot in impression.slots:
                if slot.item_id in resolved:
                    continue
                store.record_interaction(InteractionEvent(
                    event_id=new_event_id(), impression_id=impression.impression_id,
                    user_id=impression.user_id, item_id=slot.item_id,
                    type="topic_expired", occurred_at=at))
                expired_topics += 1
    except BaseException:
        store.finish_job(entry, "failed", utc_now())
        raise
    store.finish_job(entry, "ok", utc_now())
    return {"stack_entries_purged": purged, "topics_expired": expired_topics}


def run_all(store: Store, config: Config, on_date: date,
            now: datetime | None = None) -> list[dict]:
    """The daily chain: ingest (when a file is configured), interleave,
    digest, expire sweep. Already-completed jobs are skipped; a real
    failure stops the chain."""
    results = []

    def attempt(job_name, fn):
        try:
            outcome = fn()
        except JobAlreadyRan:
            results.append({"job": job_name, "outcome": "skipped"})
            return True
        except Exception as exc:
            log.error("%s failed for %s: %s", job_name, on_date.isoformat(), exc)
            results.append({"job": job_name, "outcome": f"failed: {exc}"})
            return False
        results.append({"job": job_name, "outcome": "ok", "detail": outcome})
        return True

    if config.ingest_file:
        if not attempt("ingest", lambda: run_ingest_job(store, on_date, config.ingest_file, now)):
            return results
    def interleave():
        report = multileaver.run_daily_job(
            store, on_date, global_seed=config.seed,
            systems_per_impression=config.systems_per_impression,
            top_k=config.top_k, now=now)
        return {"impressions_created": report.impressions_created,
                "users_skipped": report.users_skipped}

    if not attempt("interleave", interleave):
        return results
    if not attempt("digest", lambda: digest_mod.run_digest_job(
            store, on_date, base_url=config.base_url, from_addr=config.from_addr,
            outbox_dir=config.outbox_dir, now=now)):
        return results
    attempt("expire_sweep", lambda: expire_sweep(store, on_date, config.window_days, now))
    return results
