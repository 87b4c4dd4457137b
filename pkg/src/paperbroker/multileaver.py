"""Fair system selection and team-draft multileaving.

Each day the broker picks a handful of systems per user, preferring
systems with fewer impressions so exposure stays balanced, then merges
their per-user rankings into a single top-k list. Team draft keeps slot
attribution: every slot remembers which system put it there, which is
what reward accounting needs.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from datetime import date, datetime

from .models import Impression, Recommendation, Slot, topic_key, utc_now
from .storage import Store

MASK64 = (1 << 64) - 1


class JobAlreadyRan(Exception):
    pass


@dataclass
class InterleavingPlan:
    user_id: str
    date: date
    selected_systems: list[str]
    per_system_inputs: dict[str, list[Recommendation]]
    rng_seed: int


@dataclass
class DailyJobReport:
    date: date
    impressions_created: int = 0
    users_skipped: int = 0
    counts_after: dict[str, int] = field(default_factory=dict)


def derive_seed(global_seed: int, on_date: date, user_id: str, kind: str = "article") -> int:
    """Stable per-(seed, date, user, kind) seed, replayable for audit.

    Capped to 63 bits so the stored copy fits a signed SQLite integer.
    """
    material = f"{global_seed}:{on_date.isoformat()}:{user_id}:{kind}".encode()
    return int.from_bytes(hashlib.sha256(material).digest()[:8], "big") & (MASK64 >> 1)


def select_systems(candidates: dict[str, int], n: int, rng: random.Random) -> list[str]:
    """Sample min(n, len) distinct systems, each draw weighted 1/(1+count).

    Systems with fewer impressions are preferred; sampling is without
    replacement, iterating draws over the remaining pool.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    remaining = sorted(candidates)
    chosen: list[str] = []
    while remaining and len(chosen) < n:
        weights = [1.0 / (1.0 + candidates[s]) for s in remaining]
        pick = rng.random() * sum(weights)
        acc = 0.0
        index = len(remaining) - 1  # float-edge fallback: last system
        for i, w in enumerate(weights):
            acc += w
            if pick < acc:
                index = i
                break
        chosen.append(remaining.pop(index))
    return chosen


def team_draft_multileave(inputs: dict[str, list[str]], k: int,
                          rng: random.Random) -> list[tuple[str, str]]:
    """Merge ranked lists into k slots of (item, source_system).

    Rounds repeat until k slots are filled or every input is exhausted.
    Each round draws one uniformly random permutation of the system ids
    (rng.shuffle over the sorted ids, exactly one shuffle per round);
    systems then take turns contributing their highest-ranked item not
    already in the output. A system whose remaining items are all taken
    is skipped.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    slots: list[tuple[str, str]] = []
    used: set[str] = set()
    cursor = {system: 0 for system in inputs}
    systems = sorted(inputs)
    while len(slots) < k:
        order = list(systems)
        rng.shuffle(order)
        contributed = False
        for system in order:
            if len(slots) >= k:
                break
            ranking = inputs[system]
            i = cursor[system]
            while i < len(ranking) and ranking[i] in used:
                i += 1
            cursor[system] = i
            if i >= len(ranking):
                continue
            item = ranking[i]
            used.add(item)
            cursor[system] = i + 1
            slots.append((item, system))
            contributed = True
        if not contributed:
            break
    return slots


def plan_interleaving(store: Store, user_id: str, on_date: date, kind: str,
                      counts: dict[str, int], systems_per_impression: int,
                      top_k: int, rng_seed: int,
                      stocked: list[str] | None = None) -> InterleavingPlan | None:
    """Decide which systems join a user's impression and with what inputs.

    Only systems with stock for this user are candidates; returns None
    when nobody has anything to offer. Selection uses the supplied
    impression-count snapshot, not live counts. Callers that already know
    which systems hold stock (the daily job snapshots all users at once)
    can pass that in via `stocked`.
    """
    if stocked is None:
        stocked = store.systems_with_stock(user_id, kind)
    stocked = [s for s in stocked if s in counts]
    if not stocked:
        return None
    rng = random.Random(rng_seed)
    selected = select_systems({s: counts[s] for s in stocked},
                              systems_per_impression, rng)
    if kind == "article":
        per_system = {s: store.take_top_k(user_id, s, top_k) for s in selected}
    else:
        per_system = {s: store.take_topic_top_k(user_id, s, top_k) for s in selected}
    return InterleavingPlan(user_id=user_id, date=on_date, selected_systems=selected,
                            per_system_inputs=per_system, rng_seed=rng_seed)


def realize_plan(store: Store, plan: InterleavingPlan, kind: str, top_k: int) -> Impression:
    """Multileave a plan's inputs and persist the resulting impression."""
    # Drafting from a child seed keeps draft order independent of how many
    # draws selection consumed, while staying replayable from rng_seed.
    draft_rng = random.Random((plan.rng_seed ^ 0x9E3779B97F4A7C15) & MASK64)
    if kind == "article":
        rankings = {s: [r.article_id for r in recs]
                    for s, recs in plan.per_system_inputs.items()}
        explanations = {(r.system_id, r.article_id): r.explanation
                        for recs in plan.per_system_inputs.values() for r in recs}
    else:
        rankings = {s: [topic_key(r.topic) for r in recs]
                    for s, recs in plan.per_system_inputs.items()}
        explanations = {(r.system_id, topic_key(r.topic)): r.topic
                        for recs in plan.per_system_inputs.values() for r in recs}
    merged = team_draft_multileave(rankings, top_k, draft_rng)
    slots = [Slot(rank=i + 1, item_id=item, system_id=system,
                  explanation=explanations.get((system, item)))
             for i, (item, system) in enumerate(merged)]
    impression = Impression(
        impression_id=store.next_impression_id(plan.user_id, plan.date, kind),
        user_id=plan.user_id,
        date=plan.date,
        kind=kind,
        slots=slots,
        selected_systems=plan.selected_systems,
        rng_seed=plan.rng_seed,
    )
    store.record_impression(impression)
    return impression


def build_impression(store: Store, user_id: str, on_date: date, kind: str,
                     counts: dict[str, int], systems_per_impression: int,
                     top_k: int, rng_seed: int,
                     stocked: list[str] | None = None) -> Impression | None:
    plan = plan_interleaving(store, user_id, on_date, kind, counts,
                             systems_per_impression, top_k, rng_seed,
                             stocked=stocked)
    if plan is None:
        return None
    return realize_plan(store, plan, kind, top_k)


def run_daily_job(store: Store, on_date: date, *, global_seed: int,
                  systems_per_impression: int, top_k: int,
                  now: datetime | None = None) -> DailyJobReport:
    """Interleave one article impression per active user with stock.

    Refuses to run twice for the same date. Impression counts used for
    selection are snapshotted at job start, so every user's selection
    that day sees the same counts.
    """
    if store.job_succeeded("interleave", on_date):
        raise JobAlreadyRan(f"interleave already ran for {on_date.isoformat()}")
    now = now or utc_now()
    entry = store.start_job("interleave", on_date, now)
    report = DailyJobReport(date=on_date)
    try:
        active = store.active_system_ids()
        counts = store.impression_counts(active)
        # Stacks are per-user, so a stock snapshot taken up front stays
        # valid while the loop consumes each user's own stacks.
        stock = store.article_stock_by_user()
        # One transaction for the whole day: a failure mid-loop rolls every
        # impression back, so a rerun after a fix starts from a clean date.
        with store.tx():
            for user_id in store.all_active_user_ids():
                seed = derive_seed(global_seed, on_date, user_id, "article")
                impression = build_impression(
                    store, user_id, on_date, "article", counts,
                    systems_per_impression, top_k, seed,
                    stocked=stock.get(user_id, []))
                if impression is None:
                    report.users_skipped += 1
                else:
                    report.impressions_created += 1
    except BaseException:
        store.finish_job(entry, "failed", utc_now())
        raise
    report.counts_after = store.impression_counts(store.active_system_ids())
    store.finish_job(entry, "ok", utc_now())
    return report
