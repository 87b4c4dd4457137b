"""Reward-based online metrics over the interaction log.

A system's reward within one impression is the weighted sum of user
interactions with the slots it sourced. Dividing by the impression's
total reward gives Normalized Reward, which sums to 1 across the
participating systems; averaging a system's normalized rewards over its
signal-bearing impressions in a period gives Mean Normalized Reward,
the leaderboard metric.

Everything is computed lazily from stored impressions and events; there
are no incremental counters to drift out of sync.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date

from .models import Impression, InteractionEvent
from .storage import Store


@dataclass
class SystemScorecard:
    system_id: str
    period: tuple[date, date]
    impressions: int
    mean_normalized_reward: float


def impression_reward(impression: Impression, events: list[InteractionEvent],
                      system_id: str, weights: dict[str, int]) -> int:
    """Weighted sum of events on slots this system sourced."""
    source = {slot.item_id: slot.system_id for slot in impression.slots}
    total = 0
    for event in events:
        if source.get(event.item_id) == system_id:
            total += weights.get(event.type, 0)
    return total


def rewards_by_system(impression: Impression, events: list[InteractionEvent],
                      weights: dict[str, int]) -> dict[str, int]:
    """Per-system rewards for one impression; every participant appears,
    with 0 for systems whose slots drew no interaction."""
    source = {slot.item_id: slot.system_id for slot in impression.slots}
    totals = {system_id: 0 for system_id in impression.selected_systems}
    for event in events:
        system_id = source.get(event.item_id)
        if system_id is None:
            continue
        totals[system_id] = totals.get(system_id, 0) + weights.get(event.type, 0)
    return totals


def normalized_rewards(impression: Impression, events: list[InteractionEvent],
                       weights: dict[str, int]) -> dict[str, float]:
    """Each participant's share of the impression's total reward.

    An impression whose total reward is 0 carries no preference signal
    and yields an empty map.
    """
    rewards = rewards_by_system(impression, events, weights)
    total = sum(rewards.values())
    if total == 0:
        return {}
    return {system_id: reward / total for system_id, reward in rewards.items()}


def mean_normalized_reward(store: Store, system_id: str, period: tuple[date, date],
                           weights: dict[str, int], kind: str = "article") -> SystemScorecard:
    start, end = period
    if end < start:
        raise ValueError("period end before start")
    impressions = 0
    shares: list[float] = []
    for impression in store.impressions_in_period(start, end, kind):
        if system_id not in impression.selected_systems:
            continue
        impressions += 1
        events = store.events_for_impression(impression.impression_id)
        normalized = normalized_rewards(impression, events, weights)
        if normalized:
            shares.append(normalized[system_id])
    mnr = sum(shares) / len(shares) if shares else 0.0
    return SystemScorecard(system_id=system_id, period=period,
                           impressions=impressions, mean_normalized_reward=mnr)


def leaderboard(store: Store, period: tuple[date, date], weights: dict[str, int],
                kind: str = "article") -> list[SystemScorecard]:
    """Scorecards for every system that partook in the period, best first;
    ties broken by system id so the order is stable."""
    start, end = period
    if end < start:
        raise ValueError("period end before start")
    partaken: dict[str, int] = {}
    shares: dict[str, list[float]] = {}
    for impression in store.impressions_in_period(start, end, kind):
        events = store.events_for_impression(impression.impression_id)
        normalized = normalized_rewards(impression, events, weights)
        for system_id in impression.selected_systems:
            partaken[system_id] = partaken.get(system_id, 0) + 1
            if normalized:
                shares.setdefault(system_id, []).append(normalized[system_id])
    cards = []
    for system_id, count in partaken.items():
        values = shares.get(system_id, [])
        mnr = sum(values) / len(values) if values else 0.0
        cards.append(SystemScorecard(system_id=system_id, period=period,
                                     impressions=count, mean_normalized_reward=mnr))
    cards.sort(key=lambda c: (-c.mean_normalized_reward, c.system_id))
    return cards
