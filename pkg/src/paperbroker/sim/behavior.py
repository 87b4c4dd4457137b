"""Interaction draws for one rendered impression.

Position-based examination without a cascade: the user examines each
rank independently with probability 1/log2(rank+1), clicks an examined
item with probability click_base_rate * relevance, and saves a clicked
item with probability save_rate_given_click * relevance.
"""

from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import dataclass

from ..models import topic_key
from ..baseline.index import tokenize


def examine_probability(rank: int) -> float:
    if rank < 1:
        raise ValueError("rank is 1-based")
    return 1.0 / math.log2(rank + 1)


@dataclass
class SlotOutcome:
    rank: int
    examined: bool
    clicked: bool
    saved: bool


def simulate_slots(relevances: list[float], click_base_rate: float,
                   save_rate_given_click: float, rng: random.Random) -> list[SlotOutcome]:
    """Draw one visit's outcomes for a ranked list of true relevances."""
    outcomes = []
    for i, rel in enumerate(relevances):
        rank = i + 1
        examined = rng.random() < examine_probability(rank)
        clicked = examined and rng.random() < click_base_rate * rel
        saved = clicked and rng.random() < save_rate_given_click * rel
        outcomes.append(SlotOutcome(rank=rank, examined=examined,
                                    clicked=clicked, saved=saved))
    return outcomes


def suggest_topics(titles: list[str], profile_topics: list[str],
                   limit: int = 3) -> list[str]:
    """Frequent title terms not already in the profile.

    Deliberately naive; it exists to put traffic on the topic pipeline,
    not to recommend well. Short tokens are noise, so only terms of four
    or more characters count.
    """
    counts = Counter(term for title in titles for term in tokenize(title)
                     if len(term) >= 4)
    taken = {topic_key(topic) for topic in profile_topics}
    ranked = sorted(counts.items(), key=lambda pair: (-pair[1], pair[0]))
    return [term for term, _ in ranked if topic_key(term) not in taken][:limit]
