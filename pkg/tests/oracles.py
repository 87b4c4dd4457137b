"""Independent reference implementations the tests check the package against.

Everything in this module is written the slow, obvious way: explicit loops,
no imports from the package under test. When a test finds a disagreement,
one of the two sides is wrong, and this side is the easier one to audit.
"""

from __future__ import annotations

import math
import random


def team_draft_reference(ranked: dict[str, list[str]], k: int,
                         rng: random.Random) -> list[tuple[str, str]]:
    """Step-by-step team drafting over per-system ranked lists.

    Each round every system, in a freshly shuffled order, picks its
    highest-ranked item that nobody has taken yet. Systems with nothing
    left to offer sit the round out; a round where no one picks ends the
    draft early. Returns (item_id, system_id) pairs in slot order.

    Consumes the rng exactly once per round (the shuffle), so the same
    seeded generator can drive both this and the real multileaver.
    """
    slots: list[tuple[str, str]] = []
    taken: list[str] = []
    while len(slots) < k:
        order = sorted(ranked)
        rng.shuffle(order)
        picked_this_round = False
        for system in order:
            choice = None
            for item in ranked[system]:
                if item not in taken:
                    choice = item
                    break
            if choice is None:
                continue
            slots.append((choice, system))
            taken.append(choice)
            picked_this_round = True
            if len(slots) == k:
                break
        if not picked_this_round:
            break
    return slots


def ascii_terms(text: str) -> list[str]:
    """Lowercased runs of ASCII letters and digits, in order."""
    out: list[str] = []
    current: list[str] = []
    for ch in text.lower():
        if ch.isascii() and (ch.isalpha() or ch.isdigit()):
            current.append(ch)
        else:
            if current:
                out.append("".join(current))
                current = []
    if current:
        out.append("".join(current))
    return out


def bm25_score_reference(doc_terms: dict[str, list[str]], doc_id: str,
                         query: str, k1: float = 1.2, b: float = 0.75) -> float:
    """Brute-force BM25 of one query against one document.

    Recomputes df, idf and avgdl from scratch on every call; fine for the
    tiny corpora the tests use.
    """
    n_docs = len(doc_terms)
    avgdl = sum(len(terms) for terms in doc_terms.values()) / n_docs
    terms = doc_terms[doc_id]
    dl = len(terms)
    score = 0.0
    for term in ascii_terms(query):
        tf = terms.count(term)
        if tf == 0:
            continue
        df = sum(1 for other in doc_terms.values() if term in other)
        idf = math.log(1 + (n_docs - df + 0.5) / (df + 0.5))
        score += idf * (tf * (k1 + 1)) / (tf + k1 * (1 - b + b * dl / avgdl))
    return score


def impression_reward_reference(slots: list[tuple[str, str]],
                                events: list[tuple[str, str]],
                                system_id: str,
                                weights: dict[str, int]) -> int:
    """Reward one system earned on one impression.

    slots are (item_id, system_id) attributions; events are
    (item_id, event_type). An event counts for the system that
    contributed the item it touched.
    """
    mine = [item for item, owner in slots if owner == system_id]
    total = 0
    for item, event_type in events:
        if item in mine:
            total += weights.get(event_type, 0)
    return total
