"""Synthetic corpus and users for whole-platform runs.

Articles and users share a vocabulary of research fields, each a bag of
terms that appears nowhere else. An article writes a sample of its
fields' terms into its title and abstract; a user's hidden interests
are the weighted terms of a few fields. True relevance is the weight
fraction of a user's terms present in the article text, so
field-matching pairs score far above the cross-field floor of zero and
an article containing every user term scores exactly 1.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from datetime import date, timedelta

from ..models import Article
from ..baseline.index import tokenize

# Disjoint term banks: cross-field relevance is exactly zero, which
# keeps the oracle/random separation interpretable.
FIELDS: dict[str, tuple[str, ...]] = {
    "graph mining": ("graph", "subgraph", "motif", "community", "centrality",
                     "spectral", "triangle", "vertex"),
    "reinforcement learning": ("reinforcement", "policy", "bandit", "exploration",
                               "qvalue", "regret", "actor", "critic"),
    "information retrieval": ("retrieval", "ranking", "query", "relevance",
                              "indexing", "recall", "precision", "reranking"),
    "computer vision": ("image", "segmentation", "detection", "convolution",
                        "pixel", "occlusion", "depth", "keypoint"),
    "language processing": ("parsing", "translation", "tokenization", "syntax",
                            "semantics", "embedding", "pretraining", "grammar"),
    "database systems": ("transaction", "schema", "sharding", "partitioning",
                         "locking", "logging", "btree", "materialized"),
    "cryptography": ("encryption", "lattice", "signature", "zeroknowledge",
                     "cipher", "homomorphic", "nonce", "keypair"),
    "distributed systems": ("consensus", "replication", "quorum", "gossip",
                            "failover", "paxos", "leader", "throughput"),
    "optimization": ("convex", "gradient", "descent", "lagrangian", "duality",
                     "subgradient", "momentum", "annealing"),
    "quantum computing": ("qubit", "entanglement", "decoherence", "superposition",
                          "teleportation", "variational", "fidelity", "interference"),
    "robotics": ("manipulation", "trajectory", "kinematics", "grasping",
                 "odometry", "slam", "actuator", "waypoint"),
    "bioinformatics": ("genome", "protein", "sequencing", "alignment",
                       "phylogeny", "mutation", "transcriptome", "folding"),
}

_CATEGORY_CODES = {name: f"cs.S{i:02d}" for i, name in enumerate(sorted(FIELDS))}

_FILLER = (
    "the", "a", "of", "and", "for", "with", "over", "under", "we", "show",
    "propose", "study", "present", "introduce", "method", "approach", "results",
    "analysis", "model", "data", "experiments", "evaluate", "framework",
    "bound", "baseline", "task", "benchmark", "empirical", "setting", "novel",
)

_SURNAMES = ("Abe", "Bakker", "Costa", "Duval", "Egede", "Fischer", "Garza",
             "Haile", "Ito", "Jansen", "Kova", "Lindt", "Moreau", "Nagy",
             "Okafor", "Petit")


@dataclass
class SyntheticUser:
    email: str
    password: str
    name: str
    profile_topics: list[str]
    hidden_interest_terms: dict[str, float]
    click_base_rate: float
    save_rate_given_click: float
    user_id: str = ""  # assigned once registration returns the real id
    session: str = ""

    @property
    def total_weight(self) -> float:
        return sum(self.hidden_interest_terms.values())


def _make_article(article_id: str, published: date, rng: random.Random) -> Article:
    field_names = rng.sample(sorted(FIELDS), 2 if rng.random() < 0.3 else 1)
    terms: list[str] = []
    for name in field_names:
        bank = FIELDS[name]
        terms.extend(rng.sample(bank, rng.randint(5, 7)))
    rng.shuffle(terms)

    title_words = terms[:3] + [rng.choice(_FILLER) for _ in range(2)]
    rng.shuffle(title_words)
    body = terms[3:] + [rng.choice(_FILLER) for _ in range(10)]
    rng.shuffle(body)
    # Repeat the title terms in the abstract so either text alone carries
    # the field signal.
    abstract = " ".join(body + terms[:3])

    authors = [f"{chr(65 + rng.randrange(26))}. {rng.choice(_SURNAMES)}"
               for _ in range(rng.randint(1, 3))]
    return Article(
        article_id=article_id,
        title=" ".join(title_words).capitalize(),
        abstract=abstract.capitalize() + ".",
        authors=authors,
        categories=[_CATEGORY_CODES[name] for name in field_names],
        published_date=published,
    )


def make_corpus(n_days: int, articles_per_day: int, start: date,
                rng: random.Random) -> list[Article]:
    """One batch of articles per simulated day, ids in arXiv style."""
    corpus = []
    serial = 0
    for day in range(n_days):
        published = start + timedelta(days=day)
        prefix = f"{published.year % 100:02d}{published.month:02d}"
        for _ in range(articles_per_day):
            corpus.append(_make_article(f"{prefix}.{10000 + serial}", published, rng))
            serial += 1
    return corpus


def article_tokens(article: Article) -> frozenset:
    return frozenset(tokenize(article.title + " " + article.abstract))


def relevance(user: SyntheticUser, tokens: frozenset) -> float:
    """Weight fraction of the user's hidden terms present in the text.

    Terms are summed in sorted order so the result is bit-identical
    across processes regardless of hash randomization.
    """
    matched = sum(weight for term, weight in sorted(user.hidden_interest_terms.items())
                  if term in tokens)
    return matched / user.total_weight


def generate_population(n_users: int, corpus: list[Article], rng: random.Random,
                        fields_per_user: int = 3):
    """Users plus their true relevance function over the corpus.

    Relevance values are cached per (user, article) pair; over a long
    run the same pair is scored daily by every submitting system.
    """
    users = []
    for i in range(n_users):
        picked = rng.sample(sorted(FIELDS), fields_per_user)
        hidden = {term: rng.uniform(0.5, 1.5)
                  for name in picked for term in FIELDS[name]}
        users.append(SyntheticUser(
            email=f"user{i:04d}@sim.example",
            password=f"sim-pass-{i:04d}",
            name=f"Sim User {i}",
            profile_topics=list(picked),
            hidden_interest_terms=hidden,
            click_base_rate=rng.uniform(0.5, 0.9),
            save_rate_given_click=rng.uniform(0.3, 0.7),
        ))

    tokens = {a.article_id: article_tokens(a) for a in corpus}
    term_sets = {u.email: frozenset(u.hidden_interest_terms) for u in users}
    cache: dict[tuple[str, str], float] = {}

    def rel(user: SyntheticUser, article_id: str) -> float:
        key = (user.email, article_id)
        value = cache.get(key)
        if value is None:
            # Same quantity as relevance(), via set intersection: with
            # n_users * n_articles pairs the term-by-term scan adds up.
            # Sorted so the float sum is independent of set hash order.
            weights = user.hidden_interest_terms
            matched = sum(weights[t] for t in sorted(tokens[article_id] & term_sets[user.email]))
            value = cache[key] = matched / user.total_weight
        return value

    return users, rel
