"""Topic-profile scoring and explanation templating.

An article's score for a user is the sum of its BM25 scores against
each profile topic. The explanation names the (up to) three topics that
contributed most, in boldface markup.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .index import InvertedIndex, bm25_topic_score


@dataclass
class ScoredArticle:
    article_id: str
    total_score: float = 0.0
    per_topic_scores: dict[str, float] = field(default_factory=dict)


def score_article_for_user(index: InvertedIndex, topics: list[str],
                           article_id: str) -> ScoredArticle:
    scored = ScoredArticle(article_id=article_id)
    for topic in topics:
        value = bm25_topic_score(index, topic, article_id)
        scored.per_topic_scores[topic] = value
        scored.total_score += value
    return scored


def top_k_for_user(index: InvertedIndex, topics: list[str],
                   candidate_ids: list[str], k: int) -> list[ScoredArticle]:
    """Best k candidates by total score, descending; zero-score articles
    are dropped (nothing to explain), ties broken by article id."""
    scored = [score_article_for_user(index, topics, article_id)
              for article_id in candidate_ids]
    positives = [s for s in scored if s.total_score > 0.0]
    positives.sort(key=lambda s: (-s.total_score, s.article_id))
    return positives[:k]


def explain(scored: ScoredArticle) -> str:
    """Template the top-3 contributing topics.

    Topics with zero contribution never appear; ties prefer the
    lexicographically smaller topic.
    """
    ranked = sorted(((topic, value) for topic, value in scored.per_topic_scores.items()
                     if value > 0.0),
                    key=lambda pair: (-pair[1], pair[0]))
    top = [topic for topic, _ in ranked[:3]]
    if not top:
        raise ValueError("article has no positively scoring topic")
    if len(top) == 1:
        return f"This article seems to be about **{top[0]}**"
    if len(top) == 2:
        return f"This article seems to be about **{top[0]}** and **{top[1]}**"
    return f"This article seems to be about **{top[0]}**, **{top[1]}** and **{top[2]}**"
