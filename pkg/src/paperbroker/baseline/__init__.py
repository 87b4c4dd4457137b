"""Reference experimental system: BM25 over user topics, with templated
explanations, speaking the full broker client protocol."""

from .index import InvertedIndex, bm25_topic_score, tokenize
from .recommender import ScoredArticle, explain, score_article_for_user, top_k_for_user
from .client import ClientError, run_client_cycle

__all__ = [
    "InvertedIndex", "bm25_topic_score", "tokenize",
    "ScoredArticle", "explain", "score_article_for_user", "top_k_for_user",
    "ClientError", "run_client_cycle",
]
