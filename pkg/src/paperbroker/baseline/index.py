"""Native inverted index with BM25 scoring.

Documents are indexed over "title + ' ' + abstract". Tokenization is
deliberately plain: lowercase, split on anything non-alphanumeric, no
stemming, no stopwords. BM25 uses k1=1.2, b=0.75 and the smoothed
ln(1 + (N - df + 0.5)/(df + 0.5)) IDF, so scores are always >= 0.
"""

from __future__ import annotations

import math
import re
from collections import Counter

K1 = 1.2
B = 0.75

_SPLIT = re.compile(r"[^a-z0-9]+")


def tokenize(text: str) -> list[str]:
    return [t for t in _SPLIT.split(text.lower()) if t]


class InvertedIndex:
    def __init__(self):
        self.postings: dict[str, dict[str, int]] = {}  # term -> doc_id -> tf
        self.doc_len: dict[str, int] = {}
        self.avgdl = 0.0

    @property
    def doc_count(self) -> int:
        return len(self.doc_len)

    @classmethod
    def build(cls, docs: dict[str, str]) -> "InvertedIndex":
        """docs maps doc_id to its full field text."""
        index = cls()
        for doc_id, text in docs.items():
            tokens = tokenize(text)
            index.doc_len[doc_id] = len(tokens)
            for term, tf in Counter(tokens).items():
                index.postings.setdefault(term, {})[doc_id] = tf
        if index.doc_len:
            index.avgdl = sum(index.doc_len.values()) / len(index.doc_len)
        return index

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, {}))
        return math.log(1.0 + (self.doc_count - df + 0.5) / (df + 0.5))

    def term_score(self, term: str, doc_id: str) -> float:
        tf = self.postings.get(term, {}).get(doc_id, 0)
        if tf == 0:
            return 0.0
        dl = self.doc_len[doc_id]
        # avgdl > 0 whenever any posting exists
        norm = tf + K1 * (1.0 - B + B * dl / self.avgdl)
        return self.idf(term) * tf * (K1 + 1.0) / norm


def bm25_topic_score(index: InvertedIndex, topic: str, article_id: str) -> float:
    """Sum of BM25 term scores for the topic's tokens; terms absent from
    the document contribute 0. Raises for unindexed articles."""
    if article_id not in index.doc_len:
        raise KeyError(f"article not indexed: {article_id}")
    return sum(index.term_score(term, article_id) for term in tokenize(topic))
