"""paperbroker — a living-lab broker for scientific-literature recommendation.

Experimental recommender systems upload per-user ranked recommendations
through a versioned HTTP API; the broker multileaves them into daily
impressions, serves them to end users via web feed and email digests,
logs interactions, and scores systems with reward-based online metrics.
"""

__version__ = "0.1.0"
