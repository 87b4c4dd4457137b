"""Platform configuration.

Loaded from a JSON file with nested sections (api, pool, interleave,
rewards, digest, storage, ingest, auth); every key has a default so a
missing file or section is fine.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from .models import ApiSettings

DEFAULT_REWARD_WEIGHTS = {
    "saved": 5,
    "clicked_email": 3,
    "clicked_web": 3,
    "seen_email": 0,
    "seen_web": 0,
    "topic_accepted": 1,
    "topic_rejected": 0,
    "topic_refreshed": 0,
    "topic_expired": 0,
}


@dataclass
class Config:
    # api.*
    user_batch_size: int = 100
    recommendation_batch_max: int = 100
    window_start_utc: str = "00:30"
    window_hours: float = 2.5
    # pool.*
    window_days: int = 7
    # interleave.*
    top_k: int = 10
    systems_per_impression: int = 3
    seed: int = 0
    # rewards.*
    reward_weights: dict = field(default_factory=lambda: dict(DEFAULT_REWARD_WEIGHTS))
    # digest.*
    base_url: str = "http://localhost:8000"
    outbox_dir: str = "outbox"
    abstract_url_base: str = "https://arxiv.org/abs"
    from_addr: str = "digest@paperbroker.local"
    # storage.*
    db_path: str = "paperbroker.db"
    # ingest.*
    ingest_file: str | None = None
    remote_feed_url: str | None = None
    # auth.*
    pbkdf2_iterations: int = 100_000

    def settings(self) -> ApiSettings:
        s = ApiSettings(
            user_batch_size=self.user_batch_size,
            recommendation_batch_max=self.recommendation_batch_max,
            candidate_window_days=self.window_days,
            window_start_utc=self.window_start_utc,
            window_hours=self.window_hours,
            top_k=self.top_k,
        )
        s.validate()
        return s


_SECTION_KEYS = {
    "api": {
        "user_batch_size": "user_batch_size",
        "recommendation_batch_max": "recommendation_batch_max",
        "window_start_utc": "window_start_utc",
        "window_hours": "window_hours",
    },
    "pool": {"window_days": "window_days"},
    "interleave": {
        "top_k": "top_k",
        "systems_per_impression": "systems_per_impression",
        "seed": "seed",
    },
    "digest": {
        "base_url": "base_url",
        "outbox_dir": "outbox_dir",
        "abstract_url_base": "abstract_url_base",
        "from_addr": "from_addr",
    },
    "storage": {"db_path": "db_path"},
    "ingest": {"file": "ingest_file", "remote_url": "remote_feed_url"},
    "auth": {"pbkdf2_iterations": "pbkdf2_iterations"},
}


def load_config(path: str | None = None) -> Config:
    """Read config from a JSON file; unknown keys are rejected."""
    cfg = Config()
    if path is None:
        return cfg
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)

    updates = {}
    for section, keys in _SECTION_KEYS.items():
        body = raw.pop(section, {})
        for key, attr in keys.items():
            if key in body:
                updates[attr] = body.pop(key)
        if body:
            raise ValueError(f"unknown config keys in [{section}]: {sorted(body)}")
    rewards = raw.pop("rewards", None)
    if rewards is not None:
        weights = dict(DEFAULT_REWARD_WEIGHTS)
        for k, v in rewards.items():
            if k not in weights:
                raise ValueError(f"unknown reward weight: {k}")
            weights[k] = v
        updates["reward_weights"] = weights
    if raw:
        raise ValueError(f"unknown config sections: {sorted(raw)}")

    cfg = replace(cfg, **updates)
    cfg.settings()  # validates the api-facing subset
    return cfg
