from .population import (
    FIELDS,
    SyntheticUser,
    article_tokens,
    generate_population,
    make_corpus,
    relevance,
)
from .behavior import SlotOutcome, examine_probability, simulate_slots, suggest_topics
from .experiment import SimConfig, SimResult, SystemSpec, load_sim_config, run_experiment

__all__ = [
    "FIELDS",
    "SyntheticUser",
    "article_tokens",
    "generate_population",
    "make_corpus",
    "relevance",
    "SlotOutcome",
    "examine_probability",
    "simulate_slots",
    "suggest_topics",
    "SimConfig",
    "SimResult",
    "SystemSpec",
    "load_sim_config",
    "run_experiment",
]
