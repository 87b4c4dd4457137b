"""End-to-end synthetic runs of the whole platform.

One experiment stands up the broker in memory and pushes every piece of
traffic through its public HTTP surface: users register and log in,
systems of configured quality submit daily recommendations inside the
submission window, the interleaving job runs, and users visit their
feeds and click or save according to the behavior model. The output is
the period leaderboard plus a pairwise win count, so a run doubles as
an integration test of the full protocol.
"""

from __future__ import annotations

import hashlib
import heapq
import json
import random
from dataclasses import dataclass, field, replace
from datetime import date, datetime, time, timedelta, timezone

from ..config import DEFAULT_REWARD_WEIGHTS, Config
from ..evaluation import SystemScorecard, normalized_rewards
from ..ingestion import ingest_records
from ..jobs import create_system
from ..models import Article
from ..multileaver import run_daily_job
from ..storage import Store
from ..webapi import create_app
from ..webapi.inproc import InProcClient
from .behavior import simulate_slots, suggest_topics
from .population import SyntheticUser, generate_population, make_corpus

QUALITIES = ("oracle", "noisy", "random")


@dataclass
class SystemSpec:
    name: str
    quality: str
    noise: float = 0.2  # score stddev, used only by quality "noisy"


@dataclass
class SimConfig:
    n_users: int = 50
    n_days: int = 10
    systems: list[SystemSpec] = field(default_factory=lambda: [
        SystemSpec("alpha", "oracle"), SystemSpec("beta", "random")])
    rng_seed: int = 0
    reward_weights: dict[str, int] = field(
        default_factory=lambda: dict(DEFAULT_REWARD_WEIGHTS))
    articles_per_day: int = 30
    submit_depth: int = 10
    top_k: int = 10
    systems_per_impression: int = 3
    start_date: date = date(2024, 1, 1)
    include_topics: bool = False

    def validate(self) -> None:
        if self.n_users < 1 or self.n_days < 1:
            raise ValueError("n_users and n_days must be at least 1")
        if not self.systems:
            raise ValueError("at least one system required")
        names = [spec.name for spec in self.systems]
        if len(set(names)) != len(names):
            raise ValueError("system names must be unique")
        for spec in self.systems:
            if spec.quality not in QUALITIES:
                raise ValueError(f"unknown quality {spec.quality!r}")


def load_sim_config(path: str) -> SimConfig:
    """Read a SimConfig from a JSON file; unknown keys are rejected."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    systems = [SystemSpec(**entry) for entry in raw.pop("systems", [])]
    start = raw.pop("start_date", None)
    base = SimConfig()
    known = {f for f in base.__dataclass_fields__} - {"systems", "start_date"}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown sim config keys: {sorted(unknown)}")
    cfg = replace(base, **raw)
    if systems:
        cfg.systems = systems
    if start is not None:
        cfg.start_date = date.fromisoformat(start)
    cfg.validate()
    return cfg


@dataclass
class SimResult:
    period: tuple[date, date]
    scorecards: dict[str, SystemScorecard]  # by system name
    wins: dict[tuple[str, str], int]  # (a, b) -> signal impressions where a out-earned b
    system_ids: dict[str, str]
    store: Store

    @property
    def mnr(self) -> dict[str, float]:
        return {name: card.mean_normalized_reward
                for name, card in self.scorecards.items()}


def _child_seed(master: int, *parts) -> int:
    payload = ":".join([str(master), *map(str, parts)]).encode("utf-8")
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "big") >> 1


class _Clock:
    def __init__(self, at: datetime):
        self.at = at

    def set(self, day: date, hhmm: time) -> None:
        self.at = datetime.combine(day, hhmm, tzinfo=timezone.utc)

    def now(self) -> datetime:
        return self.at


def _ingest_lines(articles: list[Article]) -> list[str]:
    return [json.dumps({
        "article_id": a.article_id, "title": a.title, "abstract": a.abstract,
        "authors": a.authors, "categories": a.categories,
        "published": a.published_date.isoformat(),
    }) for a in articles]


def _register_all(client: InProcClient, users: list[SyntheticUser]) -> None:
    for user in users:
        resp = client.post("/user/register", json={
            "email": user.email, "password": user.password, "name": user.name,
            "topics": user.profile_topics})
        resp.raise_for_status()
        user.user_id = resp.json()["user_id"]
        _login(client, user)


def _login(client: InProcClient, user: SyntheticUser) -> None:
    resp = client.post("/user/login",
                       json={"email": user.email, "password": user.password})
    resp.raise_for_status()
    user.session = resp.json()["session_token"]


def _user_call(client: InProcClient, user: SyntheticUser, method: str,
               path: str, **kwargs):
    resp = client.request(method, path,
                          headers={"Authorization": user.session}, **kwargs)
    if resp.status_code == 401:  # session lapsed on long runs
        _login(client, user)
        resp = client.request(method, path,
                              headers={"Authorization": user.session}, **kwargs)
    return resp.raise_for_status()


def _api_user_ids(client: InProcClient, headers: dict) -> list[str]:
    ids: list[str] = []
    offset = 0
    while True:
        page = client.get(f"/users?from={offset}", headers=headers).raise_for_status().json()
        ids.extend(page["user_ids"])
        if page["next_offset"] is None:
            return ids
        offset = page["next_offset"]


def _shown_map(client: InProcClient, headers: dict, user_ids: list[str],
               batch: int) -> dict[str, set]:
    shown: dict[str, set] = {}
    for i in range(0, len(user_ids), batch):
        chunk = ",".join(user_ids[i:i + batch])
        resp = client.get(f"/user_feedback/articles?user_id={chunk}", headers=headers)
        for user_id, ids in resp.raise_for_status().json().items():
            shown[user_id] = set(ids)
    return shown


def _ranked_submission(spec: SystemSpec, rel_map: dict[str, float],
                       candidates: list[str], depth: int,
                       rng: random.Random) -> list[dict]:
    if spec.quality == "random":
        order = list(candidates)
        rng.shuffle(order)
        top = order[:depth]
    elif spec.quality == "noisy":
        gauss = rng.gauss
        scored = [(rel_map[a] + gauss(0.0, spec.noise), a) for a in candidates]
        top = [a for _, a in heapq.nlargest(depth, scored)]
    else:
        scored = [(rel_map[a], a) for a in candidates]
        top = [a for _, a in heapq.nlargest(depth, scored)]
    return [{"article_id": article_id, "score": float(depth - i),
             "explanation": "Close to articles you have engaged with."}
            for i, article_id in enumerate(top)]


def _flush(client: InProcClient, headers: dict, path: str,
           payload: dict, counters: dict) -> None:
    if not payload:
        return
    report = client.post(path, headers=headers, json=payload).raise_for_status().json()
    counters["accepted"] += report["accepted"]
    counters["rejected"] += len(report["rejected"])
    payload.clear()


def run_experiment(config: SimConfig) -> SimResult:
    config.validate()
    seed = config.rng_seed
    first_day = config.start_date
    last_day = first_day + timedelta(days=config.n_days - 1)

    corpus = make_corpus(config.n_days, config.articles_per_day, first_day,
                         random.Random(_child_seed(seed, "corpus")))
    by_day: dict[date, list[Article]] = {}
    for article in corpus:
        by_day.setdefault(article.published_date, []).append(article)
    users, rel = generate_population(config.n_users, corpus,
                                     random.Random(_child_seed(seed, "population")))

    platform = Config(
        recommendation_batch_max=1000,
        top_k=config.top_k,
        systems_per_impression=config.systems_per_impression,
        seed=_child_seed(seed, "platform"),
        reward_weights=dict(config.reward_weights),
        pbkdf2_iterations=800,  # a real deployment would never run this low
    )
    store = Store(":memory:")
    clock = _Clock(datetime.combine(first_day, time(0, 5), tzinfo=timezone.utc))
    client = InProcClient(create_app(store, platform, clock=clock.now))

    systems = {spec.name: create_system(store, spec.name) for spec in config.systems}
    headers = {name: {"api-key": info["api_key"]} for name, info in systems.items()}
    _register_all(client, users)
    counters = {"accepted": 0, "rejected": 0}
    saved_titles: dict[str, list[str]] = {user.user_id: [] for user in users}
    topic_system = config.systems[0].name
    # Per-user true-relevance lookup, extended as articles are published.
    # Shown items are tracked from feed responses rather than re-fetched
    # daily; the end-of-run check pins that bookkeeping to the API.
    rel_maps: dict[str, dict[str, float]] = {user.user_id: {} for user in users}
    shown: dict[str, set[str]] = {user.user_id: set() for user in users}

    for day_index in range(config.n_days):
        today = first_day + timedelta(days=day_index)
        clock.set(today, time(0, 10))
        fresh = by_day.get(today, [])
        ingest_records(store, _ingest_lines(fresh))
        for user in users:
            rmap = rel_maps[user.user_id]
            for article in fresh:
                rmap[article.article_id] = rel(user, article.article_id)

        clock.set(today, time(1, 0))  # inside the 00:30-03:00 window
        # Users and the pool are identical for every system, so one fetch
        # per day serves them all.
        lead_auth = headers[config.systems[day_index % len(config.systems)].name]
        api_ids = _api_user_ids(client, lead_auth)
        pool = client.get("/articles", headers=lead_auth).raise_for_status().json()["article_ids"]
        candidates_by_user = {
            user_id: [a for a in pool if a not in shown[user_id]]
            for user_id in api_ids}

        ranked_cache: dict[str, dict[str, list]] = {}
        for spec in config.systems:
            auth = headers[spec.name]
            system_rng = random.Random(_child_seed(seed, "rank", spec.name, day_index))
            # Oracles are deterministic in rel, so two of them submit the
            # same lists; noisy and random systems draw per name.
            shared = spec.quality == "oracle"
            ranked = ranked_cache.get("oracle") if shared else None
            if ranked is None:
                ranked = {}
                for user_id in api_ids:
                    items = _ranked_submission(
                        spec, rel_maps[user_id], candidates_by_user[user_id],
                        config.submit_depth, system_rng)
                    if items:
                        ranked[user_id] = items
                if shared:
                    ranked_cache["oracle"] = ranked

            payload: dict[str, list] = {}
            pending = 0
            for user_id, items in ranked.items():
                if pending + len(items) > platform.recommendation_batch_max:
                    _flush(client, auth, "/recommendations/articles", payload, counters)
                    pending = 0
                payload[user_id] = items
                pending += len(items)
            _flush(client, auth, "/recommendations/articles", payload, counters)

        if config.include_topics:
            _submit_topics(client, headers[topic_system], users,
                           saved_titles, platform, counters)

        clock.set(today, time(5, 0))
        run_daily_job(store, today, global_seed=platform.seed,
                      systems_per_impression=platform.systems_per_impression,
                      top_k=platform.top_k, now=clock.now())

        clock.set(today, time(12, 0))
        for user_index, user in enumerate(users):
            behavior_rng = random.Random(
                _child_seed(seed, "behavior", day_index, user_index))
            shown[user.user_id].update(
                _visit(client, user, today, rel, behavior_rng, saved_titles))
            if config.include_topics:
                _resolve_topics(client, user)

    # Client-side shown bookkeeping must agree with the feedback endpoint.
    reported = _shown_map(client, lead_auth, [user.user_id for user in users],
                          platform.user_batch_size)
    for user in users:
        if reported.get(user.user_id, set()) != shown[user.user_id]:
            raise RuntimeError(f"shown-item tracking diverged for {user.user_id}")

    scorecards, wins = _tally(store, (first_day, last_day),
                              config.reward_weights, systems)
    return SimResult(period=(first_day, last_day), scorecards=scorecards,
                     wins=wins,
                     system_ids={n: info["system_id"] for n, info in systems.items()},
                     store=store)


def _visit(client: InProcClient, user: SyntheticUser, today: date, rel,
           rng: random.Random, saved_titles: dict[str, list[str]]) -> list[str]:
    """One feed visit; returns the article ids the feed just exposed."""
    feed = _user_call(client, user, "GET", "/user/feed?page=1&page_size=1").json()
    groups = feed["impressions"]
    if not groups or groups[0]["date"] != today.isoformat():
        return []
    group = groups[0]
    items = group["items"]
    outcomes = simulate_slots([rel(user, item["article_id"]) for item in items],
                              user.click_base_rate, user.save_rate_given_click, rng)
    for item, outcome in zip(items, outcomes):
        if outcome.clicked:
            _user_call(client, user, "POST", "/user/action", json={
                "impression_id": group["impression_id"],
                "item_id": item["article_id"], "action": "clicked_web"})
        if outcome.saved:
            _user_call(client, user, "POST", "/user/action", json={
                "impression_id": group["impression_id"],
                "item_id": item["article_id"], "action": "saved"})
            saved_titles[user.user_id].append(item["title"])
    return [item["article_id"] for item in items]


def _submit_topics(client: InProcClient, auth: dict,
                   users: list[SyntheticUser], saved_titles: dict[str, list[str]],
                   platform: Config, counters: dict) -> None:
    engaged = [user for user in users if saved_titles[user.user_id]]
    profile_topics: dict[str, list[str]] = {}
    for i in range(0, len(engaged), platform.user_batch_size):
        chunk = ",".join(u.user_id for u in engaged[i:i + platform.user_batch_size])
        info = client.get(f"/user_info?ids={chunk}", headers=auth).raise_for_status().json()
        for user_id, data in info.items():
            profile_topics[user_id] = data["topics"]
    payload: dict[str, list] = {}
    pending = 0
    for user in engaged:
        suggestions = suggest_topics(saved_titles[user.user_id],
                                     profile_topics.get(user.user_id, []))
        items = [{"topic": topic, "score": float(len(suggestions) - i)}
                 for i, topic in enumerate(suggestions)]
        if not items:
            continue
        if pending + len(items) > platform.recommendation_batch_max:
            _flush(client, auth, "/recommendations/topics", payload, counters)
            pending = 0
        payload[user.user_id] = items
        pending += len(items)
    _flush(client, auth, "/recommendations/topics", payload, counters)


def _resolve_topics(client: InProcClient, user: SyntheticUser) -> None:
    state = _user_call(client, user, "GET", "/user/topics").json()
    for entry in state["topics"]:
        action = ("accept" if entry["topic"] in user.hidden_interest_terms
                  else "reject")
        _user_call(client, user, "POST", "/user/topics/action",
                   json={"action": action, "topic": entry["topic"]})


def _tally(store: Store, period: tuple[date, date], weights: dict[str, int],
           systems: dict[str, dict]) -> tuple[dict[str, SystemScorecard],
                                              dict[tuple[str, str], int]]:
    """Leaderboard plus pairwise win counts in one pass.

    Scorecard arithmetic mirrors evaluation.leaderboard; the sim tests
    pin the two against each other.
    """
    names = {info["system_id"]: name for name, info in systems.items()}
    partaken: dict[str, int] = {info["system_id"]: 0 for info in systems.values()}
    shares: dict[str, list[float]] = {}
    wins: dict[tuple[str, str], int] = {}
    impressions = store.impressions_in_period(period[0], period[1], "article")
    events_by_impression = store.events_for_impressions(
        [imp.impression_id for imp in impressions])
    for impression in impressions:
        events = events_by_impression.get(impression.impression_id, [])
        normalized = normalized_rewards(impression, events, weights)
        for system_id in impression.selected_systems:
            partaken[system_id] = partaken.get(system_id, 0) + 1
            if normalized:
                shares.setdefault(system_id, []).append(normalized[system_id])
        if normalized:
            selected = sorted(impression.selected_systems)
            for i, a in enumerate(selected):
                for b in selected[i + 1:]:
                    if normalized[a] > normalized[b]:
                        wins[(names[a], names[b])] = wins.get((names[a], names[b]), 0) + 1
                    elif normalized[b] > normalized[a]:
                        wins[(names[b], names[a])] = wins.get((names[b], names[a]), 0) + 1

    cards = {}
    for system_id, count in partaken.items():
        values = shares.get(system_id, [])
        mnr = sum(values) / len(values) if values else 0.0
        cards[names[system_id]] = SystemScorecard(
            system_id=system_id, period=period, impressions=count,
            mean_normalized_reward=mnr)
    return cards, wins
