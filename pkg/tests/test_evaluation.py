"""Reward arithmetic, normalization and the leaderboard."""

from __future__ import annotations

from datetime import date, timedelta, timezone

import pytest

from paperbroker.config import DEFAULT_REWARD_WEIGHTS
from paperbroker.evaluation import (
    impression_reward,
    leaderboard,
    mean_normalized_reward,
    normalized_rewards,
    rewards_by_system,
)
from paperbroker.models import InteractionEvent

from factories import BASE_DAY, BASE_TIME, add_articles, add_system, add_user, impression
from oracles import impression_reward_reference

UTC = timezone.utc
WEIGHTS = DEFAULT_REWARD_WEIGHTS


def events_on(imp, *pairs):
    return [InteractionEvent(event_id=f"e{i}", impression_id=imp.impression_id,
                             user_id=imp.user_id, item_id=item, type=type_,
                             occurred_at=BASE_TIME)
            for i, (item, type_) in enumerate(pairs)]


class TestImpressionReward:
    def test_three_clicks_two_saves_is_nineteen(self):
        # 3 x 3 points for clicks plus 2 x 5 for saves.
        imp = impression("u1", [("a1", "S"), ("a2", "S"), ("a3", "S")])
        evs = events_on(imp, ("a1", "clicked_web"), ("a2", "clicked_web"),
                        ("a3", "clicked_web"), ("a1", "saved"), ("a2", "saved"))
        assert impression_reward(imp, evs, "S", WEIGHTS) == 19

    def test_no_events_is_zero(self):
        imp = impression("u1", [("a1", "S")])
        assert impression_reward(imp, [], "S", WEIGHTS) == 0

    def test_mixed_channel_sum(self):
        # clicked_email 3 + saved 5 + seen_web 0 = 8
        imp = impression("u1", [("a1", "S"), ("a2", "S"), ("a3", "S")])
        evs = events_on(imp, ("a1", "clicked_email"), ("a2", "saved"),
                        ("a3", "seen_web"))
        assert impression_reward(imp, evs, "S", WEIGHTS) == 8

    def test_attribution_is_local_to_the_source_system(self):
        imp = impression("u1", [("a1", "A"), ("a2", "B")])
        evs = events_on(imp, ("a1", "saved"), ("a2", "clicked_web"))
        assert impression_reward(imp, evs, "A", WEIGHTS) == 5
        assert impression_reward(imp, evs, "B", WEIGHTS) == 3

    def test_matches_reference_on_random_impressions(self):
        import random
        rng = random.Random(5)
        types = list(WEIGHTS)
        for trial in range(200):
            n_slots = rng.randint(1, 8)
            slots = [(f"a{i}", rng.choice("AB")) for i in range(n_slots)]
            imp = impression("u1", slots)
            pairs = [(f"a{rng.randrange(n_slots)}", rng.choice(types))
                     for _ in range(rng.randint(0, 6))]
            evs = events_on(imp, *pairs)
            for system in ("A", "B"):
                want = impression_reward_reference(slots, pairs, system, WEIGHTS)
                assert impression_reward(imp, evs, system, WEIGHTS) == want


class TestNormalizedRewards:
    def test_nineteen_to_one_split(self):
        imp = impression("u1", [("a1", "A"), ("a2", "A"), ("a3", "A"), ("a4", "B")],
                         selected=["A", "B"])
        evs = events_on(imp, ("a1", "clicked_web"), ("a2", "clicked_web"),
                        ("a3", "clicked_web"), ("a1", "saved"), ("a2", "saved"),
                        ("a4", "topic_accepted"))
        # A=19, B=1 -> 0.95 / 0.05
        assert rewards_by_system(imp, evs, WEIGHTS) == {"A": 19, "B": 1}
        normalized = normalized_rewards(imp, evs, WEIGHTS)
        assert normalized == pytest.approx({"A": 0.95, "B": 0.05})

    def test_zero_signal_impression_is_empty(self):
        imp = impression("u1", [("a1", "A"), ("a2", "B")], selected=["A", "B"])
        evs = events_on(imp, ("a1", "seen_web"), ("a2", "seen_web"))
        assert normalized_rewards(imp, evs, WEIGHTS) == {}
        assert normalized_rewards(imp, [], WEIGHTS) == {}

    def test_single_system_takes_the_whole_share(self):
        imp = impression("u1", [("a1", "S")], selected=["S"])
        evs = events_on(imp, ("a1", "saved"))
        assert normalized_rewards(imp, evs, WEIGHTS) == {"S": 1.0}

    def test_shares_sum_to_one_and_stay_in_range(self):
        import random
        rng = random.Random(11)
        types = list(WEIGHTS)
        for trial in range(300):
            slots = [(f"a{i}", rng.choice("ABC")) for i in range(rng.randint(1, 10))]
            imp = impression("u1", slots, selected=["A", "B", "C"])
            pairs = [(slots[rng.randrange(len(slots))][0], rng.choice(types))
                     for _ in range(rng.randint(0, 8))]
            normalized = normalized_rewards(imp, events_on(imp, *pairs), WEIGHTS)
            if normalized:
                assert abs(sum(normalized.values()) - 1.0) < 1e-9
                assert all(0.0 <= v <= 1.0 for v in normalized.values())

    def test_scale_free_in_the_weights(self):
        imp = impression("u1", [("a1", "A"), ("a2", "B")], selected=["A", "B"])
        evs = events_on(imp, ("a1", "saved"), ("a2", "clicked_web"))
        scaled = {k: v * 7 for k, v in WEIGHTS.items()}
        base = normalized_rewards(imp, evs, WEIGHTS)
        assert normalized_rewards(imp, evs, scaled) == pytest.approx(base, abs=1e-12)


class TestMeanNormalizedReward:
    def seed_impressions(self, store, specs):
        """specs: list of (slots, selected, event pairs); returns period."""
        uid = add_user(store)
        seen_articles = sorted({item for slots, _, _ in specs for item, _ in slots})
        add_articles(store, *seen_articles)
        for i, (slots, selected, pairs) in enumerate(specs):
            imp = impression(uid, slots, impression_id=f"imp-{i}", selected=selected)
            store.record_impression(imp)
            for j, (item, type_) in enumerate(pairs):
                store.record_interaction(InteractionEvent(
                    event_id=f"e{i}-{j}", impression_id=imp.impression_id,
                    user_id=uid, item_id=item, type=type_, occurred_at=BASE_TIME))
        return (BASE_DAY, BASE_DAY)

    def test_zero_signal_impressions_excluded_from_mean(self, store):
        # Shares 0.95 and 0.5 plus one silent impression -> mean 0.725 over two.
        period = self.seed_impressions(store, [
            ([("a1", "A"), ("a2", "A"), ("a3", "A"), ("a4", "B")], ["A", "B"],
             [("a1", "clicked_web"), ("a2", "clicked_web"), ("a3", "clicked_web"),
              ("a1", "saved"), ("a2", "saved"), ("a4", "topic_accepted")]),
            ([("b1", "A"), ("b2", "B")], ["A", "B"],
             [("b1", "saved"), ("b2", "saved")]),
            ([("c1", "A"), ("c2", "B")], ["A", "B"], []),
        ])
        card = mean_normalized_reward(store, "A", period, WEIGHTS)
        assert card.mean_normalized_reward == pytest.approx(0.725)
        assert card.impressions == 3

    def test_no_impressions_is_zero(self, store):
        card = mean_normalized_reward(store, "A", (BASE_DAY, BASE_DAY), WEIGHTS)
        assert card.mean_normalized_reward == 0.0
        assert card.impressions == 0

    def test_every_impression_fully_won_is_one(self, store):
        period = self.seed_impressions(store, [
            ([("a1", "A"), ("a2", "B")], ["A", "B"], [("a1", "saved")]),
            ([("b1", "A"), ("b2", "B")], ["A", "B"], [("b1", "clicked_web")]),
        ])
        card = mean_normalized_reward(store, "A", period, WEIGHTS)
        assert card.mean_normalized_reward == 1.0

    def test_period_bounds_inclusive(self, store):
        uid = add_user(store)
        add_articles(store, "a1")
        imp = impression(uid, [("a1", "A")], on_date=BASE_DAY, selected=["A"])
        store.record_impression(imp)
        store.record_interaction(InteractionEvent(
            event_id="e1", impression_id=imp.impression_id, user_id=uid,
            item_id="a1", type="saved", occurred_at=BASE_TIME))
        inside = mean_normalized_reward(store, "A", (BASE_DAY, BASE_DAY), WEIGHTS)
        after = mean_normalized_reward(
            store, "A", (BASE_DAY + timedelta(days=1), BASE_DAY + timedelta(days=2)),
            WEIGHTS)
        assert inside.impressions == 1
        assert after.impressions == 0

    def test_backwards_period_rejected(self, store):
        with pytest.raises(ValueError):
            mean_normalized_reward(store, "A", (BASE_DAY, BASE_DAY - timedelta(days=1)),
                                   WEIGHTS)


class TestLeaderboard:
    def test_ordering_and_counts(self, store):
        uid = add_user(store)
        add_articles(store, "a1", "a2", "b1", "b2")
        for i, (slots, pairs) in enumerate([
            ([("a1", "A"), ("a2", "B")], [("a1", "saved")]),
            ([("b1", "A"), ("b2", "B")], [("b1", "saved"), ("b2", "saved")]),
        ]):
            imp = impression(uid, slots, impression_id=f"imp-{i}", selected=["A", "B"])
            store.record_impression(imp)
            for j, (item, type_) in enumerate(pairs):
                store.record_interaction(InteractionEvent(
                    event_id=f"e{i}-{j}", impression_id=imp.impression_id,
                    user_id=uid, item_id=item, type=type_, occurred_at=BASE_TIME))
        board = leaderboard(store, (BASE_DAY, BASE_DAY), WEIGHTS)
        assert [card.system_id for card in board] == ["A", "B"]
        assert board[0].mean_normalized_reward == pytest.approx(0.75)
        assert board[1].mean_normalized_reward == pytest.approx(0.25)
        assert board[0].impressions == 2

    def test_empty_period(self, store):
        assert leaderboard(store, (BASE_DAY, BASE_DAY), WEIGHTS) == []

    def test_tie_broken_by_system_id(self, store):
        uid = add_user(store)
        add_articles(store, "a1", "a2")
        imp = impression(uid, [("a1", "B"), ("a2", "A")], selected=["A", "B"])
        store.record_impression(imp)
        for j, item in enumerate(("a1", "a2")):
            store.record_interaction(InteractionEvent(
                event_id=f"e{j}", impression_id=imp.impression_id, user_id=uid,
                item_id=item, type="saved", occurred_at=BASE_TIME))
        board = leaderboard(store, (BASE_DAY, BASE_DAY), WEIGHTS)
        assert [card.system_id for card in board] == ["A", "B"]
        assert board[0].mean_normalized_reward == board[1].mean_normalized_reward
