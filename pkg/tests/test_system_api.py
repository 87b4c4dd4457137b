"""HTTP surface for experimental systems: auth, data access, uploads."""

from __future__ import annotations

from datetime import date, timedelta

import pytest

from factories import BASE_DAY, add_articles, add_system, add_user, impression


def auth(system):
    return {"api-key": system.api_key}


class TestAuthentication:
    def test_missing_key_is_401(self, client):
        response = client.get("/users")
        assert response.status_code == 401
        assert "api key" in response.json()["error"]

    def test_unknown_key_is_401(self, client):
        response = client.get("/users", headers={"api-key": "nope"})
        assert response.status_code == 401

    def test_valid_key_passes(self, store, client):
        system = add_system(store, "alpha")
        assert client.get("/users", headers=auth(system)).status_code == 200

    def test_deactivated_system_is_403(self, store, client):
        system = add_system(store, "alpha")
        store.set_system_active(system.system_id, False)
        response = client.get("/users", headers=auth(system))
        assert response.status_code == 403
        assert "deactivated" in response.json()["error"]


class TestSettings:
    def test_defaults_echoed_at_root(self, store, client, config):
        system = add_system(store, "alpha")
        body = client.get("/", headers=auth(system)).json()
        assert body["user_batch_size"] == 100
        assert body["recommendation_batch_max"] == 100
        assert body["candidate_window_days"] == 7
        assert body["top_k"] == 10
        assert body["submission_window"] == {
            "start_utc": config.window_start_utc, "hours": config.window_hours}

    def test_unauthenticated_root_is_401(self, client):
        assert client.get("/").status_code == 401


class TestUserListing:
    def seed_users(self, store, n):
        return [add_user(store, f"user{i:03d}@example.org") for i in range(n)]

    def test_pagination_over_250_users(self, store, client):
        everyone = set(self.seed_users(store, 250))
        system = add_system(store, "alpha")
        first = client.get("/users", params={"from": 0}, headers=auth(system)).json()
        assert len(first["user_ids"]) == 100
        assert first["total"] == 250
        assert first["next_offset"] == 100
        tail = client.get("/users", params={"from": 200}, headers=auth(system)).json()
        assert len(tail["user_ids"]) == 50
        assert tail["next_offset"] is None
        beyond = client.get("/users", params={"from": 999}, headers=auth(system)).json()
        assert beyond["user_ids"] == []
        # the three pages partition the population
        middle = client.get("/users", params={"from": 100}, headers=auth(system)).json()
        seen = first["user_ids"] + middle["user_ids"] + tail["user_ids"]
        assert len(seen) == 250 and set(seen) == everyone

    def test_bad_offset_is_400(self, store, client):
        system = add_system(store, "alpha")
        assert client.get("/users", params={"from": "x"}, headers=auth(system)).status_code == 400
        assert client.get("/users", params={"from": -1}, headers=auth(system)).status_code == 400


class TestUserInfo:
    def test_known_user_topics_without_identity(self, store, client):
        uid = add_user(store, "ada@example.org", topics=("ranking", "retrieval"),
                       external_links=("https://example.org/ada",))
        system = add_system(store, "alpha")
        body = client.get("/user_info", params={"ids": uid}, headers=auth(system)).json()
        assert body[uid]["topics"] == ["ranking", "retrieval"]
        assert body[uid]["external_links"] == ["https://example.org/ada"]
        flattened = repr(body)
        assert "ada@example.org" not in flattened
        assert "Ada Lovelace" not in flattened

    def test_unknown_ids_omitted(self, store, client):
        uid = add_user(store)
        system = add_system(store, "alpha")
        body = client.get("/user_info", params={"ids": f"{uid},ghost"},
                          headers=auth(system)).json()
        assert set(body) == {uid}

    def test_over_batch_limit_is_400(self, store, client):
        system = add_system(store, "alpha")
        ids = ",".join(f"u{i}" for i in range(101))
        response = client.get("/user_info", params={"ids": ids}, headers=auth(system))
        assert response.status_code == 400


class TestArticleEndpoints:
    def test_pool_mirrors_candidate_window(self, store, client, clock):
        add_articles(store, "in-today", published=BASE_DAY)
        add_articles(store, "in-edge", published=BASE_DAY - timedelta(days=6))
        add_articles(store, "out-old", published=BASE_DAY - timedelta(days=7))
        system = add_system(store, "alpha")
        body = client.get("/articles", headers=auth(system)).json()
        assert body["date"] == BASE_DAY.isoformat()
        assert body["article_ids"] == ["in-edge", "in-today"]

    def test_empty_store_gives_empty_pool(self, store, client):
        system = add_system(store, "alpha")
        assert client.get("/articles", headers=auth(system)).json()["article_ids"] == []

    def test_article_data_known_and_unknown(self, store, client):
        add_articles(store, ("2403.10001", "A study"))
        system = add_system(store, "alpha")
        body = client.get("/article_data", params={"article_id": "2403.10001,ghost"},
                          headers=auth(system)).json()
        assert set(body) == {"2403.10001"}
        record = body["2403.10001"]
        assert record["title"] == "A study"
        assert set(record) == {"title", "abstract", "authors", "categories", "published"}

    def test_article_data_over_limit_is_400(self, store, client):
        system = add_system(store, "alpha")
        ids = ",".join(f"a{i}" for i in range(101))
        assert client.get("/article_data", params={"article_id": ids},
                          headers=auth(system)).status_code == 400


class TestShownFeedback:
    def test_union_without_duplicates(self, store, client):
        uid = add_user(store)
        ids = add_articles(store, *[f"a{i}" for i in range(12)])
        store.record_impression(impression(uid, [(a, "S") for a in ids[:10]],
                                           impression_id="i1"))
        store.record_impression(impression(uid, [(a, "S") for a in ids[10:]],
                                           impression_id="i2",
                                           on_date=BASE_DAY + timedelta(days=1)))
        system = add_system(store, "alpha")
        body = client.get("/user_feedback/articles", params={"user_id": uid},
                          headers=auth(system)).json()
        shown = body[uid]
        assert sorted(shown) == sorted(ids)
        assert len(shown) == len(set(shown))

    def test_fresh_user_empty_and_unknown_omitted(self, store, client):
        uid = add_user(store)
        system = add_system(store, "alpha")
        body = client.get("/user_feedback/articles", params={"user_id": f"{uid},ghost"},
                          headers=auth(system)).json()
        assert body == {uid: []}


class TestArticleSubmission:
    def payload(self, uid, *specs):
        return {uid: [{"article_id": a, "score": s, "explanation": e}
                      for a, s, e in specs]}

    def test_two_valid_recommendations_accepted(self, store, client):
        uid = add_user(store)
        add_articles(store, "a1", "a2")
        system = add_system(store, "alpha")
        body = client.post("/recommendations/articles",
                           json=self.payload(uid, ("a1", 0.9, "about **IR**"),
                                             ("a2", 0.5, "related work")),
                           headers=auth(system)).json()
        assert body["accepted"] == 2
        assert body["rejected"] == []
        assert store.stack_size(uid, system.system_id) == 2

    def test_outside_window_is_403(self, store, config, clock):
        from paperbroker.webapi.app import create_app
        from paperbroker.webapi.inproc import InProcClient
        config.window_start_utc = "00:30"
        config.window_hours = 2.5
        uid = add_user(store)
        add_articles(store, "a1")
        system = add_system(store, "alpha")
        app = create_app(store, config, clock=clock)
        with InProcClient(app) as narrow_client:
            # 03:30 UTC is window start + 3h
            clock.now = clock.now.replace(hour=3, minute=30)
            response = narrow_client.post(
                "/recommendations/articles",
                json=self.payload(uid, ("a1", 0.9, "x")), headers=auth(system))
            assert response.status_code == 403
            assert "window" in response.json()["error"]
            # boundary: accepted at start, rejected at start + duration
            clock.now = clock.now.replace(hour=0, minute=30)
            assert narrow_client.post("/recommendations/articles",
                                      json=self.payload(uid, ("a1", 0.9, "x")),
                                      headers=auth(system)).status_code == 200
            clock.now = clock.now.replace(hour=3, minute=0)
            assert narrow_client.post("/recommendations/articles",
                                      json=self.payload(uid, ("a1", 0.9, "x")),
                                      headers=auth(system)).status_code == 403

    def test_nan_score_rejected_others_kept(self, store, client):
        uid = add_user(store)
        add_articles(store, "a1", "a2")
        system = add_system(store, "alpha")
        body = client.post("/recommendations/articles",
                           json=self.payload(uid, ("a1", "nan", "fine"),
                                             ("a2", 0.5, "fine")),
                           headers=auth(system)).json()
        assert body["accepted"] == 1
        assert body["rejected"] == [{"user_id": uid, "article_id": "a1",
                                     "reason": "non-finite score"}]

    def test_unknown_article_and_user_rejected(self, store, client):
        uid = add_user(store)
        add_articles(store, "a1")
        system = add_system(store, "alpha")
        payload = self.payload(uid, ("a1", 0.9, "x"), ("ghost", 0.8, "x"))
        payload["no-such-user"] = [{"article_id": "a1", "score": 0.1, "explanation": "x"}]
        body = client.post("/recommendations/articles", json=payload,
                           headers=auth(system)).json()
        assert body["accepted"] == 1
        reasons = {(r["user_id"], r["article_id"]): r["reason"] for r in body["rejected"]}
        assert ("no-such-user", "a1") in reasons
        assert (uid, "ghost") in reasons

    def test_already_shown_articles_counted_as_dropped(self, store, client):
        uid = add_user(store)
        add_articles(store, "a1", "a2")
        store.record_impression(impression(uid, [("a1", "S")]))
        system = add_system(store, "alpha")
        body = client.post("/recommendations/articles",
                           json=self.payload(uid, ("a1", 0.9, "x"), ("a2", 0.8, "x")),
                           headers=auth(system)).json()
        assert body["accepted"] == 1
        assert body["dropped_shown"] == 1
        assert body["rejected"] == []

    def test_over_batch_limit_is_413(self, store, client):
        uid = add_user(store)
        add_articles(store, *[f"a{i}" for i in range(3)])
        system = add_system(store, "alpha")
        recs = [{"article_id": f"a{i}", "score": 1.0, "explanation": "x"}
                for i in range(101)]
        response = client.post("/recommendations/articles", json={uid: recs},
                               headers=auth(system))
        assert response.status_code == 413

    def test_malformed_payload_is_400(self, store, client):
        system = add_system(store, "alpha")
        assert client.post("/recommendations/articles", json=["not", "a", "dict"],
                           headers=auth(system)).status_code == 400
        assert client.post("/recommendations/articles", json={"u": "not-a-list"},
                           headers=auth(system)).status_code == 400


class TestTopicSubmission:
    def test_round_trip_with_rejected_filter(self, store, client):
        uid = add_user(store, topics=("existing",))
        system = add_system(store, "alpha")
        body = client.post("/recommendations/topics",
                           json={uid: [{"topic": "Learning to Rank", "score": 0.9},
                                       {"topic": "existing", "score": 0.5}]},
                           headers=auth(system)).json()
        assert body["accepted"] == 1
        assert [r["reason"] for r in body["rejected"]] == ["topic already in profile"]
        shown = client.get("/user_feedback/topics", params={"user_id": uid},
                           headers=auth(system)).json()
        assert shown[uid] == []
