"""User-facing HTTP surface: accounts, feed, actions, topics, GDPR."""

from __future__ import annotations

from datetime import timedelta

import pytest

from paperbroker.models import TopicRecommendation
from paperbroker.storage import Store

from factories import BASE_DAY, BASE_TIME, PASSWORD, add_articles, add_system, impression


def signup(client, email="ada@example.org", *, password=PASSWORD,
           topics=("information retrieval",), **extra):
    body = {"email": email, "name": "Ada Lovelace", "topics": list(topics),
            "password": password}
    body.update(extra)
    response = client.post("/user/register", json=body)
    assert response.status_code == 200, response.text
    uid = response.json()["user_id"]
    login = client.post("/user/login", json={"email": email, "password": password})
    token = login.json()["session_token"]
    return uid, {"Authorization": f"Bearer {token}"}


def show(store, uid, article_ids, *, impression_id="imp-1", on_date=BASE_DAY):
    add_articles(store, *article_ids)
    imp = impression(uid, [(a, "S") for a in article_ids],
                     impression_id=impression_id, on_date=on_date)
    store.record_impression(imp)
    return imp


class TestRegistration:
    def test_round_trip(self, client):
        uid, session = signup(client)
        profile = client.get("/user/profile", headers=session).json()
        assert profile["user_id"] == uid
        assert profile["email"] == "ada@example.org"
        assert profile["topics"] == ["information retrieval"]

    def test_duplicate_email_is_409(self, client):
        signup(client)
        response = client.post("/user/register", json={
            "email": "ada@example.org", "name": "Other", "topics": [],
            "password": PASSWORD})
        assert response.status_code == 409

    def test_weekly_without_day_is_400(self, client):
        response = client.post("/user/register", json={
            "email": "b@example.org", "name": "B", "topics": [],
            "password": PASSWORD, "digest_frequency": "weekly"})
        assert response.status_code == 400
        assert "weekly" in response.json()["error"]

    def test_short_password_is_400(self, client):
        response = client.post("/user/register", json={
            "email": "b@example.org", "name": "B", "topics": [], "password": "short"})
        assert response.status_code == 400
        assert "password" in response.json()["error"]

    def test_login_with_wrong_password_is_401(self, client):
        signup(client)
        response = client.post("/user/login", json={
            "email": "ada@example.org", "password": "wrong-password"})
        assert response.status_code == 401

    def test_logout_invalidates_session(self, client):
        _, session = signup(client)
        assert client.post("/user/logout", headers=session).status_code == 200
        assert client.get("/user/profile", headers=session).status_code == 401

    def test_session_cookie_works_too(self, client):
        signup(client)
        login = client.post("/user/login", json={
            "email": "ada@example.org", "password": PASSWORD})
        token = login.json()["session_token"]
        response = client.get("/user/profile", headers={"Cookie": f"session={token}"})
        assert response.status_code == 200


class TestFeed:
    def test_fresh_user_empty_feed(self, client):
        _, session = signup(client)
        body = client.get("/user/feed", headers=session).json()
        assert body["impressions"] == []
        assert body["page"] == 1
        assert body["total_pages"] == 1

    def test_slots_render_in_rank_order(self, store, client, config):
        uid, session = signup(client)
        ids = [f"24{i:02d}.4000{i}" for i in range(5)]
        show(store, uid, ids)
        body = client.get("/user/feed", headers=session).json()
        group = body["impressions"][0]
        assert group["impression_id"] == "imp-1"
        assert [item["rank"] for item in group["items"]] == [1, 2, 3, 4, 5]
        assert [item["article_id"] for item in group["items"]] == ids
        first = group["items"][0]
        assert first["url"] == f"{config.abstract_url_base}/{ids[0]}"
        assert first["saved"] is False

    def test_rendering_records_seen_web_once(self, store, client):
        uid, session = signup(client)
        imp = show(store, uid, ["2403.10001"])
        client.get("/user/feed", headers=session)
        client.get("/user/feed", headers=session)
        events = store.events_for_impression(imp.impression_id)
        assert [(e.item_id, e.type) for e in events] == [("2403.10001", "seen_web")]

    def test_newest_impression_first_and_pagination(self, store, client):
        uid, session = signup(client)
        for i in range(12):
            show(store, uid, [f"25{i:02d}.5000{i}"], impression_id=f"imp-{i:02d}",
                 on_date=BASE_DAY - timedelta(days=11 - i))
        first = client.get("/user/feed", headers=session).json()
        assert first["total_pages"] == 2
        assert len(first["impressions"]) == 10
        assert first["impressions"][0]["impression_id"] == "imp-11"
        second = client.get("/user/feed", params={"page": 2}, headers=session).json()
        assert [g["impression_id"] for g in second["impressions"]] == ["imp-01", "imp-00"]

    def test_page_size_parameter_bounds(self, store, client):
        uid, session = signup(client)
        assert client.get("/user/feed", params={"page": "x"},
                          headers=session).status_code == 400
        assert client.get("/user/feed", params={"page": 0},
                          headers=session).status_code == 400
        assert client.get("/user/feed", params={"page_size": 51},
                          headers=session).status_code == 400

    def test_feed_requires_session(self, client):
        assert client.get("/user/feed").status_code == 401


class TestActions:
    def seeded(self, store, client):
        uid, session = signup(client)
        imp = show(store, uid, ["2403.10001", "2403.10002"])
        return uid, session, imp

    def act(self, client, session, imp, article, type_):
        return client.post("/user/action", json={
            "impression_id": imp.impression_id, "item_id": article,
            "action": type_}, headers=session)

    def test_save_lands_in_library(self, store, client):
        uid, session, imp = self.seeded(store, client)
        response = self.act(client, session, imp, "2403.10001", "saved")
        assert response.json() == {"status": "ok", "result": "recorded"}
        library = client.get("/user/library", headers=session).json()
        assert [a["article_id"] for a in library["articles"]] == ["2403.10001"]

    def test_second_save_is_duplicate(self, store, client):
        uid, session, imp = self.seeded(store, client)
        self.act(client, session, imp, "2403.10001", "saved")
        response = self.act(client, session, imp, "2403.10001", "saved")
        assert response.json()["result"] == "duplicate"
        saves = [e for e in store.events_for_impression(imp.impression_id)
                 if e.type == "saved"]
        assert len(saves) == 1

    def test_unsave_empties_library_but_keeps_reward_event(self, store, client):
        uid, session, imp = self.seeded(store, client)
        self.act(client, session, imp, "2403.10001", "saved")
        response = self.act(client, session, imp, "2403.10001", "unsave")
        assert response.json()["result"] == "removed"
        assert client.get("/user/library", headers=session).json()["articles"] == []
        saves = [e for e in store.events_for_impression(imp.impression_id)
                 if e.type == "saved"]
        assert len(saves) == 1

    def test_click_recorded(self, store, client):
        uid, session, imp = self.seeded(store, client)
        assert self.act(client, session, imp, "2403.10002",
                        "clicked_web").status_code == 200
        events = store.events_for_impression(imp.impression_id)
        assert ("2403.10002", "clicked_web") in {(e.item_id, e.type) for e in events}

    def test_unknown_impression_is_404(self, store, client):
        uid, session, imp = self.seeded(store, client)
        response = client.post("/user/action", json={
            "impression_id": "ghost", "item_id": "2403.10001", "action": "saved"},
            headers=session)
        assert response.status_code == 404

    def test_someone_elses_impression_is_403(self, store, client):
        uid, session, imp = self.seeded(store, client)
        _, other = signup(client, "eve@example.org")
        response = client.post("/user/action", json={
            "impression_id": imp.impression_id, "item_id": "2403.10001",
            "action": "saved"}, headers=other)
        assert response.status_code == 403

    def test_unsupported_type_is_400(self, store, client):
        uid, session, imp = self.seeded(store, client)
        assert self.act(client, session, imp, "2403.10001",
                        "seen_web").status_code == 400


class TestProfileAndFeedback:
    def test_profile_update_merges(self, client):
        uid, session = signup(client)
        response = client.put("/user/profile", json={"topics": ["rankers", "qa"]},
                              headers=session)
        assert response.status_code == 200
        assert response.json()["topics"] == ["rankers", "qa"]
        # untouched fields survive
        assert response.json()["email"] == "ada@example.org"

    def test_profile_update_validation_error(self, client):
        uid, session = signup(client)
        response = client.put("/user/profile", json={"email": "x"}, headers=session)
        assert response.status_code == 400

    def test_feedback_with_all_ratings_stored(self, store, client):
        uid, session = signup(client)
        show(store, uid, ["2403.10001"])
        response = client.post("/user/feedback", json={
            "kind": "recommendation_feedback", "article_id": "2403.10001",
            "free_text": "spot on", "relevance": 5, "explanation_satisfaction": 5,
            "explanation_persuasiveness": 5, "explanation_transparency": 5,
            "explanation_scrutability": 5}, headers=session)
        assert response.status_code == 200
        stored = store.feedback_for_user(uid)
        assert len(stored) == 1
        assert stored[0]["relevance"] == 5
        assert stored[0]["free_text"] == "spot on"

    def test_out_of_scale_rating_is_400(self, client):
        uid, session = signup(client)
        response = client.post("/user/feedback", json={
            "kind": "recommendation_feedback", "article_id": "a1",
            "relevance": 6}, headers=session)
        assert response.status_code == 400

    def test_bug_report_without_article(self, store, client):
        uid, session = signup(client)
        response = client.post("/user/feedback", json={
            "kind": "bug_report", "free_text": "the feed flickers"}, headers=session)
        assert response.status_code == 200
        assert store.feedback_for_user(uid)[0]["kind"] == "bug_report"


class TestTopics:
    def stock(self, store, uid, topics, system="alpha"):
        sid = add_system(store, system).system_id
        store.push_topic_recommendations([
            TopicRecommendation(system_id=sid, user_id=uid, topic=t,
                                score=1.0 - i * 0.1, submitted_at=BASE_TIME)
            for i, t in enumerate(topics)])
        return sid

    def test_suggestions_served_from_stock(self, store, client):
        uid, session = signup(client, topics=())
        self.stock(store, uid, ["Learning to Rank", "Query Expansion"])
        body = client.get("/user/topics", headers=session).json()
        assert body["impression_id"]
        offered = {t["topic"] for t in body["topics"]}
        assert offered == {"Learning to Rank", "Query Expansion"}

    def test_accept_moves_topic_into_profile(self, store, client):
        uid, session = signup(client, topics=())
        self.stock(store, uid, ["Learning to Rank"])
        client.get("/user/topics", headers=session)
        response = client.post("/user/topics/action", json={
            "action": "accept", "topic": "learning to rank"}, headers=session)
        assert response.status_code == 200
        assert response.json()["profile_topics"] == ["Learning to Rank"]
        dump = store.export_user_data(uid)
        assert [(e["item_id"], e["type"]) for e in dump["interactions"]] == [
            ("learning to rank", "topic_accepted")]

    def test_rejected_topic_never_reshown(self, store, client):
        uid, session = signup(client, topics=())
        self.stock(store, uid, ["Learning to Rank", "Query Expansion"])
        client.get("/user/topics", headers=session)
        client.post("/user/topics/action", json={
            "action": "reject", "topic": "learning to rank"}, headers=session)
        client.post("/user/topics/action", json={
            "action": "accept", "topic": "query expansion"}, headers=session)
        # both slots resolved; the system re-pushes the rejected topic
        self.stock(store, uid, ["Learning to Rank"], system="beta")
        body = client.get("/user/topics", headers=session).json()
        assert all(t["key"] != "learning to rank" for t in body["topics"])

    def test_refresh_records_one_event_per_displayed_topic(self, store, client):
        uid, session = signup(client, topics=())
        self.stock(store, uid, ["T One", "T Two", "T Three"])
        first = client.get("/user/topics", headers=session).json()
        displayed = len(first["topics"])
        assert displayed == 3
        client.post("/user/topics/action", json={"action": "refresh"},
                    headers=session)
        dump = store.export_user_data(uid)
        refreshed = [e for e in dump["interactions"] if e["type"] == "topic_refreshed"]
        assert len(refreshed) == displayed

    def test_unknown_topic_action_is_400(self, store, client):
        uid, session = signup(client, topics=())
        self.stock(store, uid, ["Learning to Rank"])
        client.get("/user/topics", headers=session)
        assert client.post("/user/topics/action", json={
            "action": "accept", "topic": "never offered"},
            headers=session).status_code == 400
        assert client.post("/user/topics/action", json={"action": "boost"},
                           headers=session).status_code == 400


class TestGdprEndpoints:
    def test_export_matches_storage_dump(self, store, client):
        uid, session = signup(client)
        imp = show(store, uid, ["2403.10001"])
        client.post("/user/action", json={
            "impression_id": imp.impression_id, "item_id": "2403.10001",
            "action": "saved"}, headers=session)
        response = client.get("/user/export", headers=session)
        assert response.status_code == 200
        assert response.headers["content-disposition"] == (
            f'attachment; filename="{uid}.json"')
        assert response.content == Store.export_to_json(store.export_user_data(uid))

    def test_delete_account_end_to_end(self, store, client):
        uid, session = signup(client)
        response = client.delete("/user/account", headers=session)
        assert response.json() == {"status": "deleted"}
        # old session gone, login refused, nothing left to export
        assert client.get("/user/profile", headers=session).status_code == 401
        assert client.post("/user/login", json={
            "email": "ada@example.org", "password": PASSWORD}).status_code == 401
        from paperbroker.storage import UnknownRecord
        with pytest.raises(UnknownRecord):
            store.export_user_data(uid)
