"""Application-level wiring: root negotiation, tracking URLs, leaderboard."""

from __future__ import annotations

import email
import email.policy
import re
from datetime import timedelta

import pytest

from paperbroker.digest import PIXEL_GIF, build_digest, send_digest
from paperbroker.models import InteractionEvent
from paperbroker.storage import new_event_id
from paperbroker.webapi.app import create_app
from paperbroker.webapi.inproc import InProcClient

from factories import BASE_DAY, BASE_TIME, add_articles, add_system, add_user, impression


class TestRootNegotiation:
    def test_browser_gets_the_ui_when_present(self, store, config, clock, tmp_path):
        (tmp_path / "index.html").write_text("<!doctype html><title>feed</title>")
        app = create_app(store, config, clock=clock, frontend_dir=str(tmp_path))
        with InProcClient(app) as client:
            response = client.get("/", headers={"Accept": "text/html,*/*"})
            assert response.status_code == 200
            assert "<title>feed</title>" in response.text

    def test_api_clients_still_get_settings(self, store, config, clock, tmp_path):
        (tmp_path / "index.html").write_text("<!doctype html>")
        system = add_system(store, "alpha")
        app = create_app(store, config, clock=clock, frontend_dir=str(tmp_path))
        with InProcClient(app) as client:
            body = client.get("/", headers={"Accept": "text/html",
                                            "api-key": system.api_key}).json()
            assert body["top_k"] == 10

    def test_browser_without_frontend_needs_a_key(self, client):
        response = client.get("/", headers={"Accept": "text/html"})
        assert response.status_code == 401


class TestTrackingRoutes:
    def sent_tokens(self, store, tmp_path, base_url="http://localhost:8000"):
        uid = add_user(store)
        add_articles(store, "2403.10001")
        store.record_impression(impression(uid, [("2403.10001", "S")]))
        digest = build_digest(store, uid, BASE_DAY)
        path = send_digest(store, digest, base_url=base_url,
                           from_addr="d@example.org", outbox_dir=str(tmp_path))
        with open(path, "rb") as fh:
            msg = email.message_from_binary_file(fh, policy=email.policy.default)
        html_body = msg.get_body(("html",)).get_content()
        click = re.search(r"/t/click/([^\"]+)", html_body).group(1)
        pixel = re.search(r"/t/pixel/([^\"]+)", html_body).group(1)
        return click, pixel

    def test_click_redirects_to_the_abstract(self, store, client, config, tmp_path):
        click, _ = self.sent_tokens(store, tmp_path)
        response = client.get(f"/t/click/{click}")
        assert response.status_code == 307
        assert response.headers["location"] == f"{config.abstract_url_base}/2403.10001"

    def test_pixel_returns_the_gif(self, store, client, tmp_path):
        _, pixel = self.sent_tokens(store, tmp_path)
        response = client.get(f"/t/pixel/{pixel}")
        assert response.status_code == 200
        assert response.headers["content-type"] == "image/gif"
        assert response.content == PIXEL_GIF

    def test_unknown_token_is_404(self, client):
        assert client.get("/t/click/bogus").status_code == 404
        assert client.get("/t/pixel/bogus").status_code == 404

    def test_kind_mismatch_is_404(self, store, client, tmp_path):
        click, pixel = self.sent_tokens(store, tmp_path)
        assert client.get(f"/t/click/{pixel}").status_code == 404
        assert client.get(f"/t/pixel/{click}").status_code == 404


class TestLeaderboardEndpoint:
    def seeded(self, store):
        uid = add_user(store)
        alpha = add_system(store, "alpha")
        beta = add_system(store, "beta")
        add_articles(store, "a1", "a2")
        imp = impression(uid, [("a1", alpha.system_id), ("a2", beta.system_id)],
                         selected=[alpha.system_id, beta.system_id])
        store.record_impression(imp)
        store.record_interaction(InteractionEvent(
            event_id=new_event_id(), impression_id=imp.impression_id, user_id=uid,
            item_id="a1", type="saved", occurred_at=BASE_TIME))
        return alpha, beta

    def params(self):
        day = BASE_DAY.isoformat()
        return {"from": day, "to": day}

    def test_caller_sees_own_name_competitors_masked(self, store, client):
        alpha, beta = self.seeded(store)
        board = client.get("/admin/leaderboard", params=self.params(),
                           headers={"api-key": alpha.api_key}).json()
        names = [row["system"] for row in board["leaderboard"]]
        assert "alpha" in names
        assert "beta" not in names
        masked = [n for n in names if n != "alpha"]
        assert masked and all(re.fullmatch(r"system-\d+", n) for n in masked)
        top = board["leaderboard"][0]
        assert top["system"] == "alpha"
        assert top["mean_normalized_reward"] == pytest.approx(1.0)

    def test_same_masking_from_the_other_side(self, store, client):
        alpha, beta = self.seeded(store)
        board = client.get("/admin/leaderboard", params=self.params(),
                           headers={"api-key": beta.api_key}).json()
        names = [row["system"] for row in board["leaderboard"]]
        assert "beta" in names and "alpha" not in names

    def test_empty_period(self, store, client):
        alpha, _ = self.seeded(store)
        day = (BASE_DAY + timedelta(days=30)).isoformat()
        board = client.get("/admin/leaderboard", params={"from": day, "to": day},
                           headers={"api-key": alpha.api_key}).json()
        assert board["leaderboard"] == []

    def test_auth_and_parameter_errors(self, store, client):
        alpha, _ = self.seeded(store)
        assert client.get("/admin/leaderboard", params=self.params()).status_code == 401
        bad_order = {"from": "2024-03-14", "to": "2024-03-01"}
        assert client.get("/admin/leaderboard", params=bad_order,
                          headers={"api-key": alpha.api_key}).status_code == 400
        assert client.get("/admin/leaderboard", params={"from": "x", "to": "y"},
                          headers={"api-key": alpha.api_key}).status_code == 400
        assert client.get("/admin/leaderboard",
                          params={**self.params(), "kind": "books"},
                          headers={"api-key": alpha.api_key}).status_code == 400
