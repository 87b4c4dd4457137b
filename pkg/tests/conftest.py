from __future__ import annotations

from datetime import timedelta

import pytest

from paperbroker.config import Config
from paperbroker.storage import Store
from paperbroker.webapi.app import create_app
from paperbroker.webapi.inproc import InProcClient

from factories import BASE_TIME


class Clock:
    """Injectable time source; tests move it instead of sleeping."""

    def __init__(self, now=BASE_TIME):
        self.now = now

    def __call__(self):
        return self.now

    def advance(self, **kwargs) -> None:
        self.now += timedelta(**kwargs)


@pytest.fixture
def store():
    s = Store(":memory:")
    yield s
    s.close()


@pytest.fixture
def config(tmp_path):
    # Always-open submission window; individual tests narrow it when the
    # window itself is under test.
    return Config(db_path=":memory:", pbkdf2_iterations=600,
                  window_start_utc="00:00", window_hours=24.0,
                  outbox_dir=str(tmp_path / "outbox"))


@pytest.fixture
def clock():
    return Clock()


@pytest.fixture
def app(store, config, clock):
    return create_app(store, config, clock=clock)


@pytest.fixture
def client(app):
    with InProcClient(app) as c:
        yield c
