"""HTTP surface of the broker: system API, user API, admin, tracking."""

from .app import create_app

__all__ = ["create_app"]
