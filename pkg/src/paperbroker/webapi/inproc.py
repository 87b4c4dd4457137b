"""Synchronous in-process driver for the ASGI app.

Speaks the ASGI protocol directly on a private event loop, so requests
exercise the full routing/auth/serialization stack without sockets or
thread pools. The call surface mirrors the small httpx.Client subset
used by API clients in this codebase, which makes it a drop-in
transport for the baseline recommender and the simulation.
"""

from __future__ import annotations

import asyncio
import json as jsonlib
from urllib.parse import urlencode

_ASGI_VERSION = {"version": "3.0", "spec_version": "2.3"}
_CLIENT_ADDR = ("127.0.0.1", 12345)
_SERVER_ADDR = ("testserver", 80)


class InProcResponse:
    def __init__(self, status_code: int, headers: list[tuple[bytes, bytes]], content: bytes):
        self.status_code = status_code
        self.raw_headers = headers
        self._headers: dict[str, str] | None = None
        self.content = content

    @property
    def headers(self) -> dict[str, str]:
        # Decoded lazily; most callers only look at the body.
        if self._headers is None:
            self._headers = {k.decode("latin-1").lower(): v.decode("latin-1")
                             for k, v in self.raw_headers}
        return self._headers

    def json(self):
        return jsonlib.loads(self.content.decode("utf-8"))

    @property
    def text(self) -> str:
        return self.content.decode("utf-8")

    def raise_for_status(self):
        if self.status_code >= 400:
            raise RuntimeError(f"HTTP {self.status_code}: {self.content[:200]!r}")
        return self


class InProcClient:
    def __init__(self, app, headers: dict[str, str] | None = None):
        self.app = app
        self.base_headers = dict(headers or {})
        self._loop = asyncio.new_event_loop()

    def close(self) -> None:
        self._loop.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def request(self, method: str, path: str, *, params: dict | None = None,
                json=None, headers: dict[str, str] | None = None) -> InProcResponse:
        body = b""
        all_headers = dict(self.base_headers)
        if headers:
            all_headers.update(headers)
        if json is not None:
            body = jsonlib.dumps(json).encode("utf-8")
            all_headers.setdefault("content-type", "application/json")
        # Accept query strings both inline ("/a?b=1") and via params.
        path, _, inline = path.partition("?")
        query = urlencode(params, doseq=True) if params else ""
        if inline:
            query = f"{inline}&{query}" if query else inline
        scope = {
            "type": "http",
            "asgi": _ASGI_VERSION,
            "http_version": "1.1",
            "method": method.upper(),
            "scheme": "http",
            "path": path,
            "raw_path": path.encode("utf-8"),
            "query_string": query.encode("utf-8"),
            "root_path": "",
            "headers": [(k.lower().encode("latin-1"), v.encode("latin-1"))
                        for k, v in all_headers.items()]
                       + [(b"host", b"testserver"),
                          (b"content-length", str(len(body)).encode())],
            "client": _CLIENT_ADDR,
            "server": _SERVER_ADDR,
        }

        def attempt():
            received = {"sent": False}

            async def receive():
                if received["sent"]:
                    return {"type": "http.disconnect"}
                received["sent"] = True
                return {"type": "http.request", "body": body, "more_body": False}

            status = {}
            chunks: list[bytes] = []

            async def send(message):
                if message["type"] == "http.response.start":
                    status["code"] = message["status"]
                    status["headers"] = message.get("headers", [])
                elif message["type"] == "http.response.body":
                    chunks.append(message.get("body", b""))

            return self.app(scope, receive, send), status, chunks

        # Fast path: with immediate receive/send, an async endpoint never
        # actually suspends, so the whole request finishes in one step
        # without event-loop scheduling.
        coro, status, chunks = attempt()
        needs_loop = False
        try:
            coro.send(None)
            needs_loop = True  # suspended on a real future (threadpool offload)
        except StopIteration:
            pass
        except RuntimeError as exc:
            if "event loop" not in str(exc):
                raise
            needs_loop = True
        if needs_loop:
            # Replaying is safe: these trip either before the handler runs
            # (threadpool entry for sync endpoints) or while streaming a
            # file response, and file-serving handlers are read-only.
            coro.close()
            coro, status, chunks = attempt()
            self._loop.run_until_complete(coro)
        return InProcResponse(status["code"], status["headers"], b"".join(chunks))

    def get(self, path: str, *, params: dict | None = None,
            headers: dict[str, str] | None = None) -> InProcResponse:
        return self.request("GET", path, params=params, headers=headers)

    def post(self, path: str, *, params: dict | None = None, json=None,
             headers: dict[str, str] | None = None) -> InProcResponse:
        return self.request("POST", path, params=params, json=json, headers=headers)

    def put(self, path: str, *, json=None, headers: dict[str, str] | None = None) -> InProcResponse:
        return self.request("PUT", path, json=json, headers=headers)

    def delete(self, path: str, *, headers: dict[str, str] | None = None) -> InProcResponse:
        return self.request("DELETE", path, headers=headers)
