"""Application factory wiring every HTTP surface onto one service.

The error contract is uniform: failures return {"error": "<message>"}
with a meaningful status code. A clock callable is injected so tests
and the simulation can drive the submission window and event timestamps
deterministically.
"""

from __future__ import annotations

import os
from datetime import datetime
from typing import Callable

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import FileResponse, JSONResponse, RedirectResponse, Response
from fastapi.staticfiles import StaticFiles

from ..config import Config
from ..digest import resolve_tracking
from ..models import ValidationError, utc_now
from ..storage import Store
from . import admin_routes, system_routes, user_routes
from .deps import require_system
from .system_routes import settings_payload


def create_app(store: Store, config: Config, clock: Callable[[], datetime] = utc_now,
               frontend_dir: str | None = None) -> FastAPI:
    app = FastAPI(docs_url=None, redoc_url=None, openapi_url=None)
    app.state.store = store
    app.state.config = config
    app.state.clock = clock

    @app.exception_handler(HTTPException)
    async def http_error(request: Request, exc: HTTPException):
        return JSONResponse({"error": str(exc.detail)}, status_code=exc.status_code)

    @app.exception_handler(RequestValidationError)
    async def request_error(request: Request, exc: RequestValidationError):
        return JSONResponse({"error": "malformed request"}, status_code=400)

    @app.exception_handler(ValidationError)
    async def validation_error(request: Request, exc: ValidationError):
        return JSONResponse({"error": "; ".join(exc.errors)}, status_code=400)

    index_path = os.path.join(frontend_dir, "index.html") if frontend_dir else None

    @app.get("/")
    def root(request: Request):
        # Browsers get the UI; API clients (which always send api-key)
        # get the settings document the client protocol starts with.
        wants_html = "text/html" in request.headers.get("accept", "")
        if wants_html and "api-key" not in request.headers \
                and index_path and os.path.exists(index_path):
            return FileResponse(index_path)
        require_system(request)
        return settings_payload(request)

    @app.get("/t/click/{token}")
    def tracked_click(token: str):
        resolved = resolve_tracking(store, token, abstract_url_base=config.abstract_url_base,
                                    now=clock())
        if resolved is None or resolved[0] != "redirect":
            raise HTTPException(404, "unknown token")
        return RedirectResponse(resolved[1], status_code=307)

    @app.get("/t/pixel/{token}")
    def tracked_pixel(token: str):
        resolved = resolve_tracking(store, token, abstract_url_base=config.abstract_url_base,
                                    now=clock())
        if resolved is None or resolved[0] != "pixel":
            raise HTTPException(404, "unknown token")
        return Response(content=resolved[1], media_type="image/gif")

    # User routes first: the feed and action endpoints carry most traffic
    # and route matching walks the table in order.
    app.include_router(user_routes.router)
    app.include_router(system_routes.router)
    app.include_router(admin_routes.router)

    if frontend_dir and os.path.isdir(frontend_dir):
        app.mount("/static", StaticFiles(directory=frontend_dir), name="static")

    return app
