"""Thin client for the service API.

Every harness verb goes through the same HTTP surface: against a running
server when a URL is given, or against an in-process app instance (ASGI
transport, no socket) for plain desk use.
"""

from __future__ import annotations

import asyncio
from typing import Any

import httpx


class ServiceClient:
    def __init__(self, server: str | None = None):
        self.server = server.rstrip("/") if server else None
        self._app = None
        if self.server is None:
            from gameaudit.service import create_app

            self._app = create_app()

    def request(self, method: str, path: str, payload: dict[str, Any] | None = None) -> tuple[int, Any]:
        if self.server is not None:
            with httpx.Client(base_url=self.server, timeout=httpx.Timeout(None)) as client:
                resp = client.request(method, path, json=payload)
                return resp.status_code, _body(resp)

        async def go() -> tuple[int, Any]:
            transport = httpx.ASGITransport(app=self._app)
            async with httpx.AsyncClient(
                transport=transport, base_url="http://gameaudit.internal", timeout=None
            ) as client:
                resp = await client.request(method, path, json=payload)
                return resp.status_code, _body(resp)

        return asyncio.run(go())

    def get(self, path: str) -> tuple[int, Any]:
        return self.request("GET", path)

    def post(self, path: str, payload: dict[str, Any]) -> tuple[int, Any]:
        return self.request("POST", path, payload)


def _body(resp: httpx.Response) -> Any:
    try:
        return resp.json()
    except ValueError:
        return {"detail": resp.text}
