"""Thin client for the factorization service.

Without a server URL the client mounts the ASGI app in-process, so the CLI
works standalone while exercising exactly the service code path; with a URL
it talks to a remote instance over HTTP.
"""

from __future__ import annotations

import asyncio

import httpx

__all__ = ["ServiceClient", "ServiceError"]


class ServiceError(RuntimeError):
    """Non-2xx response from the service."""

    def __init__(self, status_code: int, detail: str):
        super().__init__(f"service returned {status_code}: {detail}")
        self.status_code = status_code
        self.detail = detail


def _extract_detail(response: httpx.Response) -> str:
    try:
        body = response.json()
    except ValueError:
        return response.text
    if isinstance(body, dict) and "detail" in body:
        return str(body["detail"])
    return str(body)


class ServiceClient:
    def __init__(self, server: str | None = None, timeout: float | None = None):
        self.server = server.rstrip("/") if server else None
        self.timeout = timeout

    def post(self, path: str, payload: dict) -> dict:
        if self.server is None:
            return asyncio.run(self._post_local(path, payload))
        response = httpx.post(self.server + path, json=payload, timeout=self.timeout)
        return self._handle(response)

    async def _post_local(self, path: str, payload: dict) -> dict:
        from .service.app import app

        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(
            transport=transport, base_url="http://smoothntf", timeout=self.timeout
        ) as client:
            response = await client.post(path, json=payload)
        return self._handle(response)

    @staticmethod
    def _handle(response: httpx.Response) -> dict:
        if response.status_code >= 400:
            raise ServiceError(response.status_code, _extract_detail(response))
        return response.json()
