"""Thin HTTP client used by the CLI.

Requests go either to a remote service (``url`` given) or to an in-process
instance of the app over an ASGI transport, so the CLI works without a
running server while exercising exactly the service code path.
"""

from __future__ import annotations

import asyncio
from typing import Any

import httpx


class ServiceError(Exception):
    """Non-success response from the service."""

    def __init__(self, status_code: int, detail: Any):
        super().__init__(f"service returned {status_code}: {detail}")
        self.status_code = status_code
        self.detail = detail


def _raise_for(response: httpx.Response) -> dict:
    if response.status_code != 200:
        try:
            detail = response.json().get("detail", response.text)
        except ValueError:
            detail = response.text
        raise ServiceError(response.status_code, detail)
    return response.json()


async def _request_inprocess(method: str, path: str, payload: dict | None) -> httpx.Response:
    from .service import app

    transport = httpx.ASGITransport(app=app)
    async with httpx.AsyncClient(
        transport=transport, base_url="http://kaonbell.internal"
    ) as client:
        return await client.request(method, path, json=payload)


def call_service(
    path: str,
    payload: dict | None = None,
    url: str | None = None,
    method: str = "POST",
    timeout: float = 600.0,
) -> dict:
    """Send one request and return the decoded JSON body.

    Raises ServiceError with the upstream status and detail on non-200
    responses, and httpx transport errors when a remote ``url`` is
    unreachable.
    """
    if url is not None:
        with httpx.Client(base_url=url, timeout=timeout) as client:
            response = client.request(method, path, json=payload)
    else:
        response = asyncio.run(_request_inprocess(method, path, payload))
    return _raise_for(response)
