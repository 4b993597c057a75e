"""HTTP client for the ``POST /v1/infer`` inference contract."""

from __future__ import annotations

import os
from typing import Any, Mapping

import httpx

GOLD_FIELDS = frozenset({"label", "escalate", "gold_label", "gold_escalate", "gold_doc_ids"})


class TransientProviderError(Exception):
    """Transport failure or error status; the call may be retried."""


class MalformedResponse(Exception):
    """The provider answered, but not with a contract-conforming body."""


class HttpProvider:
    """Calls a remote endpoint. Gold labels are stripped from request items.

    An API key is read from ``READINESS_API_KEY`` when set.
    """

    def __init__(self, endpoint: str, *, timeout_s: float = 60.0, client: httpx.Client | None = None) -> None:
        headers = {}
        key = os.environ.get("READINESS_API_KEY")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self._client = client or httpx.Client(base_url=endpoint, timeout=timeout_s, headers=headers)
        self._owns_client = client is None

    def infer(self, request: Mapping[str, Any]) -> dict[str, Any]:
        body = dict(request)
        body["item"] = {k: v for k, v in request["item"].items() if k not in GOLD_FIELDS}
        try:
            resp = self._client.post("/v1/infer", json=body)
        except httpx.HTTPError as exc:
            raise TransientProviderError(str(exc)) from exc
        if resp.status_code >= 400:
            raise TransientProviderError(f"HTTP {resp.status_code}")
        try:
            doc = resp.json()
        except ValueError as exc:
            raise MalformedResponse("response body is not JSON") from exc
        if not isinstance(doc, dict):
            raise MalformedResponse("response body is not an object")
        return doc

    __call__ = infer

    def close(self) -> None:
        if self._owns_client:
            self._client.close()
