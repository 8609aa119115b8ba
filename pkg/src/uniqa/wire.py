"""Thin HTTP plumbing shared by the remote provider clients."""

from __future__ import annotations

import threading

import httpx

from .errors import ProviderError

DEFAULT_TIMEOUT = 30.0
MAX_INFLIGHT = 8  # bound on concurrent provider requests per shared client

_shared_client: httpx.Client | None = None
_client_lock = threading.Lock()


def shared_client() -> httpx.Client:
    global _shared_client
    with _client_lock:
        if _shared_client is None:
            _shared_client = httpx.Client(
                timeout=DEFAULT_TIMEOUT,
                limits=httpx.Limits(max_connections=MAX_INFLIGHT),
            )
        return _shared_client


def post_json(url: str, payload: dict, *, stage: str,
              client: httpx.Client | None = None) -> dict:
    """POST a JSON body and return the decoded JSON response.

    Transport failures, non-2xx statuses, and non-object bodies are raised
    as ProviderError tagged with the pipeline stage and endpoint.
    """
    client = client or shared_client()
    try:
        response = client.post(url, json=payload)
    except httpx.HTTPError as exc:
        raise ProviderError(f"{stage} provider at {url}: {exc}", stage=stage) from exc
    if response.status_code != 200:
        raise ProviderError(
            f"{stage} provider at {url}: HTTP {response.status_code}", stage=stage
        )
    try:
        body = response.json()
    except ValueError as exc:
        raise ProviderError(f"{stage} provider at {url}: invalid JSON", stage=stage) from exc
    if not isinstance(body, dict):
        raise ProviderError(f"{stage} provider at {url}: expected JSON object", stage=stage)
    return body
