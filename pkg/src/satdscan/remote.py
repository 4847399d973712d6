"""HTTP client for remote classification backends.

Protocol v1, field names bit-exact:
  GET  /health   -> {"status": "ok"}
  GET  /info     -> {"model_name": str, "labels": [str x6], "max_length": int}
  POST /classify with {"texts": [str]} -> {"results": [{"label": str, "scores": {str: float}}]}
Errors from the server use HTTP 4xx/5xx with a JSON body {"error": str}.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import requests

from satdscan.classifier.base import BackendFailure, Classification
from satdscan.labels import CANONICAL_WIRE_NAMES


class Unreachable(RuntimeError):
    pass


class LabelContractViolation(ValueError):
    def __init__(self, server_labels):
        super().__init__(
            f"server labels {list(server_labels)!r} do not match the required "
            f"{list(CANONICAL_WIRE_NAMES)!r}"
        )
        self.server_labels = tuple(server_labels)
        self.expected = CANONICAL_WIRE_NAMES


class MalformedResponse(ValueError):
    pass


@dataclass(frozen=True)
class ServerInfo:
    model_name: str
    labels: tuple
    max_length: int

    def __post_init__(self):
        if tuple(self.labels) != CANONICAL_WIRE_NAMES:
            raise LabelContractViolation(self.labels)
        if self.max_length < 16:
            raise ValueError(f"max_length {self.max_length} below the minimum of 16")


@dataclass(frozen=True)
class InferenceEndpoint:
    base_url: str
    timeout: float = 10.0
    max_batch: int = 32
    retries: int = 2

    def __post_init__(self):
        if self.max_batch < 1:
            raise ValueError("max_batch must be >= 1")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")

    def url(self, path: str) -> str:
        return self.base_url.rstrip("/") + path


def _get_json(endpoint: InferenceEndpoint, path: str, session, backoff: float):
    last_exc = None
    for attempt in range(endpoint.retries + 1):
        if attempt and backoff:
            time.sleep(backoff * (2 ** (attempt - 1)))
        try:
            resp = session.get(endpoint.url(path), timeout=endpoint.timeout)
        except requests.RequestException as exc:
            last_exc = exc
            continue
        if resp.status_code >= 500:
            last_exc = Unreachable(f"{path} returned {resp.status_code}")
            continue
        if resp.status_code != 200:
            raise Unreachable(f"{path} returned {resp.status_code}")
        try:
            return resp.json()
        except ValueError as exc:
            raise MalformedResponse(f"{path} returned invalid JSON") from exc
    raise Unreachable(
        f"{endpoint.url(path)} unreachable after {endpoint.retries + 1} attempts: {last_exc}"
    )


def handshake(endpoint: InferenceEndpoint,
              session: Optional[requests.Session] = None,
              backoff: float = 0.1) -> ServerInfo:
    """Probe /health, then fetch and validate /info against the label contract."""
    session = session or requests.Session()
    health = _get_json(endpoint, "/health", session, backoff)
    if not isinstance(health, dict) or health.get("status") != "ok":
        raise Unreachable(f"health check returned {health!r}")
    info = _get_json(endpoint, "/info", session, backoff)
    try:
        name = info["model_name"]
        labels = tuple(info["labels"])
        max_length = int(info["max_length"])
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedResponse(f"/info payload incomplete: {exc}") from exc
    return ServerInfo(model_name=name, labels=labels, max_length=max_length)


def _parse_results(payload, expected: int) -> list:
    if not isinstance(payload, dict) or "results" not in payload:
        raise MalformedResponse("response has no 'results' field")
    results = payload["results"]
    if not isinstance(results, list) or len(results) != expected:
        raise MalformedResponse(
            f"expected {expected} results, got "
            f"{len(results) if isinstance(results, list) else type(results).__name__}"
        )
    out = []
    for item in results:
        if not isinstance(item, dict) or "label" not in item or "scores" not in item:
            raise MalformedResponse("result item needs 'label' and 'scores'")
        try:
            out.append(Classification.from_wire(item))
        except (ValueError, KeyError, TypeError) as exc:
            raise MalformedResponse(f"invalid result item: {exc}") from exc
    return out


def _classify_chunk(chunk, start: int, endpoint: InferenceEndpoint, session, backoff: float):
    last_error = "no attempt made"
    for attempt in range(endpoint.retries + 1):
        if attempt and backoff:
            time.sleep(backoff * (2 ** (attempt - 1)))
        try:
            resp = session.post(endpoint.url("/classify"),
                                json={"texts": chunk}, timeout=endpoint.timeout)
        except requests.RequestException as exc:
            last_error = str(exc)
            continue
        if resp.status_code >= 500:
            last_error = f"server error {resp.status_code}"
            continue
        if resp.status_code != 200:
            raise BackendFailure(start, start + len(chunk),
                                 f"server rejected chunk with {resp.status_code}")
        try:
            payload = resp.json()
        except ValueError as exc:
            raise MalformedResponse("classify response is not JSON") from exc
        return _parse_results(payload, len(chunk))
    raise BackendFailure(start, start + len(chunk), last_error)


def classify_remote(texts: list, endpoint: InferenceEndpoint,
                    session: Optional[requests.Session] = None,
                    backoff: float = 0.1,
                    max_inflight: int = 4) -> list[Classification]:
    """Chunked POST /classify; results come back in input order.

    Chunks of at most endpoint.max_batch are retried independently with
    exponential backoff; at most max_inflight requests are outstanding at
    once. Any chunk that exhausts its retries fails the whole call: no
    partial success, no silently dropped texts.
    """
    session = session or requests.Session()
    if not texts:
        return []
    chunks = [(start, texts[start:start + endpoint.max_batch])
              for start in range(0, len(texts), endpoint.max_batch)]
    if len(chunks) == 1 or max_inflight <= 1:
        results = [_classify_chunk(chunk, start, endpoint, session, backoff)
                   for start, chunk in chunks]
    else:
        with ThreadPoolExecutor(max_workers=min(max_inflight, len(chunks))) as pool:
            futures = [pool.submit(_classify_chunk, chunk, start, endpoint, session, backoff)
                       for start, chunk in chunks]
            results = [f.result() for f in futures]
    flat: list[Classification] = []
    for part in results:
        flat.extend(part)
    return flat


@dataclass(frozen=True)
class RemoteBackend:
    """classify() backend speaking Protocol v1. Construct via connect()."""

    endpoint: InferenceEndpoint
    info: ServerInfo
    backoff: float = 0.1

    @classmethod
    def connect(cls, endpoint: InferenceEndpoint,
                session: Optional[requests.Session] = None,
                backoff: float = 0.1) -> "RemoteBackend":
        info = handshake(endpoint, session=session, backoff=backoff)
        return cls(endpoint=endpoint, info=info, backoff=backoff)

    def classify_batch(self, texts: list) -> list:
        return classify_remote(texts, self.endpoint, backoff=self.backoff)
