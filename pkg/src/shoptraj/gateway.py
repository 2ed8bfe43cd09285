"""Uniform interface to text-generation backends.

Two backend kinds: `live` speaks a chat-completion HTTP API with retry and
exponential backoff; `mock` replays fixture files keyed by (tag, stable hash
of the user prompt) so pipelines run fully offline and reproducibly.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

import httpx

log = logging.getLogger(__name__)

HASH_LENGTH = 16
RETRYABLE_STATUS = {429, 500, 502, 503, 504}


class GatewayError(Exception):
    """Base class for backend failures."""


class TransportError(GatewayError):
    """Request kept failing after exhausting retries."""


class AuthenticationError(GatewayError):
    """The backend rejected the configured credentials."""


class MissingFixtureError(GatewayError):
    """The mock backend has no fixture for this (tag, prompt) pair."""


class StructuredOutputError(GatewayError):
    """A completion could not be parsed or validated; `field` names the culprit."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


@dataclass(frozen=True)
class PromptRequest:
    system: str
    user: str
    temperature: float = 0.7
    max_tokens: int = 1024
    tag: str = "untagged"
    seed: int | None = None

    def __post_init__(self) -> None:
        if not self.system or not self.user:
            raise ValueError("system and user prompts must be non-empty")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")


@dataclass(frozen=True)
class BackendConfig:
    kind: str  # "live" | "mock"
    model_name: str = "mock-model"
    endpoint: str | None = None
    api_key_env: str | None = None
    fixture_dir: str | None = None
    max_retries: int = 3
    backoff_base: float = 1.0
    max_in_flight: int = 4

    def __post_init__(self) -> None:
        if self.kind not in ("live", "mock"):
            raise ValueError(f"unknown backend kind '{self.kind}'")
        if self.kind == "live" and not (self.endpoint and self.api_key_env):
            raise ValueError("live backend requires endpoint and api_key_env")
        if self.kind == "mock" and not self.fixture_dir:
            raise ValueError("mock backend requires fixture_dir")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


def request_hash(user_prompt: str) -> str:
    return hashlib.sha256(user_prompt.encode("utf-8")).hexdigest()[:HASH_LENGTH]


def fixture_path(fixture_dir: str | Path, tag: str, user_prompt: str) -> Path:
    safe_tag = re.sub(r"[^A-Za-z0-9._-]", "_", tag)
    return Path(fixture_dir) / f"{safe_tag}__{request_hash(user_prompt)}.txt"


def write_fixture(fixture_dir: str | Path, req: PromptRequest, reply: str) -> Path:
    """Store a canned reply where `complete` will find it for this request."""
    path = fixture_path(fixture_dir, req.tag, req.user)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(reply, encoding="utf-8")
    return path


class Gateway:
    """Shareable completion client; in-flight requests bounded by config.

    `sleep` and `jitter_rng` exist so tests can observe backoff without waiting.
    """

    def __init__(
        self,
        config: BackendConfig,
        sleep: Callable[[float], None] = time.sleep,
        jitter_rng: random.Random | None = None,
        transport: httpx.BaseTransport | None = None,
    ):
        self.config = config
        self._sleep = sleep
        self._jitter = jitter_rng or random.Random()
        self._transport = transport
        self._slots = threading.Semaphore(config.max_in_flight)

    def complete(self, req: PromptRequest) -> str:
        with self._slots:
            if self.config.kind == "mock":
                return self._complete_mock(req)
            return self._complete_live(req)

    def _complete_mock(self, req: PromptRequest) -> str:
        path = fixture_path(self.config.fixture_dir, req.tag, req.user)
        if not path.exists():
            raise MissingFixtureError(f"no fixture for tag '{req.tag}' at {path}")
        return path.read_text(encoding="utf-8")

    def _complete_live(self, req: PromptRequest) -> str:
        api_key = os.environ.get(self.config.api_key_env or "")
        if not api_key:
            raise AuthenticationError(
                f"environment variable '{self.config.api_key_env}' is not set"
            )
        payload: dict[str, Any] = {
            "model": self.config.model_name,
            "messages": [
                {"role": "system", "content": req.system},
                {"role": "user", "content": req.user},
            ],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        }
        if req.seed is not None:
            payload["seed"] = req.seed
        headers = {"Authorization": f"Bearer {api_key}"}

        last_error: str = "no attempts made"
        attempts = self.config.max_retries + 1
        with httpx.Client(transport=self._transport, timeout=60.0) as client:
            for attempt in range(attempts):
                if attempt > 0:
                    # full jitter: uniform over [0, base * 2^(attempt-1)]
                    self._sleep(self._jitter.uniform(0.0, self.config.backoff_base * 2 ** (attempt - 1)))
                try:
                    resp = client.post(self.config.endpoint, json=payload, headers=headers)
                except httpx.HTTPError as exc:
                    last_error = f"transport error: {exc}"
                    log.warning("[%s] attempt %d failed: %s", req.tag, attempt + 1, last_error)
                    continue
                if resp.status_code in (401, 403):
                    raise AuthenticationError(f"backend rejected credentials ({resp.status_code})")
                if resp.status_code in RETRYABLE_STATUS:
                    last_error = f"status {resp.status_code}"
                    log.warning("[%s] attempt %d failed: %s", req.tag, attempt + 1, last_error)
                    continue
                if resp.status_code != 200:
                    raise GatewayError(f"unexpected status {resp.status_code}: {resp.text[:200]}")
                return _extract_completion(resp.json())
        raise TransportError(f"gave up after {attempts} attempts; last error: {last_error}")


def _extract_completion(body: Any) -> str:
    try:
        return body["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError):
        raise GatewayError(f"malformed completion response: {json.dumps(body)[:200]}") from None


# ---------------------------------------------------------------------------
# Structured-output parsing


@dataclass(frozen=True)
class SchemaDescriptor:
    """Shape description for machine-parseable replies.

    kind "record": fixed field names with per-field type expressions;
    kind "map": free string keys with a single value type;
    kind "list": homogeneous list of an item schema, or of plain values
    described by `value_type` when `item` is None.
    Type expressions: "string", "integer", "number", "list[T]", "map[T]".
    """

    kind: str
    fields: Mapping[str, str] = field(default_factory=dict)
    value_type: str = "string"
    item: "SchemaDescriptor | None" = None

    @classmethod
    def record(cls, **fields: str) -> "SchemaDescriptor":
        return cls(kind="record", fields=dict(fields))

    @classmethod
    def mapping(cls, value_type: str) -> "SchemaDescriptor":
        return cls(kind="map", value_type=value_type)

    @classmethod
    def list_of(cls, item: "SchemaDescriptor | str") -> "SchemaDescriptor":
        if isinstance(item, str):
            return cls(kind="list", value_type=item)
        return cls(kind="list", item=item)

    def shape(self) -> Any:
        if self.kind == "record":
            return {name: expr for name, expr in self.fields.items()}
        if self.kind == "map":
            return {"<key>": self.value_type}
        return [self.item.shape() if self.item else self.value_type]

    def format_instructions(self) -> str:
        return (
            "Reply with a single JSON value of exactly this shape "
            "(no extra fields, no trailing prose): "
            + json.dumps(self.shape())
        )


def _check_type(value: Any, expr: str, where: str) -> None:
    if expr == "string":
        if not isinstance(value, str):
            raise StructuredOutputError(f"field '{where}' must be a string", field=where)
    elif expr == "integer":
        if isinstance(value, bool) or not isinstance(value, int):
            raise StructuredOutputError(f"field '{where}' must be an integer", field=where)
    elif expr == "number":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise StructuredOutputError(f"field '{where}' must be a number", field=where)
    elif expr.startswith("list[") and expr.endswith("]"):
        if not isinstance(value, list):
            raise StructuredOutputError(f"field '{where}' must be a list", field=where)
        inner = expr[5:-1]
        for i, v in enumerate(value):
            _check_type(v, inner, f"{where}[{i}]")
    elif expr.startswith("map[") and expr.endswith("]"):
        if not isinstance(value, dict):
            raise StructuredOutputError(f"field '{where}' must be a mapping", field=where)
        inner = expr[4:-1]
        for k, v in value.items():
            _check_type(v, inner, f"{where}.{k}" if where else str(k))
    else:
        raise ValueError(f"unknown type expression '{expr}'")


def _validate(value: Any, schema: SchemaDescriptor, where: str = "") -> Any:
    if schema.kind == "record":
        if not isinstance(value, dict):
            raise StructuredOutputError(
                f"expected an object at '{where or '$'}'", field=where or "$"
            )
        for name, expr in schema.fields.items():
            path = f"{where}.{name}" if where else name
            if name not in value:
                raise StructuredOutputError(f"missing field '{path}'", field=path)
            _check_type(value[name], expr, path)
        return {name: value[name] for name in schema.fields}
    if schema.kind == "map":
        if not isinstance(value, dict):
            raise StructuredOutputError(
                f"expected a mapping at '{where or '$'}'", field=where or "$"
            )
        for k, v in value.items():
            path = f"{where}.{k}" if where else str(k)
            _check_type(v, schema.value_type, path)
        return dict(value)
    if schema.kind == "list":
        if not isinstance(value, list):
            raise StructuredOutputError(
                f"expected a list at '{where or '$'}'", field=where or "$"
            )
        if schema.item is None:
            for i, v in enumerate(value):
                _check_type(v, schema.value_type, f"{where}[{i}]" if where else f"[{i}]")
            return list(value)
        return [
            _validate(v, schema.item, f"{where}[{i}]" if where else f"[{i}]")
            for i, v in enumerate(value)
        ]
    raise ValueError(f"unknown schema kind '{schema.kind}'")


def parse_structured(raw: str, schema: SchemaDescriptor) -> Any:
    """Extract the first well-formed JSON object or array embedded in raw text.

    Tolerates surrounding prose and code fences. The extracted value is
    validated against `schema`; errors name the offending field so callers
    can re-prompt.
    """
    decoder = json.JSONDecoder()
    for pos, ch in enumerate(raw):
        if ch not in "{[":
            continue
        try:
            value, _ = decoder.raw_decode(raw, pos)
        except json.JSONDecodeError:
            continue
        return _validate(value, schema)
    raise StructuredOutputError("no parseable JSON object found in reply")


def retry_request(req: PromptRequest, error: StructuredOutputError | str) -> PromptRequest:
    """Build the single re-prompt issued after a malformed or invalid reply."""
    note = (
        f"\n\nYour previous reply was rejected: {error}. "
        "Respond again following the required format exactly."
    )
    return PromptRequest(
        system=req.system,
        user=req.user + note,
        temperature=req.temperature,
        max_tokens=req.max_tokens,
        tag=req.tag,
        seed=req.seed,
    )


def complete_structured(gw: Gateway, req: PromptRequest, schema: SchemaDescriptor) -> Any:
    """complete + parse with one re-prompt on parse failure, then hard failure."""
    raw = gw.complete(req)
    try:
        return parse_structured(raw, schema)
    except StructuredOutputError as exc:
        log.warning("[%s] reply failed to parse (%s); re-prompting once", req.tag, exc)
        raw = gw.complete(retry_request(req, exc))
        return parse_structured(raw, schema)
