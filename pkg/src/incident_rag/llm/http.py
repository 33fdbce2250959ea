"""Table-driven HTTP chat-completion adapter.

A :class:`WireFormat` says where to POST, how to authenticate, how to lay
out the request body and where the reply text and token usage live in the
response. Body templates are plain JSON-like data in which a string that is
exactly ``"{name}"`` is replaced by the typed value of ``name``.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Optional

import httpx

from .base import (
    AuthError,
    Completion,
    LlmError,
    MalformedResponse,
    Pacer,
    ProviderConfig,
    RateLimited,
    Timeout,
    count_tokens_approx,
)

_TRANSIENT_STATUS = frozenset({408, 409, 425, 500, 502, 503, 504, 529})


@dataclass(frozen=True)
class WireFormat:
    name: str
    path: str
    request: Mapping[str, Any]
    text_path: str
    input_tokens_path: Optional[str] = None
    output_tokens_path: Optional[str] = None
    auth_header: str = "Authorization"
    auth_prefix: str = "Bearer "
    headers: Mapping[str, str] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, name: str, doc: Mapping[str, Any]) -> "WireFormat":
        response = doc.get("response", {})
        return cls(
            name=name,
            path=doc["path"],
            request=doc["request"],
            text_path=response["text"],
            input_tokens_path=response.get("input_tokens"),
            output_tokens_path=response.get("output_tokens"),
            auth_header=doc.get("auth_header", "Authorization"),
            auth_prefix=doc.get("auth_prefix", "Bearer "),
            headers=doc.get("headers", {}),
        )


def render_template(template: Any, values: Mapping[str, Any]) -> Any:
    if isinstance(template, str):
        if template.startswith("{") and template.endswith("}") and template[1:-1] in values:
            return values[template[1:-1]]
        return template
    if isinstance(template, Mapping):
        return {k: render_template(v, values) for k, v in template.items()}
    if isinstance(template, list):
        return [render_template(v, values) for v in template]
    return template


def dig(doc: Any, path: str) -> Any:
    """Follow a dotted path through dicts and lists (numeric parts index lists)."""
    node = doc
    for part in path.split("."):
        if isinstance(node, list):
            try:
                node = node[int(part)]
            except (ValueError, IndexError) as exc:
                raise KeyError(path) from exc
        elif isinstance(node, Mapping) and part in node:
            node = node[part]
        else:
            raise KeyError(path)
    return node


class HttpChatProvider:
    """Chat completions over HTTP with retries and pacing."""

    deterministic = False

    def __init__(
        self,
        config: ProviderConfig,
        wire: WireFormat,
        client: Optional[httpx.Client] = None,
        sleep: Callable[[float], None] = time.sleep,
        pacer: Optional[Pacer] = None,
    ):
        self.config = config
        self.wire = wire
        self._client = client or httpx.Client(timeout=config.timeout_s)
        self._sleep = sleep
        self._pacer = pacer or Pacer(config.min_interval_s, config.max_in_flight, sleep=sleep)

    def _url(self) -> str:
        return self.config.endpoint.rstrip("/") + self.wire.path

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json", **self.wire.headers}
        if self.config.auth_env:
            key = os.environ.get(self.config.auth_env)
            if not key:
                raise AuthError(f"{self.config.provider_id}: environment variable {self.config.auth_env} is not set")
            headers[self.wire.auth_header] = self.wire.auth_prefix + key
        return headers

    def _body(self, prompt: str) -> Any:
        return render_template(
            self.wire.request,
            {
                "model": self.config.model_name,
                "prompt": prompt,
                "temperature": self.config.temperature,
                "max_output_tokens": self.config.max_output_tokens,
            },
        )

    def _post_once(self, prompt: str) -> httpx.Response:
        try:
            with self._pacer:
                return self._client.post(self._url(), json=self._body(prompt), headers=self._headers())
        except httpx.TimeoutException as exc:
            raise Timeout(f"{self.config.provider_id}: request timed out") from exc

    def complete(self, prompt: str, **_context: Any) -> Completion:
        policy = self.config.retry
        started = time.perf_counter()
        last_error: Optional[LlmError] = None
        for attempt in range(1, policy.max_attempts + 1):
            try:
                resp = self._post_once(prompt)
            except Timeout as exc:
                last_error = exc
            except httpx.TransportError as exc:
                last_error = LlmError(f"{self.config.provider_id}: transport error: {exc}")
            else:
                if resp.status_code in (401, 403):
                    raise AuthError(f"{self.config.provider_id}: HTTP {resp.status_code}")
                if resp.status_code == 429:
                    last_error = RateLimited(f"{self.config.provider_id}: HTTP 429 after {attempt} attempt(s)")
                elif resp.status_code in _TRANSIENT_STATUS:
                    last_error = LlmError(f"{self.config.provider_id}: HTTP {resp.status_code}")
                elif resp.status_code >= 400:
                    raise LlmError(f"{self.config.provider_id}: HTTP {resp.status_code}: {resp.text[:200]}")
                else:
                    return self._parse(resp, prompt, started)
            if attempt < policy.max_attempts:
                self._sleep(policy.delay(attempt))
        assert last_error is not None
        raise last_error

    def _parse(self, resp: httpx.Response, prompt: str, started: float) -> Completion:
        try:
            doc = resp.json()
            text = dig(doc, self.wire.text_path)
        except (ValueError, KeyError) as exc:
            raise MalformedResponse(f"{self.config.provider_id}: unexpected response shape") from exc
        if not isinstance(text, str):
            raise MalformedResponse(f"{self.config.provider_id}: reply text is not a string")
        return Completion(
            text=text,
            input_tokens=_usage(doc, self.wire.input_tokens_path, prompt),
            output_tokens=_usage(doc, self.wire.output_tokens_path, text),
            latency_ms=(time.perf_counter() - started) * 1000.0,
            provider_id=self.config.provider_id,
        )


def _usage(doc: Any, path: Optional[str], fallback_text: str) -> int:
    if path:
        try:
            value = dig(doc, path)
        except KeyError:
            value = None
        if isinstance(value, int) and not isinstance(value, bool) and value >= 0:
            return value
    return count_tokens_approx(fallback_text)

