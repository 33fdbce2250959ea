from __future__ import annotations

import json
from fractions import Fraction

import httpx
import pytest

from incident_rag.llm import (
    NOT_FOUND_TEXT,
    AuthError,
    EchoProvider,
    HttpChatProvider,
    LlmError,
    MalformedResponse,
    Pacer,
    PricingModel,
    ProviderConfig,
    RateLimited,
    RetryPolicy,
    Timeout,
    UnknownProvider,
    count_tokens_approx,
    estimate_cost,
    format_money,
    load_registry,
    oracle_complete,
    parse_registry,
)
from incident_rag.llm.builtin import _cap
from incident_rag.questions import MALWARE_QUESTIONS
from incident_rag.rag import Chunk, RetrievalHit

REPLIES = {
    "anthropic": {"content": [{"type": "text", "text": "hello"}], "usage": {"input_tokens": 11, "output_tokens": 2}},
    "openai_chat": {"choices": [{"message": {"content": "hello"}}], "usage": {"prompt_tokens": 11, "completion_tokens": 2}},
    "openai_gpt5": {"choices": [{"message": {"content": "hello"}}], "usage": {"prompt_tokens": 11, "completion_tokens": 2}},
    "ollama": {"message": {"content": "hello"}, "prompt_eval_count": 11, "eval_count": 2},
}
PROVIDER_FOR_WIRE = {"anthropic": "claude", "openai_chat": "deepseek", "openai_gpt5": "gpt-5.2", "ollama": "ollama"}


class Recorder:
    def __init__(self, *responses):
        self.responses = list(responses)
        self.requests: list[httpx.Request] = []

    def __call__(self, request: httpx.Request) -> httpx.Response:
        self.requests.append(request)
        item = self.responses.pop(0) if len(self.responses) > 1 else self.responses[0]
        if isinstance(item, Exception):
            raise item
        return item


def make_provider(registry, provider_id: str, handler, monkeypatch, sleeps=None):
    config = registry.config(provider_id)
    if config.auth_env:
        monkeypatch.setenv(config.auth_env, "sk-test")
    sleeps = [] if sleeps is None else sleeps
    return HttpChatProvider(
        config,
        registry.wires[config.wire],
        client=httpx.Client(transport=httpx.MockTransport(handler)),
        sleep=sleeps.append,
    )


@pytest.mark.parametrize("wire", sorted(REPLIES))
def test_each_wire_format_round_trips(wire, registry, monkeypatch):
    rec = Recorder(httpx.Response(200, json=REPLIES[wire]))
    provider = make_provider(registry, PROVIDER_FOR_WIRE[wire], rec, monkeypatch)
    completion = provider.complete("the prompt")
    assert (completion.text, completion.input_tokens, completion.output_tokens) == ("hello", 11, 2)
    body = json.loads(rec.requests[0].content)
    assert body["model"] == provider.config.model_name
    assert json.dumps(body).count("the prompt") == 1
    assert rec.requests[0].url.path == registry.wires[wire].path


def test_anthropic_auth_header(registry, monkeypatch):
    rec = Recorder(httpx.Response(200, json=REPLIES["anthropic"]))
    make_provider(registry, "claude", rec, monkeypatch).complete("x")
    assert rec.requests[0].headers["x-api-key"] == "sk-test"
    assert rec.requests[0].headers["anthropic-version"] == "2023-06-01"


def test_auth_failure_is_not_retried(registry, monkeypatch):
    rec = Recorder(httpx.Response(401))
    with pytest.raises(AuthError):
        make_provider(registry, "deepseek", rec, monkeypatch).complete("x")
    assert len(rec.requests) == 1


def test_rate_limit_exhausts_three_attempts(registry, monkeypatch):
    rec = Recorder(httpx.Response(429))
    sleeps: list[float] = []
    with pytest.raises(RateLimited):
        make_provider(registry, "deepseek", rec, monkeypatch, sleeps).complete("x")
    assert len(rec.requests) == 3
    assert sleeps == [1.0, 2.0]


def test_transient_error_then_success(registry, monkeypatch):
    rec = Recorder(httpx.Response(500), httpx.Response(200, json=REPLIES["openai_chat"]))
    assert make_provider(registry, "deepseek", rec, monkeypatch).complete("x").text == "hello"
    assert len(rec.requests) == 2


def test_timeout_is_retried_then_raised(registry, monkeypatch):
    rec = Recorder(httpx.ReadTimeout("slow"))
    with pytest.raises(Timeout):
        make_provider(registry, "deepseek", rec, monkeypatch).complete("x")
    assert len(rec.requests) == 3


def test_client_error_fails_immediately(registry, monkeypatch):
    rec = Recorder(httpx.Response(400, text="bad request"))
    with pytest.raises(LlmError, match="400"):
        make_provider(registry, "deepseek", rec, monkeypatch).complete("x")
    assert len(rec.requests) == 1


@pytest.mark.parametrize("payload", [{"choices": []}, {"choices": [{"message": {"content": 5}}]}])
def test_malformed_response(payload, registry, monkeypatch):
    rec = Recorder(httpx.Response(200, json=payload))
    with pytest.raises(MalformedResponse):
        make_provider(registry, "deepseek", rec, monkeypatch).complete("x")


def test_missing_usage_falls_back_to_estimate(registry, monkeypatch):
    rec = Recorder(httpx.Response(200, json={"choices": [{"message": {"content": "abcde"}}]}))
    completion = make_provider(registry, "deepseek", rec, monkeypatch).complete("12345678")
    assert (completion.input_tokens, completion.output_tokens) == (2, 2)


def test_missing_api_key(registry, monkeypatch):
    config = registry.config("claude")
    monkeypatch.delenv(config.auth_env, raising=False)
    provider = HttpChatProvider(config, registry.wires["anthropic"],
                                client=httpx.Client(transport=httpx.MockTransport(Recorder(httpx.Response(200)))))
    with pytest.raises(AuthError, match=config.auth_env):
        provider.complete("x")


def test_retry_policy_attempts_and_backoff():
    policy = RetryPolicy(retries=2, backoff_s=0.5)
    assert policy.max_attempts == 3
    assert [policy.delay(a) for a in (1, 2)] == [0.5, 1.0]
    with pytest.raises(ValueError):
        RetryPolicy(retries=-1)


def test_pacer_spaces_call_starts():
    now = [0.0]
    sleeps: list[float] = []

    def sleep(s: float) -> None:
        sleeps.append(s)
        now[0] += s

    pacer = Pacer(min_interval_s=2.0, clock=lambda: now[0], sleep=sleep)
    with pacer:
        pass
    now[0] += 0.5
    with pacer:
        pass
    now[0] += 5.0
    with pacer:
        pass
    assert sleeps == [1.5]


def test_count_tokens_approx():
    assert [count_tokens_approx("x" * n) for n in (0, 1, 4, 5)] == [0, 1, 1, 2]


def test_cost_is_exact():
    assert estimate_cost(PricingModel("3.00", "15.00")).total == Fraction(12, 100)
    assert estimate_cost(PricingModel("0.28", "0.42")).total == Fraction(728, 100000)
    assert format_money(Fraction(728, 100000)) == "0.007"
    assert format_money(Fraction(5, 10000)) == "0.001"
    with pytest.raises(TypeError):
        PricingModel(0.28, "0.42")
    with pytest.raises(ValueError):
        PricingModel("-1", "0")


def test_registry_loads_shipped_providers():
    reg = load_registry()
    assert {"claude", "deepseek", "gpt-5.2", "ollama", "cisco", "oracle", "echo"} <= set(reg.providers)
    assert reg.config("claude").pricing == PricingModel("3", "15")
    with pytest.raises(UnknownProvider, match="nope"):
        reg.create("nope")


def test_registry_rejects_unknown_wire():
    with pytest.raises(ValueError):
        parse_registry("providers:\n  x:\n    wire: carrier-pigeon\n")


def test_registry_overrides():
    provider = load_registry().create("echo", max_output_tokens=2)
    assert isinstance(provider, EchoProvider)
    assert provider.complete("first\nabcdefghijkl").text == "abcdefgh"


def test_cap_limits_output():
    assert _cap("x" * 10, 2) == "x" * 8
    assert _cap("short", 100) == "short"


def test_provider_config_validation():
    with pytest.raises(ValueError):
        ProviderConfig("p", "echo", temperature=-1)
    with pytest.raises(ValueError):
        ProviderConfig("p", "echo", max_output_tokens=0)


def _hit(label: str, doc: dict, rank: int = 1) -> RetrievalHit:
    return RetrievalHit(Chunk.make(label, json.dumps(doc)), 1.0, rank)


def test_oracle_without_evidence_says_not_found():
    for q in MALWARE_QUESTIONS:
        assert oracle_complete(q, []) == NOT_FOUND_TEXT
    assert NOT_FOUND_TEXT == "Not found in provided data"


def test_oracle_user_skips_machine_accounts():
    doc = {"aggregations": {"client_accounts": [{"key": "HOST$", "doc_count": 9}, {"key": "alice", "doc_count": 3}]}}
    text = oracle_complete(MALWARE_QUESTIONS[2], [_hit("k_result.json", doc)])
    assert text.endswith("FINAL ANSWER = alice")
    assert "(source: k_result.json)" in text


def test_oracle_c2_keeps_public_addresses_only():
    doc = {"aggregations": {"top_external_destinations": [
        {"key": "10.0.0.5", "doc_count": 50}, {"key": "45.125.66.32", "doc_count": 7}]}}
    text = oracle_complete(MALWARE_QUESTIONS[4], [_hit("c_result.json", doc)])
    assert text.endswith("FINAL ANSWER = [45.125.66.32]")


def test_oracle_is_deterministic(oracle, malware_store, malware_library):
    from incident_rag.query import run_library
    from incident_rag.rag import chunk_from_aggregation

    hits = [RetrievalHit(chunk_from_aggregation(r), 0.0, i)
            for i, r in enumerate(run_library(malware_store, malware_library, malware_store.span()), 1)]
    for q in MALWARE_QUESTIONS:
        first = oracle.complete("p", question=q, hits=hits)
        assert first.text == oracle.complete("p", question=q, hits=hits).text
        assert first.input_tokens == 1
