from __future__ import annotations

import hashlib
import math

import httpx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from incident_rag.query import run_library
from incident_rag.rag import (
    Chunk,
    DimensionMismatch,
    EmbedderMismatchWarning,
    EmptyChunkSet,
    HashingEmbedder,
    HttpEmbedder,
    IndexFileError,
    ProviderUnavailable,
    RagIndex,
    VersionMismatch,
    build_index,
    chunk_from_aggregation,
    cosine,
    index_from_bytes,
    index_to_bytes,
    load,
    persist,
    retrieve,
    retrieve_text,
    serialize_result,
)


def _slot(token: str, dim: int):
    h = int.from_bytes(hashlib.blake2b(token.encode(), digest_size=8).digest(), "little")
    return h % dim, -1.0 if h >= 2**63 else 1.0


def test_hashing_embedder_matches_hand_computation():
    dim = 64
    vec = HashingEmbedder(dim).embed("Kerberos kerberos, HOST!")
    expected = np.zeros(dim)
    for tok in ["kerberos", "kerberos", "host"]:
        i, s = _slot(tok, dim)
        expected[i] += s
    expected /= np.linalg.norm(expected)
    assert np.array_equal(vec, expected)
    assert math.isclose(float(np.linalg.norm(vec)), 1.0)


def test_empty_text_embeds_to_zero():
    assert not HashingEmbedder(16).embed("  ,, ").any()


def test_chunk_identity_is_content_hash():
    a = Chunk.make("x_result.json", "{}")
    assert a == Chunk.make("x_result.json", "{}")
    assert a.chunk_id != Chunk.make("y_result.json", "{}").chunk_id


def test_chunks_from_library_are_canonical(malware_store, malware_library):
    results = run_library(malware_store, malware_library, malware_store.span())
    chunks = [chunk_from_aggregation(r) for r in results]
    assert [c.source_label for c in chunks] == [f"{q.query_id}_result.json" for q in malware_library]
    assert chunks[0].text == serialize_result(results[0])
    assert " " not in chunks[1].text.split('"description"')[0]


def _random_index(rng: np.random.Generator, n: int, dim: int) -> RagIndex:
    base = rng.normal(size=(n, dim))
    dupes = rng.random(n) < 0.2
    for i in np.flatnonzero(dupes):
        base[i] = base[rng.integers(0, n)]
    base /= np.linalg.norm(base, axis=1, keepdims=True)
    chunks = [Chunk(f"{rng.integers(0, 10**6):06d}-{i}", f"c{i}", f"text {i}", "") for i in range(n)]
    return RagIndex(chunks, base, "test", dim)


def _brute_force(index: RagIndex, q: np.ndarray, k: int):
    qn = q / np.linalg.norm(q)
    scored = []
    for chunk, row in zip(index.chunks, index.embeddings):
        score = min(1.0, max(-1.0, math.fsum(float(a) * float(b) for a, b in zip(row, qn))))
        scored.append((-round(score, 12), chunk.chunk_id))
    scored.sort()
    return [cid for _, cid in scored[:k]]


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 60), st.integers(1, 12))
def test_retrieve_equals_brute_force(seed, n, k):
    rng = np.random.default_rng(seed)
    index = _random_index(rng, n, 8)
    q = rng.normal(size=8)
    hits = retrieve(index, q, k)
    assert [h.chunk.chunk_id for h in hits] == _brute_force(index, q, k)
    assert [h.rank for h in hits] == list(range(1, len(hits) + 1))
    scores = [h.score for h in hits]
    assert scores == sorted(scores, reverse=True)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 10), st.integers(0, 10))
def test_retrieve_is_prefix_monotone(seed, k, extra):
    rng = np.random.default_rng(seed)
    index = _random_index(rng, 30, 6)
    q = rng.normal(size=6)
    small, large = retrieve(index, q, k), retrieve(index, q, k + extra)
    assert large[: len(small)] == small


def test_retrieve_rejects_bad_k():
    index = _random_index(np.random.default_rng(0), 3, 4)
    with pytest.raises(ValueError):
        retrieve(index, np.ones(4), 0)


def test_build_index_rejects_empty():
    with pytest.raises(EmptyChunkSet):
        build_index([], HashingEmbedder())


def test_parallel_build_is_identical(malware_store, malware_library):
    chunks = [chunk_from_aggregation(r) for r in run_library(malware_store, malware_library, malware_store.span())]
    emb = HashingEmbedder()
    assert np.array_equal(build_index(chunks, emb).embeddings, build_index(chunks, emb, workers=4).embeddings)


def test_persist_load_bit_exact(tmp_path):
    index = _random_index(np.random.default_rng(7), 20, 16)
    path = tmp_path / "idx.bin"
    persist(index, path)
    loaded = load(path)
    assert loaded.chunks == index.chunks
    assert loaded.embeddings.tobytes() == index.embeddings.tobytes()
    q = np.random.default_rng(8).normal(size=16)
    assert [(h.chunk, h.score) for h in retrieve(loaded, q, 5)] == [(h.chunk, h.score) for h in retrieve(index, q, 5)]


def test_load_errors(tmp_path):
    data = index_to_bytes(_random_index(np.random.default_rng(1), 2, 4))
    with pytest.raises(VersionMismatch):
        index_from_bytes(b"XXXXXXXX" + data[8:])
    with pytest.raises(IndexFileError):
        index_from_bytes(data[:-3])
    with pytest.raises(IndexFileError):
        load(tmp_path / "missing.bin")


def test_embedder_mismatch_warns(tmp_path):
    index = _random_index(np.random.default_rng(1), 2, 768)
    persist(index, tmp_path / "i.bin")
    with pytest.warns(EmbedderMismatchWarning):
        load(tmp_path / "i.bin", expected_embedder_id="other")
    with pytest.warns(EmbedderMismatchWarning):
        retrieve_text(index, HashingEmbedder(), "question", 1)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        RagIndex([Chunk.make("a", "b")], np.zeros((1, 3)), "x", 4)


def test_cosine_of_zero_vector_is_zero():
    assert cosine(np.zeros(3), np.ones(3)) == 0.0


def test_http_embedder_success_and_failure():
    def handler(request: httpx.Request) -> httpx.Response:
        if b"boom" in request.content:
            return httpx.Response(503)
        return httpx.Response(200, json={"data": [{"embedding": [3.0, 4.0]}]})

    emb = HttpEmbedder("http://embed.test/v1/embeddings", "m", dimension=2,
                       client=httpx.Client(transport=httpx.MockTransport(handler)))
    assert np.allclose(emb.embed("hi"), [0.6, 0.8])
    with pytest.raises(ProviderUnavailable):
        emb.embed("boom")
