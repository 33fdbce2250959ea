"""Chunking aggregation results, embedding them and exact top-k retrieval."""

from __future__ import annotations

import hashlib
import io
import json
import os
import re
import struct
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Protocol, Sequence, Union

import httpx
import numpy as np

from .events import format_timestamp
from ._io import atomic_write_bytes
from .query.aggregate import AggregationResult

DEFAULT_DIMENSION = 768
DEFAULT_K = 7
INDEX_MAGIC = b"IRAGIDX\x00"
INDEX_VERSION = 1

_TOKEN_SPLIT = re.compile(r"[^0-9A-Za-z]+")


class RagError(Exception):
    pass


class ProviderUnavailable(RagError):
    pass


class DimensionMismatch(RagError):
    pass


class EmptyChunkSet(RagError):
    pass


class VersionMismatch(RagError):
    pass


class IndexFileError(RagError, OSError):
    """The index file is unreadable or truncated."""


class EmbedderMismatchWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Chunk:
    chunk_id: str
    source_label: str
    text: str
    mitre_technique: str

    @classmethod
    def make(cls, source_label: str, text: str, mitre_technique: str = "") -> "Chunk":
        digest = hashlib.sha256(f"{source_label}\x00{text}".encode("utf-8")).hexdigest()[:16]
        return cls(digest, source_label, text, mitre_technique)


def serialize_result(result: AggregationResult) -> str:
    """Canonical JSON text of an aggregation result: sorted keys, no spaces."""
    doc = {
        "query_id": result.query_id,
        "description": result.description,
        "mitre_technique": result.mitre_technique,
        "window": {"start": format_timestamp(result.window.start), "end": format_timestamp(result.window.end)},
        "matched_count": result.matched_count,
        "aggregations": {name: [b.to_dict() for b in buckets] for name, buckets in result.buckets.items()},
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def chunk_from_aggregation(result: AggregationResult) -> Chunk:
    return Chunk.make(f"{result.query_id}_result.json", serialize_result(result), result.mitre_technique)


def chunk_payload(chunk: Chunk) -> dict:
    """Decoded aggregation document of a chunk built by :func:`chunk_from_aggregation`."""
    return json.loads(chunk.text)


# --- embedding providers -------------------------------------------------


class EmbeddingProvider(Protocol):
    embedder_id: str
    dimension: int

    def embed(self, text: str) -> np.ndarray: ...


def tokenize(text: str) -> list[str]:
    return [t for t in _TOKEN_SPLIT.split(text.lower()) if t]


def _unit(vec: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    return vec / norm if norm > 0.0 else vec


class HashingEmbedder:
    """Feature-hashing bag-of-tokens embedding.

    Each lowercase alphanumeric token is hashed with 64-bit BLAKE2b; the hash
    modulo ``dimension`` selects the coordinate and its top bit the sign.
    """

    def __init__(self, dimension: int = DEFAULT_DIMENSION):
        if dimension < 1:
            raise ValueError("dimension must be positive")
        self.dimension = dimension
        self.embedder_id = f"hashing-blake2b64-d{dimension}"

    @staticmethod
    def token_slot(token: str, dimension: int) -> tuple[int, float]:
        h = int.from_bytes(hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest(), "little")
        return h % dimension, (-1.0 if h >> 63 else 1.0)

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dimension, dtype=np.float64)
        for token in tokenize(text):
            idx, sign = self.token_slot(token, self.dimension)
            vec[idx] += sign
        return _unit(vec)


class HttpEmbedder:
    """Remote embedding endpoint speaking the OpenAI ``/embeddings`` shape."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        dimension: int = DEFAULT_DIMENSION,
        api_key_env: Optional[str] = None,
        timeout: float = 30.0,
        client: Optional[httpx.Client] = None,
    ):
        self.endpoint = endpoint
        self.model = model
        self.dimension = dimension
        self.embedder_id = f"http:{model}:d{dimension}"
        self._api_key_env = api_key_env
        self._client = client or httpx.Client(timeout=timeout)

    def embed(self, text: str) -> np.ndarray:
        headers = {}
        if self._api_key_env:
            key = os.environ.get(self._api_key_env)
            if key:
                headers["Authorization"] = f"Bearer {key}"
        try:
            resp = self._client.post(self.endpoint, json={"model": self.model, "input": text}, headers=headers)
            resp.raise_for_status()
            values = resp.json()["data"][0]["embedding"]
        except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
            raise ProviderUnavailable(f"embedding endpoint {self.endpoint} failed: {exc}") from exc
        vec = np.asarray(values, dtype=np.float64)
        if vec.shape != (self.dimension,):
            raise DimensionMismatch(f"expected dimension {self.dimension}, endpoint returned {vec.shape}")
        return _unit(vec)


def embed_text(provider: EmbeddingProvider, text: str) -> np.ndarray:
    vec = np.asarray(provider.embed(text), dtype=np.float64)
    if vec.shape != (provider.dimension,):
        raise DimensionMismatch(f"expected dimension {provider.dimension}, got {vec.shape}")
    return _unit(vec)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


# --- index ---------------------------------------------------------------


@dataclass(frozen=True)
class RetrievalHit:
    chunk: Chunk
    score: float
    rank: int


@dataclass
class RagIndex:
    chunks: list[Chunk]
    embeddings: np.ndarray  # (n, dimension), unit rows
    embedder_id: str
    dimension: int

    def __post_init__(self) -> None:
        if self.embeddings.shape != (len(self.chunks), self.dimension):
            raise DimensionMismatch(
                f"embedding matrix {self.embeddings.shape} does not match {len(self.chunks)} x {self.dimension}"
            )

    def __len__(self) -> int:
        return len(self.chunks)

    def labels(self) -> list[str]:
        return [c.source_label for c in self.chunks]


def build_index(chunks: Sequence[Chunk], provider: EmbeddingProvider, workers: int = 1) -> RagIndex:
    if not chunks:
        raise EmptyChunkSet("cannot index an empty chunk list")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            vectors = list(pool.map(lambda c: embed_text(provider, c.text), chunks))
    else:
        vectors = [embed_text(provider, c.text) for c in chunks]
    return RagIndex(list(chunks), np.vstack(vectors), provider.embedder_id, provider.dimension)


def retrieve(index: RagIndex, query_vector: np.ndarray, k: int = DEFAULT_K) -> list[RetrievalHit]:
    """Exact top-k by cosine similarity; equal scores rank by chunk_id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    q = _unit(np.asarray(query_vector, dtype=np.float64))
    # row-wise reduction so identical rows always produce identical scores
    scores = np.clip((index.embeddings * q).sum(axis=1), -1.0, 1.0)
    order = sorted(range(len(index.chunks)), key=lambda i: (-scores[i], index.chunks[i].chunk_id))
    return [RetrievalHit(index.chunks[i], float(scores[i]), rank) for rank, i in enumerate(order[:k], 1)]


def retrieve_text(index: RagIndex, provider: EmbeddingProvider, query_text: str, k: int = DEFAULT_K) -> list[RetrievalHit]:
    if provider.embedder_id != index.embedder_id:
        warnings.warn(
            f"querying index built with {index.embedder_id} using {provider.embedder_id}",
            EmbedderMismatchWarning,
            stacklevel=2,
        )
    return retrieve(index, embed_text(provider, query_text), k)


# --- persistence ---------------------------------------------------------
# layout: magic, u32 version, str embedder_id, u32 dimension, u32 count,
# count x (str chunk_id, str source_label, str mitre, str text),
# count x dimension float64; all little-endian, str = u32 length + UTF-8.


def _write_str(buf: io.BytesIO, text: str) -> None:
    data = text.encode("utf-8")
    buf.write(struct.pack("<I", len(data)))
    buf.write(data)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise IndexFileError("index file is truncated")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def string(self) -> str:
        return self.take(self.u32()).decode("utf-8")


def index_to_bytes(index: RagIndex) -> bytes:
    buf = io.BytesIO()
    buf.write(INDEX_MAGIC)
    buf.write(struct.pack("<I", INDEX_VERSION))
    _write_str(buf, index.embedder_id)
    buf.write(struct.pack("<II", index.dimension, len(index.chunks)))
    for c in index.chunks:
        for field in (c.chunk_id, c.source_label, c.mitre_technique, c.text):
            _write_str(buf, field)
    buf.write(np.ascontiguousarray(index.embeddings, dtype="<f8").tobytes())
    return buf.getvalue()


def index_from_bytes(data: bytes) -> RagIndex:
    reader = _Reader(data)
    magic = reader.take(len(INDEX_MAGIC))
    if magic != INDEX_MAGIC:
        raise VersionMismatch("not an index file (bad magic)")
    version = reader.u32()
    if version != INDEX_VERSION:
        raise VersionMismatch(f"index format version {version}, expected {INDEX_VERSION}")
    embedder_id = reader.string()
    dimension, count = struct.unpack("<II", reader.take(8))
    chunks = []
    for _ in range(count):
        chunk_id, label, mitre, text = (reader.string() for _ in range(4))
        chunks.append(Chunk(chunk_id, label, text, mitre))
    matrix = np.frombuffer(reader.take(8 * dimension * count), dtype="<f8").astype(np.float64)
    if reader.pos != len(data):
        raise IndexFileError("trailing bytes after embedding matrix")
    return RagIndex(chunks, matrix.reshape(count, dimension), embedder_id, dimension)


def persist(index: RagIndex, path: Union[str, Path]) -> None:
    atomic_write_bytes(Path(path), index_to_bytes(index))


def load(path: Union[str, Path], expected_embedder_id: Optional[str] = None) -> RagIndex:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IndexFileError(f"cannot read index {path}: {exc}") from exc
    index = index_from_bytes(data)
    if expected_embedder_id is not None and expected_embedder_id != index.embedder_id:
        warnings.warn(
            f"index {path} was built with {index.embedder_id}, configuration uses {expected_embedder_id}",
            EmbedderMismatchWarning,
            stacklevel=2,
        )
    return index
