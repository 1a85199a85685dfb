"""Text embeddings, cosine similarity and entity linking.

The default embedder is a deterministic token-hashing model: case-fold,
split on non-alphanumerics, hash every token into one of 64 signed buckets
with a fixed keyed hash, sum the token vectors and L2-normalize. It is
order-insensitive, platform-independent and hand-computable, which makes
linking behavior reproducible in tests while a real embedding service can
be swapped in behind the same interface.

Linking resolves a mention to a graph node: an exact normalized-name match
wins outright with score 1.0, otherwise candidates are ranked by cosine
over node-name embeddings and the best one is accepted only above the
link threshold.
"""

from __future__ import annotations

import hashlib
import re
import threading
from dataclasses import dataclass
from typing import Callable, List, Optional, Protocol, Tuple

import numpy as np
import requests

from .graph import KnowledgeGraph, slug

DEFAULT_LINK_THRESHOLD = 0.80
DEFAULT_LINK_K = 5


class EmbeddingError(Exception):
    pass


class EmptyText(EmbeddingError):
    pass


class DimMismatch(EmbeddingError):
    pass


class ZeroVector(EmbeddingError):
    pass


@dataclass(frozen=True)
class EmbeddingVector:
    dims: int
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.dims,):
            raise ValueError(f"expected shape ({self.dims},), got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("embedding values must be finite")


@dataclass(frozen=True)
class LinkResult:
    mention: str
    node_id: Optional[str]
    score: float
    candidates: Tuple[Tuple[str, float], ...]


class Embedder(Protocol):
    dims: int

    def embed(self, text: str) -> EmbeddingVector: ...

    def fingerprint(self) -> str: ...


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """dot(a, b) / (|a| |b|), clamped into [-1, 1]."""
    if a.dims != b.dims:
        raise DimMismatch(f"dims differ: {a.dims} vs {b.dims}")
    norm_a = float(np.linalg.norm(a.values))
    norm_b = float(np.linalg.norm(b.values))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ZeroVector("cosine is undefined for an all-zero vector")
    value = float(np.dot(a.values, b.values)) / (norm_a * norm_b)
    return max(-1.0, min(1.0, value))


# -- deterministic token-hash embedder ---------------------------------------

_HASH_KEY = b"agr-embd"  # fixed 64-bit key; changing it invalidates every fixture
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def _tokenize(text: str) -> List[str]:
    return _TOKEN_RE.findall(text.casefold())


class HashEmbedder:
    """Keyed-hash bag-of-tokens embedder (the deterministic default)."""

    def __init__(self, dims: int = 64):
        self.dims = dims

    def fingerprint(self) -> str:
        return f"hash-v1-d{self.dims}"

    def token_vector(self, token: str) -> np.ndarray:
        digest = hashlib.blake2b(token.encode("utf-8"), key=_HASH_KEY, digest_size=8).digest()
        value = int.from_bytes(digest, "big")
        bucket = value % self.dims
        sign = 1.0 if (value >> 63) & 1 == 0 else -1.0
        vec = np.zeros(self.dims)
        vec[bucket] = sign
        return vec

    def embed(self, text: str) -> EmbeddingVector:
        tokens = _tokenize(text)
        if not tokens:
            raise EmptyText(f"no tokens in {text!r}")
        total = np.zeros(self.dims)
        for token in tokens:
            total += self.token_vector(token)
        norm = float(np.linalg.norm(total))
        if norm == 0.0:
            # opposite-signed tokens cancelled out; fall back to a unit axis
            # derived from the whole string so the embedding stays defined
            total = self.token_vector("".join(tokens))
            norm = 1.0
        return EmbeddingVector(self.dims, total / norm)


class HttpEmbedder:
    """Remote embedding endpoint (same wire conventions as the LLM gateway)."""

    def __init__(
        self,
        base_url: str,
        model: str,
        dims: int,
        api_key: str = "",
        timeout: float = 60.0,
        post: Callable = requests.post,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.dims = dims
        self.api_key = api_key
        self.timeout = timeout
        self._post = post

    def fingerprint(self) -> str:
        return f"http-{self.model}-d{self.dims}"

    def embed(self, text: str) -> EmbeddingVector:
        if not text.strip():
            raise EmptyText("cannot embed empty text")
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        response = self._post(
            f"{self.base_url}/embeddings",
            headers=headers,
            json={"model": self.model, "input": [text]},
            timeout=self.timeout,
        )
        if response.status_code >= 400:
            raise EmbeddingError(f"embedder returned HTTP {response.status_code}")
        values = np.asarray(response.json()["data"][0]["embedding"], dtype=float)
        return EmbeddingVector(self.dims, values)


# -- node-name embedding cache -------------------------------------------------


class EmbeddingCache:
    """Per-(embedder, node name) cache, dropped when the graph version moves."""

    def __init__(self):
        self._lock = threading.Lock()
        self._entries: dict = {}
        self._graph_version: Optional[Tuple[str, int]] = None

    def get(self, graph: KnowledgeGraph, embedder: Embedder, name: str) -> EmbeddingVector:
        stamp = (graph.graph_id, graph.version)
        key = (embedder.fingerprint(), name)
        with self._lock:
            if self._graph_version != stamp:
                self._entries.clear()
                self._graph_version = stamp
            cached = self._entries.get(key)
        if cached is not None:
            return cached
        vector = embedder.embed(name)
        with self._lock:
            self._entries.setdefault(key, vector)
        return vector


_default_cache = EmbeddingCache()


def node_display_name(node) -> str:
    name = node.props.get("name")
    return name if isinstance(name, str) and name.strip() else node.id


def link(
    mention: str,
    graph: KnowledgeGraph,
    embedder: Embedder,
    k: int = DEFAULT_LINK_K,
    threshold: float = DEFAULT_LINK_THRESHOLD,
    cache: Optional[EmbeddingCache] = None,
) -> LinkResult:
    """Resolve a text mention to a graph node.

    Exact match on normalized names short-circuits with score 1.0; otherwise
    the top-k nodes by name-embedding cosine are ranked (ties by node id) and
    the winner is accepted only when its score reaches the threshold.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if not mention.strip():
        raise EmptyText("cannot link an empty mention")
    cache = cache or _default_cache
    nodes = graph.nodes
    if not nodes:
        return LinkResult(mention=mention, node_id=None, score=0.0, candidates=())

    mention_slug = slug(mention)
    scores: List[Tuple[str, float]] = []
    mention_vec: Optional[EmbeddingVector] = None
    for node_id in sorted(nodes):
        name = node_display_name(nodes[node_id])
        if slug(name) == mention_slug or node_id == mention_slug:
            scores.append((node_id, 1.0))
            continue
        if mention_vec is None:
            mention_vec = embedder.embed(mention)
        try:
            node_vec = cache.get(graph, embedder, name)
            scores.append((node_id, cosine(mention_vec, node_vec)))
        except EmptyText:
            continue  # unembeddable node name: not a candidate

    if not scores:
        return LinkResult(mention=mention, node_id=None, score=0.0, candidates=())
    scores.sort(key=lambda pair: (-pair[1], pair[0]))
    top = tuple(scores[:k])
    best_id, best_score = top[0]
    linked = best_id if best_score >= threshold else None
    return LinkResult(mention=mention, node_id=linked, score=best_score, candidates=top)


def link_relation(
    mention: str,
    relation_types: List[str],
    embedder: Embedder,
    threshold: float = DEFAULT_LINK_THRESHOLD,
) -> Optional[str]:
    """Map a relation mention onto a known relation type, if close enough."""
    if not relation_types:
        return None
    mention_slug = slug(mention)
    for rel in sorted(relation_types):
        if slug(rel) == mention_slug:
            return rel
    try:
        mention_vec = embedder.embed(mention)
    except EmptyText:
        return None
    best: Optional[Tuple[float, str]] = None
    for rel in sorted(relation_types):
        try:
            score = cosine(mention_vec, embedder.embed(rel))
        except (EmptyText, ZeroVector):
            continue
        if best is None or score > best[0]:
            best = (score, rel)
    if best is not None and best[0] >= threshold:
        return best[1]
    return None
