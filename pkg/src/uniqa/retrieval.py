"""Dense retrieval over the unified language space.

Embeds clues and questions into a shared unit-norm vector space, serves
exact top-K search by dot product (cosine similarity for unit vectors),
computes the contrastive retrieval loss, and mines BM25 hard negatives.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import httpx
import numpy as np

from .errors import NotFoundError, ProviderError, ValidationError
from .unirep import Clue, ContextualQuestion
from .wire import post_json

DEFAULT_DIMENSION = 256
BM25_K1 = 1.2
BM25_B = 0.75

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = 0xFFFFFFFFFFFFFFFF


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric characters."""
    return _TOKEN_RE.findall(text.lower())


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _U64
    return h


@dataclass(frozen=True)
class EmbeddingProviderSpec:
    kind: str = "local_hash"  # "local_hash" | "remote"
    dimension: int = DEFAULT_DIMENSION
    endpoint: str | None = None

    def __post_init__(self):
        if self.kind not in ("local_hash", "remote"):
            raise ValidationError(f"unknown embedding provider kind {self.kind!r}")
        if self.dimension <= 0:
            raise ValidationError("embedding dimension must be positive")
        if self.kind == "remote" and not self.endpoint:
            raise ValidationError("remote embedding provider requires an endpoint")


def _normalize(vector: np.ndarray, context: str) -> np.ndarray:
    norm = float(np.linalg.norm(vector))
    if norm == 0.0 or not math.isfinite(norm):
        raise ValidationError(f"cannot normalize zero embedding for {context}")
    return vector / norm


def _hash_embed(text: str, dimension: int) -> np.ndarray:
    vector = np.zeros(dimension, dtype=np.float64)
    for token in tokenize(text):
        h = fnv1a64(token.encode("utf-8"))
        sign = 1.0 if (h >> 63) == 0 else -1.0
        vector[h % dimension] += sign
    return vector


def embed_batch(texts: list[str], provider: EmbeddingProviderSpec,
                client: httpx.Client | None = None) -> np.ndarray:
    """Embed texts into unit vectors, one row per input, order preserved."""
    for text in texts:
        if not text:
            raise ValidationError("cannot embed empty text")
    if provider.kind == "local_hash":
        rows = [_hash_embed(t, provider.dimension) for t in texts]
    else:
        body = post_json(f"{provider.endpoint.rstrip('/')}/embed",
                         {"texts": texts}, stage="embed", client=client)
        vectors = body.get("vectors")
        if not isinstance(vectors, list) or len(vectors) != len(texts):
            raise ProviderError(
                f"embed provider at {provider.endpoint}: expected "
                f"{len(texts)} vectors, got {type(vectors).__name__}",
                stage="embed",
            )
        rows = [np.asarray(v, dtype=np.float64) for v in vectors]
        for row in rows:
            if row.ndim != 1 or row.shape[0] != provider.dimension:
                raise ProviderError(
                    f"embed provider at {provider.endpoint}: vector of "
                    f"dimension {row.shape}, expected {provider.dimension}",
                    stage="embed",
                )
    out = np.stack([
        _normalize(row, f"text {text[:40]!r}") for row, text in zip(rows, texts)
    ])
    return out


def embed(text: str, provider: EmbeddingProviderSpec,
          client: httpx.Client | None = None) -> np.ndarray:
    return embed_batch([text], provider, client)[0]


@dataclass(frozen=True)
class VectorIndex:
    """Immutable embedded corpus supporting exact top-K search."""

    clue_ids: list[str]
    vectors: np.ndarray  # shape (n, dimension), rows unit-norm
    dimension: int
    provider_kind: str
    clue_store: dict[str, Clue]

    def __post_init__(self):
        self.vectors.setflags(write=False)

    def __len__(self) -> int:
        return len(self.clue_ids)

    def clue(self, clue_id: str) -> Clue:
        try:
            return self.clue_store[clue_id]
        except KeyError:
            raise NotFoundError(f"unknown clue id {clue_id!r}") from None


@dataclass(frozen=True)
class RetrievalResult:
    items: list[tuple[str, float]]  # (clue_id, score), scores non-increasing
    k: int

    @property
    def clue_ids(self) -> list[str]:
        return [cid for cid, _ in self.items]


def build_index(clues: list[Clue], provider: EmbeddingProviderSpec,
                client: httpx.Client | None = None,
                batch_size: int = 64) -> VectorIndex:
    """Embed every clue; clue ids must be unique."""
    seen: set[str] = set()
    for clue in clues:
        if clue.id in seen:
            raise ValidationError(f"duplicate clue id {clue.id!r}")
        seen.add(clue.id)
        clue.validate()
    if clues:
        batches = [
            embed_batch([c.text for c in clues[i:i + batch_size]], provider, client)
            for i in range(0, len(clues), batch_size)
        ]
        vectors = np.concatenate(batches, axis=0)
    else:
        vectors = np.zeros((0, provider.dimension), dtype=np.float64)
    return VectorIndex(
        clue_ids=[c.id for c in clues],
        vectors=vectors,
        dimension=provider.dimension,
        provider_kind=provider.kind,
        clue_store={c.id: c for c in clues},
    )


def retrieve_topk(question: ContextualQuestion, index: VectorIndex, k: int,
                  provider: EmbeddingProviderSpec,
                  client: httpx.Client | None = None) -> RetrievalResult:
    """Exact top-K by dot product; ties broken by ascending clue id."""
    if k <= 0:
        raise ValidationError("K must be positive")
    if len(index) == 0:
        return RetrievalResult(items=[], k=k)
    query = embed(question.text, provider, client)
    scores = index.vectors @ query
    order = sorted(range(len(index)),
                   key=lambda i: (-scores[i], index.clue_ids[i]))
    top = order[:min(k, len(order))]
    return RetrievalResult(
        items=[(index.clue_ids[i], float(scores[i])) for i in top], k=k
    )


# ---------------------------------------------------------------------------
# Contrastive retrieval loss
# ---------------------------------------------------------------------------

def _check_finite(values, what: str) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValidationError(f"non-finite {what}: {v!r}")


def log_sum_exp(values: list[float]) -> float:
    m = max(values)
    return m + math.log(sum(math.exp(v - m) for v in values))


def contrastive_retrieval_loss(sim_pos: float, sim_negs: list[float]) -> float:
    """Negative log-likelihood of the positive under softmax over candidates."""
    _check_finite([sim_pos, *sim_negs], "similarity")
    return log_sum_exp([sim_pos, *sim_negs]) - sim_pos


# ---------------------------------------------------------------------------
# BM25 hard-negative mining
# ---------------------------------------------------------------------------

@dataclass
class CorpusStats:
    """Okapi BM25 sufficient statistics over a tokenized corpus."""

    doc_count: int
    doc_freq: dict[str, int]
    avgdl: float
    doc_lengths: dict[str, int]
    term_freqs: dict[str, Counter] = field(repr=False, default_factory=dict)

    @classmethod
    def from_clues(cls, clues: list[Clue]) -> "CorpusStats":
        term_freqs = {c.id: Counter(tokenize(c.text)) for c in clues}
        doc_lengths = {cid: sum(tf.values()) for cid, tf in term_freqs.items()}
        doc_freq: Counter = Counter()
        for tf in term_freqs.values():
            doc_freq.update(tf.keys())
        n = len(clues)
        avgdl = (sum(doc_lengths.values()) / n) if n else 0.0
        return cls(doc_count=n, doc_freq=dict(doc_freq), avgdl=avgdl,
                   doc_lengths=doc_lengths, term_freqs=term_freqs)


def bm25_idf(term: str, stats: CorpusStats) -> float:
    df = stats.doc_freq.get(term, 0)
    return math.log((stats.doc_count - df + 0.5) / (df + 0.5) + 1.0)


def bm25_score(query_tokens: list[str], doc_id: str, stats: CorpusStats) -> float:
    """Okapi BM25 with k1=1.2, b=0.75 and +1-smoothed IDF."""
    if doc_id not in stats.term_freqs:
        raise NotFoundError(f"unknown document id {doc_id!r}")
    tf_map = stats.term_freqs[doc_id]
    length = stats.doc_lengths[doc_id]
    score = 0.0
    for term in query_tokens:
        tf = tf_map.get(term, 0)
        if tf == 0:
            continue
        denom = tf + BM25_K1 * (1.0 - BM25_B + BM25_B * length / stats.avgdl)
        score += bm25_idf(term, stats) * tf * (BM25_K1 + 1.0) / denom
    return score


def mine_hard_negative(positive_clue_id: str, question: str, stats: CorpusStats,
                       exclude_ids: frozenset[str] | set[str] = frozenset()) -> str:
    """Highest-BM25 clue for the question that is not the positive or gold."""
    query = tokenize(question)
    excluded = {positive_clue_id, *exclude_ids}
    candidates = [cid for cid in stats.term_freqs if cid not in excluded]
    if not candidates:
        raise ValidationError(
            f"no eligible hard negative for positive {positive_clue_id!r}"
        )
    return min(candidates, key=lambda cid: (-bm25_score(query, cid, stats), cid))


# ---------------------------------------------------------------------------
# Index persistence
# ---------------------------------------------------------------------------

MANIFEST_NAME = "manifest.json"
VECTORS_NAME = "vectors.f32"
CLUES_NAME = "clues.jsonl"


def corpus_hash(clues: list[Clue]) -> str:
    digest = hashlib.sha256()
    for clue in sorted(clues, key=lambda c: c.id):
        for part in (clue.id, clue.modality, clue.text, clue.source_ref):
            digest.update(part.encode("utf-8"))
            digest.update(b"\x00")
    return digest.hexdigest()


def save_index(index: VectorIndex, directory: str | Path,
               extra_manifest: dict | None = None) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    clues = [index.clue_store[cid] for cid in index.clue_ids]
    manifest = {
        "dimension": index.dimension,
        "provider_kind": index.provider_kind,
        "corpus_hash": corpus_hash(clues),
        "count": len(index),
    }
    if extra_manifest:
        manifest.update(extra_manifest)
    (directory / MANIFEST_NAME).write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n"
    )
    index.vectors.astype("<f4").tofile(directory / VECTORS_NAME)
    with open(directory / CLUES_NAME, "w") as fh:
        for clue in clues:
            fh.write(json.dumps({
                "id": clue.id, "modality": clue.modality,
                "text": clue.text, "source_ref": clue.source_ref,
            }, sort_keys=True) + "\n")
    return directory


def load_manifest(directory: str | Path) -> dict:
    path = Path(directory) / MANIFEST_NAME
    if not path.exists():
        raise NotFoundError(f"no index manifest at {path}")
    return json.loads(path.read_text())


def load_index(directory: str | Path) -> VectorIndex:
    directory = Path(directory)
    manifest = load_manifest(directory)
    dimension = int(manifest["dimension"])
    clues = []
    with open(directory / CLUES_NAME) as fh:
        for line in fh:
            raw = json.loads(line)
            clues.append(Clue(id=raw["id"], modality=raw["modality"],
                              text=raw["text"], source_ref=raw["source_ref"]))
    flat = np.fromfile(directory / VECTORS_NAME, dtype="<f4")
    if flat.size != len(clues) * dimension:
        raise ValidationError(
            f"vector file holds {flat.size} floats, expected "
            f"{len(clues) * dimension}"
        )
    vectors = flat.astype(np.float64).reshape(len(clues), dimension)
    return VectorIndex(
        clue_ids=[c.id for c in clues],
        vectors=vectors,
        dimension=dimension,
        provider_kind=manifest["provider_kind"],
        clue_store={c.id: c for c in clues},
    )
