"""Late-interaction (MaxSim) and single-vector scoring over an embedding store.

Scoring is exhaustive over all stored passages: collections in scope are
small enough that exactness beats approximate candidate generation, and
exact scores are what the oracle tests check.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, DimensionMismatchError, EmptyQueryError, FormatError
from .text import AnalyzerConfig, DEFAULT_ANALYZER, Document, split_passages

_UNIT_NORM_TOL = 1e-4


class ScorerKind(Enum):
    MAXSIM = "maxsim"
    SINGLE_VECTOR = "single-vector"


def _check_rows(rows: np.ndarray, what: str) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] < 1:
        raise ValueError(f"{what}: expected a non-empty 2-D row matrix, got shape {rows.shape}")
    norms = np.linalg.norm(rows, axis=1)
    if np.any(np.abs(norms - 1.0) > _UNIT_NORM_TOL):
        worst = float(np.max(np.abs(norms - 1.0)))
        raise ValueError(f"{what}: rows must be unit-normalized (worst deviation {worst:.2e})")
    return rows


@dataclass(eq=False)
class TokenMatrix:
    """Per-token contextual embeddings for one passage or query."""

    id: str
    rows: np.ndarray

    def __post_init__(self):
        self.rows = _check_rows(self.rows, f"TokenMatrix {self.id!r}")

    @property
    def dim(self) -> int:
        return self.rows.shape[1]


@dataclass(eq=False)
class SingleVector:
    """One unit-norm embedding for a whole passage or query."""

    id: str
    vector: np.ndarray

    def __post_init__(self):
        flat = np.asarray(self.vector, dtype=np.float64).reshape(1, -1)
        self.vector = _check_rows(flat, f"SingleVector {self.id!r}")[0]

    @property
    def dim(self) -> int:
        return self.vector.shape[0]


def maxsim_score(query: TokenMatrix, passage: TokenMatrix) -> float:
    """Sum over query tokens of the best dot product against any passage token."""
    if query.dim != passage.dim:
        raise DimensionMismatchError(f"query dim {query.dim} != passage dim {passage.dim}")
    return float((query.rows @ passage.rows.T).max(axis=1).sum())


def single_vector_score(query: SingleVector, passage: SingleVector) -> float:
    """Inner product of two unit vectors, in [-1, 1]."""
    if query.dim != passage.dim:
        raise DimensionMismatchError(f"query dim {query.dim} != passage dim {passage.dim}")
    return float(np.dot(query.vector, passage.vector))


def maxp_aggregate(passage_scores: Sequence[tuple[int, float]]) -> float:
    """Document score = maximum among its passages' scores."""
    if not passage_scores:
        raise ValueError("cannot aggregate an empty passage score sequence")
    return max(score for _, score in passage_scores)


# ---------------------------------------------------------------------------
# Deterministic toy embeddings (stand-in for a neural encoder in tests/demos)
# ---------------------------------------------------------------------------

_token_vector_cache: dict[tuple[str, int, int], np.ndarray] = {}


def _token_unit_vector(token: str, dim: int, seed: int) -> np.ndarray:
    key = (token, dim, seed)
    cached = _token_vector_cache.get(key)
    if cached is not None:
        return cached
    digest = hashlib.blake2b(
        token.encode("utf-8"), digest_size=16, salt=struct.pack("<q", seed)
    ).digest()
    rng = np.random.Generator(np.random.PCG64(int.from_bytes(digest, "little")))
    vec = rng.standard_normal(dim)
    norm = np.linalg.norm(vec)
    while norm < 1e-12:  # astronomically unlikely, but keep the invariant airtight
        vec = rng.standard_normal(dim)
        norm = np.linalg.norm(vec)
    vec /= norm
    vec.setflags(write=False)
    _token_vector_cache[key] = vec
    return vec


def toy_embed(tokens: Sequence[str], dim: int, seed: int, id: str = "") -> TokenMatrix:
    """Map each token to a deterministic pseudo-random unit vector.

    Identical tokens get identical rows regardless of position; changing
    the seed changes every vector. Raises on an empty token sequence: a
    query with no rows has no defined MaxSim.
    """
    if dim < 2:
        raise ConfigError(f"embedding dim must be >= 2, got {dim}")
    if not tokens:
        raise EmptyQueryError("cannot embed an empty token sequence")
    rows = np.stack([_token_unit_vector(t, dim, seed) for t in tokens])
    return TokenMatrix(id=id, rows=rows)


def toy_embed_single(tokens: Sequence[str], dim: int, seed: int, id: str = "") -> SingleVector:
    """Single-vector variant: unit-normalized mean of the token vectors."""
    matrix = toy_embed(tokens, dim, seed, id=id)
    mean = matrix.rows.mean(axis=0)
    norm = np.linalg.norm(mean)
    if norm < 1e-12:
        # token vectors cancelled out; fall back to hashing the joined text
        return SingleVector(id=id, vector=_token_unit_vector(" ".join(tokens), dim, seed))
    return SingleVector(id=id, vector=mean / norm)


# ---------------------------------------------------------------------------
# Embedding store
# ---------------------------------------------------------------------------


@dataclass
class EmbeddingStore:
    """Immutable map of passage id -> embedding rows, plus doc attribution.

    Entries hold (rows, dim) matrices; in single-vector mode every entry
    has exactly one row.
    """

    dim: int
    mode: ScorerKind
    entries: dict[str, np.ndarray]
    passage_to_doc: dict[str, tuple[str, int]]
    _stacked: np.ndarray | None = field(default=None, init=False, repr=False)
    _starts: np.ndarray | None = field(default=None, init=False, repr=False)
    _ids: list[str] | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        for pid, rows in self.entries.items():
            if rows.shape[1] != self.dim:
                raise DimensionMismatchError(
                    f"passage {pid!r} has dim {rows.shape[1]}, store dim {self.dim}"
                )
            if self.mode is ScorerKind.SINGLE_VECTOR and rows.shape[0] != 1:
                raise ValueError(f"passage {pid!r}: single-vector mode requires one row")
            if pid not in self.passage_to_doc:
                raise FormatError(f"passage {pid!r} does not resolve to a document")

    def _ensure_stacked(self):
        if self._ids is None:
            self._ids = list(self.entries.keys())
            counts = [self.entries[pid].shape[0] for pid in self._ids]
            self._starts = np.cumsum([0] + counts[:-1]).astype(np.intp)
            if self._ids:
                self._stacked = np.vstack([self.entries[pid] for pid in self._ids])
            else:
                self._stacked = np.empty((0, self.dim))

    def score_all(self, query: TokenMatrix | SingleVector, kind: ScorerKind) -> dict[str, float]:
        """Score every stored passage against the query, exhaustively."""
        if kind is not self.mode:
            raise ConfigError(f"scorer kind {kind.value} does not match store mode {self.mode.value}")
        if query.dim != self.dim:
            raise DimensionMismatchError(f"query dim {query.dim} != store dim {self.dim}")
        self._ensure_stacked()
        if not self._ids:
            return {}
        if kind is ScorerKind.MAXSIM:
            sims = query.rows @ self._stacked.T  # (q_tokens, total_rows)
            per_passage = np.maximum.reduceat(sims, self._starts, axis=1).sum(axis=0)
        else:
            per_passage = self._stacked @ query.vector
        return dict(zip(self._ids, per_passage.tolist()))


def dense_search(
    query: TokenMatrix | SingleVector,
    store: EmbeddingStore,
    kind: ScorerKind,
    k: int,
) -> list[tuple[str, float]]:
    """Rank documents by MaxP over exhaustive passage scores.

    Ties are broken by ascending doc id, mirroring the sparse searcher.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    passage_scores = store.score_all(query, kind)
    by_doc: dict[str, list[tuple[int, float]]] = {}
    for pid, score in passage_scores.items():
        doc_id, passage_index = store.passage_to_doc[pid]
        by_doc.setdefault(doc_id, []).append((passage_index, score))
    ranked = sorted(
        ((doc_id, maxp_aggregate(scores)) for doc_id, scores in by_doc.items()),
        key=lambda item: (-item[1], item[0]),
    )
    return ranked[:k]


def passage_id(doc_id: str, index: int) -> str:
    return f"{doc_id}#p{index}"


def store_from_passages(
    passages: Sequence,
    kind: ScorerKind,
    dim: int,
    seed: int,
    threads: int = 1,
) -> EmbeddingStore:
    """Embed pre-split passages with the toy provider.

    Thread workers only speed up embedding; output order and content are
    the same for any thread count.
    """

    def embed(passage):
        pid = passage_id(passage.doc_id, passage.index)
        if kind is ScorerKind.MAXSIM:
            rows = toy_embed(passage.tokens, dim, seed, id=pid).rows
        else:
            rows = toy_embed_single(passage.tokens, dim, seed, id=pid).vector.reshape(1, -1)
        return pid, rows

    if threads > 1 and len(passages) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            embedded = list(pool.map(embed, passages))
    else:
        embedded = [embed(p) for p in passages]
    entries = dict(embedded)
    passage_to_doc = {
        passage_id(p.doc_id, p.index): (p.doc_id, p.index) for p in passages
    }
    return EmbeddingStore(dim=dim, mode=kind, entries=entries, passage_to_doc=passage_to_doc)


def build_embedding_store(
    docs: Iterable[Document],
    kind: ScorerKind,
    dim: int,
    seed: int,
    config: AnalyzerConfig = DEFAULT_ANALYZER,
    window: int = 180,
    stride: int = 90,
    threads: int = 1,
) -> EmbeddingStore:
    """Split documents into passages and embed them with the toy provider."""
    passages = [
        p for doc in docs for p in split_passages(doc, window=window, stride=stride, config=config)
    ]
    return store_from_passages(passages, kind, dim, seed, threads=threads)


# ---------------------------------------------------------------------------
# Store file format
#
# Little-endian binary: magic "MLKE", format version u32, mode u8
# (0 = token matrices, 1 = single vectors), dim u32, entry count u64;
# then per entry: id length u16, id bytes (UTF-8), row count u32,
# row-major float32 values (row_count x dim). A sidecar JSON-lines file
# maps passage id -> {doc_id, passage_index}.
# ---------------------------------------------------------------------------

_MAGIC = b"MLKE"
_FORMAT_VERSION = 1
_MODE_BYTE = {ScorerKind.MAXSIM: 0, ScorerKind.SINGLE_VECTOR: 1}
_BYTE_MODE = {v: k for k, v in _MODE_BYTE.items()}


def sidecar_path(store_path: str | Path) -> Path:
    return Path(str(store_path) + ".passages.jsonl")


def save_store(store: EmbeddingStore, path: str | Path) -> None:
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IBIQ", _FORMAT_VERSION, _MODE_BYTE[store.mode], store.dim, len(store.entries)))
        for pid, rows in store.entries.items():
            id_bytes = pid.encode("utf-8")
            fh.write(struct.pack("<H", len(id_bytes)))
            fh.write(id_bytes)
            fh.write(struct.pack("<I", rows.shape[0]))
            fh.write(np.ascontiguousarray(rows, dtype="<f4").tobytes())
    with sidecar_path(path).open("w", encoding="utf-8") as fh:
        for pid in store.entries:
            doc_id, passage_index = store.passage_to_doc[pid]
            record = {"id": pid, "doc_id": doc_id, "passage_index": passage_index}
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def _read_exact(fh, n: int) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise FormatError("embedding store file is truncated")
    return data


def load_store(path: str | Path) -> EmbeddingStore:
    path = Path(path)
    with path.open("rb") as fh:
        if _read_exact(fh, 4) != _MAGIC:
            raise FormatError(f"{path}: not an embedding store (bad magic)")
        version, mode_byte, dim, count = struct.unpack("<IBIQ", _read_exact(fh, 17))
        if version != _FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported store format version {version}")
        if mode_byte not in _BYTE_MODE:
            raise FormatError(f"{path}: unknown store mode byte {mode_byte}")
        mode = _BYTE_MODE[mode_byte]
        entries: dict[str, np.ndarray] = {}
        for _ in range(count):
            (id_len,) = struct.unpack("<H", _read_exact(fh, 2))
            pid = _read_exact(fh, id_len).decode("utf-8")
            (row_count,) = struct.unpack("<I", _read_exact(fh, 4))
            if mode is ScorerKind.SINGLE_VECTOR and row_count != 1:
                raise FormatError(f"{path}: entry {pid!r} has {row_count} rows in single-vector mode")
            raw = _read_exact(fh, 4 * row_count * dim)
            rows = np.frombuffer(raw, dtype="<f4").reshape(row_count, dim).astype(np.float64)
            entries[pid] = rows
    passage_to_doc: dict[str, tuple[str, int]] = {}
    with sidecar_path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            record = json.loads(line)
            passage_to_doc[record["id"]] = (record["doc_id"], record["passage_index"])
    return EmbeddingStore(dim=dim, mode=mode, entries=entries, passage_to_doc=passage_to_doc)
