"""Inverted index and BM25 ranking (k1=0.9, b=0.4 defaults)."""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import DuplicateIdError, EmptyQueryError
from .text import AnalyzerConfig, DEFAULT_ANALYZER, Document, Query, analyze


@dataclass(frozen=True)
class BM25Params:
    k1: float = 0.9
    b: float = 0.4

    def __post_init__(self):
        if self.k1 < 0:
            raise ValueError(f"k1 must be >= 0, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError(f"b must be in [0, 1], got {self.b}")


@dataclass
class CollectionStats:
    """Document counts, lengths, and term document frequencies."""

    doc_count: int
    avg_doc_len: float
    doc_lens: dict[str, int]
    df: dict[str, int]


@dataclass
class InvertedIndex:
    """Term postings plus collection statistics; immutable once built.

    Posting lists are sorted by doc id and hold (doc id, term frequency).
    """

    postings: dict[str, list[tuple[str, int]]]
    stats: CollectionStats
    params: BM25Params = field(default_factory=BM25Params)

    def idf(self, term: str) -> float:
        # ln(1 + (N - df + 0.5) / (df + 0.5)): strictly positive for 0 <= df <= N
        n = self.stats.doc_count
        df = self.stats.df.get(term, 0)
        return math.log(1.0 + (n - df + 0.5) / (df + 0.5))


def build_index_from_terms(
    doc_terms: Iterable[tuple[str, Sequence[str]]],
    params: BM25Params = BM25Params(),
) -> InvertedIndex:
    """Build the index from already-analyzed (doc id, terms) pairs."""
    doc_lens: dict[str, int] = {}
    postings: dict[str, list[tuple[str, int]]] = defaultdict(list)
    for doc_id, terms in doc_terms:
        if doc_id in doc_lens:
            raise DuplicateIdError(f"duplicate document id: {doc_id}")
        doc_lens[doc_id] = len(terms)
        for term, tf in Counter(terms).items():
            postings[term].append((doc_id, tf))
    for plist in postings.values():
        plist.sort(key=lambda entry: entry[0])
    n = len(doc_lens)
    stats = CollectionStats(
        doc_count=n,
        avg_doc_len=sum(doc_lens.values()) / n if n else 0.0,
        doc_lens=doc_lens,
        df={term: len(plist) for term, plist in postings.items()},
    )
    return InvertedIndex(postings=dict(postings), stats=stats, params=params)


def build_index(
    docs: Iterable[Document],
    config: AnalyzerConfig = DEFAULT_ANALYZER,
    params: BM25Params = BM25Params(),
) -> InvertedIndex:
    """Analyze documents and build the inverted index over all of them."""
    return build_index_from_terms(
        ((doc.id, analyze(doc.text, doc.lang, config)) for doc in docs), params
    )


def bm25_score(query_terms: Sequence[str], doc_id: str, index: InvertedIndex) -> float:
    """BM25 score of one document for an analyzed query.

    Each query-term occurrence contributes
    idf(t) * tf*(k1+1) / (tf + k1*(1 - b + b*dl/avgdl)); terms absent
    from the document contribute nothing.
    """
    if doc_id not in index.stats.doc_lens:
        raise KeyError(f"unknown document id: {doc_id}")
    k1, b = index.params.k1, index.params.b
    dl = index.stats.doc_lens[doc_id]
    avgdl = index.stats.avg_doc_len
    score = 0.0
    for term, qtf in Counter(query_terms).items():
        tf = next((f for d, f in index.postings.get(term, ()) if d == doc_id), 0)
        if tf == 0:
            continue
        norm = k1 * (1.0 - b + b * dl / avgdl)
        score += qtf * index.idf(term) * tf * (k1 + 1.0) / (tf + norm)
    return score


def search_terms(
    query_terms: Sequence[str], index: InvertedIndex, k: int
) -> list[tuple[str, float]]:
    """Rank documents containing at least one query term, best first.

    Ties are broken by ascending doc id for reproducible runs.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not query_terms:
        raise EmptyQueryError("cannot search with an empty analyzed query")
    k1, b = index.params.k1, index.params.b
    avgdl = index.stats.avg_doc_len
    doc_lens = index.stats.doc_lens
    scores: dict[str, float] = defaultdict(float)
    for term, qtf in Counter(query_terms).items():
        plist = index.postings.get(term)
        if not plist:
            continue
        idf = index.idf(term)
        for doc_id, tf in plist:
            norm = k1 * (1.0 - b + b * doc_lens[doc_id] / avgdl)
            scores[doc_id] += qtf * idf * tf * (k1 + 1.0) / (tf + norm)
    ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    return ranked[:k]


def sparse_search(
    query: Query,
    index: InvertedIndex,
    k: int,
    config: AnalyzerConfig = DEFAULT_ANALYZER,
    use_description: bool = False,
) -> list[tuple[str, float]]:
    """Analyze a query and rank the top-k documents by BM25."""
    terms = analyze(query.text(use_description), query.lang, config)
    if not terms:
        raise EmptyQueryError(f"query {query.id} analyzed to an empty term sequence")
    return search_terms(terms, index, k)


def index_to_dict(index: InvertedIndex, analyzer: AnalyzerConfig) -> dict:
    """JSON-serializable form of the index plus the analyzer that built it."""
    return {
        "type": "bm25",
        "params": {"k1": index.params.k1, "b": index.params.b},
        "analyzer": analyzer.to_dict(),
        "doc_lens": index.stats.doc_lens,
        "postings": {term: [[d, tf] for d, tf in plist] for term, plist in index.postings.items()},
    }


def index_from_dict(data: dict) -> tuple[InvertedIndex, AnalyzerConfig]:
    if data.get("type") != "bm25":
        raise ValueError(f"not a bm25 index payload: type={data.get('type')!r}")
    params = BM25Params(k1=data["params"]["k1"], b=data["params"]["b"])
    postings = {
        term: [(d, int(tf)) for d, tf in plist] for term, plist in data["postings"].items()
    }
    doc_lens = {d: int(n) for d, n in data["doc_lens"].items()}
    n = len(doc_lens)
    stats = CollectionStats(
        doc_count=n,
        avg_doc_len=sum(doc_lens.values()) / n if n else 0.0,
        doc_lens=doc_lens,
        df={term: len(plist) for term, plist in postings.items()},
    )
    index = InvertedIndex(postings=postings, stats=stats, params=params)
    return index, AnalyzerConfig.from_dict(data["analyzer"])
