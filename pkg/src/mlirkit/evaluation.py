"""Effectiveness metrics over merged multilingual judgments, plus the
two language-bias analyses (per-language recall distributions and
KS score-distribution tests against a reference language).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, DuplicateIdError
from .stats import bonferroni_adjust, ks_two_sample

#: Pseudo language code selecting the unfiltered multilingual ranking.
ALL_LANGUAGES = "ALL"

#: Minimum relevant docs per language and topic for the KS bias test.
KS_MIN_RELEVANT = 3


@dataclass
class Run:
    """Ranked results per query: (doc id, score) descending, plus a tag."""

    tag: str
    rankings: dict[str, list[tuple[str, float]]]

    def __post_init__(self):
        for qid, ranking in self.rankings.items():
            seen = set()
            for doc_id, _ in ranking:
                if doc_id in seen:
                    raise DuplicateIdError(f"query {qid}: document {doc_id} retrieved twice")
                seen.add(doc_id)
            scores = [s for _, s in ranking]
            if any(a < b for a, b in zip(scores, scores[1:])):
                raise ValueError(f"query {qid}: scores are not non-increasing")

    def doc_ids(self, qid: str) -> list[str]:
        return [doc_id for doc_id, _ in self.rankings.get(qid, [])]

    def scores(self, qid: str) -> dict[str, float]:
        return dict(self.rankings.get(qid, []))


@dataclass
class MergedQrels:
    """Union of per-language relevance judgments with doc-language attribution.

    ``doc_lang`` may cover more than the judged documents (ideally the
    whole collection); language-filtered metrics treat documents with no
    known language as belonging to no language.
    """

    judgments: dict[str, dict[str, int]]
    doc_lang: dict[str, str]

    def relevant(self, qid: str) -> dict[str, int]:
        return {d: g for d, g in self.judgments.get(qid, {}).items() if g > 0}

    def relevant_by_lang(self, qid: str, lang: str) -> set[str]:
        return {d for d in self.relevant(qid) if self.doc_lang.get(d) == lang}

    def languages(self) -> list[str]:
        judged = {d for q in self.judgments.values() for d in q}
        return sorted({self.doc_lang[d] for d in judged if d in self.doc_lang})

    def query_ids(self) -> list[str]:
        return sorted(self.judgments)


def merge_qrels(
    qrels_by_lang: Mapping[str, Mapping[str, Mapping[str, int]]],
    doc_langs: Mapping[str, str] | None = None,
) -> MergedQrels:
    """Combine per-language qrels into one multilingual judgment set.

    Document ids must be globally unique across languages: a doc id
    judged in two different language files is an error. ``doc_langs``
    optionally extends the attribution to unjudged documents (e.g. the
    whole collection) and is cross-checked against the files.
    """
    judgments: dict[str, dict[str, int]] = {}
    doc_lang: dict[str, str] = {}
    for lang, per_query in qrels_by_lang.items():
        for qid, docs in per_query.items():
            merged_q = judgments.setdefault(qid, {})
            for doc_id, grade in docs.items():
                if grade < 0:
                    raise ValueError(f"negative relevance grade for {qid}/{doc_id}: {grade}")
                if doc_lang.get(doc_id, lang) != lang:
                    raise DuplicateIdError(
                        f"document {doc_id} judged in both {doc_lang[doc_id]!r} and {lang!r}"
                    )
                if doc_id in merged_q:
                    raise DuplicateIdError(f"document {doc_id} judged twice for query {qid}")
                doc_lang[doc_id] = lang
                merged_q[doc_id] = grade
    if doc_langs:
        for doc_id, lang in doc_langs.items():
            if doc_lang.get(doc_id, lang) != lang:
                raise DuplicateIdError(
                    f"document {doc_id}: qrels say {doc_lang[doc_id]!r}, map says {lang!r}"
                )
            doc_lang[doc_id] = lang
    return MergedQrels(judgments=judgments, doc_lang=doc_lang)


# ---------------------------------------------------------------------------
# Rank metrics
# ---------------------------------------------------------------------------


def average_precision(ranked_docs: Sequence[str], qrels_for_q: Mapping[str, int]) -> float:
    """Mean over relevant docs of the precision at each one's rank."""
    relevant = {d for d, g in qrels_for_q.items() if g > 0}
    if not relevant:
        raise ValueError("average precision needs at least one relevant document")
    hits = 0
    total = 0.0
    for rank, doc_id in enumerate(ranked_docs, start=1):
        if doc_id in relevant:
            hits += 1
            total += hits / rank
    return total / len(relevant)


def precision_at_10(ranked_docs: Sequence[str], qrels_for_q: Mapping[str, int]) -> float:
    """Fraction of the top 10 that is relevant; short lists count as padded."""
    relevant = {d for d, g in qrels_for_q.items() if g > 0}
    return sum(1 for d in ranked_docs[:10] if d in relevant) / 10.0


def r_precision(ranked_docs: Sequence[str], qrels_for_q: Mapping[str, int]) -> float:
    """Precision at rank R, with R the query's total relevant count."""
    relevant = {d for d, g in qrels_for_q.items() if g > 0}
    if not relevant:
        raise ValueError("r-precision needs at least one relevant document")
    r = len(relevant)
    return sum(1 for d in ranked_docs[:r] if d in relevant) / r


def recall_at_mlir_relevant(
    ranked_docs: Sequence[str],
    qrels_for_q: Mapping[str, int],
    doc_lang: Mapping[str, str],
    lang: str = ALL_LANGUAGES,
) -> float | None:
    """Recall at the cross-language relevant count R_q.

    For ``ALL``: recall of all relevant docs within the top R_q of the
    full run (identical to R-Precision). For a specific language:
    documents of other languages are dropped from both the ranking and
    the judgments, but the cutoff stays R_q. Returns None ("undefined")
    when the language has no relevant documents for this query.
    """
    relevant_all = {d for d, g in qrels_for_q.items() if g > 0}
    r_q = len(relevant_all)
    if r_q == 0:
        return None
    if lang == ALL_LANGUAGES:
        return sum(1 for d in ranked_docs[:r_q] if d in relevant_all) / r_q
    relevant_l = {d for d in relevant_all if doc_lang.get(d) == lang}
    if not relevant_l:
        return None
    filtered = [d for d in ranked_docs if doc_lang.get(d) == lang]
    return sum(1 for d in filtered[:r_q] if d in relevant_l) / len(relevant_l)


def evaluate_run(run: Run, qrels: MergedQrels) -> dict:
    """Aggregate MAP / P@10 / R-Precision plus per-query values.

    Queries with no judged-relevant documents are excluded from every
    mean (trec-eval convention).
    """
    per_query: dict[str, dict[str, float]] = {}
    for qid in qrels.query_ids():
        if not qrels.relevant(qid):
            continue
        docs = run.doc_ids(qid)
        judged = qrels.judgments[qid]
        per_query[qid] = {
            "ap": average_precision(docs, judged),
            "p10": precision_at_10(docs, judged),
            "r_precision": r_precision(docs, judged),
        }
    n = len(per_query)
    aggregate = {
        "map": sum(v["ap"] for v in per_query.values()) / n if n else 0.0,
        "p10": sum(v["p10"] for v in per_query.values()) / n if n else 0.0,
        "r_precision": sum(v["r_precision"] for v in per_query.values()) / n if n else 0.0,
        "queries_evaluated": n,
    }
    return {"tag": run.tag, "aggregate": aggregate, "per_query": per_query}


# ---------------------------------------------------------------------------
# Language-bias report
# ---------------------------------------------------------------------------


@dataclass
class RecallSummary:
    """Distribution of per-topic Recall@MLIR-Relevant for one language."""

    lang: str
    values: dict[str, float]  # topic id -> recall
    mean: float
    median: float
    q1: float
    q3: float
    outliers: dict[str, float]  # beyond 1.5 x IQR

    @classmethod
    def from_values(cls, lang: str, values: dict[str, float]) -> "RecallSummary":
        arr = np.asarray(list(values.values()), dtype=np.float64)
        q1, median, q3 = np.percentile(arr, [25.0, 50.0, 75.0])
        iqr = q3 - q1
        lo, hi = q1 - 1.5 * iqr, q3 + 1.5 * iqr
        outliers = {t: v for t, v in values.items() if v < lo or v > hi}
        return cls(
            lang=lang,
            values=values,
            mean=float(arr.mean()),
            median=float(median),
            q1=float(q1),
            q3=float(q3),
            outliers=outliers,
        )


@dataclass
class KsTestResult:
    lang: str
    qid: str
    n_lang: int
    n_ref: int
    d: float
    p_raw: float
    p_adjusted: float = float("nan")


@dataclass
class BiasReport:
    """Per-language recall distributions and KS score-bias tests."""

    reference_lang: str
    alpha: float
    n_tests: int
    recall: dict[str, RecallSummary]
    ks_tests: list[KsTestResult]
    bias_fraction: dict[str, float | None]
    skipped_pairs: list[tuple[str, str]] = field(default_factory=list)
    notes: str = (
        "KS p-values use the asymptotic Kolmogorov series; "
        "multiple comparisons are Bonferroni-adjusted."
    )

    def to_dict(self) -> dict:
        return {
            "reference_lang": self.reference_lang,
            "alpha": self.alpha,
            "n_tests": self.n_tests,
            "notes": self.notes,
            "recall": {
                lang: {
                    "topic_count": len(s.values),
                    "mean": s.mean,
                    "median": s.median,
                    "q1": s.q1,
                    "q3": s.q3,
                    "outliers": s.outliers,
                    "values": s.values,
                }
                for lang, s in self.recall.items()
            },
            "ks_tests": [
                {
                    "lang": t.lang,
                    "qid": t.qid,
                    "n_lang": t.n_lang,
                    "n_ref": t.n_ref,
                    "d": t.d,
                    "p_raw": t.p_raw,
                    "p_adjusted": t.p_adjusted,
                    "flagged": t.p_adjusted < self.alpha,
                }
                for t in self.ks_tests
            ],
            "skipped_pairs": [list(p) for p in self.skipped_pairs],
            "bias_fraction": self.bias_fraction,
        }


def bias_report(
    run: Run,
    qrels: MergedQrels,
    reference_lang: str,
    alpha: float = 0.05,
    n_tests: int | None = None,
) -> BiasReport:
    """Build both bias analyses for one run.

    Rate analysis: per-language distributions of per-topic
    Recall@MLIR-Relevant over topics with at least one relevant doc in
    that language. Score analysis: per (language, topic) KS test of the
    run scores of that language's relevant docs against the reference
    language's, for topics where both sides have >= 3 judged-relevant
    docs; p-values Bonferroni-adjusted over the tests performed (or a
    caller-supplied factor).
    """
    languages = qrels.languages()
    if reference_lang not in languages:
        raise ConfigError(f"reference language {reference_lang!r} has no judged documents")
    if not any(run.rankings.values()):
        warnings.warn("run is empty: recall entries are zero/undefined and no KS test applies",
                      RuntimeWarning, stacklevel=2)

    recall_summaries: dict[str, RecallSummary] = {}
    for lang in languages:
        values: dict[str, float] = {}
        for qid in qrels.query_ids():
            value = recall_at_mlir_relevant(
                run.doc_ids(qid), qrels.judgments.get(qid, {}), qrels.doc_lang, lang
            )
            if value is not None:
                values[qid] = value
        if values:
            recall_summaries[lang] = RecallSummary.from_values(lang, values)

    ks_tests: list[KsTestResult] = []
    skipped: list[tuple[str, str]] = []
    eligible: dict[str, int] = {lang: 0 for lang in languages if lang != reference_lang}
    for lang in languages:
        if lang == reference_lang:
            continue
        for qid in qrels.query_ids():
            rel_l = qrels.relevant_by_lang(qid, lang)
            rel_ref = qrels.relevant_by_lang(qid, reference_lang)
            if len(rel_l) < KS_MIN_RELEVANT or len(rel_ref) < KS_MIN_RELEVANT:
                continue
            eligible[lang] += 1
            scores = run.scores(qid)
            sample_l = [scores[d] for d in sorted(rel_l) if d in scores]
            sample_ref = [scores[d] for d in sorted(rel_ref) if d in scores]
            if not sample_l or not sample_ref:
                skipped.append((lang, qid))
                continue
            d, p = ks_two_sample(sample_l, sample_ref)
            ks_tests.append(KsTestResult(lang=lang, qid=qid, n_lang=len(sample_l),
                                         n_ref=len(sample_ref), d=d, p_raw=p))

    factor = n_tests if n_tests is not None else max(1, len(ks_tests))
    adjusted = bonferroni_adjust([t.p_raw for t in ks_tests], factor)
    for t, p_adj in zip(ks_tests, adjusted):
        t.p_adjusted = p_adj

    bias_fraction: dict[str, float | None] = {}
    for lang, n_eligible in eligible.items():
        tested = [t for t in ks_tests if t.lang == lang]
        if not tested:
            bias_fraction[lang] = None
            continue
        flagged = sum(1 for t in tested if t.p_adjusted < alpha)
        bias_fraction[lang] = flagged / n_eligible

    return BiasReport(
        reference_lang=reference_lang,
        alpha=alpha,
        n_tests=factor,
        recall=recall_summaries,
        ks_tests=ks_tests,
        bias_fraction=bias_fraction,
        skipped_pairs=skipped,
    )
