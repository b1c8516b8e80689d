"""MaxSim / single-vector scoring, MaxP, exhaustive dense search, and the
embedding store file format."""

import numpy as np
import pytest

from mlirkit.dense import (
    EmbeddingStore,
    ScorerKind,
    SingleVector,
    TokenMatrix,
    build_embedding_store,
    dense_search,
    load_store,
    maxp_aggregate,
    maxsim_score,
    passage_id,
    save_store,
    single_vector_score,
    store_from_passages,
    toy_embed,
    toy_embed_single,
)
from mlirkit.errors import ConfigError, DimensionMismatchError, EmptyQueryError, FormatError
from mlirkit.text import AnalyzerConfig, Document

NO_STEM = AnalyzerConfig(stem_languages=frozenset())


def unit_rows(rng, n, dim):
    rows = rng.standard_normal((n, dim))
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def basis(i, dim):
    v = np.zeros(dim)
    v[i] = 1.0
    return v


def maxsim_oracle(q_rows, p_rows) -> float:
    """Nested-loop MaxSim with a running max, no numpy reductions."""
    total = 0.0
    for q in q_rows:
        best = -float("inf")
        for p in p_rows:
            dot = sum(float(a) * float(b) for a, b in zip(q, p))
            if dot > best:
                best = dot
        total += best
    return total


# ---------------------------------------------------------------------------
# maxsim_score / single_vector_score / maxp_aggregate
# ---------------------------------------------------------------------------


def test_maxsim_exact_match_row():
    q = TokenMatrix("q", np.array([basis(0, 4)]))
    p = TokenMatrix("p", np.array([basis(0, 4), basis(1, 4)]))
    assert maxsim_score(q, p) == pytest.approx(1.0)


def test_maxsim_orthogonal():
    q = TokenMatrix("q", np.array([basis(0, 4), basis(1, 4)]))
    p = TokenMatrix("p", np.array([basis(2, 4), basis(3, 4)]))
    assert maxsim_score(q, p) == pytest.approx(0.0)


def test_maxsim_matches_nested_loop_oracle():
    rng = np.random.default_rng(7)
    for _ in range(50):
        q = TokenMatrix("q", unit_rows(rng, int(rng.integers(1, 9)), 4))
        p = TokenMatrix("p", unit_rows(rng, int(rng.integers(1, 17)), 4))
        assert maxsim_score(q, p) == pytest.approx(maxsim_oracle(q.rows, p.rows), abs=1e-6)


def test_maxsim_dimension_mismatch():
    q = TokenMatrix("q", np.array([basis(0, 4)]))
    p = TokenMatrix("p", np.array([basis(0, 8)]))
    with pytest.raises(DimensionMismatchError):
        maxsim_score(q, p)


def test_maxsim_permutation_invariance():
    rng = np.random.default_rng(8)
    q = TokenMatrix("q", unit_rows(rng, 5, 6))
    p = TokenMatrix("p", unit_rows(rng, 9, 6))
    score = maxsim_score(q, p)
    for _ in range(20):
        qp = TokenMatrix("q", q.rows[rng.permutation(5)])
        pp = TokenMatrix("p", p.rows[rng.permutation(9)])
        assert maxsim_score(qp, pp) == pytest.approx(score, abs=1e-9)


def test_maxsim_append_monotone():
    rng = np.random.default_rng(9)
    q = TokenMatrix("q", unit_rows(rng, 4, 6))
    p_rows = unit_rows(rng, 3, 6)
    base = maxsim_score(q, TokenMatrix("p", p_rows))
    for _ in range(20):
        extra = np.vstack([p_rows, unit_rows(rng, 1, 6)])
        assert maxsim_score(q, TokenMatrix("p", extra)) >= base - 1e-12


def test_maxsim_score_bounds():
    rng = np.random.default_rng(10)
    q = TokenMatrix("q", unit_rows(rng, 6, 5))
    p = TokenMatrix("p", unit_rows(rng, 11, 5))
    assert -6.0 <= maxsim_score(q, p) <= 6.0


def test_single_vector_scores():
    v = SingleVector("a", basis(0, 4))
    assert single_vector_score(v, SingleVector("b", basis(0, 4))) == pytest.approx(1.0)
    assert single_vector_score(v, SingleVector("b", basis(1, 4))) == pytest.approx(0.0)
    assert single_vector_score(v, SingleVector("b", -basis(0, 4))) == pytest.approx(-1.0)


def test_single_vector_symmetric():
    rng = np.random.default_rng(11)
    a = SingleVector("a", unit_rows(rng, 1, 7)[0])
    b = SingleVector("b", unit_rows(rng, 1, 7)[0])
    assert single_vector_score(a, b) == single_vector_score(b, a)


def test_unit_norm_enforced():
    with pytest.raises(ValueError, match="unit"):
        TokenMatrix("q", np.array([[1.0, 1.0]]))
    with pytest.raises(ValueError):
        SingleVector("v", np.array([0.5, 0.0]))


def test_maxp():
    assert maxp_aggregate([(0, 0.2), (1, 0.8), (2, 0.5)]) == 0.8
    assert maxp_aggregate([(0, 0.37)]) == 0.37
    assert maxp_aggregate([(0, 0.4), (1, 0.4)]) == 0.4
    with pytest.raises(ValueError):
        maxp_aggregate([])


def test_maxp_monotone_under_weaker_passage():
    scores = [(0, 0.9), (1, 0.1)]
    assert maxp_aggregate(scores + [(2, 0.5)]) == maxp_aggregate(scores)


# ---------------------------------------------------------------------------
# toy embeddings
# ---------------------------------------------------------------------------


def test_toy_embed_identical_tokens_identical_rows():
    m = toy_embed(["cat", "dog", "cat"], dim=8, seed=1)
    assert np.array_equal(m.rows[0], m.rows[2])
    assert not np.array_equal(m.rows[0], m.rows[1])


def test_toy_embed_seed_changes_vectors():
    a = toy_embed(["cat"], dim=8, seed=1)
    b = toy_embed(["cat"], dim=8, seed=2)
    assert not np.array_equal(a.rows, b.rows)


def test_toy_embed_unit_norm():
    m = toy_embed([f"tok{i}" for i in range(50)], dim=6, seed=3)
    assert np.allclose(np.linalg.norm(m.rows, axis=1), 1.0, atol=1e-6)


def test_toy_embed_errors():
    with pytest.raises(EmptyQueryError):
        toy_embed([], dim=8, seed=0)
    with pytest.raises(ConfigError):
        toy_embed(["a"], dim=1, seed=0)


def test_toy_embed_single_deterministic_unit():
    v = toy_embed_single(["a", "b", "c"], dim=8, seed=4)
    w = toy_embed_single(["a", "b", "c"], dim=8, seed=4)
    assert np.array_equal(v.vector, w.vector)
    assert np.linalg.norm(v.vector) == pytest.approx(1.0, abs=1e-9)


# ---------------------------------------------------------------------------
# dense_search
# ---------------------------------------------------------------------------


def toy_store(rng, n_docs=12, kind=ScorerKind.MAXSIM, dim=6, max_passages=3):
    entries, mapping = {}, {}
    for i in range(n_docs):
        doc = f"d{i:03d}"
        for j in range(int(rng.integers(1, max_passages + 1))):
            pid = passage_id(doc, j)
            rows = unit_rows(rng, int(rng.integers(1, 6)) if kind is ScorerKind.MAXSIM else 1, dim)
            entries[pid] = rows
            mapping[pid] = (doc, j)
    return EmbeddingStore(dim=dim, mode=kind, entries=entries, passage_to_doc=mapping)


def dense_oracle(store, query, kind):
    per_doc = {}
    for pid, rows in store.entries.items():
        if kind is ScorerKind.MAXSIM:
            s = maxsim_oracle(query.rows, rows)
        else:
            s = float(np.dot(rows[0], query.vector))
        doc, idx = store.passage_to_doc[pid]
        per_doc.setdefault(doc, []).append((idx, s))
    ranked = sorted(
        ((doc, max(s for _, s in v)) for doc, v in per_doc.items()),
        key=lambda kv: (-kv[1], kv[0]),
    )
    return ranked


def test_single_passage_per_doc_matches_passage_order():
    rng = np.random.default_rng(20)
    store = toy_store(rng, n_docs=8, max_passages=1)
    q = TokenMatrix("q", unit_rows(rng, 3, 6))
    ranked = dense_search(q, store, ScorerKind.MAXSIM, k=8)
    passage_scores = store.score_all(q, ScorerKind.MAXSIM)
    expected = sorted(
        ((store.passage_to_doc[p][0], s) for p, s in passage_scores.items()),
        key=lambda kv: (-kv[1], kv[0]),
    )
    assert ranked == expected


def test_maxp_dominance():
    dim = 4
    entries = {
        "A#p0": np.array([basis(0, dim)]),
        "A#p1": np.array([basis(1, dim)]),
        "B#p0": np.array([(basis(0, dim) + basis(1, dim)) / np.sqrt(2)]),
    }
    mapping = {"A#p0": ("A", 0), "A#p1": ("A", 1), "B#p0": ("B", 0)}
    store = EmbeddingStore(dim=dim, mode=ScorerKind.MAXSIM, entries=entries, passage_to_doc=mapping)
    q = TokenMatrix("q", np.array([basis(0, dim)]))
    ranked = dense_search(q, store, ScorerKind.MAXSIM, k=2)
    assert ranked[0] == ("A", pytest.approx(1.0))  # best passage wins, not the mean
    assert ranked[1][0] == "B"


def test_dense_search_equals_oracle():
    rng = np.random.default_rng(21)
    for kind in (ScorerKind.MAXSIM, ScorerKind.SINGLE_VECTOR):
        store = toy_store(rng, n_docs=20, kind=kind)
        if kind is ScorerKind.MAXSIM:
            query = TokenMatrix("q", unit_rows(rng, 4, 6))
        else:
            query = SingleVector("q", unit_rows(rng, 1, 6)[0])
        got = dense_search(query, store, kind, k=50)
        expected = dense_oracle(store, query, kind)
        assert [d for d, _ in got] == [d for d, _ in expected]
        for (_, a), (_, b) in zip(got, expected):
            assert a == pytest.approx(b, abs=1e-9)


def test_top_k_prefix_property():
    rng = np.random.default_rng(22)
    store = toy_store(rng, n_docs=15)
    q = TokenMatrix("q", unit_rows(rng, 3, 6))
    for k in range(1, 15):
        assert dense_search(q, store, ScorerKind.MAXSIM, k) == \
            dense_search(q, store, ScorerKind.MAXSIM, k + 1)[:k]


def test_kind_must_match_store_mode():
    rng = np.random.default_rng(23)
    store = toy_store(rng, kind=ScorerKind.MAXSIM)
    q = SingleVector("q", unit_rows(rng, 1, 6)[0])
    with pytest.raises(ConfigError):
        dense_search(q, store, ScorerKind.SINGLE_VECTOR, k=3)


def test_query_dimension_mismatch():
    rng = np.random.default_rng(24)
    store = toy_store(rng, dim=6)
    q = TokenMatrix("q", unit_rows(rng, 3, 8))
    with pytest.raises(DimensionMismatchError):
        dense_search(q, store, ScorerKind.MAXSIM, k=3)


def test_empty_store_returns_nothing():
    store = EmbeddingStore(dim=4, mode=ScorerKind.MAXSIM, entries={}, passage_to_doc={})
    q = TokenMatrix("q", np.array([basis(0, 4)]))
    assert dense_search(q, store, ScorerKind.MAXSIM, k=5) == []


def test_store_requires_doc_mapping():
    with pytest.raises(FormatError):
        EmbeddingStore(
            dim=4,
            mode=ScorerKind.MAXSIM,
            entries={"orphan": np.array([basis(0, 4)])},
            passage_to_doc={},
        )


# ---------------------------------------------------------------------------
# store construction and file format
# ---------------------------------------------------------------------------


def sample_docs():
    return [
        Document(id="d1", lang="en", text="alpha beta gamma delta"),
        Document(id="d2", lang="de", text="eins zwei drei"),
        Document(id="d3", lang="en", text=""),  # no passages
    ]


def test_build_embedding_store_passage_mapping():
    store = build_embedding_store(sample_docs(), ScorerKind.MAXSIM, dim=8, seed=5, config=NO_STEM)
    assert set(store.passage_to_doc.values()) == {("d1", 0), ("d2", 0)}
    assert store.entries[passage_id("d1", 0)].shape == (4, 8)


def test_threaded_build_matches_serial():
    docs = [Document(id=f"d{i}", lang="xx", text=" ".join(f"w{j}" for j in range(i + 1)))
            for i in range(9)]
    from mlirkit.text import split_passages

    passages = [p for d in docs for p in split_passages(d, 5, 2, NO_STEM)]
    serial = store_from_passages(passages, ScorerKind.MAXSIM, 8, 0, threads=1)
    threaded = store_from_passages(passages, ScorerKind.MAXSIM, 8, 0, threads=4)
    assert list(serial.entries) == list(threaded.entries)
    for pid in serial.entries:
        assert np.array_equal(serial.entries[pid], threaded.entries[pid])


def test_store_round_trip(tmp_path):
    for kind in (ScorerKind.MAXSIM, ScorerKind.SINGLE_VECTOR):
        store = build_embedding_store(sample_docs(), kind, dim=8, seed=5, config=NO_STEM)
        path = tmp_path / f"{kind.value}.mlke"
        save_store(store, path)
        loaded = load_store(path)
        assert loaded.dim == store.dim
        assert loaded.mode is store.mode
        assert list(loaded.entries) == list(store.entries)
        assert loaded.passage_to_doc == store.passage_to_doc
        for pid in store.entries:
            assert np.allclose(loaded.entries[pid], store.entries[pid], atol=1e-6)  # float32 file


def test_store_header_layout(tmp_path):
    store = build_embedding_store(sample_docs(), ScorerKind.MAXSIM, dim=8, seed=5, config=NO_STEM)
    path = tmp_path / "s.mlke"
    save_store(store, path)
    blob = path.read_bytes()
    assert blob[:4] == b"MLKE"
    assert int.from_bytes(blob[4:8], "little") == 1  # version
    assert blob[8] == 0  # mode byte: token matrices
    assert int.from_bytes(blob[9:13], "little") == 8  # dim
    assert int.from_bytes(blob[13:21], "little") == 2  # entries


def test_store_bad_magic(tmp_path):
    path = tmp_path / "bad.mlke"
    path.write_bytes(b"NOPE" + b"\x00" * 32)
    with pytest.raises(FormatError, match="magic"):
        load_store(path)


def test_store_truncated(tmp_path):
    store = build_embedding_store(sample_docs(), ScorerKind.MAXSIM, dim=8, seed=5, config=NO_STEM)
    path = tmp_path / "s.mlke"
    save_store(store, path)
    (tmp_path / "t.mlke").write_bytes(path.read_bytes()[:-10])
    save_store(store, tmp_path / "t_sidecar_source.mlke")  # sidecar for the truncated copy
    (tmp_path / "t.mlke.passages.jsonl").write_bytes(
        (tmp_path / "t_sidecar_source.mlke.passages.jsonl").read_bytes()
    )
    with pytest.raises(FormatError, match="truncated"):
        load_store(tmp_path / "t.mlke")
