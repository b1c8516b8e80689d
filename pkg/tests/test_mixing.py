"""Round-robin mixing, batch schedules, and combined-file round trips."""

from collections import Counter

import pytest

from mlirkit.errors import AlignmentError, ConfigError, FormatError
from mlirkit.mixing import (
    MixConfig,
    MixMode,
    Triple,
    emit_combined_file,
    mix_round_robin,
    read_triples,
    schedule_batches,
    shuffle_aligned,
    split_combined_file,
    write_schedule_manifest,
)


def aligned_streams(langs, n, prefix="q"):
    """Parallel streams sharing query text per position."""
    return [
        [
            Triple(f"{prefix}{i}", f"pos-{lang}-{i}", f"neg-{lang}-{i}", lang, source_line=i)
            for i in range(n)
        ]
        for lang in langs
    ]


# ---------------------------------------------------------------------------
# mix_round_robin
# ---------------------------------------------------------------------------


def test_round_robin_two_streams():
    a, b = aligned_streams(["en", "de"], 2)
    mixed = mix_round_robin([a, b])
    assert mixed == [a[0], b[0], a[1], b[1]]


def test_round_robin_five_streams_period():
    streams = aligned_streams(["en", "fr", "de", "it", "es"], 3)
    mixed = mix_round_robin(streams)
    assert len(mixed) == 15
    assert [t.lang for t in mixed[:5]] == ["en", "fr", "de", "it", "es"]
    # every aligned window of 5 holds all languages exactly once
    for start in range(0, 15, 5):
        window = mixed[start : start + 5]
        assert Counter(t.lang for t in window) == Counter({"en": 1, "fr": 1, "de": 1, "it": 1, "es": 1})
        assert len({t.query for t in window}) == 1  # query shared within the group


def test_round_robin_zero_streams():
    with pytest.raises(ConfigError):
        mix_round_robin([])


def test_round_robin_truncates_with_warning():
    a, b = aligned_streams(["en", "de"], 3)
    with pytest.warns(RuntimeWarning, match="truncating"):
        mixed = mix_round_robin([a, b[:2]])
    assert len(mixed) == 4


def test_round_robin_query_mismatch():
    a, b = aligned_streams(["en", "de"], 2)
    b[1] = Triple("other-query", b[1].positive, b[1].negative, "de", source_line=1)
    with pytest.raises(AlignmentError, match="query mismatch"):
        mix_round_robin([a, b])


# ---------------------------------------------------------------------------
# schedule_batches
# ---------------------------------------------------------------------------


def test_et_plain_chunking():
    (stream,) = aligned_streams(["en"], 10)
    config = MixConfig(MixMode.ET, ("en",), batch_size=4)
    with pytest.warns(RuntimeWarning, match="partial"):
        schedule = schedule_batches(stream, config)
    batches = schedule.batches()
    assert [len(b) for b in batches] == [4, 4, 2]
    assert all(t.lang == "en" for b in batches for t in b)
    assert schedule.partial_batches == (2,)


def test_mtt_m_mixed_batches():
    streams = aligned_streams(["en", "fr", "de", "it", "es"], 64)  # 320 triples
    stream = mix_round_robin(streams)
    config = MixConfig(MixMode.MTT_M, ("en", "fr", "de", "it", "es"), batch_size=32)
    schedule = schedule_batches(stream, config)
    batches = schedule.batches()
    assert len(batches) == 10
    for batch in batches:
        assert sorted(Counter(t.lang for t in batch).values()) == [6, 6, 6, 7, 7]


def test_mtt_s_rotation():
    streams = aligned_streams(["en", "de"], 8)
    stream = mix_round_robin(streams)
    config = MixConfig(MixMode.MTT_S, ("en", "de"), batch_size=4)
    schedule = schedule_batches(stream, config)
    batches = schedule.batches()
    langs = [{t.lang for t in b} for b in batches]
    assert langs == [{"en"}, {"de"}, {"en"}, {"de"}]
    assert all(len(b) == 4 for b in batches)
    assert schedule.partial_batches == ()


def test_mtt_s_partial_batches_flagged():
    streams = aligned_streams(["en", "de"], 5)
    stream = mix_round_robin(streams)
    config = MixConfig(MixMode.MTT_S, ("en", "de"), batch_size=4)
    with pytest.warns(RuntimeWarning, match="partial"):
        schedule = schedule_batches(stream, config)
    batches = schedule.batches()
    assert [len(b) for b in batches] == [4, 4, 1, 1]
    assert schedule.partial_batches == (2, 3)
    # each batch is single-language and per-language batch counts stay equal
    per_lang = Counter(next(iter({t.lang for t in b})) for b in batches)
    assert per_lang == Counter({"en": 2, "de": 2})


def test_schedule_rejects_unknown_language():
    (stream,) = aligned_streams(["en"], 3)
    config = MixConfig(MixMode.ET, ("de",), batch_size=2)
    with pytest.raises(ConfigError, match="outside configured"):
        schedule_batches(stream, config)


def test_schedule_rejects_empty_stream():
    config = MixConfig(MixMode.ET, ("en",), batch_size=2)
    with pytest.raises(ConfigError):
        schedule_batches([], config)


def test_mix_config_validation():
    with pytest.raises(ConfigError):
        MixConfig(MixMode.ET, ("en", "de"), batch_size=2)
    with pytest.raises(ConfigError):
        MixConfig(MixMode.MTT_M, ("en",), batch_size=2)
    with pytest.raises(ConfigError):
        MixConfig(MixMode.MTT_M, ("en", "de"), batch_size=0)
    with pytest.raises(ConfigError):
        MixConfig(MixMode.MTT_M, ("en", "en"), batch_size=2)


def test_shuffle_preserves_alignment_and_is_deterministic():
    streams = aligned_streams(["en", "de", "fr"], 20)
    shuffled = shuffle_aligned(streams, seed=13)
    again = shuffle_aligned(streams, seed=13)
    other = shuffle_aligned(streams, seed=14)
    assert shuffled == again
    assert shuffled != other
    for i in range(20):
        assert len({s[i].query for s in shuffled}) == 1
    assert sorted(t.source_line for t in shuffled[0]) == list(range(20))


def test_manifest_round_trip(tmp_path):
    streams = aligned_streams(["en", "de"], 6)
    stream = mix_round_robin(streams)
    config = MixConfig(MixMode.MTT_M, ("en", "de"), batch_size=4)
    schedule = schedule_batches(stream, config)
    path = tmp_path / "schedule.jsonl"
    write_schedule_manifest(schedule, path)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 12
    assert lines[0] == '{"batch":0,"lang":"en","position":0,"triple_line":0}'
    # byte-identical on re-generation
    write_schedule_manifest(schedule_batches(stream, config), tmp_path / "again.jsonl")
    assert (tmp_path / "again.jsonl").read_bytes() == path.read_bytes()


# ---------------------------------------------------------------------------
# triple files and the combined file
# ---------------------------------------------------------------------------


def write_triples(path, rows):
    path.write_bytes(b"".join(b"\t".join(r) + b"\n" for r in rows))


def test_read_triples(tmp_path):
    path = tmp_path / "en.tsv"
    write_triples(path, [(b"q0", b"p0", b"n0"), (b"q1", b"p1", b"n1")])
    triples = read_triples(path, "en")
    assert triples[1] == Triple("q1", "p1", "n1", "en", source_line=1)


def test_read_triples_bad_field_count(tmp_path):
    path = tmp_path / "en.tsv"
    path.write_bytes(b"q0\tp0\n")
    with pytest.raises(FormatError, match="en.tsv:1"):
        read_triples(path, "en")


def test_read_triples_empty_field(tmp_path):
    path = tmp_path / "en.tsv"
    path.write_bytes(b"q0\t\tn0\n")
    with pytest.raises(FormatError, match="non-empty"):
        read_triples(path, "en")


def test_emit_combined_paste_semantics(tmp_path):
    a = tmp_path / "en.tsv"
    b = tmp_path / "de.tsv"
    write_triples(a, [(b"q", b"p1", b"n1")])
    write_triples(b, [(b"q", b"p2", b"n2")])
    out = tmp_path / "combined.tsv"
    assert emit_combined_file([a, b], out) == 1
    assert out.read_bytes() == b"q\tp1\tn1\tq\tp2\tn2\n"


def test_emit_combined_empty_files(tmp_path):
    a = tmp_path / "en.tsv"
    b = tmp_path / "de.tsv"
    a.write_bytes(b"")
    b.write_bytes(b"")
    out = tmp_path / "combined.tsv"
    assert emit_combined_file([a, b], out) == 0
    assert out.read_bytes() == b""


def test_emit_combined_unequal_lines(tmp_path):
    a = tmp_path / "en.tsv"
    b = tmp_path / "de.tsv"
    write_triples(a, [(b"q0", b"p", b"n"), (b"q1", b"p", b"n")])
    write_triples(b, [(b"q0", b"p", b"n")])
    with pytest.raises(AlignmentError, match="de.tsv"):
        emit_combined_file([a, b], tmp_path / "out.tsv")


def test_combined_round_trip(tmp_path):
    langs = ["en", "fr", "de"]
    paths = []
    originals = []
    for li, lang in enumerate(langs):
        rows = [
            (f"query {i}".encode(), f"pos {lang} {i} äöü".encode(), f"neg {lang} {i}".encode())
            for i in range(25)
        ]
        path = tmp_path / f"{lang}.tsv"
        write_triples(path, rows)
        paths.append(path)
        originals.append(path.read_bytes())
    out = tmp_path / "combined.tsv"
    emit_combined_file(paths, out)
    recovered = split_combined_file(out, len(langs))
    for original, lines in zip(originals, recovered):
        assert b"\n".join(lines) + b"\n" == original
