"""Deterministic training-triple streams: ET, mixed-language, and
single-language batch schedules built from per-language triple files.

Triples are (query, positive passage, negative passage) lines; the m
per-language files are parallel translations of the same underlying
instances, so the i-th line of every file shares one query.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import AlignmentError, ConfigError, FormatError


class MixMode(Enum):
    ET = "et"
    MTT_M = "mtt-m"
    MTT_S = "mtt-s"


@dataclass(frozen=True)
class Triple:
    """One training instance: shared query, per-language passage pair."""

    query: str
    positive: str
    negative: str
    lang: str
    source_line: int = -1  # 0-based line in the originating triple file

    def __post_init__(self):
        if not (self.query and self.positive and self.negative):
            raise ValueError("triple fields must be non-empty")


@dataclass(frozen=True)
class MixConfig:
    mode: MixMode
    languages: tuple[str, ...]
    batch_size: int
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if len(set(self.languages)) != len(self.languages):
            raise ConfigError(f"duplicate language in {self.languages}")
        if self.mode is MixMode.ET and len(self.languages) != 1:
            raise ConfigError("ET uses exactly one language")
        if self.mode is not MixMode.ET and len(self.languages) < 2:
            raise ConfigError(f"{self.mode.value} needs at least two languages")


@dataclass
class MixSchedule:
    """Flattened (triple, batch ordinal) stream plus partial-batch flags."""

    entries: list[tuple[Triple, int]]
    batch_size: int
    partial_batches: tuple[int, ...] = ()

    def batches(self) -> list[list[Triple]]:
        out: list[list[Triple]] = []
        for triple, ordinal in self.entries:
            while ordinal >= len(out):
                out.append([])
            out[ordinal].append(triple)
        return out


def read_triples(path: str | Path, lang: str) -> list[Triple]:
    """Parse a 3-column TSV triple file for one language."""
    triples = []
    with Path(path).open("r", encoding="utf-8", newline="\n") as fh:
        for lineno, line in enumerate(fh):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise FormatError(f"{path}:{lineno + 1}: expected 3 tab-separated fields, got {len(fields)}")
            try:
                triples.append(Triple(fields[0], fields[1], fields[2], lang, source_line=lineno))
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno + 1}: {exc}") from exc
    return triples


def shuffle_aligned(streams: Sequence[list[Triple]], seed: int) -> list[list[Triple]]:
    """Apply one PCG64 permutation to every stream, preserving alignment."""
    if not streams:
        return []
    n = min(len(s) for s in streams)
    perm = np.random.Generator(np.random.PCG64(seed)).permutation(n)
    return [[stream[i] for i in perm] for stream in streams]


def mix_round_robin(streams: Sequence[Sequence[Triple]]) -> list[Triple]:
    """Interleave m aligned streams: t1L1, t1L2, ..., t1Lm, t2L1, ...

    Streams are truncated to the shortest with a warning; a mismatched
    query at any shared position is an alignment error.
    """
    if not streams:
        raise ConfigError("round-robin mixing needs at least one stream")
    n = min(len(s) for s in streams)
    if any(len(s) != n for s in streams):
        warnings.warn(
            f"streams have unequal lengths {[len(s) for s in streams]}; truncating to {n}",
            RuntimeWarning,
            stacklevel=2,
        )
    mixed: list[Triple] = []
    for i in range(n):
        query = streams[0][i].query
        for stream in streams:
            if stream[i].query != query:
                raise AlignmentError(
                    f"instance {i}: query mismatch between languages "
                    f"{streams[0][i].lang!r} and {stream[i].lang!r}"
                )
            mixed.append(stream[i])
    return mixed


def schedule_batches(stream: Sequence[Triple], config: MixConfig) -> MixSchedule:
    """Chunk a triple stream into the batch order its mode prescribes.

    ET and MTT-M chunk the stream as given (for MTT-M the caller passes
    the round-robin stream, so consecutive chunks mix languages). MTT-S
    regroups by language and rotates: one whole batch per language in
    configured order, repeating until all languages are exhausted.
    """
    if not stream:
        raise ConfigError("cannot schedule an empty triple stream")
    known = set(config.languages)
    for t in stream:
        if t.lang not in known:
            raise ConfigError(f"stream contains language {t.lang!r} outside configured {config.languages}")
    bs = config.batch_size
    entries: list[tuple[Triple, int]] = []
    partial: list[int] = []
    if config.mode in (MixMode.ET, MixMode.MTT_M):
        for pos, triple in enumerate(stream):
            entries.append((triple, pos // bs))
        if len(stream) % bs:
            partial.append(len(stream) // bs)
    else:
        queues = {lang: [t for t in stream if t.lang == lang] for lang in config.languages}
        cursors = {lang: 0 for lang in config.languages}
        ordinal = 0
        while any(cursors[lang] < len(queues[lang]) for lang in config.languages):
            for lang in config.languages:
                start = cursors[lang]
                chunk = queues[lang][start : start + bs]
                if not chunk:
                    continue
                cursors[lang] = start + len(chunk)
                entries.extend((t, ordinal) for t in chunk)
                if len(chunk) < bs:
                    partial.append(ordinal)
                ordinal += 1
    if partial:
        warnings.warn(
            f"{len(partial)} partial batch(es) of size < {bs}: ordinals {partial[:8]}",
            RuntimeWarning,
            stacklevel=2,
        )
    return MixSchedule(entries=entries, batch_size=bs, partial_batches=tuple(partial))


def write_schedule_manifest(schedule: MixSchedule, path: str | Path) -> None:
    """Audit manifest: one JSON line per scheduled triple."""
    position = 0
    current = -1
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for triple, ordinal in schedule.entries:
            if ordinal != current:
                current = ordinal
                position = 0
            record = {
                "batch": ordinal,
                "position": position,
                "lang": triple.lang,
                "triple_line": triple.source_line,
            }
            fh.write(json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n")
            position += 1


def emit_combined_file(paths: Sequence[str | Path], out_path: str | Path) -> int:
    """Paste per-language triple files side by side into one TSV.

    Line i of the output is the tab-joined concatenation of line i of
    every input, so a combined line has 3*m fields. Inputs must agree
    in line count; content is copied byte-exactly. Returns the number
    of lines written.
    """
    if not paths:
        raise ConfigError("need at least one triple file")
    per_file: list[list[bytes]] = []
    for p in paths:
        data = Path(p).read_bytes()
        lines = data.split(b"\n")
        if lines and lines[-1] == b"":
            lines.pop()
        for lineno, line in enumerate(lines):
            if line.count(b"\t") != 2:
                raise FormatError(f"{p}:{lineno + 1}: expected 3 tab-separated fields")
        per_file.append(lines)
    counts = [len(lines) for lines in per_file]
    if len(set(counts)) > 1:
        expected = counts[0]
        for p, c in zip(paths, counts):
            if c != expected:
                raise AlignmentError(f"{p} has {c} lines, expected {expected} (from {paths[0]})")
    out = b"\n".join(b"\t".join(group) for group in zip(*per_file))
    if per_file[0]:
        out += b"\n"
    Path(out_path).write_bytes(out)
    return counts[0]


def split_combined_file(path: str | Path, num_languages: int) -> list[list[bytes]]:
    """Invert :func:`emit_combined_file`: recover the per-language lines."""
    if num_languages < 1:
        raise ConfigError("num_languages must be >= 1")
    data = Path(path).read_bytes()
    lines = data.split(b"\n")
    if lines and lines[-1] == b"":
        lines.pop()
    per_lang: list[list[bytes]] = [[] for _ in range(num_languages)]
    for lineno, line in enumerate(lines):
        fields = line.split(b"\t")
        if len(fields) != 3 * num_languages:
            raise FormatError(
                f"{path}:{lineno + 1}: expected {3 * num_languages} fields, got {len(fields)}"
            )
        for i in range(num_languages):
            per_lang[i].append(b"\t".join(fields[3 * i : 3 * i + 3]))
    return per_lang
