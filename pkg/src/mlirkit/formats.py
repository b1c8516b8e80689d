"""Readers and writers for the on-disk formats: JSON-lines corpora and
topics, TREC runs and qrels, and deterministic JSON/CSV output."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Mapping

from .errors import FormatError
from .evaluation import Run
from .text import Document, Query


def _jsonl_records(path: str | Path):
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from exc


def read_corpus(path: str | Path) -> list[Document]:
    """Corpus JSONL: one object per document with id, lang, text, optional title."""
    docs = []
    for lineno, rec in _jsonl_records(path):
        try:
            docs.append(
                Document(id=rec["id"], lang=rec["lang"], text=rec["text"], title=rec.get("title"))
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{path}: line {lineno}: bad document record ({exc})") from exc
    return docs


def read_topics(path: str | Path) -> list[Query]:
    """Topic JSONL: one object per query with id, lang, title, optional description."""
    topics = []
    for lineno, rec in _jsonl_records(path):
        try:
            topics.append(
                Query(id=rec["id"], lang=rec["lang"], title=rec["title"],
                      description=rec.get("description"))
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{path}: line {lineno}: bad topic record ({exc})") from exc
    return topics


def read_doc_langs(path: str | Path) -> dict[str, str]:
    """Doc-language map from corpus JSONL (or any JSONL with id and lang)."""
    langs: dict[str, str] = {}
    for lineno, rec in _jsonl_records(path):
        try:
            langs[rec["id"]] = rec["lang"]
        except (KeyError, TypeError) as exc:
            raise FormatError(f"{path}: line {lineno}: record needs id and lang") from exc
    return langs


def write_run(run: Run, path: str | Path) -> None:
    """TREC 6-column run file: qid Q0 docid rank score tag."""
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for qid in sorted(run.rankings):
            for rank, (doc_id, score) in enumerate(run.rankings[qid], start=1):
                fh.write(f"{qid} Q0 {doc_id} {rank} {score:.6f} {run.tag}\n")


def read_run(path: str | Path) -> Run:
    """Parse a TREC run file; within a query, file order breaks score ties."""
    rankings: dict[str, list[tuple[str, float]]] = {}
    tag = "run"
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 6:
                raise FormatError(f"{path}: line {lineno}: expected 6 columns, got {len(parts)}")
            qid, _, doc_id, _, score, tag = parts
            try:
                rankings.setdefault(qid, []).append((doc_id, float(score)))
            except ValueError as exc:
                raise FormatError(f"{path}: line {lineno}: bad score {score!r}") from exc
    for ranking in rankings.values():
        ranking.sort(key=lambda item: -item[1])  # stable: emitted order wins ties
    return Run(tag=tag, rankings=rankings)


def read_qrels(path: str | Path) -> dict[str, dict[str, int]]:
    """TREC 4-column qrels: qid 0 docid rel."""
    qrels: dict[str, dict[str, int]] = {}
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise FormatError(f"{path}: line {lineno}: expected 4 columns, got {len(parts)}")
            qid, _, doc_id, grade = parts
            try:
                qrels.setdefault(qid, {})[doc_id] = int(grade)
            except ValueError as exc:
                raise FormatError(f"{path}: line {lineno}: bad grade {grade!r}") from exc
    return qrels


def write_qrels(qrels: Mapping[str, Mapping[str, int]], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for qid in sorted(qrels):
            for doc_id in sorted(qrels[qid]):
                fh.write(f"{qid} 0 {doc_id} {qrels[qid][doc_id]}\n")


def write_json(obj, path: str | Path) -> None:
    """Deterministic JSON: sorted keys, fixed separators, trailing newline."""
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_json(path: str | Path):
    with Path(path).open("r", encoding="utf-8") as fh:
        return json.load(fh)


def write_csv(header: Iterable[str], rows: Iterable[Iterable], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(header))
        for row in rows:
            writer.writerow(list(row))
