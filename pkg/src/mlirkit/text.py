"""Text analysis, passage windowing, and query stop-structure removal."""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path

from . import porter
from .errors import ConfigError, EmptyQueryError

_TOKEN_RE = re.compile(r"\w+", re.UNICODE)
_WS_RE = re.compile(r"\S+")


@dataclass(frozen=True)
class Document:
    """One corpus unit: unique id, language code, optional title, body text."""

    id: str
    lang: str
    text: str
    title: str | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("document id must be non-empty")


@dataclass(frozen=True)
class Query:
    """A topic: id, language, title, optional description."""

    id: str
    lang: str
    title: str
    description: str | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("query id must be non-empty")

    def text(self, use_description: bool = False) -> str:
        if use_description and self.description:
            return f"{self.title} {self.description}"
        return self.title


@dataclass(frozen=True)
class Passage:
    """A token window over one document.

    ``char_span`` is the (start, end) byte range in the UTF-8 encoding of
    the source text, from the first byte of the window's first token to
    the end of its last token.
    """

    doc_id: str
    index: int
    tokens: tuple[str, ...]
    char_span: tuple[int, int]


@dataclass(frozen=True)
class AnalyzerConfig:
    """Deterministic analyzer settings.

    Tokens are maximal runs of word characters in the raw text; each
    token is then NFKC-normalized and lowercased (when enabled),
    re-split in case normalization introduced separators, filtered
    against the stopword list, and finally Porter-stemmed when the text
    language is in ``stem_languages``. Stopwords are matched on the
    normalized, unstemmed form.
    """

    lowercase: bool = True
    nfkc: bool = True
    stem_languages: frozenset[str] = frozenset({"en"})
    stopwords: frozenset[str] | None = None

    def to_dict(self) -> dict:
        return {
            "lowercase": self.lowercase,
            "nfkc": self.nfkc,
            "stem_languages": sorted(self.stem_languages),
            "stopwords": sorted(self.stopwords) if self.stopwords is not None else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AnalyzerConfig":
        return cls(
            lowercase=d.get("lowercase", True),
            nfkc=d.get("nfkc", True),
            stem_languages=frozenset(d.get("stem_languages", ["en"])),
            stopwords=frozenset(d["stopwords"]) if d.get("stopwords") is not None else None,
        )


DEFAULT_ANALYZER = AnalyzerConfig()


@lru_cache(maxsize=65536)
def _normalize_token(raw: str, lowercase: bool, nfkc: bool) -> tuple[str, ...]:
    s = unicodedata.normalize("NFKC", raw) if nfkc else raw
    if lowercase:
        s = s.lower()
    # NFKC may expand a character into separator-bearing text ("½" -> "1⁄2")
    return tuple(_TOKEN_RE.findall(s))


@lru_cache(maxsize=65536)
def _stem_token(token: str) -> str:
    return porter.stem(token)


def analyze(text: str, lang: str, config: AnalyzerConfig = DEFAULT_ANALYZER) -> list[str]:
    """Turn raw text into the analyzed token sequence for `lang`."""
    return [tok for tok, _ in analyze_with_spans(text, lang, config)]


def analyze_with_spans(
    text: str, lang: str, config: AnalyzerConfig = DEFAULT_ANALYZER
) -> list[tuple[str, tuple[int, int]]]:
    """Like :func:`analyze`, but pairs each token with its byte span.

    When normalization splits one raw token into several, the pieces
    share the raw token's span.
    """
    do_stem = lang in config.stem_languages
    out: list[tuple[str, tuple[int, int]]] = []
    byte_pos = 0
    char_pos = 0
    for m in _TOKEN_RE.finditer(text):
        byte_pos += len(text[char_pos : m.start()].encode("utf-8"))
        start_b = byte_pos
        byte_pos += len(m.group().encode("utf-8"))
        char_pos = m.end()
        span = (start_b, byte_pos)
        for piece in _normalize_token(m.group(), config.lowercase, config.nfkc):
            if config.stopwords is not None and piece in config.stopwords:
                continue
            if do_stem:
                piece = _stem_token(piece)
            out.append((piece, span))
    return out


def split_passages(
    doc: Document,
    window: int = 180,
    stride: int = 90,
    config: AnalyzerConfig = DEFAULT_ANALYZER,
) -> list[Passage]:
    """Split a document into overlapping token windows.

    Windows start at 0, stride, 2*stride, ... and generation stops with
    the first window whose end reaches the final token, so every token
    is covered and no window contributes zero new tokens.
    """
    if window < 1 or stride < 1:
        raise ConfigError(f"window and stride must be >= 1, got ({window}, {stride})")
    if stride > window:
        raise ConfigError(f"stride {stride} exceeds window {window}")
    toks = analyze_with_spans(doc.text, doc.lang, config)
    n = len(toks)
    if n == 0:
        return []
    passages = []
    start = 0
    index = 0
    while True:
        end = min(start + window, n)
        passages.append(
            Passage(
                doc_id=doc.id,
                index=index,
                tokens=tuple(t for t, _ in toks[start:end]),
                char_span=(toks[start][1][0], toks[end - 1][1][1]),
            )
        )
        if end >= n:
            return passages
        start += stride
        index += 1


def load_stop_structure(path: str | Path) -> tuple[list[tuple[str, ...]], set[str]]:
    """Read a stop-structure file into (phrases, stop words).

    One entry per line; multi-word lines are phrases, single words are
    stop words. '#' starts a comment. Entries are matched
    case-insensitively against whole words.
    """
    phrases: list[tuple[str, ...]] = []
    words: set[str] = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        entry = line.split("#", 1)[0].strip()
        if not entry:
            continue
        parts = tuple(w.casefold() for w in entry.split())
        if len(parts) == 1:
            words.add(parts[0])
        else:
            phrases.append(parts)
    return phrases, words


def default_stop_structure() -> tuple[list[tuple[str, ...]], set[str]]:
    """The stop-structure list shipped with the package."""
    return load_stop_structure(Path(__file__).parent / "data" / "stopstructure.txt")


def _match_key(word: str) -> str:
    """Word form used for stop matching: edge punctuation stripped, casefolded."""
    start, end = 0, len(word)
    while start < end and unicodedata.category(word[start])[0] in "PS":
        start += 1
    while end > start and unicodedata.category(word[end - 1])[0] in "PS":
        end -= 1
    return word[start:end].casefold()


def _strip_pass(raw: list[str], phrases: list[tuple[str, ...]], words: set[str]) -> list[str]:
    keys = [_match_key(w) for w in raw]
    by_len = sorted(phrases, key=len, reverse=True)
    kept: list[str] = []
    i = 0
    while i < len(raw):
        matched = None
        for phrase in by_len:
            j = i + len(phrase)
            if j <= len(raw) and tuple(keys[i:j]) == phrase:
                matched = phrase
                break
        if matched:
            i += len(matched)
            continue
        if keys[i] not in words and keys[i]:
            kept.append(raw[i])
        i += 1
    return kept


def _strip_text(text: str, phrases: list[tuple[str, ...]], words: set[str]) -> str:
    # Iterate to a fixpoint: word removal can create new phrase
    # adjacencies, and the operation must be idempotent. Each pass
    # shortens the word list, so this terminates.
    tokens = _WS_RE.findall(text)
    while True:
        stripped = _strip_pass(tokens, phrases, words)
        if stripped == tokens:
            return " ".join(stripped)
        tokens = stripped


def strip_stop_structure(
    query: Query,
    stop_phrases: list[tuple[str, ...]],
    stop_words: set[str],
) -> Query:
    """Remove stop phrases (longest match first), then stop words.

    Both title and description are processed; the original query is not
    modified. Raises :class:`EmptyQueryError` when nothing survives.
    """
    title = _strip_text(query.title, stop_phrases, stop_words)
    description = (
        _strip_text(query.description, stop_phrases, stop_words)
        if query.description is not None
        else None
    )
    if not title and not description:
        raise EmptyQueryError(f"query {query.id} is empty after stop-structure removal")
    return replace(query, title=title, description=description)
