"""Segmented-corpus ingestion and word stroke counts.

Corpus files are UTF-8 TSV with a header row. Required columns:
``surface``, ``sentence_id``, ``position``, ``experiment_id``; optional:
``word_freq``, ``first_dur``, ``gaze_dur``, ``total_dur``, ``surprisal``
(empty string = missing). Stroke tables are ``<char>\\t<count>`` lines.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass
from typing import BinaryIO, Iterator, Optional

logger = logging.getLogger(__name__)

REQUIRED_COLUMNS = ("surface", "sentence_id", "position", "experiment_id")
OPTIONAL_COLUMNS = ("word_freq", "first_dur", "gaze_dur", "total_dur", "surprisal")
CORPUS_COLUMNS = REQUIRED_COLUMNS + OPTIONAL_COLUMNS

# TSV column name -> Token attribute for the optional numeric fields
_OPTIONAL_FIELD_MAP = {
    "word_freq": "word_freq",
    "first_dur": "first_duration",
    "gaze_dur": "gaze_duration",
    "total_dur": "total_duration",
    "surprisal": "surprisal",
}


class CorpusError(ValueError):
    """Base error for corpus and stroke-table ingestion."""


class EmptyTable(CorpusError):
    """A stroke table with no well-formed entries."""


class UnknownCharacter(CorpusError):
    """A character absent from the stroke table."""

    def __init__(self, char: str):
        super().__init__(f"character {char!r} not in stroke table")
        self.char = char


class MissingColumn(CorpusError):
    """A required corpus column is absent from the header."""


class NonConsecutivePositions(CorpusError):
    """Token positions within a sentence are not 1, 2, 3, ..."""

    def __init__(self, sentence_id: str):
        super().__init__(f"positions in sentence {sentence_id!r} are not consecutive from 1")
        self.sentence_id = sentence_id


class BadNumeric(CorpusError):
    """A numeric field failed to parse or violates its sign constraint."""


class NonPositive(CorpusError):
    """log_transform requires a strictly positive argument."""


@dataclass(frozen=True)
class StrokeTable:
    """Map from single character to its stroke count (>= 1)."""

    counts: dict[str, int]

    def get(self, char: str) -> Optional[int]:
        return self.counts.get(char)

    def __contains__(self, char: str) -> bool:
        return char in self.counts

    def __getitem__(self, char: str) -> int:
        return self.counts[char]

    def __len__(self) -> int:
        return len(self.counts)


@dataclass(frozen=True)
class Token:
    """One corpus token with its reading measures.

    Durations are milliseconds and strictly positive when present;
    surprisal is in bits (non-negative). Word frequency is taken
    as-given from the corpus file; no internal frequency counting.
    """

    surface: str
    sentence_id: str
    position: int
    experiment_id: str
    word_freq: Optional[float] = None
    first_duration: Optional[float] = None
    gaze_duration: Optional[float] = None
    total_duration: Optional[float] = None
    surprisal: Optional[float] = None


@dataclass(frozen=True)
class Corpus:
    """Ordered sentences of tokens, immutable after load."""

    sentences: tuple[tuple[str, tuple[Token, ...]], ...]

    @property
    def token_count(self) -> int:
        return sum(len(toks) for _, toks in self.sentences)

    def iter_tokens(self) -> Iterator[Token]:
        for _, toks in self.sentences:
            yield from toks


def parse_stroke_table(source: BinaryIO | bytes) -> StrokeTable:
    """Parse ``<char>\\t<count>`` lines into a :class:`StrokeTable`.

    Well-formed lines have exactly two tab-separated fields, a single
    Unicode scalar as the character, and an integer count >= 1.
    Malformed lines are skipped and reported via the module logger.

    Raises:
        EmptyTable: no well-formed lines at all.
    """
    if isinstance(source, bytes):
        source = io.BytesIO(source)
    text = io.TextIOWrapper(source, encoding="utf-8", newline=None)
    counts: dict[str, int] = {}
    malformed = 0
    for line in text:
        line = line.rstrip("\n")
        if line == "":
            continue
        parts = line.split("\t")
        if len(parts) != 2 or len(parts[0]) != 1:
            malformed += 1
            continue
        try:
            n = int(parts[1])
        except ValueError:
            malformed += 1
            continue
        if n < 1:
            malformed += 1
            continue
        counts.setdefault(parts[0], n)
    if malformed:
        logger.warning("stroke table: skipped %d malformed lines", malformed)
    if not counts:
        raise EmptyTable("stroke table has no well-formed entries")
    return StrokeTable(counts)


def load_stroke_table(path: str) -> StrokeTable:
    with open(path, "rb") as fh:
        return parse_stroke_table(fh)


def word_stroke_count(word: str, table: StrokeTable) -> int:
    """Sum of the stroke counts of the word's characters.

    Raises:
        UnknownCharacter: any character absent from the table. The
            caller decides whether to drop the token or abort.
    """
    if not word:
        raise CorpusError("word must be nonempty")
    total = 0
    for char in word:
        n = table.get(char)
        if n is None:
            raise UnknownCharacter(char)
        total += n
    return total


def _parse_float(raw: str, column: str, line_no: int) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise BadNumeric(f"line {line_no}: {column}={raw!r} is not numeric") from None
    if not math.isfinite(value):
        raise BadNumeric(f"line {line_no}: {column}={raw!r} is not finite")
    return value


def parse_corpus(
    source: BinaryIO | bytes, column_map: Optional[dict[str, str]] = None
) -> Corpus:
    """Parse a corpus TSV stream into a :class:`Corpus`.

    ``column_map`` renames canonical column names to the file's actual
    header names (canonical -> actual); unmapped names are used as-is.
    Tokens are grouped by ``sentence_id`` preserving file order, and
    positions within each sentence must be consecutive from 1.

    Raises:
        MissingColumn: a required column is absent.
        BadNumeric: a numeric cell fails to parse or violates its sign
            constraint (frequencies and durations > 0, surprisal >= 0).
        NonConsecutivePositions: a sentence's positions have gaps.
    """
    if isinstance(source, bytes):
        source = io.BytesIO(source)
    text = io.TextIOWrapper(source, encoding="utf-8", newline="")
    reader = csv.reader(text, delimiter="\t")
    try:
        header = next(reader)
    except StopIteration:
        raise MissingColumn("empty corpus file") from None

    column_map = column_map or {}
    index: dict[str, int] = {}
    for canonical in CORPUS_COLUMNS:
        actual = column_map.get(canonical, canonical)
        if actual in header:
            index[canonical] = header.index(actual)
    for required in REQUIRED_COLUMNS:
        if required not in index:
            raise MissingColumn(f"corpus file lacks required column {required!r}")

    by_sentence: dict[str, list[Token]] = {}
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue

        def cell(canonical: str) -> str:
            i = index.get(canonical)
            return row[i] if i is not None and i < len(row) else ""

        surface = cell("surface")
        sentence_id = cell("sentence_id")
        experiment_id = cell("experiment_id")
        if surface == "" or sentence_id == "" or experiment_id == "":
            raise BadNumeric(f"line {line_no}: empty required field")
        raw_pos = cell("position")
        try:
            position = int(raw_pos)
        except ValueError:
            raise BadNumeric(f"line {line_no}: position={raw_pos!r} is not an integer") from None
        if position < 1:
            raise BadNumeric(f"line {line_no}: position must be >= 1, got {position}")

        values: dict[str, Optional[float]] = {}
        for column, field in _OPTIONAL_FIELD_MAP.items():
            raw = cell(column)
            if raw == "":
                values[field] = None
                continue
            value = _parse_float(raw, column, line_no)
            if column == "surprisal":
                if value < 0:
                    raise BadNumeric(f"line {line_no}: surprisal must be >= 0, got {value}")
            elif value <= 0:
                raise BadNumeric(f"line {line_no}: {column} must be > 0, got {value}")
            values[field] = value

        token = Token(
            surface=surface,
            sentence_id=sentence_id,
            position=position,
            experiment_id=experiment_id,
            **values,
        )
        by_sentence.setdefault(sentence_id, []).append(token)

    sentences = []
    for sentence_id, tokens in by_sentence.items():
        if [t.position for t in tokens] != list(range(1, len(tokens) + 1)):
            raise NonConsecutivePositions(sentence_id)
        sentences.append((sentence_id, tuple(tokens)))
    return Corpus(sentences=tuple(sentences))


def load_corpus(path: str, column_map: Optional[dict[str, str]] = None) -> Corpus:
    with open(path, "rb") as fh:
        return parse_corpus(fh, column_map=column_map)


def serialize_corpus(corpus: Corpus) -> str:
    """Render a corpus back to canonical TSV (round-trips through parse)."""
    out = io.StringIO()
    writer = csv.writer(out, delimiter="\t", lineterminator="\n")
    writer.writerow(CORPUS_COLUMNS)
    for _, tokens in corpus.sentences:
        for t in tokens:
            writer.writerow(
                [
                    t.surface,
                    t.sentence_id,
                    str(t.position),
                    t.experiment_id,
                ]
                + [
                    "" if getattr(t, field) is None else repr(getattr(t, field))
                    for field in _OPTIONAL_FIELD_MAP.values()
                ]
            )
    return out.getvalue()


def log_transform(x: float) -> float:
    """Natural logarithm of a strictly positive real.

    Raises:
        NonPositive: ``x <= 0`` or non-finite.
    """
    if not math.isfinite(x) or x <= 0:
        raise NonPositive(f"log_transform requires x > 0, got {x}")
    return math.log(x)
