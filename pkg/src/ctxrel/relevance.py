"""Context windows and the four contextual semantic relevance metrics.

For each target word we look at a window of up to three preceding
in-sentence words (offsets -3, -2, -1) and one following word (+1). The
metrics computed over that window:

* ``cosine_context`` - cosine between the sum of the preceding vectors
  and the target vector.
* ``dynamic_rel`` - unweighted sum of the five pair similarities among
  the target and its preceding words: (T,-1), (T,-2), (T,-3), (-2,-1),
  (-3,-2).
* ``attn_unweighted`` - the five pairs plus (T,+1), all with weight 1.
* ``attn_weighted`` - the same six pairs, each scaled by a proximity
  weight that decays with distance from the target.

Windows never cross sentence boundaries. Out-of-vocabulary context
words are dropped pair-wise (a zero fill would poison cosine and
fabricate relevance), and weights are keyed to true positional offsets,
so a -2 neighbor keeps its -2 weight even if -3 is missing. Truncated
windows are not rescaled to the full-window weight mass: the metrics
are plain sums over the available pairs.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, fields, replace
from typing import BinaryIO, Literal, Optional, Sequence

import numpy as np

from .corpus import Corpus, StrokeTable, Token, UnknownCharacter, word_stroke_count
from .embeddings import EmbeddingTable, ZeroVariance, ZeroVector, cosine, pearson

logger = logging.getLogger(__name__)

Method = Literal["cosine", "correlation"]
BoundaryPolicy = Literal["compute_available", "drop_initial"]

# Window pairs: ("T", k) pairs the target with its offset-k neighbor,
# (-2, -1) and (-3, -2) pair preceding neighbors with each other.
PRECEDING_PAIRS = (("T", -1), ("T", -2), ("T", -3), (-2, -1), (-3, -2))
FOLLOWING_PAIR = ("T", 1)
ALL_PAIRS = PRECEDING_PAIRS + (FOLLOWING_PAIR,)


class TargetOOV(ValueError):
    """The target word has no embedding vector; metrics are missing."""


class BadWeight(ValueError):
    """A window weight outside (0, 1]."""


@dataclass(frozen=True)
class WeightTable:
    """Per-pair weights, each in (0, 1], decaying with distance."""

    w_target_prev1: float = 1.0
    w_target_prev2: float = 2.0 / 3.0
    w_target_prev3: float = 1.0 / 2.0
    w_pair_prev21: float = 1.0 / 2.0
    w_pair_prev32: float = 1.0 / 3.0
    w_target_next: float = 1.0 / 3.0

    def __post_init__(self):
        for f in fields(self):
            w = getattr(self, f.name)
            if not (0.0 < w <= 1.0):
                raise BadWeight(f"{f.name}={w} outside (0, 1]")

    def for_pair(self, pair: tuple) -> float:
        return {
            ("T", -1): self.w_target_prev1,
            ("T", -2): self.w_target_prev2,
            ("T", -3): self.w_target_prev3,
            (-2, -1): self.w_pair_prev21,
            (-3, -2): self.w_pair_prev32,
            ("T", 1): self.w_target_next,
        }[pair]


#: Default distance-decay weights for the weighted attention metric.
PROXIMITY_WEIGHTS = WeightTable()

#: All-ones weights; turns the weighted metric into the unweighted one.
UNIFORM_WEIGHTS = WeightTable(1.0, 1.0, 1.0, 1.0, 1.0, 1.0)


def parse_weight_file(source: BinaryIO | bytes | str) -> WeightTable:
    """Parse ``key=value`` lines overriding :class:`WeightTable` fields.

    Unknown keys are an error; omitted keys keep their defaults.
    """
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        text = source.read().decode("utf-8")
    known = {f.name for f in fields(WeightTable)}
    overrides: dict[str, float] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or key not in known:
            raise BadWeight(f"weight file line {line_no}: unknown entry {line!r}")
        try:
            overrides[key] = float(value.strip())
        except ValueError:
            raise BadWeight(f"weight file line {line_no}: bad value {value!r}") from None
    return replace(PROXIMITY_WEIGHTS, **overrides)


@dataclass(frozen=True)
class WindowContext:
    """A target token with its in-sentence neighbors and their vectors.

    ``preceding`` holds (offset, token, vector) triples ordered -3, -2,
    -1; ``following`` is the (+1, token, vector) triple or None. Only
    in-vocabulary neighbors appear.
    """

    target_token: Token
    target_vector: np.ndarray
    preceding: tuple[tuple[int, Token, np.ndarray], ...]
    following: Optional[tuple[int, Token, np.ndarray]]

    def vector_at(self, offset: int) -> Optional[np.ndarray]:
        """Vector at a signed offset (0 = target), or None if absent."""
        if offset == 0:
            return self.target_vector
        if offset == 1:
            return self.following[2] if self.following is not None else None
        for off, _, vec in self.preceding:
            if off == offset:
                return vec
        return None


def build_window(
    sentence: Sequence[Token], target_index: int, table: EmbeddingTable
) -> WindowContext:
    """Build the context window for ``sentence[target_index - 1]``.

    ``target_index`` is 1-based. The window is truncated at sentence
    boundaries and out-of-vocabulary neighbors are omitted.

    Raises:
        TargetOOV: the target itself has no vector.
    """
    if not 1 <= target_index <= len(sentence):
        raise IndexError(f"target_index {target_index} outside sentence of {len(sentence)}")
    target = sentence[target_index - 1]
    target_vec = table.lookup(target.surface)
    if target_vec is None:
        raise TargetOOV(f"no vector for target {target.surface!r}")

    preceding = []
    for offset in (-3, -2, -1):
        pos = target_index + offset
        if pos < 1:
            continue
        token = sentence[pos - 1]
        vec = table.lookup(token.surface)
        if vec is not None:
            preceding.append((offset, token, vec))

    following = None
    if target_index + 1 <= len(sentence):
        token = sentence[target_index]
        vec = table.lookup(token.surface)
        if vec is not None:
            following = (1, token, vec)

    return WindowContext(
        target_token=target,
        target_vector=target_vec,
        preceding=tuple(preceding),
        following=following,
    )


def sem_rev(u: np.ndarray, v: np.ndarray, method: Method = "cosine") -> float:
    """Pairwise semantic relevance of two word vectors."""
    if method == "cosine":
        return cosine(u, v)
    if method == "correlation":
        return pearson(u, v)
    raise ValueError(f"unknown method {method!r}")


def _pair_vectors(window: WindowContext, pair: tuple) -> Optional[tuple[np.ndarray, np.ndarray]]:
    a, b = pair
    u = window.vector_at(0) if a == "T" else window.vector_at(a)
    v = window.vector_at(b)
    if u is None or v is None:
        return None
    return u, v


def available_pairs(
    window: WindowContext, include_following: bool = True
) -> list[tuple[tuple, np.ndarray, np.ndarray]]:
    """The window's pairs whose two vectors are both present."""
    pairs = ALL_PAIRS if include_following else PRECEDING_PAIRS
    out = []
    for pair in pairs:
        vecs = _pair_vectors(window, pair)
        if vecs is not None:
            out.append((pair, vecs[0], vecs[1]))
    return out


def metric_cosine_context(window: WindowContext) -> Optional[float]:
    """Cosine between the sum of the preceding vectors and the target.

    Absent (None) when there are no preceding vectors or the sum
    degenerates to a zero vector.
    """
    if not window.preceding:
        return None
    context_sum = np.sum([vec for _, _, vec in window.preceding], axis=0)
    try:
        return cosine(context_sum, window.target_vector)
    except ZeroVector:
        logger.debug(
            "zero context sum at %s:%d",
            window.target_token.sentence_id,
            window.target_token.position,
        )
        return None


def _pair_sum(
    window: WindowContext,
    method: Method,
    weights: Optional[WeightTable],
    include_following: bool,
) -> Optional[float]:
    total = 0.0
    used = 0
    for pair, u, v in available_pairs(window, include_following=include_following):
        try:
            value = sem_rev(u, v, method)
        except (ZeroVector, ZeroVariance):
            logger.debug("degenerate pair %s at %s:%d", pair,
                         window.target_token.sentence_id, window.target_token.position)
            continue
        total += value if weights is None else weights.for_pair(pair) * value
        used += 1
    return total if used else None


def metric_dynamic(window: WindowContext, method: Method = "cosine") -> Optional[float]:
    """Sum of the five preceding-window pair similarities.

    Pairs with a missing member are skipped; absent when no pair is
    available.
    """
    return _pair_sum(window, method, weights=None, include_following=False)


def metric_attention(
    window: WindowContext,
    method: Method = "cosine",
    weights: WeightTable = UNIFORM_WEIGHTS,
) -> Optional[float]:
    """Weighted sum of the six window pair similarities.

    With :data:`UNIFORM_WEIGHTS` this is the unweighted attention
    metric; with :data:`PROXIMITY_WEIGHTS` the weighted one. Absent when
    no pair is available.
    """
    return _pair_sum(window, method, weights=weights, include_following=True)


@dataclass(frozen=True)
class MetricRecord:
    """Per-token row joining metrics, controls, and log responses.

    A metric field is absent (None) exactly when its computability
    precondition failed: OOV target, empty context, or the drop-initial
    boundary policy.
    """

    sentence_id: str
    position: int
    surface: str
    experiment_id: str
    stroke_count: Optional[int] = None
    log_freq: Optional[float] = None
    cosine_context: Optional[float] = None
    dynamic_rel: Optional[float] = None
    attn_unweighted: Optional[float] = None
    attn_weighted: Optional[float] = None
    surprisal: Optional[float] = None
    log_first: Optional[float] = None
    log_gaze: Optional[float] = None
    log_total: Optional[float] = None


METRIC_CSV_COLUMNS = (
    "sentence_id",
    "position",
    "surface",
    "experiment_id",
    "stroke_count",
    "log_freq",
    "cosine_context",
    "dynamic_rel",
    "attn_unweighted",
    "attn_weighted",
    "surprisal",
    "log_first",
    "log_gaze",
    "log_total",
)


@dataclass
class AnnotateDiagnostics:
    """Aggregated counts from one annotation pass."""

    tokens: int = 0
    oov_targets: int = 0
    unknown_char_tokens: int = 0


def annotate_corpus(
    corpus: Corpus,
    table: EmbeddingTable,
    stroke_table: Optional[StrokeTable] = None,
    method: Method = "cosine",
    weights: WeightTable = PROXIMITY_WEIGHTS,
    boundary_policy: BoundaryPolicy = "compute_available",
) -> tuple[list[MetricRecord], AnnotateDiagnostics]:
    """Compute one :class:`MetricRecord` per token, in corpus order.

    Tokens whose surface contains a character missing from the stroke
    table get a missing stroke count but keep their metrics; OOV targets
    keep their controls but lose all metrics. With
    ``boundary_policy="drop_initial"``, sentence-initial tokens get no
    metrics at all. Output is deterministic for fixed inputs.
    """
    diagnostics = AnnotateDiagnostics()
    records: list[MetricRecord] = []
    for _, sentence in corpus.sentences:
        for token in sentence:
            diagnostics.tokens += 1
            stroke: Optional[int] = None
            if stroke_table is not None:
                try:
                    stroke = word_stroke_count(token.surface, stroke_table)
                except UnknownCharacter:
                    diagnostics.unknown_char_tokens += 1

            log_freq = math.log(token.word_freq) if token.word_freq else None
            metrics: dict[str, Optional[float]] = {
                "cosine_context": None,
                "dynamic_rel": None,
                "attn_unweighted": None,
                "attn_weighted": None,
            }
            if not (boundary_policy == "drop_initial" and token.position == 1):
                try:
                    window = build_window(sentence, token.position, table)
                except TargetOOV:
                    diagnostics.oov_targets += 1
                else:
                    metrics["cosine_context"] = metric_cosine_context(window)
                    metrics["dynamic_rel"] = metric_dynamic(window, method)
                    metrics["attn_unweighted"] = metric_attention(window, method, UNIFORM_WEIGHTS)
                    metrics["attn_weighted"] = metric_attention(window, method, weights)

            records.append(
                MetricRecord(
                    sentence_id=token.sentence_id,
                    position=token.position,
                    surface=token.surface,
                    experiment_id=token.experiment_id,
                    stroke_count=stroke,
                    log_freq=log_freq,
                    surprisal=token.surprisal,
                    log_first=math.log(token.first_duration) if token.first_duration else None,
                    log_gaze=math.log(token.gaze_duration) if token.gaze_duration else None,
                    log_total=math.log(token.total_duration) if token.total_duration else None,
                    **metrics,
                )
            )
    return records, diagnostics


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_metric_records(records: Sequence[MetricRecord]) -> str:
    """Render records as CSV with the canonical column order."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(METRIC_CSV_COLUMNS)
    for r in records:
        writer.writerow([_format_cell(getattr(r, col)) for col in METRIC_CSV_COLUMNS])
    return out.getvalue()


def read_metric_records(source: BinaryIO | bytes | str) -> list[MetricRecord]:
    """Parse a metrics CSV produced by :func:`write_metric_records`."""
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        text = source.read().decode("utf-8")
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or set(METRIC_CSV_COLUMNS) - set(header):
        missing = sorted(set(METRIC_CSV_COLUMNS) - set(header or []))
        raise ValueError(f"metrics CSV lacks columns: {missing}")
    idx = {col: header.index(col) for col in METRIC_CSV_COLUMNS}
    records = []
    for row in reader:
        if not row:
            continue

        def cell(col: str) -> str:
            return row[idx[col]]

        records.append(
            MetricRecord(
                sentence_id=cell("sentence_id"),
                position=int(cell("position")),
                surface=cell("surface"),
                experiment_id=cell("experiment_id"),
                stroke_count=int(cell("stroke_count")) if cell("stroke_count") else None,
                **{
                    col: float(cell(col)) if cell(col) else None
                    for col in METRIC_CSV_COLUMNS[5:]
                },
            )
        )
    return records
