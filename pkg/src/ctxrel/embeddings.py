"""Word-embedding table loading and vector-similarity primitives.

The embedding text format is the common word2vec-style one: an optional
first line ``<count> <dim>`` followed by one line per token,
``<token> <f1> <f2> ... <fd>``, space-separated, UTF-8, LF or CRLF.
Real million-line files contain stray rows, so malformed lines are
skipped and counted rather than aborting the load.
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass
from typing import BinaryIO, Iterator, Optional

import numpy as np

logger = logging.getLogger(__name__)


class EmbeddingError(ValueError):
    """Base error for embedding parsing and vector operations."""


class EmptyInput(EmbeddingError):
    """The source contained no well-formed embedding rows."""


class DimensionUndeterminable(EmbeddingError):
    """No header and the first row does not fix a vector dimension."""


class DimMismatch(EmbeddingError):
    """Two vectors of different lengths were combined."""


class ZeroVector(EmbeddingError):
    """Cosine similarity is undefined for a zero-norm vector."""


class ZeroVariance(EmbeddingError):
    """Correlation is undefined for a constant coordinate sequence."""


@dataclass(frozen=True)
class LoadDiagnostics:
    """Counters accumulated while parsing an embedding file."""

    lines_read: int
    malformed_lines: int
    duplicate_tokens: int
    declared_count: Optional[int] = None


class EmbeddingTable:
    """Immutable token -> vector map with a fixed dimension.

    Vectors are stored as read-only float64 arrays regardless of the
    file's printed precision; downstream penalized solvers need stable
    arithmetic. Lookup is by exact string equality (the embedding file
    is authoritative and pre-normalized, so no Unicode normalization is
    applied). Safe for shared concurrent reads after construction.
    """

    def __init__(self, dim: int, entries: dict[str, np.ndarray]):
        if dim <= 0:
            raise EmbeddingError(f"vector dimension must be positive, got {dim}")
        for token, vec in entries.items():
            if vec.shape != (dim,):
                raise DimMismatch(
                    f"vector for {token!r} has length {vec.shape[0]}, expected {dim}"
                )
        self._dim = dim
        self._entries = entries

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def count(self) -> int:
        return len(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, token: str) -> bool:
        return token in self._entries

    def lookup(self, token: str) -> Optional[np.ndarray]:
        """Return the stored vector, or None for out-of-vocabulary tokens."""
        return self._entries.get(token)

    def tokens(self) -> Iterator[str]:
        return iter(self._entries)


def _parse_row(line: str) -> Optional[tuple[str, np.ndarray]]:
    """Split one data line into (token, vector); None if malformed."""
    parts = line.split(" ")
    if len(parts) < 2 or parts[0] == "":
        return None
    try:
        vec = np.array([float(p) for p in parts[1:]], dtype=np.float64)
    except ValueError:
        return None
    if not np.all(np.isfinite(vec)):
        return None
    return parts[0], vec


def parse_embeddings(
    source: BinaryIO | bytes, expect_header: bool = False
) -> tuple[EmbeddingTable, LoadDiagnostics]:
    """Parse a word2vec-style text stream into an :class:`EmbeddingTable`.

    The table dimension comes from the header when ``expect_header`` is
    set, otherwise from the first row. Rows whose float count mismatches
    that dimension are skipped and counted as malformed; duplicate
    tokens keep their first occurrence. Parsing is deterministic:
    identical byte streams yield identical tables and diagnostics.

    Raises:
        DimensionUndeterminable: the header (or, without one, the first
            row) does not fix the vector dimension.
        EmptyInput: no well-formed rows at all.
    """
    if isinstance(source, bytes):
        source = io.BytesIO(source)
    text = io.TextIOWrapper(source, encoding="utf-8", newline=None)

    declared_count: Optional[int] = None
    dim: Optional[int] = None
    lines_read = 0
    malformed = 0
    duplicates = 0
    entries: dict[str, np.ndarray] = {}

    lines = iter(text)
    if expect_header:
        header = next(lines, None)
        if header is None:
            raise EmptyInput("empty source where a header line was expected")
        parts = header.rstrip("\n").split(" ")
        try:
            if len(parts) != 2:
                raise ValueError
            declared_count, dim = int(parts[0]), int(parts[1])
        except ValueError:
            raise DimensionUndeterminable(
                f"header line {header.rstrip()!r} is not '<count> <dim>'"
            ) from None
        if dim <= 0:
            raise DimensionUndeterminable(f"header declares non-positive dim {dim}")

    for line in lines:
        line = line.rstrip("\n")
        lines_read += 1
        row = _parse_row(line)
        if row is None:
            if dim is None:
                raise DimensionUndeterminable(
                    "no header and the first row is malformed; cannot fix dim"
                )
            malformed += 1
            continue
        token, vec = row
        if dim is None:
            dim = vec.shape[0]
        if vec.shape[0] != dim:
            malformed += 1
            continue
        if token in entries:
            duplicates += 1
            continue
        vec.flags.writeable = False
        entries[token] = vec

    if not entries:
        raise EmptyInput("no well-formed embedding rows in source")
    assert dim is not None
    diagnostics = LoadDiagnostics(
        lines_read=lines_read,
        malformed_lines=malformed,
        duplicate_tokens=duplicates,
        declared_count=declared_count,
    )
    if declared_count is not None and declared_count != len(entries):
        logger.info(
            "embedding header declared %d entries, loaded %d",
            declared_count,
            len(entries),
        )
    return EmbeddingTable(dim, entries), diagnostics


def load_embeddings(
    path: str, expect_header: bool = False
) -> tuple[EmbeddingTable, LoadDiagnostics]:
    """Open ``path`` and parse it with :func:`parse_embeddings`."""
    with open(path, "rb") as fh:
        return parse_embeddings(fh, expect_header=expect_header)


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity of two equal-length nonzero vectors.

    Raises:
        DimMismatch: lengths differ.
        ZeroVector: either vector has zero norm.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimMismatch(f"vector lengths differ: {u.shape} vs {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise ZeroVector("cosine undefined for zero-norm vector")
    return float(u @ v / (nu * nv))


def pearson(u: np.ndarray, v: np.ndarray) -> float:
    """Pearson correlation of two coordinate sequences.

    Raises:
        DimMismatch: lengths differ.
        ZeroVariance: fewer than two coordinates, or either sequence is
            constant.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimMismatch(f"vector lengths differ: {u.shape} vs {v.shape}")
    if u.size < 2:
        raise ZeroVariance("correlation needs at least two coordinates")
    uc = u - u.mean()
    vc = v - v.mean()
    nu = float(np.linalg.norm(uc))
    nv = float(np.linalg.norm(vc))
    if nu == 0.0 or nv == 0.0:
        raise ZeroVariance("correlation undefined for constant sequence")
    return float(uc @ vc / (nu * nv))
