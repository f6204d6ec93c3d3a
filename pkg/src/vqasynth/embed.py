"""Tokenization and word-embedding lookup.

The embedding file format is the common GloVe text distribution: one token
per line followed by its vector components, space-separated. The whole
table is held in memory; lookups are exact-match (callers lowercase first).
"""

from __future__ import annotations

import logging
import string
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

log = logging.getLogger(__name__)

TOKEN_SOURCES = ("question", "answer", "caption", "explanation")

_STRIP_CHARS = string.punctuation


class EmbeddingError(ValueError):
    pass


@dataclass(frozen=True)
class TokenSeq:
    tokens: tuple[str, ...]
    source: str = "caption"

    def __post_init__(self):
        if self.source not in TOKEN_SOURCES:
            raise ValueError(f"unknown token source {self.source!r}")

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)


def tokenize(text: str, source: str = "caption") -> TokenSeq:
    """Lowercase, split on whitespace, strip leading/trailing ASCII
    punctuation per token; tokens that become empty are dropped."""
    tokens = []
    for raw in text.lower().split():
        tok = raw.strip(_STRIP_CHARS)
        if tok:
            tokens.append(tok)
    return TokenSeq(tokens=tuple(tokens), source=source)


@dataclass
class EmbeddingTable:
    """token -> dense vector, all of one dimensionality.

    Vectors are stored as float64 rows of a single matrix; `norms` caches
    the Euclidean norm per row for the similarity hot path. `duplicates`
    counts tokens that appeared more than once in the source file.
    """

    dim: int
    index: dict[str, int] = field(default_factory=dict)
    matrix: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    norms: np.ndarray = field(default_factory=lambda: np.zeros(0))
    duplicates: int = 0

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def __len__(self) -> int:
        return len(self.index)


def load_embeddings(path: str) -> EmbeddingTable:
    """Read a GloVe-format text file into an EmbeddingTable.

    The dimensionality is inferred from the first line; any row with a
    different width is a hard error naming the line. When a token repeats,
    the last occurrence wins and the duplicate is counted.
    """
    index: dict[str, int] = {}
    rows: list[list[float]] = []
    dim: Optional[int] = None
    duplicates = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            if parts == [""]:
                continue
            if len(parts) < 2:
                raise EmbeddingError(f"{path}:{lineno}: expected token plus vector components")
            token = parts[0]
            try:
                values = [float(x) for x in parts[1:]]
            except ValueError as exc:
                raise EmbeddingError(f"{path}:{lineno}: non-numeric component: {exc}") from exc
            if dim is None:
                dim = len(values)
            elif len(values) != dim:
                raise EmbeddingError(
                    f"{path}:{lineno}: vector has {len(values)} components, expected {dim}"
                )
            if any(not np.isfinite(v) for v in values):
                raise EmbeddingError(f"{path}:{lineno}: non-finite component")
            if token in index:
                duplicates += 1
                rows[index[token]] = values
            else:
                index[token] = len(rows)
                rows.append(values)
    if dim is None or not rows:
        raise EmbeddingError(f"{path}: no embeddings")
    if duplicates:
        log.warning("%s: %d duplicate tokens (last occurrence kept)", path, duplicates)
    matrix = np.asarray(rows, dtype=np.float64)
    norms = np.linalg.norm(matrix, axis=1)
    return EmbeddingTable(dim=dim, index=index, matrix=matrix, norms=norms, duplicates=duplicates)


def lookup(table: EmbeddingTable, token: str) -> Optional[np.ndarray]:
    """Exact-match lookup; out-of-vocabulary tokens return None."""
    row = table.index.get(token)
    if row is None:
        return None
    return table.matrix[row]
