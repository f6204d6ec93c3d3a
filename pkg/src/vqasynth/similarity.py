"""Relevance scoring between a question-answer pair and a caption.

Word similarity is the rescaled cosine (1 + cos)/2, mapping into [0, 1].
Sequence similarity averages, over one side's tokens, the best match on
the other side. The QA-to-caption score is the mean of the question term
and the answer term.

Out-of-vocabulary tokens are excluded from both the mean and the max;
a side with no usable tokens contributes 0. Zero-norm vectors have no
direction and are treated as out-of-vocabulary here, although word_sim
itself rejects them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embed import EmbeddingTable, TokenSeq


@dataclass(frozen=True)
class SimilarityScore:
    value: float
    q_term: float
    a_term: float


def word_sim(u: np.ndarray, v: np.ndarray) -> float:
    """(1 + cos(u, v)) / 2. Both vectors must have a nonzero norm."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    if np.array_equal(u, v):
        if not u.any():
            raise ValueError("cosine undefined for zero-norm vector")
        return 1.0
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine undefined for zero-norm vector")
    if np.array_equal(u, -v):
        return 0.0
    cos = float(np.dot(u, v)) / (nu * nv)
    cos = min(1.0, max(-1.0, cos))
    return 0.5 * (1.0 + cos)


def _usable_rows(seq: TokenSeq, table: EmbeddingTable) -> list[int]:
    rows = []
    for token in seq:
        row = table.index.get(token)
        if row is not None and table.norms[row] != 0.0:
            rows.append(row)
    return rows


def seq_sim(a: TokenSeq, b: TokenSeq, table: EmbeddingTable) -> float:
    """Mean over a's usable tokens of the best word_sim against b's.

    Duplicate tokens in `a` each contribute a term. Returns 0.0 when
    either side has no usable token.
    """
    a_rows = _usable_rows(a, table)
    b_rows = _usable_rows(b, table)
    if not a_rows or not b_rows:
        return 0.0
    total = 0.0
    for i in a_rows:
        best = 0.0
        for j in b_rows:
            if i == j:
                best = 1.0
                break
            cos = float(np.dot(table.matrix[i], table.matrix[j])) / (
                float(table.norms[i]) * float(table.norms[j])
            )
            cos = min(1.0, max(-1.0, cos))
            s = 0.5 * (1.0 + cos)
            if s > best:
                best = s
        total += best
    return total / len(a_rows)


def qa_caption_sim(
    q: TokenSeq, a: TokenSeq, c: TokenSeq, table: EmbeddingTable
) -> SimilarityScore:
    """Mean of the question-to-caption and answer-to-caption terms."""
    q_term = seq_sim(q, c, table)
    a_term = seq_sim(a, c, table)
    return SimilarityScore(value=0.5 * (q_term + a_term), q_term=q_term, a_term=a_term)


def best_caption(
    q: TokenSeq,
    a: TokenSeq,
    captions: list[tuple[int, TokenSeq]],
    table: EmbeddingTable,
) -> tuple[int, SimilarityScore]:
    """Argmax of qa_caption_sim over (caption_id, tokens) candidates.

    Ties go to the lowest caption_id.
    """
    if not captions:
        raise ValueError("captions must be non-empty")
    best_id = None
    best_score = None
    for caption_id, tokens in sorted(captions, key=lambda item: item[0]):
        score = qa_caption_sim(q, a, tokens, table)
        if best_score is None or score.value > best_score.value:
            best_id = caption_id
            best_score = score
    return best_id, best_score
