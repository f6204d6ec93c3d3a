"""Evaluation metrics: consensus soft accuracy, corpus BLEU, ROUGE-L.

Soft accuracy follows the 10-annotator consensus convention: each
leave-one-out fold scores min(matches/3, 1) and the folds are averaged.
BLEU is corpus-level modified n-gram precision with a brevity penalty and
uniform weights, with no smoothing: a zero precision at any order zeroes
the score. ROUGE-L is the LCS F-measure with beta = 1.2.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

from .corpus import AnswerSet, normalize_answer
from .embed import TokenSeq

ROUGE_BETA = 1.2


@dataclass(frozen=True)
class TextScore:
    bleu: tuple[float, float, float, float]
    rouge_l: float

    def to_dict(self) -> dict:
        return {
            "B-1": self.bleu[0],
            "B-2": self.bleu[1],
            "B-3": self.bleu[2],
            "B-4": self.bleu[3],
            "R": self.rouge_l,
            "smoothing": "none",
        }


def soft_accuracy(candidate: str, answers: AnswerSet) -> float:
    """Average over the 10 leave-one-out folds of min(matches/3, 1)."""
    if len(answers.answers) != 10:
        raise ValueError(f"expected 10 answers, got {len(answers.answers)}")
    cand = normalize_answer(candidate)
    total = 0.0
    k = len(answers.answers)
    for i in range(k):
        matches = sum(1 for j, a in enumerate(answers.answers) if j != i and a == cand)
        total += min(matches / 3.0, 1.0)
    return total / k


def _ngrams(tokens: tuple[str, ...], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidates: list[TokenSeq], references: list[TokenSeq], n: int = 4) -> float:
    """Corpus-level BLEU-n, one reference per candidate, no smoothing."""
    if not 1 <= n <= 4:
        raise ValueError(f"BLEU order must be 1..4, got {n}")
    if not candidates:
        raise ValueError("empty corpus")
    if len(candidates) != len(references):
        raise ValueError(
            f"{len(candidates)} candidates vs {len(references)} references"
        )
    cand_len = 0
    ref_len = 0
    matched = [0] * n
    totals = [0] * n
    for cand, ref in zip(candidates, references):
        c_toks = tuple(cand)
        r_toks = tuple(ref)
        cand_len += len(c_toks)
        ref_len += len(r_toks)
        for order in range(1, n + 1):
            c_counts = _ngrams(c_toks, order)
            r_counts = _ngrams(r_toks, order)
            totals[order - 1] += sum(c_counts.values())
            matched[order - 1] += sum(
                min(count, r_counts[gram]) for gram, count in c_counts.items()
            )
    if cand_len == 0:
        return 0.0
    log_sum = 0.0
    for order in range(n):
        if totals[order] == 0 or matched[order] == 0:
            return 0.0
        log_sum += math.log(matched[order] / totals[order]) / n
    brevity = 1.0 if cand_len > ref_len else math.exp(1.0 - ref_len / cand_len)
    return brevity * math.exp(log_sum)


def _lcs_length(a: tuple[str, ...], b: tuple[str, ...]) -> int:
    prev = [0] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        cur = [0] * (len(b) + 1)
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                cur[j] = prev[j - 1] + 1
            else:
                cur[j] = max(prev[j], cur[j - 1])
        prev = cur
    return prev[len(b)]


def rouge_l(candidate: TokenSeq, reference: TokenSeq, beta: float = ROUGE_BETA) -> float:
    """LCS-based F-measure."""
    c_toks = tuple(candidate)
    r_toks = tuple(reference)
    if not c_toks or not r_toks:
        raise ValueError("rouge_l inputs must be non-empty")
    lcs = _lcs_length(c_toks, r_toks)
    if lcs == 0:
        return 0.0
    precision = lcs / len(c_toks)
    recall = lcs / len(r_toks)
    b2 = beta * beta
    return (1 + b2) * recall * precision / (recall + b2 * precision)


def text_scores(candidates: list[TokenSeq], references: list[TokenSeq]) -> TextScore:
    """BLEU-1..4 plus mean sentence-level ROUGE-L over the corpus."""
    if not candidates or len(candidates) != len(references):
        raise ValueError("candidate and reference corpora must be non-empty and equal-length")
    bleus = tuple(bleu(candidates, references, n) for n in (1, 2, 3, 4))
    rouges = [rouge_l(c, r) for c, r in zip(candidates, references)]
    return TextScore(bleu=bleus, rouge_l=sum(rouges) / len(rouges))
