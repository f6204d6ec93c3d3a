"""Synthesize textual explanations for VQA pairs from image captions."""

from .corpus import AnswerSet, Caption, QARecord, Question, load_corpus, split_stats
from .embed import EmbeddingTable, TokenSeq, load_embeddings, lookup, tokenize
from .fusion import ExplanationRecord, align, merge, postedit, synthesize
from .metrics import bleu, rouge_l, soft_accuracy
from .similarity import SimilarityScore, best_caption, qa_caption_sim, seq_sim, word_sim
from .statements import Statement, classify, load_rule_table, to_statement
from .trees import ConstTree, parse_bracketed, print_bracketed, replace_child, yield_of

__version__ = "0.1.0"

__all__ = [
    "AnswerSet", "Caption", "ConstTree", "EmbeddingTable", "ExplanationRecord",
    "QARecord", "Question", "SimilarityScore", "Statement", "TokenSeq",
    "align", "best_caption", "bleu", "classify", "load_corpus",
    "load_embeddings", "load_rule_table", "lookup", "merge", "parse_bracketed",
    "postedit", "print_bracketed", "qa_caption_sim", "replace_child",
    "rouge_l", "seq_sim", "soft_accuracy", "split_stats", "synthesize",
    "to_statement", "tokenize", "word_sim", "yield_of",
]
