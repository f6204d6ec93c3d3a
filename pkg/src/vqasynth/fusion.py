"""Fuse a QA statement with its most relevant caption.

The statement tree and the caption tree are aligned on a pair of nodes
with equal lowercased yields (longest yield wins, then leftmost caption
span, then leftmost statement span). The graft imports the smallest
statement constituent that adds new content relative to the caption: it
replaces the widest caption constituent around the aligned node that adds
no content of its own beyond the match, so determiners and other function
words around the graft point are absorbed rather than duplicated.

A content word is any token of length >= 2 outside a fixed function-word
stoplist. The fused sentence is post-edited with five deterministic rules
and re-scored against the QA pair; records below the similarity threshold
are flagged as not retained.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from typing import Optional

from .corpus import QARecord
from .embed import EmbeddingTable, tokenize
from .similarity import SimilarityScore, best_caption, qa_caption_sim
from .statements import RuleTable, to_statement
from .trees import (
    ConstTree,
    Node,
    flat_tree,
    nodes_with_span,
    replace_node,
    tree_from,
    yield_of,
)

PROVENANCES = ("fused", "caption_only", "none")

_VOWELS = "aeiou"


def load_stoplist(path: str) -> frozenset[str]:
    with open(path, "r", encoding="utf-8") as fh:
        return frozenset(w.strip() for w in fh if w.strip())


def default_stoplist() -> frozenset[str]:
    text = resources.files("vqasynth.data").joinpath("function_words.txt").read_text("utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


def is_content_word(token: str, stoplist: frozenset[str]) -> bool:
    return len(token) >= 2 and token.lower() not in stoplist


@dataclass(frozen=True)
class Alignment:
    statement_node_span: tuple[int, int]
    caption_node_span: tuple[int, int]
    matched_yield: tuple[str, ...]


@dataclass(frozen=True)
class MergeOutcome:
    tree: ConstTree
    grafted: bool
    replaced_span: Optional[tuple[int, int]] = None


@dataclass(frozen=True)
class ExplanationRecord:
    question_id: int
    caption_id: Optional[int]
    explanation_text: str
    explanation_tree: Optional[ConstTree]
    similarity: SimilarityScore
    retained: bool
    provenance: str


def _span_nodes(tree: ConstTree) -> list[Node]:
    """All nodes, keeping only the topmost of each span (unary chains
    collapse to their outermost node)."""
    seen: set[tuple[int, int]] = set()
    out = []
    for node in tree.root.iter_nodes():
        if node.span not in seen:
            seen.add(node.span)
            out.append(node)
    return out


def align(statement_tree: ConstTree, caption_tree: ConstTree) -> Optional[Alignment]:
    """Best node pair with equal lowercased yields, or None."""
    caption_by_yield: dict[tuple[str, ...], list[Node]] = {}
    for node in _span_nodes(caption_tree):
        caption_by_yield.setdefault(tuple(yield_of(node)), []).append(node)
    best_key = None
    best_pair = None
    for s_node in _span_nodes(statement_tree):
        s_yield = tuple(yield_of(s_node))
        for c_node in caption_by_yield.get(s_yield, ()):
            key = (-len(s_yield), c_node.span[0], s_node.span[0])
            if best_key is None or key < best_key:
                best_key = key
                best_pair = (s_node, c_node, s_yield)
    if best_pair is None:
        return None
    s_node, c_node, s_yield = best_pair
    return Alignment(
        statement_node_span=s_node.span,
        caption_node_span=c_node.span,
        matched_yield=s_yield,
    )


def _topmost_at(tree: ConstTree, span: tuple[int, int]) -> Node:
    nodes = nodes_with_span(tree, span)
    if not nodes:
        raise ValueError(f"no node with span {span}")
    return nodes[0]


def _ancestor_path(tree: ConstTree, target: Node) -> list[Node]:
    """Nodes from `target` up to the root, target first."""
    path: list[Node] = []

    def walk(node: Node) -> bool:
        if node is target:
            path.append(node)
            return True
        for child in node.children:
            if walk(child):
                path.append(node)
                return True
        return False

    if not walk(tree.root):
        raise ValueError("node not in tree")
    return path


def merge(
    statement_tree: ConstTree,
    caption_tree: ConstTree,
    alignment: Alignment,
    stoplist: Optional[frozenset[str]] = None,
) -> ConstTree:
    """Graft the statement's new-content constituent into the caption."""
    return merge_outcome(statement_tree, caption_tree, alignment, stoplist).tree


def merge_outcome(
    statement_tree: ConstTree,
    caption_tree: ConstTree,
    alignment: Alignment,
    stoplist: Optional[frozenset[str]] = None,
) -> MergeOutcome:
    if stoplist is None:
        stoplist = default_stoplist()
    caption_tokens = set(yield_of(caption_tree.root))

    s_node = _topmost_at(statement_tree, alignment.statement_node_span)
    graft = None
    for ancestor in _ancestor_path(statement_tree, s_node):
        new_content = [
            tok
            for tok in set(yield_of(ancestor)) - caption_tokens
            if is_content_word(tok, stoplist)
        ]
        if new_content:
            graft = ancestor
            break
    if graft is None:
        return MergeOutcome(tree=caption_tree, grafted=False)

    c_node = _topmost_at(caption_tree, alignment.caption_node_span)
    matched = set(alignment.matched_yield)
    target = c_node
    for ancestor in _ancestor_path(caption_tree, c_node)[1:]:
        extra = [
            tok
            for tok in set(yield_of(ancestor)) - matched
            if is_content_word(tok, stoplist)
        ]
        if extra:
            break
        target = ancestor
    merged = replace_node(caption_tree, target, graft)
    return MergeOutcome(tree=merged, grafted=True, replaced_span=target.span)


def _token_edits(tokens: list[str]) -> tuple[list[int], dict[int, str]]:
    """Indices to keep after collapsing repeats, plus a/an corrections."""
    kept: list[int] = []
    prev: Optional[str] = None
    for i, tok in enumerate(tokens):
        low = tok.lower()
        if prev is not None and low == prev:
            continue
        kept.append(i)
        prev = low
    replacements: dict[int, str] = {}
    for pos in range(len(kept) - 1):
        i, j = kept[pos], kept[pos + 1]
        low = tokens[i].lower()
        if low in ("a", "an"):
            want = "an" if tokens[j][:1].lower() in _VOWELS else "a"
            if low != want:
                replacements[i] = want
    return kept, replacements


def _finish_text(tokens: list[str]) -> str:
    text = " ".join(tokens)
    if not text:
        return text
    text = text[0].upper() + text[1:]
    text = text.rstrip(" .?!") + "."
    return text


def postedit(text: str) -> str:
    """Deterministic cleanup: collapse repeated tokens, fix a/an,
    capitalize, single terminal period, single spaces."""
    tokens = text.split()
    if not tokens:
        return ""
    kept, replacements = _token_edits(tokens)
    out = [replacements.get(i, tokens[i]) for i in kept]
    return _finish_text(out)


def _prune(node: Node, kept: set[int], replacements: dict[int, str], counter: list[int]) -> Optional[Node]:
    if node.is_leaf:
        idx = counter[0]
        counter[0] += 1
        if idx not in kept:
            return None
        token = replacements.get(idx, node.token)
        return Node(label=node.label, token=token, span=node.span)
    children = []
    for child in node.children:
        pruned = _prune(child, kept, replacements, counter)
        if pruned is not None:
            children.append(pruned)
    if not children:
        return None
    return Node(label=node.label, children=tuple(children), span=node.span)


def postedit_tree(tree: ConstTree) -> tuple[ConstTree, str]:
    """Apply the token-level post-edit rules to a tree's leaves, keeping
    the tree and the emitted text in lockstep."""
    tokens = [lf.token for lf in tree.leaves()]
    kept, replacements = _token_edits(tokens)
    if len(kept) == len(tokens) and not replacements:
        edited = tree
    else:
        edited = tree_from(_prune(tree.root, set(kept), replacements, [0]))
    out = [replacements.get(i, tokens[i]) for i in kept]
    return edited, _finish_text(out)


def synthesize(
    record: QARecord,
    table: EmbeddingTable,
    rules: RuleTable,
    threshold: float = 0.6,
    stoplist: Optional[frozenset[str]] = None,
    postedit_hook=None,
) -> ExplanationRecord:
    """Full per-record pipeline: best caption, statement, align, merge,
    post-edit, re-score, threshold.

    `postedit_hook` optionally pipes the post-edited text through an
    external corrector; the tree is then rebuilt flat over the corrected
    tokens, since external edits cannot be mirrored structurally.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold {threshold} outside [0, 1]")
    if stoplist is None:
        stoplist = default_stoplist()
    question = record.question
    q_tokens = tokenize(question.text, source="question")
    a_tokens = tokenize(record.answer_set.majority_answer, source="answer")

    candidates = [(c.caption_id, tokenize(c.text, source="caption")) for c in record.captions]
    best_id, _ = best_caption(q_tokens, a_tokens, candidates, table)
    caption = next(c for c in record.captions if c.caption_id == best_id)

    statement = to_statement(question.text, record.answer_set.majority_answer, rules)
    if statement is None:
        return ExplanationRecord(
            question_id=question.question_id,
            caption_id=None,
            explanation_text="",
            explanation_tree=None,
            similarity=SimilarityScore(value=0.0, q_term=0.0, a_term=0.0),
            retained=False,
            provenance="none",
        )

    caption_tokens = list(tokenize(caption.text, source="caption"))
    if caption.tree is not None:
        caption_tree = caption.tree
    elif caption_tokens:
        caption_tree = flat_tree(caption_tokens)
    else:
        caption_tree = None

    provenance = "caption_only"
    if caption_tree is None:
        explanation_tree = None
        explanation_text = postedit(caption.text)
    else:
        alignment = align(statement.tree, caption_tree)
        merged = caption_tree
        if alignment is not None:
            outcome = merge_outcome(statement.tree, caption_tree, alignment, stoplist)
            merged = outcome.tree
            if outcome.grafted:
                provenance = "fused"
        explanation_tree, explanation_text = postedit_tree(merged)

    if postedit_hook is not None and explanation_text:
        explanation_text = postedit_hook(explanation_text)
        hook_tokens = list(tokenize(explanation_text, source="explanation"))
        explanation_tree = flat_tree(hook_tokens) if hook_tokens else None

    score = qa_caption_sim(
        q_tokens, a_tokens, tokenize(explanation_text, source="explanation"), table
    )
    retained = score.value >= threshold
    return ExplanationRecord(
        question_id=question.question_id,
        caption_id=best_id,
        explanation_text=explanation_text,
        explanation_tree=explanation_tree,
        similarity=score,
        retained=retained,
        provenance=provenance,
    )
