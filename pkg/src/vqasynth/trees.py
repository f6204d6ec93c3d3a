"""Constituency trees in Penn-style bracketed notation.

Trees are immutable: every operation that changes structure returns a new
tree with all token spans recomputed. Leaves carry a token, internal nodes
carry a non-terminal label; labels are opaque strings.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional


class TreeParseError(ValueError):
    """Malformed bracketed tree. Carries the byte offset of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class Node:
    """One tree node. Leaves have a token and no children."""

    label: str
    children: tuple["Node", ...] = ()
    token: Optional[str] = None
    span: tuple[int, int] = (0, 0)

    @property
    def is_leaf(self) -> bool:
        return self.token is not None

    def iter_nodes(self) -> Iterator["Node"]:
        """Preorder traversal (self first)."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def leaves(self) -> list["Node"]:
        return [n for n in self.iter_nodes() if n.is_leaf]


@dataclass(frozen=True)
class ConstTree:
    root: Node

    def __post_init__(self):
        _check_valid(self.root)

    def leaves(self) -> list[Node]:
        return self.root.leaves()


def _check_valid(root: Node) -> None:
    """Validate structural invariants: labeled nodes, tokens only on leaves,
    spans contiguous and consistent with the left-to-right leaf order."""
    expected_start = root.span[0]
    if expected_start != 0:
        raise ValueError("root span must start at 0")
    _check_node(root, 0)
    if root.span[1] <= 0:
        raise ValueError("tree yield must be non-empty")


def _check_node(node: Node, start: int) -> int:
    if not node.label:
        raise ValueError("node with empty label")
    if node.is_leaf:
        if node.children:
            raise ValueError("leaf must not have children")
        if not node.token:
            raise ValueError("leaf with empty token")
        if node.span != (start, start + 1):
            raise ValueError(f"leaf span {node.span} != ({start}, {start + 1})")
        return start + 1
    if not node.children:
        raise ValueError("internal node with no children")
    pos = start
    for child in node.children:
        pos = _check_node(child, pos)
    if node.span != (start, pos):
        raise ValueError(f"node span {node.span} != ({start}, {pos})")
    return pos


def leaf(label: str, token: str, start: int = 0) -> Node:
    return Node(label=label, token=token, span=(start, start + 1))


def tree_from(root: Node) -> ConstTree:
    """Build a validated tree from a root whose spans may be stale."""
    return ConstTree(root=_respan(root, 0))


def _build(label: str, children: tuple[Node, ...], start: int) -> Node:
    return Node(label=label, children=children, span=(start, children[-1].span[1]))


def _respan(node: Node, start: int) -> Node:
    """Rebuild `node` so its leaves occupy positions starting at `start`."""
    if node.is_leaf:
        return Node(label=node.label, token=node.token, span=(start, start + 1))
    kids = []
    pos = start
    for child in node.children:
        new_child = _respan(child, pos)
        kids.append(new_child)
        pos = new_child.span[1]
    return Node(label=node.label, children=tuple(kids), span=(start, pos))


_WS = " \t\r\n"


def parse_bracketed(text: str) -> ConstTree:
    """Parse "(LABEL child child ...)" with leaves "(POS token)".

    A node containing exactly one bare token is a leaf; bare tokens mixed
    with bracketed children (or several bare tokens) are rejected.
    """
    i = 0
    n = len(text)
    while i < n and text[i] in _WS:
        i += 1
    if i >= n:
        raise TreeParseError("empty tree", i)
    root, i = _parse_node(text, i, 0)
    while i < n and text[i] in _WS:
        i += 1
    if i < n:
        raise TreeParseError("trailing text after tree", i)
    return ConstTree(root=_respan(root, 0))


def _parse_node(text: str, i: int, depth: int) -> tuple[Node, int]:
    n = len(text)
    if text[i] != "(":
        raise TreeParseError("expected '('", i)
    i += 1
    while i < n and text[i] in _WS:
        i += 1
    label_start = i
    while i < n and text[i] not in _WS and text[i] not in "()":
        i += 1
    label = text[label_start:i]
    if not label:
        raise TreeParseError("empty label", i)
    children: list[Node] = []
    bare_token: Optional[str] = None
    while True:
        while i < n and text[i] in _WS:
            i += 1
        if i >= n:
            raise TreeParseError("unbalanced brackets", i)
        if text[i] == ")":
            i += 1
            break
        if text[i] == "(":
            if bare_token is not None:
                raise TreeParseError("token and subtree mixed under one node", i)
            child, i = _parse_node(text, i, depth + 1)
            children.append(child)
        else:
            tok_start = i
            while i < n and text[i] not in _WS and text[i] not in "()":
                i += 1
            if children or bare_token is not None:
                raise TreeParseError("a leaf holds exactly one token", tok_start)
            bare_token = text[tok_start:i]
    if bare_token is not None:
        return leaf(label, bare_token), i
    if not children:
        raise TreeParseError("node with no children", i)
    return _build(label, tuple(children), 0), i


def print_bracketed(tree: ConstTree) -> str:
    """Canonical single-space-separated bracketed form."""
    return _print_node(tree.root)


def _print_node(node: Node) -> str:
    if node.is_leaf:
        return f"({node.label} {node.token})"
    return "(" + node.label + " " + " ".join(_print_node(c) for c in node.children) + ")"


def yield_of(node: Node) -> list[str]:
    """Leaf tokens left to right, lowercased."""
    return [lf.token.lower() for lf in node.leaves()]


def flat_tree(tokens: list[str], root_label: str = "S", leaf_label: str = "X") -> ConstTree:
    """Fallback tree (S (X tok) ...) for text without a parse."""
    if not tokens:
        raise ValueError("cannot build a tree over zero tokens")
    kids = tuple(leaf(leaf_label, tok, i) for i, tok in enumerate(tokens))
    return ConstTree(root=_build(root_label, kids, 0))


def nodes_with_span(tree: ConstTree, span: tuple[int, int]) -> list[Node]:
    """All nodes with the given span, in preorder (topmost first)."""
    return [n for n in tree.root.iter_nodes() if n.span == span]


def replace_child(tree: ConstTree, target_span: tuple[int, int], replacement: Node) -> ConstTree:
    """Substitute the unique node at `target_span` with `replacement`.

    Spans of the result are recomputed; the input tree is unmodified.
    Raises ValueError when no node, or more than one node (unary chain),
    has the target span.
    """
    matches = nodes_with_span(tree, target_span)
    if not matches:
        raise ValueError(f"no node with span {target_span}")
    if len(matches) > 1:
        raise ValueError(f"{len(matches)} nodes share span {target_span}; target is ambiguous")
    return replace_node(tree, matches[0], replacement)


def replace_node(tree: ConstTree, target: Node, replacement: Node) -> ConstTree:
    """Substitute `target` (located by identity) with `replacement`."""
    new_root = _substitute(tree.root, target, replacement)
    if new_root is None:
        raise ValueError("target node is not part of the tree")
    return ConstTree(root=_respan(new_root, 0))


def _substitute(node: Node, target: Node, replacement: Node) -> Optional[Node]:
    if node is target:
        return replacement
    for idx, child in enumerate(node.children):
        replaced = _substitute(child, target, replacement)
        if replaced is not None:
            kids = node.children[:idx] + (replaced,) + node.children[idx + 1 :]
            return Node(label=node.label, children=kids, span=node.span)
    return None
