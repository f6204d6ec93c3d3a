"""Turn a question-answer pair into a declarative statement.

Conversion is driven by an ordered rule table: the first rule whose token
pattern matches the question and whose answer type matches the answer
produces the statement. Each rule carries a skeletal bracketed tree, so
statements come with a constituency tree without re-parsing the generated
text.

Pattern items are literal tokens or slots:

    <name>        one or more tokens, shortest match
    <name:one>    exactly one token
    <name:det>    one determiner/possessive
    <name:pron>   one subject pronoun
    <name:noun>   one token that is not a function word
    <name:ing>    one token ending in "ing" (noun-like -ing words excluded)
    <name:modal>  one modal auxiliary
    <name:wh>     one wh-word

Templates reference slots the same way; <answer> is the tokenized answer.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from typing import Optional

from .embed import tokenize
from .trees import ConstTree, Node, TreeParseError, leaf, parse_bracketed, tree_from

DETERMINERS = (
    "the", "a", "an", "this", "that", "these", "those",
    "his", "her", "its", "their", "my", "your", "our",
)
PRONOUNS = (
    "he", "she", "it", "they", "you", "we", "i",
    "this", "that", "these", "those", "there",
    "anyone", "anybody", "someone", "somebody",
)
MODALS = ("can", "could", "will", "would", "should", "must")
WH_WORDS = ("what", "who", "where", "when", "which", "whose", "why", "how")

# tokens a bare-noun slot must not swallow
_NON_NOUN = set(DETERMINERS) | set(PRONOUNS) | set(MODALS) | {
    "is", "are", "was", "were", "be", "been", "being", "am",
    "do", "does", "did", "has", "have", "had", "not", "no", "yes",
    "of", "in", "on", "at", "to", "for", "with", "and", "or",
}

# common -ing nouns that must not be read as progressive verbs
_ING_NOUNS = (
    "king", "thing", "ring", "wing", "spring", "string",
    "morning", "evening", "building", "painting", "ceiling",
    "lightning", "something", "anything", "nothing", "everything",
    "wedding", "pudding",
)

_NUMBER_WORDS = {
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight",
    "nine", "ten", "eleven", "twelve", "thirteen", "fourteen", "fifteen",
    "sixteen", "seventeen", "eighteen", "nineteen", "twenty",
}

ANSWER_TYPES = ("yes", "no", "number", "phrase")


class RuleTableError(ValueError):
    pass


@dataclass(frozen=True)
class QuestionType:
    prefix: str
    rank: int


@dataclass(frozen=True)
class Statement:
    text: str
    tree: ConstTree
    rule_id: str


def answer_kind(answer: str) -> str:
    """yes / no / number / phrase, on the ingestion-normalized string."""
    normalized = answer.strip().lower()
    if normalized == "yes":
        return "yes"
    if normalized == "no":
        return "no"
    if re.fullmatch(r"\d+", normalized) or normalized in _NUMBER_WORDS:
        return "number"
    return "phrase"


def load_type_inventory(path: str) -> list[str]:
    with open(path, "r", encoding="utf-8") as fh:
        prefixes = json.load(fh)
    if not isinstance(prefixes, list) or not all(isinstance(p, str) for p in prefixes):
        raise ValueError(f"{path}: type inventory must be a JSON array of strings")
    return prefixes


def default_type_inventory() -> list[str]:
    text = resources.files("vqasynth.data").joinpath("question_types.json").read_text("utf-8")
    return json.loads(text)


def classify(question_text: str, inventory: list[str]) -> QuestionType:
    """Longest token-prefix match over the inventory; "other" if none."""
    tokens = list(tokenize(question_text, source="question"))
    best: Optional[QuestionType] = None
    for prefix in inventory:
        ptoks = prefix.split()
        if len(ptoks) <= len(tokens) and tokens[: len(ptoks)] == ptoks:
            if best is None or len(ptoks) > best.rank:
                best = QuestionType(prefix=prefix, rank=len(ptoks))
    return best if best is not None else QuestionType(prefix="other", rank=0)


_SLOT_RE = re.compile(r"^<([a-z][a-z0-9_]*)(?::([a-z]+))?>$")
_MULTI = r"\S+(?: \S+)*?"


def _alt(words: tuple[str, ...]) -> str:
    return "|".join(re.escape(w) for w in words)


def _slot_regex(name: str, kind: Optional[str]) -> str:
    if kind is None:
        return f"(?P<{name}>{_MULTI})"
    if kind == "one":
        return f"(?P<{name}>\\S+)"
    if kind == "det":
        return f"(?P<{name}>(?:{_alt(DETERMINERS)}))"
    if kind == "pron":
        return f"(?P<{name}>(?:{_alt(PRONOUNS)}))"
    if kind == "modal":
        return f"(?P<{name}>(?:{_alt(MODALS)}))"
    if kind == "wh":
        return f"(?P<{name}>(?:{_alt(WH_WORDS)}))"
    if kind == "noun":
        return f"(?!(?:{_alt(tuple(sorted(_NON_NOUN)))})(?: |$))(?P<{name}>\\S+)"
    if kind == "ing":
        return f"(?!(?:{_alt(_ING_NOUNS)})(?: |$))(?P<{name}>\\S{{2,}}ing)"
    raise RuleTableError(f"unknown slot kind {kind!r}")


@dataclass
class RewriteRule:
    rule_id: str
    question_pattern: str
    answer_type: str
    template: list[str]
    template_tree: ConstTree
    regex: re.Pattern
    slot_names: list[str]

    def matches_answer(self, kind: str) -> bool:
        if self.answer_type == "phrase":
            return kind in ("phrase", "number")
        return self.answer_type == kind


@dataclass
class RuleTable:
    version: str
    rules: list[RewriteRule]


def _compile_pattern(pattern: str, rule_id: str) -> tuple[re.Pattern, list[str]]:
    parts = []
    slots = []
    for item in pattern.split():
        m = _SLOT_RE.match(item)
        if m:
            name, kind = m.group(1), m.group(2)
            if name == "answer":
                raise RuleTableError(f"rule {rule_id}: <answer> cannot appear in the pattern")
            if name in slots:
                raise RuleTableError(f"rule {rule_id}: duplicate slot <{name}>")
            slots.append(name)
            parts.append(_slot_regex(name, kind))
        elif item.startswith("<"):
            raise RuleTableError(f"rule {rule_id}: malformed slot {item!r}")
        else:
            parts.append(re.escape(item))
    return re.compile("^" + " ".join(parts) + "$"), slots


def _template_slots(items: list[str]) -> list[str]:
    found = []
    for item in items:
        m = _SLOT_RE.match(item)
        if m:
            found.append(m.group(1))
    return found


def _tree_slots(tree: ConstTree) -> list[str]:
    found = []
    for lf in tree.leaves():
        m = _SLOT_RE.match(lf.token)
        if m:
            found.append(m.group(1))
    return found


def _make_rule(obj: dict, position: int) -> RewriteRule:
    try:
        rule_id = obj["rule_id"]
        pattern = obj["question_pattern"]
        answer_type = obj["answer_type"]
        template = obj["template"]
        tree_text = obj["template_tree"]
    except KeyError as exc:
        raise RuleTableError(f"rule #{position}: missing field {exc}") from exc
    if answer_type not in ANSWER_TYPES:
        raise RuleTableError(f"rule {rule_id}: bad answer_type {answer_type!r}")
    regex, slots = _compile_pattern(pattern, rule_id)
    template_items = template.split()
    try:
        template_tree = parse_bracketed(tree_text)
    except TreeParseError as exc:
        raise RuleTableError(f"rule {rule_id}: bad template_tree: {exc}") from exc
    bound = set(slots) | {"answer"}
    for name in _template_slots(template_items) + _tree_slots(template_tree):
        if name not in bound:
            raise RuleTableError(f"rule {rule_id}: template references unbound slot <{name}>")
    tree_yield = [lf.token for lf in template_tree.leaves()]
    if tree_yield != template_items:
        raise RuleTableError(
            f"rule {rule_id}: template_tree yield {tree_yield} != template {template_items}"
        )
    return RewriteRule(
        rule_id=rule_id,
        question_pattern=pattern,
        answer_type=answer_type,
        template=template_items,
        template_tree=template_tree,
        regex=regex,
        slot_names=slots,
    )


def load_rule_table(path: str) -> RuleTable:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    return _table_from_payload(payload, path)


def default_rule_table() -> RuleTable:
    text = resources.files("vqasynth.data").joinpath("rules.json").read_text("utf-8")
    return _table_from_payload(json.loads(text), "<default rules>")


def _table_from_payload(payload, origin: str) -> RuleTable:
    if not isinstance(payload, dict) or "rules" not in payload:
        raise RuleTableError(f"{origin}: expected an object with a 'rules' array")
    version = str(payload.get("version", "unversioned"))
    rules = [_make_rule(obj, i) for i, obj in enumerate(payload["rules"])]
    seen = set()
    for rule in rules:
        if rule.rule_id in seen:
            raise RuleTableError(f"{origin}: duplicate rule_id {rule.rule_id!r}")
        seen.add(rule.rule_id)
    return RuleTable(version=version, rules=rules)


def _instantiate_leaf(node: Node, bindings: dict[str, list[str]]) -> Node:
    m = _SLOT_RE.match(node.token)
    if not m:
        return leaf(node.label, node.token)
    tokens = bindings[m.group(1)]
    if len(tokens) == 1:
        return leaf(node.label, tokens[0])
    return Node(label=node.label, children=tuple(leaf("X", t, i) for i, t in enumerate(tokens)))


def _instantiate_node(node: Node, bindings: dict[str, list[str]]) -> Node:
    if node.is_leaf:
        return _instantiate_leaf(node, bindings)
    return Node(
        label=node.label,
        children=tuple(_instantiate_node(c, bindings) for c in node.children),
    )


def to_statement(question_text: str, answer: str, table: RuleTable) -> Optional[Statement]:
    """First-matching-rule conversion; None when no rule applies."""
    q_tokens = list(tokenize(question_text, source="question"))
    a_tokens = list(tokenize(answer, source="answer"))
    if not q_tokens or not a_tokens:
        return None
    kind = answer_kind(answer)
    joined = " ".join(q_tokens)
    for rule in table.rules:
        if not rule.matches_answer(kind):
            continue
        m = rule.regex.match(joined)
        if m is None:
            continue
        bindings = {name: m.group(name).split(" ") for name in rule.slot_names}
        bindings["answer"] = a_tokens
        out_tokens: list[str] = []
        for item in rule.template:
            slot = _SLOT_RE.match(item)
            if slot:
                out_tokens.extend(bindings[slot.group(1)])
            else:
                out_tokens.append(item)
        tree = tree_from(_instantiate_node(rule.template_tree.root, bindings))
        return Statement(text=" ".join(out_tokens), tree=tree, rule_id=rule.rule_id)
    return None
