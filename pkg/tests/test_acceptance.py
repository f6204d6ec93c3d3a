"""Acceptance suite: one test per release criterion, one printed line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines. Criterion 6 (full VQA v2 scale) is an expectation documented in the
README; it runs only when the real dataset paths are provided via
environment variables.
"""

import json
import math
import os
import random
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from vqasynth.cli import main, record_to_dict, _dump
from vqasynth.corpus import AnswerSet, load_corpus
from vqasynth.embed import EmbeddingTable, TokenSeq
from vqasynth.fusion import synthesize
from vqasynth.metrics import bleu, rouge_l, soft_accuracy
from vqasynth.similarity import seq_sim, word_sim
from vqasynth.trees import (
    Node,
    leaf,
    parse_bracketed,
    print_bracketed,
    replace_child,
    tree_from,
)

DATA = Path(__file__).parent / "data"
CORPUS = DATA / "corpus"
EMB = str(DATA / "mini_glove.txt")


def report(n, text):
    print(f"[criterion {n}] PASS - {text}")


# ---------------------------------------------------------------------------
# 1. soft accuracy table

def test_criterion_1_soft_accuracy_table():
    def literal_loop(m):
        answers = ["c"] * m + ["x"] * (10 - m)
        total = Fraction(0)
        for k in range(10):
            matches = sum(1 for j, a in enumerate(answers) if j != k and a == "c")
            total += min(Fraction(matches, 3), Fraction(1))
        return total / 10

    table = {0: 0.0, 1: 0.3, 2: 0.6, 3: 0.9, 10: 1.0}
    for m in range(11):
        answers = AnswerSet(1, tuple(["c"] * m + ["x"] * (10 - m)), "c" if m else "x")
        got = soft_accuracy("c", answers)
        assert abs(got - float(literal_loop(m))) <= 1e-12, f"m={m}"
        if m in table:
            assert abs(got - table[m]) <= 1e-12, f"m={m}: {got} != {table[m]}"
    report(1, "soft accuracy equals the leave-one-out oracle for m in 0..10")


# ---------------------------------------------------------------------------
# 2. similarity properties over fuzzed triples

def _random_table(rng, n_tokens, dim):
    vocab = {}
    for i in range(n_tokens):
        vec = [rng.uniform(-2.0, 2.0) for _ in range(dim)]
        if not any(abs(x) > 1e-9 for x in vec):
            vec[0] = 1.0
        vocab[f"w{i}"] = vec
    tokens = list(vocab)
    matrix = np.asarray([vocab[t] for t in tokens], dtype=np.float64)
    table = EmbeddingTable(
        dim=dim,
        index={t: i for i, t in enumerate(tokens)},
        matrix=matrix,
        norms=np.linalg.norm(matrix, axis=1),
        duplicates=0,
    )
    return table, vocab


def _oracle_seq_sim(a, b, vocab):
    def ws(u, v):
        dot = sum(x * y for x, y in zip(u, v))
        nu = math.sqrt(sum(x * x for x in u))
        nv = math.sqrt(sum(y * y for y in v))
        cos = min(1.0, max(-1.0, dot / (nu * nv)))
        return 0.5 * (1.0 + cos)

    av = [vocab[t] for t in a if t in vocab]
    bv = [vocab[t] for t in b if t in vocab]
    if not av or not bv:
        return 0.0
    return sum(max(ws(u, v) for v in bv) for u in av) / len(av)


def test_criterion_2_similarity_properties():
    start = time.monotonic()
    rng = random.Random(424242)
    table, vocab = _random_table(rng, n_tokens=20, dim=6)
    tokens = list(vocab) + ["oov1", "oov2", "oov3"]

    def seq(toks):
        return TokenSeq(tokens=tuple(toks), source="caption")

    checked_oracle = 0
    for i in range(10_000):
        a = [rng.choice(tokens) for _ in range(rng.randint(1, 6))]
        b = [rng.choice(tokens) for _ in range(rng.randint(1, 6))]
        value = seq_sim(seq(a), seq(b), table)
        assert 0.0 <= value <= 1.0

        in_vocab_a = [t for t in a if t in vocab]
        if in_vocab_a:
            assert seq_sim(seq(a), seq(a), table) == 1.0

        extra = rng.choice(tokens)
        grown = seq_sim(seq(a), seq(b + [extra]), table)
        assert grown >= value - 1e-12

        if i < 1_000:
            want = _oracle_seq_sim(a, b, vocab)
            assert abs(value - want) < 1e-9
            checked_oracle += 1

    for _ in range(2_000):
        u = np.array([rng.uniform(-1, 1) for _ in range(6)])
        v = np.array([rng.uniform(-1, 1) for _ in range(6)])
        if not u.any() or not v.any():
            continue
        k = rng.uniform(1e-3, 1e3)
        assert abs(word_sim(k * u, v) - word_sim(u, v)) < 1e-9
        assert 0.0 <= word_sim(u, v) <= 1.0

    elapsed = time.monotonic() - start
    assert checked_oracle == 1_000
    assert elapsed < 60.0
    report(2, f"10k fuzzed triples + 1k oracle agreements in {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 3. tree round-trip and span consistency

LABELS = ["S", "NP", "VP", "PP", "X"]
POS = ["DT", "NN", "VBZ", "JJ", "IN"]
WORDS = ["the", "a", "man", "dog", "park", "sat", "big", "on"]


def _random_tree(rng, max_depth=4):
    def build(depth):
        if depth >= max_depth or rng.random() < 0.35:
            return leaf(rng.choice(POS), rng.choice(WORDS))
        kids = tuple(build(depth + 1) for _ in range(rng.randint(1, 3)))
        return Node(label=rng.choice(LABELS), children=kids)

    root = build(0)
    if root.is_leaf:
        root = Node(label="S", children=(root,))
    return tree_from(root)


def _independent_spans(tree):
    spans = {}
    counter = [0]

    def walk(node):
        start = counter[0]
        if node.is_leaf:
            counter[0] += 1
        else:
            for child in node.children:
                walk(child)
        spans[id(node)] = (start, counter[0])

    walk(tree.root)
    return spans


def test_criterion_3_tree_round_trip_and_spans():
    start = time.monotonic()
    rng = random.Random(987654)

    for _ in range(10_000):
        tree = _random_tree(rng)
        assert parse_bracketed(print_bracketed(tree)) == tree

    replaced = 0
    while replaced < 1_000:
        tree = _random_tree(rng)
        spans = [n.span for n in tree.root.iter_nodes()]
        target = rng.choice(spans)
        if spans.count(target) > 1:
            continue
        out = replace_child(tree, target, _random_tree(rng, max_depth=2).root)
        oracle = _independent_spans(out)
        for node in out.root.iter_nodes():
            assert node.span == oracle[id(node)]
        replaced += 1

    elapsed = time.monotonic() - start
    assert elapsed < 60.0
    report(3, f"10k round-trips + 1k span-checked replacements in {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 4. fusion golden corpus

HAND_RETENTION = {
    1: True, 2: True, 3: True, 4: True, 5: False, 6: False, 7: True,
    8: True, 9: True, 10: True, 11: True, 12: True, 13: True, 14: True,
    15: False, 16: True, 17: False, 18: True, 19: True, 20: True,
}


def test_criterion_4_fusion_golden_corpus(mini_table, rule_table, golden_path):
    records = load_corpus(
        str(CORPUS / "questions.json"),
        str(CORPUS / "annotations.json"),
        str(CORPUS / "captions.json"),
    )
    golden_lines = golden_path.read_text().splitlines()
    assert len(records) == len(golden_lines) == 20
    for record, gold in zip(records, golden_lines):
        out = synthesize(record, mini_table, rule_table, threshold=0.6)
        assert _dump(record_to_dict(out)) == gold, (
            f"question {record.question.question_id} diverges from the hand trace"
        )
        assert out.retained == HAND_RETENTION[record.question.question_id]
    report(4, "20-record pipeline output is byte-identical to the hand trace")


# ---------------------------------------------------------------------------
# 5. threshold sweep and histogram

def test_criterion_5_threshold_and_histogram(mini_table, rule_table, tmp_path, capsys):
    records = load_corpus(
        str(CORPUS / "questions.json"),
        str(CORPUS / "annotations.json"),
        str(CORPUS / "captions.json"),
    )
    counts = []
    for step in range(21):
        threshold = min(step * 0.05, 1.0)
        retained = sum(
            synthesize(r, mini_table, rule_table, threshold=threshold).retained
            for r in records
        )
        counts.append(retained)
    assert counts == sorted(counts, reverse=True), counts

    out_path = tmp_path / "expl.jsonl"
    code = main([
        "synth",
        "--questions", str(CORPUS / "questions.json"),
        "--annotations", str(CORPUS / "annotations.json"),
        "--captions", str(CORPUS / "captions.json"),
        "--embeddings", EMB,
        "--out", str(out_path),
        "--histogram",
    ])
    assert code == 0
    summary = json.loads(capsys.readouterr().out)
    histogram = summary["histogram"]
    assert len(histogram["counts"]) == 50
    assert sum(histogram["counts"]) == 20
    report(5, f"retained sweep {counts[0]}->{counts[-1]} monotone; histogram sums to 20")


# ---------------------------------------------------------------------------
# 6. full-data expectation (documented; opt-in)

def test_criterion_6_full_scale_expectation():
    questions = os.environ.get("VQASYNTH_VQA2_QUESTIONS")
    annotations = os.environ.get("VQASYNTH_VQA2_ANNOTATIONS")
    captions = os.environ.get("VQASYNTH_VQA2_CAPTIONS")
    embeddings = os.environ.get("VQASYNTH_GLOVE")
    if not all((questions, annotations, captions, embeddings)):
        pytest.skip(
            "full VQA v2 run is a documented expectation (~41% retention, "
            "~181k train explanations, tolerance +/-5pp); set VQASYNTH_VQA2_* "
            "and VQASYNTH_GLOVE to run it"
        )
    from vqasynth.embed import load_embeddings
    from vqasynth.statements import default_rule_table

    records = load_corpus(questions, annotations, captions)
    table = load_embeddings(embeddings)
    rules = default_rule_table()
    retained = sum(
        synthesize(r, table, rules, threshold=0.6).retained for r in records
    )
    rate = retained / len(records)
    assert 0.36 <= rate <= 0.46, f"retention {rate:.3f} outside 41% +/- 5pp"
    report(6, f"full-scale retention {rate:.1%}")


# ---------------------------------------------------------------------------
# 7. BLEU / ROUGE sanity

def test_criterion_7_bleu_rouge_sanity():
    def seq(text):
        return TokenSeq(tokens=tuple(text.split()), source="explanation")

    identical = [seq("a man rides a horse on the beach"), seq("two dogs play with a ball")]
    for n in (1, 2, 3, 4):
        assert abs(bleu(identical, identical, n) - 1.0) < 1e-12
    assert rouge_l(identical[0], identical[0]) == 1.0

    cands = [seq("the cat sat on the mat"), seq("a dog barks"), seq("birds fly high")]
    refs = [
        seq("the cat sat on a mat"),
        seq("a dog barks loudly"),
        seq("birds fly in the sky"),
    ]
    # hand-derived clipped counts (see test_metrics for the tally)
    p = [10 / 12, 6 / 9, 3 / 6, 1 / 3]
    bp = math.exp(1 - 15 / 12)
    for n in (1, 2, 3, 4):
        want = bp * math.exp(sum(math.log(x) for x in p[:n]) / n)
        assert abs(bleu(cands, refs, n) - want) < 1e-9

    got = rouge_l(seq("the cat sat"), seq("the cat ate"))
    assert abs(got - 2 / 3) < 1e-9
    report(7, "identity corpora score 1.0; toy corpora match hand-computed oracles")


# ---------------------------------------------------------------------------
# 8. determinism across worker counts

def test_criterion_8_worker_determinism(tmp_path, capsys):
    outputs = []
    for workers in (1, 8):
        out_path = tmp_path / f"w{workers}.jsonl"
        code = main([
            "synth",
            "--questions", str(CORPUS / "questions.json"),
            "--annotations", str(CORPUS / "annotations.json"),
            "--captions", str(CORPUS / "captions.json"),
            "--embeddings", EMB,
            "--workers", str(workers),
            "--out", str(out_path),
        ])
        capsys.readouterr()
        assert code == 0
        outputs.append(out_path.read_bytes())
    assert outputs[0] == outputs[1]
    report(8, "workers=1 and workers=8 synth outputs are byte-identical")
