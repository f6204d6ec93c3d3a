"""Command-line surface: score, convert, fuse, synth, filter, stats, eval.

stdout carries machine-readable JSON; logs go to stderr (level from the
VQAE_LOG environment variable). Runs are bit-reproducible for a given
input and config, independent of the worker count: records are processed
in input order and the output writer preserves that order.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import multiprocessing
import os
import shlex
import subprocess
import sys
from collections import Counter
from dataclasses import dataclass
from typing import Optional

from . import corpus as corpus_mod
from . import fusion, metrics, statements
from .embed import load_embeddings, tokenize
from .similarity import qa_caption_sim
from .trees import ConstTree, parse_bracketed, print_bracketed

log = logging.getLogger("vqasynth")

HISTOGRAM_WIDTH = 0.02
HISTOGRAM_BUCKETS = 50


def _setup_logging() -> None:
    level = os.environ.get("VQAE_LOG", "WARNING").upper()
    logging.basicConfig(
        stream=sys.stderr,
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def record_to_dict(record: fusion.ExplanationRecord) -> dict:
    return {
        "question_id": record.question_id,
        "caption_id": record.caption_id,
        "explanation_text": record.explanation_text,
        "explanation_tree": (
            print_bracketed(record.explanation_tree)
            if record.explanation_tree is not None
            else None
        ),
        "similarity": {
            "value": record.similarity.value,
            "q_term": record.similarity.q_term,
            "a_term": record.similarity.a_term,
        },
        "retained": record.retained,
        "provenance": record.provenance,
    }


def _histogram(values: list[float]) -> dict:
    counts = [0] * HISTOGRAM_BUCKETS
    for v in values:
        bucket = min(int(v / HISTOGRAM_WIDTH), HISTOGRAM_BUCKETS - 1)
        counts[bucket] += 1
    return {"width": HISTOGRAM_WIDTH, "counts": counts, "total": len(values)}


def _sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _manifest(threshold: float, rule_version: str, embeddings_sha: str,
              postedit_cmd: Optional[str]) -> dict:
    config = {
        "threshold": threshold,
        "rule_table_version": rule_version,
        "embeddings_sha256": embeddings_sha,
        "postedit_cmd": postedit_cmd,
    }
    config_sha = hashlib.sha256(_dump(config).encode("utf-8")).hexdigest()
    return {"manifest": dict(config, config_sha256=config_sha)}


def _load_rules(path: Optional[str]) -> statements.RuleTable:
    if path:
        return statements.load_rule_table(path)
    return statements.default_rule_table()


def _load_types(path: Optional[str]) -> list[str]:
    if path:
        return statements.load_type_inventory(path)
    return statements.default_type_inventory()


def _postedit_hook(cmd: Optional[str]):
    if not cmd:
        return None
    argv = shlex.split(cmd)

    def run(text: str) -> str:
        proc = subprocess.run(
            argv, input=text, capture_output=True, text=True, check=True
        )
        return proc.stdout.strip()

    return run


def _validate_threshold(value: float) -> float:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"--threshold must be in [0, 1], got {value}")
    return value


@dataclass(frozen=True)
class PipelineConfig:
    embeddings_path: str
    output_path: str
    rule_table_path: Optional[str] = None
    type_inventory_path: Optional[str] = None
    threshold: float = 0.6
    postedit_cmd: Optional[str] = None
    workers: int = 1

    def __post_init__(self):
        _validate_threshold(self.threshold)
        if self.workers < 1:
            raise ValueError(f"--workers must be >= 1, got {self.workers}")


# Worker state inherited through fork; holds the immutable shared config.
_WORKER: dict = {}


def _init_worker(table, rules, threshold, stoplist, postedit_cmd):
    _WORKER.update(
        table=table,
        rules=rules,
        threshold=threshold,
        stoplist=stoplist,
        hook=_postedit_hook(postedit_cmd),
    )


def _synthesize_one(record: corpus_mod.QARecord) -> str:
    result = fusion.synthesize(
        record,
        _WORKER["table"],
        _WORKER["rules"],
        threshold=_WORKER["threshold"],
        stoplist=_WORKER["stoplist"],
        postedit_hook=_WORKER["hook"],
    )
    return _dump(record_to_dict(result))


def _run_pipeline(records, table, rules, threshold, workers, postedit_cmd):
    stoplist = fusion.default_stoplist()
    if workers <= 1:
        _init_worker(table, rules, threshold, stoplist, postedit_cmd)
        for record in records:
            yield _synthesize_one(record)
        return
    ctx = multiprocessing.get_context("fork")
    _init_worker(table, rules, threshold, stoplist, postedit_cmd)
    with ctx.Pool(processes=workers) as pool:
        yield from pool.imap(_synthesize_one, records, chunksize=16)


def cmd_synth(args) -> int:
    config = PipelineConfig(
        embeddings_path=args.embeddings,
        output_path=args.out,
        rule_table_path=args.rules,
        type_inventory_path=args.types,
        threshold=args.threshold,
        postedit_cmd=args.postedit_cmd,
        workers=args.workers,
    )
    counters: Counter = Counter()
    records = corpus_mod.load_corpus(
        args.questions, args.annotations, args.captions, counters=counters
    )
    table = load_embeddings(config.embeddings_path)
    rules = _load_rules(config.rule_table_path)
    types = _load_types(config.type_inventory_path)
    manifest = _manifest(
        config.threshold,
        rules.version,
        _sha256_file(config.embeddings_path),
        config.postedit_cmd,
    )

    tmp_path = config.output_path + ".tmp"
    lines = []
    try:
        with open(tmp_path, "w", encoding="utf-8") as out:
            out.write(_dump(manifest) + "\n")
            for line in _run_pipeline(
                records, table, rules, config.threshold, config.workers, config.postedit_cmd
            ):
                out.write(line + "\n")
                lines.append(json.loads(line))
        os.replace(tmp_path, config.output_path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise

    retained_ids = {r["question_id"] for r in lines if r["retained"]}
    explanations = [_RecordView(r) for r in lines]
    provenance_counts = Counter(r["provenance"] for r in lines)
    summary = {
        "output": config.output_path,
        "skipped_no_captions": counters["skipped_no_captions"],
        "provenance": {k: provenance_counts.get(k, 0) for k in fusion.PROVENANCES},
        "stats": {
            "source": corpus_mod.split_stats(records, []).to_dict(),
            "explained": corpus_mod.split_stats(
                [r for r in records if r.question.question_id in retained_ids],
                explanations,
            ).to_dict(),
        },
        "per_type": _per_type(records, retained_ids, types),
    }
    if args.histogram:
        summary["histogram"] = _histogram([r["similarity"]["value"] for r in lines])
    print(_dump(summary))
    return 0


class _RecordView:
    """Duck-typed view of a serialized ExplanationRecord for stats."""

    def __init__(self, obj: dict):
        self.retained = obj["retained"]
        self.explanation_text = obj["explanation_text"]
        self.similarity_value = obj["similarity"]["value"]
        self.provenance = obj["provenance"]
        self.question_id = obj["question_id"]


def _per_type(records, retained_ids, inventory) -> dict:
    out: dict[str, dict[str, int]] = {}
    for record in records:
        qtype = statements.classify(record.question.text, inventory).prefix
        slot = out.setdefault(qtype, {"qa_pairs": 0, "retained": 0})
        slot["qa_pairs"] += 1
        if record.question.question_id in retained_ids:
            slot["retained"] += 1
    return {k: out[k] for k in sorted(out)}


def cmd_score(args) -> int:
    table = load_embeddings(args.embeddings)
    score = qa_caption_sim(
        tokenize(args.question, source="question"),
        tokenize(args.answer, source="answer"),
        tokenize(args.caption, source="caption"),
        table,
    )
    print(_dump({"value": score.value, "q_term": score.q_term, "a_term": score.a_term}))
    return 0


def cmd_convert(args) -> int:
    rules = _load_rules(args.rules)
    stream = open(args.infile, "r", encoding="utf-8") if args.infile else sys.stdin
    try:
        for line in stream:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            statement = statements.to_statement(obj["question"], obj["answer"], rules)
            if statement is None:
                out = {
                    "question": obj["question"],
                    "answer": obj["answer"],
                    "statement": None,
                    "rule_id": None,
                    "tree": None,
                    "provenance": "none",
                }
            else:
                out = {
                    "question": obj["question"],
                    "answer": obj["answer"],
                    "statement": statement.text,
                    "rule_id": statement.rule_id,
                    "tree": print_bracketed(statement.tree),
                    "provenance": "statement",
                }
            print(_dump(out))
    finally:
        if args.infile:
            stream.close()
    return 0


def cmd_fuse(args) -> int:
    threshold = _validate_threshold(args.threshold)
    table = load_embeddings(args.embeddings)
    rules = _load_rules(args.rules)
    tree: Optional[ConstTree] = parse_bracketed(args.parse) if args.parse else None
    record = corpus_mod.QARecord(
        question=corpus_mod.Question(question_id=0, image_id=0, text=args.question),
        answer_set=corpus_mod.AnswerSet(
            question_id=0,
            answers=(corpus_mod.normalize_answer(args.answer),) * 10,
            majority_answer=corpus_mod.normalize_answer(args.answer),
        ),
        captions=(
            corpus_mod.Caption(caption_id=0, image_id=0, text=args.caption, tree=tree),
        ),
    )
    result = fusion.synthesize(
        record, table, rules, threshold=threshold,
        postedit_hook=_postedit_hook(args.postedit_cmd),
    )
    print(_dump(record_to_dict(result)))
    return 0


def _read_explanations(path: str) -> list[dict]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if "manifest" in obj:
                continue
            out.append(obj)
    return out


def cmd_filter(args) -> int:
    threshold = _validate_threshold(args.threshold)
    rows = _read_explanations(args.infile)
    kept = []
    for obj in rows:
        if obj["provenance"] == "none":
            continue
        if obj["similarity"]["value"] >= threshold:
            kept.append(dict(obj, retained=True))
    sink = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for obj in kept:
            sink.write(_dump(obj) + "\n")
    finally:
        if args.out:
            sink.close()
    summary = {"input": len(rows), "retained": len(kept), "threshold": threshold}
    if args.histogram:
        summary["histogram"] = _histogram([r["similarity"]["value"] for r in rows])
    print(_dump(summary), file=sys.stderr if not args.out else sys.stdout)
    return 0


def cmd_stats(args) -> int:
    counters: Counter = Counter()
    records = corpus_mod.load_corpus(
        args.questions, args.annotations, args.captions, counters=counters
    )
    explanations = [_RecordView(obj) for obj in _read_explanations(args.explanations)]
    retained_ids = {e.question_id for e in explanations if e.retained}
    types = _load_types(args.types)
    report = {
        "source": corpus_mod.split_stats(records, []).to_dict(),
        "explained": corpus_mod.split_stats(
            [r for r in records if r.question.question_id in retained_ids],
            explanations,
        ).to_dict(),
        "skipped_no_captions": counters["skipped_no_captions"],
        "per_type": _per_type(records, retained_ids, types),
    }
    print(_dump(report))
    return 0


_TEXT_FIELDS = ("explanation_text", "text", "explanation", "caption")


def _line_text(obj: dict, path: str) -> str:
    if isinstance(obj, str):
        return obj
    for key in _TEXT_FIELDS:
        if key in obj and isinstance(obj[key], str):
            return obj[key]
    raise ValueError(f"{path}: no text field in {sorted(obj)}")


def _read_texts(path: str) -> list[str]:
    texts = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if isinstance(obj, dict) and "manifest" in obj:
                continue
            texts.append(_line_text(obj, path))
    return texts


def cmd_eval(args) -> int:
    candidates = [tokenize(t, source="explanation") for t in _read_texts(args.candidates)]
    references = [tokenize(t, source="explanation") for t in _read_texts(args.references)]
    if len(candidates) != len(references):
        raise ValueError(
            f"{len(candidates)} candidates vs {len(references)} references"
        )
    score = metrics.text_scores(candidates, references)
    print(_dump(score.to_dict()))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vqasynth",
        description="Synthesize and evaluate textual explanations for VQA pairs from captions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="run the full corpus pipeline")
    synth.add_argument("--questions", required=True)
    synth.add_argument("--annotations", required=True)
    synth.add_argument("--captions", required=True)
    synth.add_argument("--embeddings", required=True)
    synth.add_argument("--rules")
    synth.add_argument("--types")
    synth.add_argument("--threshold", type=float, default=0.6)
    synth.add_argument("--workers", type=int, default=1)
    synth.add_argument("--out", required=True)
    synth.add_argument("--histogram", action="store_true")
    synth.add_argument("--postedit-cmd")
    synth.set_defaults(func=cmd_synth)

    score = sub.add_parser("score", help="similarity of one QA pair to one caption")
    score.add_argument("--embeddings", required=True)
    score.add_argument("--question", required=True)
    score.add_argument("--answer", required=True)
    score.add_argument("--caption", required=True)
    score.set_defaults(func=cmd_score)

    convert = sub.add_parser("convert", help="QA pairs to declarative statements")
    convert.add_argument("--rules")
    convert.add_argument("--in", dest="infile")
    convert.set_defaults(func=cmd_convert)

    fuse = sub.add_parser("fuse", help="synthesize one explanation")
    fuse.add_argument("--embeddings", required=True)
    fuse.add_argument("--rules")
    fuse.add_argument("--question", required=True)
    fuse.add_argument("--answer", required=True)
    fuse.add_argument("--caption", required=True)
    fuse.add_argument("--parse")
    fuse.add_argument("--threshold", type=float, default=0.6)
    fuse.add_argument("--postedit-cmd")
    fuse.set_defaults(func=cmd_fuse)

    filt = sub.add_parser("filter", help="re-threshold an explanations file")
    filt.add_argument("--in", dest="infile", required=True)
    filt.add_argument("--threshold", type=float, default=0.6)
    filt.add_argument("--out")
    filt.add_argument("--histogram", action="store_true")
    filt.set_defaults(func=cmd_filter)

    stats = sub.add_parser("stats", help="dataset statistics report")
    stats.add_argument("--questions", required=True)
    stats.add_argument("--annotations", required=True)
    stats.add_argument("--captions", required=True)
    stats.add_argument("--explanations", required=True)
    stats.add_argument("--types")
    stats.set_defaults(func=cmd_stats)

    ev = sub.add_parser("eval", help="BLEU / ROUGE-L over candidate and reference files")
    ev.add_argument("--candidates", required=True)
    ev.add_argument("--references", required=True)
    ev.set_defaults(func=cmd_eval)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2 if "threshold" in str(exc) or "workers" in str(exc) else 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
