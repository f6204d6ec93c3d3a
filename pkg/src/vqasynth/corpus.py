"""Load and join the three input files: questions, annotations, captions.

File layouts mirror the de-facto VQA/COCO JSON conventions (see README).
Validation is strict: a malformed record is a hard error naming the file,
record index, and field. A question whose image has no captions is skipped
with a warning and counted.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass
from typing import Optional

from .embed import tokenize
from .trees import ConstTree, TreeParseError, parse_bracketed, yield_of

log = logging.getLogger(__name__)

ANSWERS_PER_QUESTION = 10


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class Question:
    question_id: int
    image_id: int
    text: str


@dataclass(frozen=True)
class AnswerSet:
    question_id: int
    answers: tuple[str, ...]
    majority_answer: str


@dataclass(frozen=True)
class Caption:
    caption_id: int
    image_id: int
    text: str
    tree: Optional[ConstTree] = None


@dataclass(frozen=True)
class QARecord:
    question: Question
    answer_set: AnswerSet
    captions: tuple[Caption, ...]


def normalize_answer(answer: str) -> str:
    """The one canonical answer form: lowercased, surrounding whitespace
    stripped. Used at ingestion and by the soft-accuracy metric."""
    return answer.strip().lower()


def _require(obj: dict, key: str, kind: type, path: str, index: int):
    if key not in obj:
        raise CorpusError(f"{path}: record {index}: missing field {key!r}")
    value = obj[key]
    if kind is int and isinstance(value, bool) or not isinstance(value, kind):
        raise CorpusError(
            f"{path}: record {index}: field {key!r} must be {kind.__name__}, got {type(value).__name__}"
        )
    return value


def _load_array(path: str) -> list:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(payload, list):
        raise CorpusError(f"{path}: expected a JSON array")
    return payload


def load_questions(path: str) -> list[Question]:
    questions = []
    seen: set[int] = set()
    for i, obj in enumerate(_load_array(path)):
        if not isinstance(obj, dict):
            raise CorpusError(f"{path}: record {i}: expected an object")
        qid = _require(obj, "question_id", int, path, i)
        image_id = _require(obj, "image_id", int, path, i)
        text = _require(obj, "question", str, path, i)
        if not text.strip():
            raise CorpusError(f"{path}: record {i}: field 'question' is empty")
        if qid in seen:
            raise CorpusError(f"{path}: record {i}: duplicate question_id {qid}")
        seen.add(qid)
        questions.append(Question(question_id=qid, image_id=image_id, text=text))
    return questions


def _majority(answers: tuple[str, ...], provided: str, path: str, index: int) -> str:
    counts = Counter(answers)
    top = max(counts.values())
    if counts.get(provided, 0) >= top:
        return provided
    computed = next(a for a in answers if counts[a] == top)
    log.warning(
        "%s: record %d: multiple_choice_answer %r is not a modal answer; using %r",
        path, index, provided, computed,
    )
    return computed


def load_annotations(path: str) -> dict[int, AnswerSet]:
    annotations: dict[int, AnswerSet] = {}
    for i, obj in enumerate(_load_array(path)):
        if not isinstance(obj, dict):
            raise CorpusError(f"{path}: record {i}: expected an object")
        qid = _require(obj, "question_id", int, path, i)
        raw_answers = _require(obj, "answers", list, path, i)
        provided = _require(obj, "multiple_choice_answer", str, path, i)
        if len(raw_answers) != ANSWERS_PER_QUESTION:
            raise CorpusError(
                f"{path}: record {i}: field 'answers' must have exactly "
                f"{ANSWERS_PER_QUESTION} entries, got {len(raw_answers)}"
            )
        if not all(isinstance(a, str) for a in raw_answers):
            raise CorpusError(f"{path}: record {i}: field 'answers' must be strings")
        answers = tuple(normalize_answer(a) for a in raw_answers)
        if qid in annotations:
            raise CorpusError(f"{path}: record {i}: duplicate question_id {qid}")
        majority = _majority(answers, normalize_answer(provided), path, i)
        annotations[qid] = AnswerSet(question_id=qid, answers=answers, majority_answer=majority)
    return annotations


def load_captions(path: str) -> dict[int, list[Caption]]:
    """Captions grouped by image_id, each group in caption_id order."""
    by_image: dict[int, list[Caption]] = {}
    seen: set[int] = set()
    for i, obj in enumerate(_load_array(path)):
        if not isinstance(obj, dict):
            raise CorpusError(f"{path}: record {i}: expected an object")
        cid = _require(obj, "caption_id", int, path, i)
        image_id = _require(obj, "image_id", int, path, i)
        text = _require(obj, "caption", str, path, i)
        if not text.strip():
            raise CorpusError(f"{path}: record {i}: field 'caption' is empty")
        if cid in seen:
            raise CorpusError(f"{path}: record {i}: duplicate caption_id {cid}")
        seen.add(cid)
        tree = None
        if "parse" in obj and obj["parse"] is not None:
            if not isinstance(obj["parse"], str):
                raise CorpusError(f"{path}: record {i}: field 'parse' must be a string")
            try:
                tree = parse_bracketed(obj["parse"])
            except TreeParseError as exc:
                raise CorpusError(f"{path}: record {i}: field 'parse': {exc}") from exc
            if yield_of(tree.root) != list(tokenize(text)):
                raise CorpusError(
                    f"{path}: record {i}: field 'parse' does not linearize to the caption text"
                )
        by_image.setdefault(image_id, []).append(
            Caption(caption_id=cid, image_id=image_id, text=text, tree=tree)
        )
    for captions in by_image.values():
        captions.sort(key=lambda c: c.caption_id)
    return by_image


def load_corpus(
    questions_path: str,
    annotations_path: str,
    captions_path: str,
    counters: Optional[Counter] = None,
) -> list[QARecord]:
    """Join questions, annotations, and captions into QARecords in
    ascending question_id order.

    A question whose image has no captions is skipped with a warning
    (counted under "skipped_no_captions" when `counters` is given);
    a question with no annotation is a hard error.
    """
    questions = load_questions(questions_path)
    annotations = load_annotations(annotations_path)
    captions = load_captions(captions_path)
    records = []
    skipped = 0
    for question in sorted(questions, key=lambda q: q.question_id):
        answer_set = annotations.get(question.question_id)
        if answer_set is None:
            raise CorpusError(
                f"{annotations_path}: no annotation for question_id {question.question_id}"
            )
        image_captions = captions.get(question.image_id)
        if not image_captions:
            skipped += 1
            log.warning(
                "question %d skipped: no captions for image %d",
                question.question_id, question.image_id,
            )
            continue
        records.append(
            QARecord(
                question=question,
                answer_set=answer_set,
                captions=tuple(image_captions),
            )
        )
    if counters is not None:
        counters["skipped_no_captions"] += skipped
    return records


@dataclass(frozen=True)
class StatsReport:
    """Dataset statistics over a set of records and their explanations.

    Counts of questions/images/answers cover all records passed in;
    explanation counts cover retained explanations only. Uniqueness is
    exact string equality after lowercasing and whitespace normalization.
    """

    images: int = 0
    qa_pairs: int = 0
    explanations: int = 0
    unique_questions: int = 0
    unique_answers: int = 0
    unique_explanations: int = 0

    def to_dict(self) -> dict:
        return {
            "images": self.images,
            "qa_pairs": self.qa_pairs,
            "explanations": self.explanations,
            "unique_questions": self.unique_questions,
            "unique_answers": self.unique_answers,
            "unique_explanations": self.unique_explanations,
        }


def _norm_text(text: str) -> str:
    return " ".join(text.lower().split())


def split_stats(records: list[QARecord], explanations: list) -> StatsReport:
    """Tabulate per-split counts; `explanations` are ExplanationRecords
    (or any objects with .retained and .explanation_text)."""
    retained = [e for e in explanations if e.retained]
    return StatsReport(
        images=len({r.question.image_id for r in records}),
        qa_pairs=len(records),
        explanations=len(retained),
        unique_questions=len({_norm_text(r.question.text) for r in records}),
        unique_answers=len({_norm_text(r.answer_set.majority_answer) for r in records}),
        unique_explanations=len({_norm_text(e.explanation_text) for e in retained}),
    )
