"""Candidate generation pipeline and training-example construction.

Generation is strictly per passage: every sentence yields one initial
answer through query-focused summarization, each initial answer expands
into six questions (one per interrogative word), and a question-answering
pass adjusts every answer. Candidate counts are therefore fixed at n, 6n,
6n for an n-sentence passage. Extra iterations re-run question generation
(and optionally answer adjustment) over the final set without growing it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Iterable

from .corpus import SOURCE_GENERATED, WH_WORDS, Dataset, Passage, QAPair
from .modelio import Backend, BackendError

SEP = "<sep>"
TASKS = ("agm", "qgm", "qam")


class GenerationError(BackendError):
    """Backend failure annotated with the passage (and sentence) it hit."""


@dataclass(frozen=True)
class TrainExample:
    input: str
    target: str
    task: str

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        want = 2 if self.task == "qgm" else 1
        if self.input.count(SEP) != want:
            raise ValueError(f"{self.task} input must contain exactly {want} separator(s)")


@dataclass(frozen=True)
class CandidateSet:
    passage_id: str
    a_init: tuple[str, ...]
    qa1: tuple[QAPair, ...]
    qa2: tuple[QAPair, ...]


def _check_sep_free(*parts: str) -> None:
    for part in parts:
        if SEP in part:
            raise ValueError(f"text contains the reserved separator {SEP!r}")


def build_agm_examples(d: Dataset, backend: Backend) -> list[TrainExample]:
    """One answer-generation example per ground-truth pair, via summarization."""
    out = []
    for p in d.passages:
        psg = p.norm_text
        for pair in d.gt_pairs.get(p.id, ()):
            try:
                summary = backend.summarize(p, pair.question)
            except BackendError as e:
                raise GenerationError(f"passage {p.id}: {e}") from e
            _check_sep_free(psg, summary)
            out.append(TrainExample(input=psg + SEP + summary, target=pair.answer, task="agm"))
    return out


def build_qgm_examples(d: Dataset) -> tuple[list[TrainExample], int]:
    """Question-generation examples with an interrogative-word slot.

    Pairs whose question has no detectable interrogative are skipped; the
    skip count is returned alongside the examples.
    """
    from .evaluation import classify_wh

    out = []
    skipped = 0
    for p in d.passages:
        psg = p.norm_text
        for pair in d.gt_pairs.get(p.id, ()):
            wh = classify_wh(pair.question)
            if wh == "Other":
                skipped += 1
                continue
            _check_sep_free(psg, pair.answer)
            out.append(TrainExample(input=psg + SEP + pair.answer + SEP + wh,
                                    target=pair.question, task="qgm"))
    return out, skipped


def build_qam_examples(d: Dataset) -> list[TrainExample]:
    out = []
    for p in d.passages:
        psg = p.norm_text
        for pair in d.gt_pairs.get(p.id, ()):
            _check_sep_free(psg, pair.question)
            out.append(TrainExample(input=psg + SEP + pair.question, target=pair.answer, task="qam"))
    return out


def generate_initial_answers(p: Passage, backend: Backend) -> list[str]:
    """One answer per sentence: summarize around the sentence, then answer."""
    answers = []
    for i, sentence in enumerate(p.sentences):
        try:
            summary = backend.summarize(p, sentence)
            answers.append(backend.agm_answer(p, summary))
        except BackendError as e:
            raise GenerationError(f"passage {p.id}, sentence {i}: {e}") from e
    return answers


def expand_questions(p: Passage, a_init: list[str], backend: Backend) -> list[QAPair]:
    """Six questions per initial answer, answer-major, fixed interrogative order."""
    if not a_init:
        raise ValueError("a_init must be non-empty")
    pairs = []
    for i, answer in enumerate(a_init):
        for wh in WH_WORDS:
            try:
                q = backend.gen_question(p, answer, wh)
            except BackendError as e:
                raise GenerationError(f"passage {p.id}, answer {i}, wh {wh}: {e}") from e
            pairs.append(QAPair(question=q, answer=answer, wh=wh,
                                source=SOURCE_GENERATED, stage="qa1"))
    return pairs


def adjust_answers(p: Passage, qa1: list[QAPair], backend: Backend) -> list[QAPair]:
    """Replace every answer with the question-answering model's output."""
    if not qa1:
        raise ValueError("qa1 must be non-empty")
    out = []
    for i, pair in enumerate(qa1):
        try:
            adjusted = backend.qam_answer(p, pair.question)
        except BackendError as e:
            raise GenerationError(f"passage {p.id}, pair {i}: {e}") from e
        out.append(QAPair(question=pair.question, answer=adjusted, wh=pair.wh,
                          source=SOURCE_GENERATED, stage="qa2"))
    return out


def _requery(p: Passage, pairs: list[QAPair], backend: Backend) -> list[QAPair]:
    # regenerate each question from the pair's own answer and wh tag; no 6-way expansion
    out = []
    for i, pair in enumerate(pairs):
        try:
            q = backend.gen_question(p, pair.answer, pair.wh)
        except BackendError as e:
            raise GenerationError(f"passage {p.id}, pair {i}: {e}") from e
        out.append(QAPair(question=q, answer=pair.answer, wh=pair.wh,
                          source=SOURCE_GENERATED, stage="qa2"))
    return out


def run_pipeline(p: Passage, backend: Backend, extra_iterations: int = 0) -> CandidateSet:
    """Full per-passage generation; extra_iterations in {0, 1, 2}."""
    if extra_iterations not in (0, 1, 2):
        raise ValueError("extra_iterations must be 0, 1 or 2")
    a_init = generate_initial_answers(p, backend)
    qa1 = expand_questions(p, a_init, backend)
    qa2 = adjust_answers(p, qa1, backend)
    if extra_iterations >= 1:
        qa2 = _requery(p, qa2, backend)
    if extra_iterations >= 2:
        qa2 = adjust_answers(p, qa2, backend)
    return CandidateSet(passage_id=p.id, a_init=tuple(a_init),
                        qa1=tuple(qa1), qa2=tuple(qa2))


def write_train_examples(fh: IO[str], examples: Iterable[TrainExample]) -> int:
    n = 0
    for ex in examples:
        fh.write(json.dumps({"task": ex.task, "input": ex.input, "target": ex.target},
                            ensure_ascii=False) + "\n")
        n += 1
    return n


def candidate_records(cs: CandidateSet, stages: tuple[str, ...] = ("qa2",)) -> Iterable[dict]:
    """JSONL-ready dicts for the requested stages, deterministic order."""
    for stage in stages:
        if stage == "init":
            for answer in cs.a_init:
                yield {"passage_id": cs.passage_id, "stage": "init", "question": None,
                       "answer": answer, "wh": None}
        elif stage in ("qa1", "qa2"):
            for pair in (cs.qa1 if stage == "qa1" else cs.qa2):
                yield {"passage_id": cs.passage_id, "stage": stage, "question": pair.question,
                       "answer": pair.answer, "wh": pair.wh}
        else:
            raise ValueError(f"unknown stage {stage!r}")


def write_candidates(fh: IO[str], candidate_sets: Iterable[CandidateSet],
                     stages: tuple[str, ...] = ("qa2",)) -> int:
    n = 0
    for cs in candidate_sets:
        for rec in candidate_records(cs, stages):
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
            n += 1
    return n


def read_candidates(fh: IO[str]) -> dict[str, list[QAPair]]:
    """Read exported candidates, grouped by passage id, file order preserved.

    Only question-bearing stages (qa1/qa2) are returned as QAPairs.
    """
    grouped: dict[str, list[QAPair]] = {}
    for line in fh:
        line = line.strip()
        if not line:
            continue
        obj = json.loads(line)
        stage = obj.get("stage")
        if stage == "init":
            continue
        grouped.setdefault(obj["passage_id"], []).append(
            QAPair(question=obj["question"], answer=obj["answer"], wh=obj.get("wh"),
                   source=SOURCE_GENERATED, stage=stage)
        )
    return grouped
