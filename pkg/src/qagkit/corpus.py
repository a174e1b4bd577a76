"""Dataset model, ingestion, validation, and sentence segmentation.

The canonical on-disk format is JSON Lines with two record kinds
discriminated by "kind":

    {"kind":"passage","id":"...","book_id":"...","split":"train|validation|test","text":"..."}
    {"kind":"qa","passage_id":"...","question":"...","answer":"...","wh":null|"Who|When|What|Where|Why|How|Other"}

UTF-8, LF line endings, no BOM. CSV ingestion is supported only through an
explicit column map. Datasets are immutable after load and safe to share
across threads.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .textproc import ABBREVIATIONS

log = logging.getLogger(__name__)

SPLITS = ("train", "validation", "test")
WH_WORDS = ("Who", "When", "What", "Where", "Why", "How")
WH_CLASSES = WH_WORDS + ("Other",)
ANSWER_TYPES = ("Explicit", "Implicit")

SOURCE_GT = "gt"
SOURCE_GENERATED = "generated"
STAGES = ("init", "qa1", "qa2")

_QUOTE_CHARS = "\"'“”‘’«»"
_TERMINALS = ".!?"


class DatasetFormatError(ValueError):
    """A record violates the canonical schema or a type invariant."""


def normalize_ws(text: str) -> str:
    return " ".join(text.split())


def split_sentences(text: str) -> list[str]:
    """Rule-based sentence segmentation over whitespace-normalized text.

    A boundary sits after '.', '!' or '?' followed by whitespace and an
    uppercase letter or quote character. Periods after known abbreviations
    or single-letter initials never split. Joining the output with single
    spaces reproduces the whitespace-normalized input exactly.
    """
    norm = normalize_ws(text)
    if not norm:
        raise ValueError("cannot split empty text")
    sentences = []
    start = 0
    for i, ch in enumerate(norm):
        if ch not in _TERMINALS:
            continue
        if i + 2 >= len(norm) or norm[i + 1] != " ":
            continue
        nxt = norm[i + 2]
        if not (nxt.isupper() or nxt in _QUOTE_CHARS):
            continue
        if ch == ".":
            word = norm[norm.rfind(" ", 0, i) + 1 : i].strip(_QUOTE_CHARS + "()[]").lower()
            if word in ABBREVIATIONS or (len(word) == 1 and word.isalpha()):
                continue
        sentences.append(norm[start : i + 1])
        start = i + 2
    sentences.append(norm[start:])
    return sentences


@dataclass(frozen=True)
class Passage:
    id: str
    book_id: str
    split: str
    text: str
    sentences: tuple[str, ...]

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValueError(f"invalid split {self.split!r}")
        if not self.sentences:
            raise ValueError("passage has no sentences")

    @property
    def norm_text(self) -> str:
        return " ".join(self.sentences)


def make_passage(text: str, id: str = "p0", book_id: str = "b0", split: str = "test") -> Passage:
    return Passage(id=id, book_id=book_id, split=split, text=text,
                   sentences=tuple(split_sentences(text)))


@dataclass(frozen=True)
class QAPair:
    question: str
    answer: str
    wh: str | None = None
    answer_type: str | None = None
    source: str = SOURCE_GT
    stage: str | None = None

    def __post_init__(self):
        if not normalize_ws(self.question):
            raise ValueError("question is empty")
        if not normalize_ws(self.answer):
            raise ValueError("answer is empty")
        if self.wh is not None and self.wh not in WH_CLASSES:
            raise ValueError(f"invalid wh {self.wh!r}")
        if self.answer_type is not None and self.answer_type not in ANSWER_TYPES:
            raise ValueError(f"invalid answer_type {self.answer_type!r}")
        if self.source not in (SOURCE_GT, SOURCE_GENERATED):
            raise ValueError(f"invalid source {self.source!r}")
        if (self.stage is not None) != (self.source == SOURCE_GENERATED):
            raise ValueError("stage must be present iff the pair is generated")
        if self.stage is not None and self.stage not in STAGES:
            raise ValueError(f"invalid stage {self.stage!r}")


@dataclass(frozen=True)
class LoadReport:
    records: int = 0
    passages: int = 0
    qa_pairs: int = 0
    skipped: int = 0
    warnings: tuple[str, ...] = ()


@dataclass
class Dataset:
    passages: tuple[Passage, ...]
    gt_pairs: dict[str, tuple[QAPair, ...]]
    load_report: LoadReport | None = field(default=None, compare=False)

    def passage_by_id(self, pid: str) -> Passage:
        try:
            return self._index[pid]
        except AttributeError:
            self._index = {p.id: p for p in self.passages}
            return self._index[pid]


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: tuple[str, ...]
    counts: dict


def _parse_passage_record(obj: Mapping) -> Passage:
    for key in ("id", "book_id", "split", "text"):
        if not isinstance(obj.get(key), str):
            raise DatasetFormatError(f"passage record missing string field {key!r}")
    return make_passage(obj["text"], id=obj["id"], book_id=obj["book_id"], split=obj["split"])


def _parse_qa_record(obj: Mapping) -> tuple[str, QAPair]:
    for key in ("passage_id", "question", "answer"):
        if not isinstance(obj.get(key), str):
            raise DatasetFormatError(f"qa record missing string field {key!r}")
    wh = obj.get("wh")
    if wh is not None and wh not in WH_CLASSES:
        raise DatasetFormatError(f"qa record has invalid wh {wh!r}")
    try:
        pair = QAPair(question=obj["question"], answer=obj["answer"], wh=wh)
    except ValueError as e:
        raise DatasetFormatError(str(e)) from e
    return obj["passage_id"], pair


def _load_canonical_jsonl(path: Path, skip_threshold: int):
    passages: list[Passage] = []
    seen_ids: set[str] = set()
    pairs: dict[str, list[QAPair]] = {}
    records = skipped = 0
    warnings: list[str] = []

    def fail(lineno: int, msg: str):
        nonlocal skipped
        skipped += 1
        if skipped > skip_threshold:
            raise DatasetFormatError(f"{path}:{lineno}: {msg}")
        warning = f"line {lineno} skipped: {msg}"
        warnings.append(warning)
        log.warning("%s: %s", path, warning)

    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            records += 1
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                fail(lineno, f"invalid JSON ({e})")
                continue
            kind = obj.get("kind") if isinstance(obj, dict) else None
            try:
                if kind == "passage":
                    p = _parse_passage_record(obj)
                    if p.id in seen_ids:
                        raise DatasetFormatError(f"duplicate passage id {p.id!r}")
                    seen_ids.add(p.id)
                    passages.append(p)
                elif kind == "qa":
                    pid, pair = _parse_qa_record(obj)
                    if pid not in seen_ids:
                        raise DatasetFormatError(f"qa record references unknown passage {pid!r}")
                    pairs.setdefault(pid, []).append(pair)
                else:
                    raise DatasetFormatError(f"unknown record kind {kind!r}")
            except DatasetFormatError as e:
                fail(lineno, str(e))
    return passages, pairs, records, skipped, warnings


def _load_mapped_csv(path: Path, column_map: Mapping[str, str], skip_threshold: int):
    for key in ("text", "question", "answer"):
        if key not in column_map:
            raise ValueError(f"column_map must name the {key!r} column")
    passages: list[Passage] = []
    pairs: dict[str, list[QAPair]] = {}
    by_text: dict[tuple[str, str], str] = {}
    records = skipped = 0
    warnings: list[str] = []

    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for lineno, row in enumerate(reader, start=2):
            records += 1
            try:
                text = row[column_map["text"]]
                question = row[column_map["question"]]
                answer = row[column_map["answer"]]
                book = row.get(column_map.get("book_id", ""), "") or "book0"
                split = row.get(column_map.get("split", ""), "") or "train"
                key = (book, normalize_ws(text))
                pid = by_text.get(key)
                if pid is None:
                    pid = f"{book}-{len(by_text):04d}"
                    passages.append(make_passage(text, id=pid, book_id=book, split=split))
                    by_text[key] = pid
                pairs.setdefault(pid, []).append(QAPair(question=question, answer=answer))
            except (KeyError, ValueError) as e:
                skipped += 1
                if skipped > skip_threshold:
                    raise DatasetFormatError(f"{path}:{lineno}: {e}") from e
                warning = f"line {lineno} skipped: {e}"
                warnings.append(warning)
                log.warning("%s: %s", path, warning)
    return passages, pairs, records, skipped, warnings


def load_dataset(path, format: str = "canonical_jsonl",
                 column_map: Mapping[str, str] | None = None,
                 skip_threshold: int = 0) -> Dataset:
    """Load a dataset file; malformed records beyond skip_threshold fail hard.

    The returned Dataset carries a LoadReport with record and skip counts.
    """
    path = Path(path)
    if format == "canonical_jsonl":
        passages, pairs, records, skipped, warnings = _load_canonical_jsonl(path, skip_threshold)
    elif format == "mapped_csv":
        if column_map is None:
            raise ValueError("mapped_csv requires a column_map")
        passages, pairs, records, skipped, warnings = _load_mapped_csv(path, column_map, skip_threshold)
    else:
        raise ValueError(f"unknown format {format!r}")
    report = LoadReport(records=records, passages=len(passages),
                        qa_pairs=sum(len(v) for v in pairs.values()),
                        skipped=skipped, warnings=tuple(warnings))
    return Dataset(passages=tuple(passages),
                   gt_pairs={pid: tuple(v) for pid, v in pairs.items()},
                   load_report=report)


def passage_record(p: Passage) -> dict:
    return {"kind": "passage", "id": p.id, "book_id": p.book_id, "split": p.split, "text": p.text}


def qa_record(pid: str, pair: QAPair) -> dict:
    return {"kind": "qa", "passage_id": pid, "question": pair.question,
            "answer": pair.answer, "wh": pair.wh}


def write_dataset(d: Dataset, path) -> None:
    """Write canonical JSONL: each passage line followed by its qa lines."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for p in d.passages:
            fh.write(json.dumps(passage_record(p), ensure_ascii=False) + "\n")
            for pair in d.gt_pairs.get(p.id, ()):
                fh.write(json.dumps(qa_record(p.id, pair), ensure_ascii=False) + "\n")


def validate_dataset(d: Dataset) -> ValidationReport:
    """Check every type invariant; reports violations, never raises."""
    violations: list[str] = []
    seen: set[str] = set()
    split_counts = {s: 0 for s in SPLITS}
    for p in d.passages:
        if p.id in seen:
            violations.append(f"{p.id}: duplicate passage id")
        seen.add(p.id)
        split_counts[p.split] = split_counts.get(p.split, 0) + 1
        joined = " ".join(p.sentences)
        if joined != normalize_ws(p.text):
            violations.append(
                f"{p.id}: sentence concatenation differs from text "
                f"({joined!r} != {normalize_ws(p.text)!r})"
            )
        if p.split == "train" and not d.gt_pairs.get(p.id):
            violations.append(f"{p.id}: train passage has no ground-truth pairs")
    for pid, pair_list in d.gt_pairs.items():
        if pid not in seen:
            violations.append(f"{pid}: gt_pairs key has no matching passage")
        for i, pair in enumerate(pair_list):
            if pair.source != SOURCE_GT:
                violations.append(f"{pid}: pair {i} is not ground truth")
    counts = {
        "passages": dict(split_counts),
        "gt_pairs": sum(len(v) for v in d.gt_pairs.values()),
    }
    return ValidationReport(ok=not violations, violations=tuple(violations), counts=counts)


def iter_gt(d: Dataset) -> Iterable[tuple[Passage, int, QAPair]]:
    """Yield (passage, index, pair) in dataset order then ingestion order."""
    for p in d.passages:
        for j, pair in enumerate(d.gt_pairs.get(p.id, ())):
            yield p, j, pair
