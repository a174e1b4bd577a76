"""Convert the original storybook-QA release layout to canonical JSONL.

The upstream release ships per-book CSV pairs: `<book>-story.csv` with one
row per section (columns `section`, `text`) and `<book>-questions.csv` with
one row per question (columns `cor_section`, `question`, `answer1`).
Column names are overridable for layout drift. Each (book, section) row
becomes one passage; questions attach to their section's passage. Questions
referencing unknown sections are counted and skipped.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
from pathlib import Path

log = logging.getLogger(__name__)


def convert(story_dir, question_dir, out_path, split="train",
            section_col="section", text_col="text",
            q_section_col="cor_section", question_col="question",
            answer_col="answer1") -> dict:
    story_dir = Path(story_dir)
    question_dir = Path(question_dir)
    stats = {"passages": 0, "qa_pairs": 0, "skipped_questions": 0, "books": 0}

    story_files = sorted(story_dir.glob("*-story.csv"))
    if not story_files:
        raise FileNotFoundError(f"no *-story.csv files under {story_dir}")

    with open(out_path, "w", encoding="utf-8", newline="\n") as out:
        for story_file in story_files:
            book = story_file.name[: -len("-story.csv")]
            stats["books"] += 1
            passages = {}
            with open(story_file, encoding="utf-8", newline="") as fh:
                for row in csv.DictReader(fh):
                    section = str(row[section_col]).strip()
                    text = " ".join(str(row[text_col]).split())
                    if not text:
                        continue
                    pid = f"{book}:{section}"
                    passages[section] = pid
                    out.write(json.dumps({"kind": "passage", "id": pid, "book_id": book,
                                          "split": split, "text": text},
                                         ensure_ascii=False) + "\n")
                    stats["passages"] += 1

                    question_file = question_dir / f"{book}-questions.csv"
                    if question_file.exists():
                        for qrow in _questions_for(question_file, section, q_section_col,
                                                   question_col, answer_col):
                            out.write(json.dumps({"kind": "qa", "passage_id": pid,
                                                  "question": qrow[0], "answer": qrow[1],
                                                  "wh": None}, ensure_ascii=False) + "\n")
                            stats["qa_pairs"] += 1

            question_file = question_dir / f"{book}-questions.csv"
            if question_file.exists():
                with open(question_file, encoding="utf-8", newline="") as fh:
                    for qrow in csv.DictReader(fh):
                        section = str(qrow[q_section_col]).strip().split(",")[0].strip()
                        if section not in passages:
                            stats["skipped_questions"] += 1
            else:
                log.warning("no question file for %s", book)
    return stats


def _questions_for(question_file, section, q_section_col, question_col, answer_col):
    with open(question_file, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            # multi-section references keep their first section
            row_section = str(row[q_section_col]).strip().split(",")[0].strip()
            if row_section != section:
                continue
            question = " ".join(str(row[question_col]).split())
            answer = " ".join(str(row[answer_col]).split())
            if question and answer:
                yield question, answer


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO)
    parser = argparse.ArgumentParser(prog="qag-convert-fairytaleqa")
    parser.add_argument("--story-dir", required=True)
    parser.add_argument("--question-dir", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--split", default="train", choices=("train", "validation", "test"))
    parser.add_argument("--section-col", default="section")
    parser.add_argument("--text-col", default="text")
    parser.add_argument("--q-section-col", default="cor_section")
    parser.add_argument("--question-col", default="question")
    parser.add_argument("--answer-col", default="answer1")
    args = parser.parse_args(argv)
    stats = convert(args.story_dir, args.question_dir, args.out, split=args.split,
                    section_col=args.section_col, text_col=args.text_col,
                    q_section_col=args.q_section_col, question_col=args.question_col,
                    answer_col=args.answer_col)
    print(json.dumps(stats))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
