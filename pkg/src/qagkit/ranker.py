"""Contrastive training data, ranking scores, and overlap-aware selection.

Selection walks the candidate pool greedily: each round rescales every
remaining candidate by its worst lexical overlap against the already
selected items (s* = s - overlap * |s|, overlap measured on lemmatized,
stopword-free tokens) and picks the best rescaled score. Ties always go to
the earlier input index, so results are platform-stable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import IO, Callable, Iterable, Sequence

from .corpus import Dataset, Passage, QAPair
from .modelio import Backend, PairScore
from .textproc import bleu, content_tokens, rouge_l_f1

OVERLAP_METRICS: dict[str, Callable[[Sequence[str], Sequence[str]], float]] = {
    "rouge_l": rouge_l_f1,
    "bleu": lambda cand, ref: bleu(cand, ref, 4),
}
CRITERIA = ("question", "answer")


@dataclass(frozen=True)
class ContrastiveExample:
    passage_id: str
    question: str
    answer: str
    label: str

    def __post_init__(self):
        if self.label not in ("positive", "negative"):
            raise ValueError(f"invalid label {self.label!r}")


@dataclass(frozen=True)
class ScoredCandidate:
    pair: QAPair
    score: float
    rescaled: float | None = None


def build_contrastive_examples(d: Dataset) -> list[ContrastiveExample]:
    """Full in-passage grid: (q_i, a_j) is positive iff i == j.

    Per passage with m ground-truth pairs this yields m positives and
    m^2 - m negatives; pairs never cross passages. Order is passage order,
    then i-major j-minor.
    """
    out = []
    for p in d.passages:
        pairs = d.gt_pairs.get(p.id, ())
        for i, qi in enumerate(pairs):
            for j, aj in enumerate(pairs):
                out.append(ContrastiveExample(
                    passage_id=p.id, question=qi.question, answer=aj.answer,
                    label="positive" if i == j else "negative"))
    return out


def ranking_score(ps: PairScore) -> float:
    """Softmax(pos) - softmax(neg), i.e. tanh of half the logit gap; in (-1, 1)."""
    if not (math.isfinite(ps.pos_logit) and math.isfinite(ps.neg_logit)):
        raise ValueError("logits must be finite")
    return math.tanh((ps.pos_logit - ps.neg_logit) / 2.0)


def score_candidates(p: Passage, pairs: Iterable[QAPair], backend: Backend) -> list[ScoredCandidate]:
    return [
        ScoredCandidate(pair=pair, score=ranking_score(backend.score_pair(p, pair.question, pair.answer)))
        for pair in pairs
    ]


def _criterion_text(c: ScoredCandidate, criterion: str) -> str:
    if criterion == "question":
        return c.pair.question
    if criterion == "answer":
        return c.pair.answer
    raise ValueError(f"criterion must be one of {CRITERIA}, got {criterion!r}")


def select_top_k(cands: Sequence[ScoredCandidate], k: int, criterion: str = "answer",
                 metric="rouge_l") -> list[ScoredCandidate]:
    """Greedy overlap-mitigated selection of min(k, len(cands)) candidates.

    metric names a registered overlap metric ("rouge_l" or "bleu") or is a
    callable over two token sequences. Returned items carry the rescaled
    score they were picked with.
    """
    if not cands:
        raise ValueError("candidate list is empty")
    if k < 1:
        raise ValueError("k must be >= 1")
    metric_fn = OVERLAP_METRICS[metric] if isinstance(metric, str) else metric
    tokens = [content_tokens(_criterion_text(c, criterion)) for c in cands]

    remaining = list(range(len(cands)))
    selected_tokens: list[list[str]] = []
    picked: list[ScoredCandidate] = []
    while remaining and len(picked) < k:
        best_idx = None
        best_rescaled = None
        for idx in remaining:
            s = cands[idx].score
            if selected_tokens:
                overlap = max(metric_fn(tokens[idx], sel) for sel in selected_tokens)
                rescaled = s - overlap * abs(s)
            else:
                rescaled = s
            if best_rescaled is None or rescaled > best_rescaled:
                best_idx, best_rescaled = idx, rescaled
        picked.append(ScoredCandidate(pair=cands[best_idx].pair, score=cands[best_idx].score,
                                      rescaled=best_rescaled))
        selected_tokens.append(tokens[best_idx])
        remaining.remove(best_idx)
    return picked


def _normalize_criterion(text: str) -> str:
    return " ".join(text.lower().split())


def select_top_k_em(cands: Sequence[ScoredCandidate], k: int,
                    criterion: str = "answer") -> list[ScoredCandidate]:
    """Exact-match baseline: keep the best-scored candidate per unique
    normalized criterion string, then take the top k by raw score."""
    if not cands:
        raise ValueError("candidate list is empty")
    if k < 1:
        raise ValueError("k must be >= 1")
    best_by_key: dict[str, int] = {}
    for idx, c in enumerate(cands):
        key = _normalize_criterion(_criterion_text(c, criterion))
        prev = best_by_key.get(key)
        if prev is None or c.score > cands[prev].score:
            best_by_key[key] = idx
    survivors = sorted(best_by_key.values())
    survivors.sort(key=lambda i: -cands[i].score)  # stable: ties keep input order
    return [cands[i] for i in survivors[:k]]


def ranked_record(passage_id: str, rank: int, c: ScoredCandidate) -> dict:
    return {"passage_id": passage_id, "rank": rank, "score": c.score,
            "rescaled": c.rescaled, "question": c.pair.question,
            "answer": c.pair.answer, "wh": c.pair.wh}


def write_ranked(fh: IO[str], passage_id: str, selected: Sequence[ScoredCandidate]) -> int:
    for rank, c in enumerate(selected, start=1):
        fh.write(json.dumps(ranked_record(passage_id, rank, c), ensure_ascii=False) + "\n")
    return len(selected)


def read_ranked(fh: IO[str]) -> dict[str, list[QAPair]]:
    """Read a ranked JSONL file into rank-ordered QAPairs per passage."""
    grouped: dict[str, list[tuple[int, QAPair]]] = {}
    for line in fh:
        line = line.strip()
        if not line:
            continue
        obj = json.loads(line)
        pair = QAPair(question=obj["question"], answer=obj["answer"], wh=obj.get("wh"),
                      source="generated", stage="qa2")
        grouped.setdefault(obj["passage_id"], []).append((obj["rank"], pair))
    return {pid: [pair for _, pair in sorted(items, key=lambda t: t[0])]
            for pid, items in grouped.items()}


def write_contrastive(fh: IO[str], examples: Iterable[ContrastiveExample]) -> tuple[int, int]:
    """Write contrastive examples; returns (positives, negatives) written."""
    pos = neg = 0
    for ex in examples:
        fh.write(json.dumps({"passage_id": ex.passage_id, "question": ex.question,
                             "answer": ex.answer, "label": ex.label}, ensure_ascii=False) + "\n")
        if ex.label == "positive":
            pos += 1
        else:
            neg += 1
    return pos, neg
