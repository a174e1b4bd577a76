"""Measurement surface: MAP@N, type classification, diversity, agreement.

MAP@N concatenates each pair's question and answer with a single space,
takes the best similarity across the top-N candidates per ground-truth
pair, and averages over ground-truth pairs. Rouge-L similarity runs on raw
tokenized text (lemmatization is reserved for overlap mitigation in the
ranker); embedding similarity uses greedy matching over whatever token
vectors the backend provides.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .corpus import WH_CLASSES, WH_WORDS, Dataset, Passage, QAPair
from .modelio import Backend
from .textproc import greedy_match_f1, rouge_l_f1, tokenize

SIMS = ("rouge_l_f1", "embed_f1")

_WH_LOOKUP = {w.lower(): w for w in WH_WORDS}
_WH_LOOKUP["whose"] = "Who"
_WH_LOOKUP["whom"] = "Who"

_TERMINAL_PUNCT = ".!?,;:"


@dataclass
class MetricReport:
    map_rouge: dict[int, float] | None = None
    map_embed: dict[int, float] | None = None
    wh_distribution: dict[str, float] | None = None
    answer_type_distribution: dict[str, float] | None = None
    counts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def keyed(m):
            return None if m is None else {str(k): m[k] for k in sorted(m)}
        return {
            "map_rouge": keyed(self.map_rouge),
            "map_embed": keyed(self.map_embed),
            "wh_distribution": self.wh_distribution,
            "answer_type_distribution": self.answer_type_distribution,
            "counts": self.counts,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2, sort_keys=True)


def _pair_text(pair: QAPair) -> str:
    return pair.question + " " + pair.answer


def map_at_n(gt: Sequence[QAPair], cands: Sequence[QAPair], n: int,
             sim: str = "rouge_l_f1", backend: Backend | None = None) -> float:
    """Mean over gt pairs of the best similarity among the first n candidates."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not gt:
        raise ValueError("gt must be non-empty")
    if sim not in SIMS:
        raise ValueError(f"sim must be one of {SIMS}")
    if sim == "embed_f1" and backend is None:
        raise ValueError("embed_f1 requires a backend")
    if not cands:
        return 0.0
    top = cands[: min(n, len(cands))]
    if sim == "rouge_l_f1":
        gt_feats = [tokenize(_pair_text(g)) for g in gt]
        cand_feats = [tokenize(_pair_text(c)) for c in top]
        def score(g, c):
            return rouge_l_f1(c, g)
    else:
        gt_feats = [backend.embed_tokens(_pair_text(g)) for g in gt]
        cand_feats = [backend.embed_tokens(_pair_text(c)) for c in top]
        def score(g, c):
            if not g or not c:
                return 0.0
            return greedy_match_f1(c, g)
    total = 0.0
    for g in gt_feats:
        total += max(score(g, c) for c in cand_feats)
    return total / len(gt_feats)


def corpus_map_at_n(d: Dataset, ranked: Mapping[str, Sequence[QAPair]], n: int,
                    sim: str = "rouge_l_f1", backend: Backend | None = None) -> float:
    """Corpus-level MAP@N: the mean is over all gt pairs of covered passages."""
    total = 0.0
    count = 0
    for p in d.passages:
        if p.id not in ranked:
            continue
        gt = d.gt_pairs.get(p.id, ())
        if not gt:
            continue
        total += map_at_n(gt, ranked[p.id], n, sim=sim, backend=backend) * len(gt)
        count += len(gt)
    if count == 0:
        raise ValueError("no ground-truth pairs matched the ranked passages")
    return total / count


def classify_wh(question: str) -> str:
    """First interrogative token wins, scanning left to right; Other if none."""
    for tok in tokenize(question):
        wh = _WH_LOOKUP.get(tok)
        if wh is not None:
            return wh
    return "Other"


def _normalize_for_match(text: str) -> str:
    return " ".join(text.lower().split())


def classify_answer_type(p: Passage, answer: str) -> str:
    """Explicit iff the normalized answer occurs verbatim inside the passage."""
    if not answer.strip():
        raise ValueError("answer is empty")
    needle = _normalize_for_match(answer).rstrip(_TERMINAL_PUNCT).rstrip()
    haystack = _normalize_for_match(p.norm_text)
    return "Explicit" if needle and needle in haystack else "Implicit"


def diversity_report(items: Iterable[tuple[str, QAPair]], d: Dataset) -> MetricReport:
    """Interrogative and answer-type distributions over (passage_id, pair) items."""
    wh_counts = {c: 0 for c in WH_CLASSES}
    at_counts = {"Explicit": 0, "Implicit": 0}
    total = 0
    for pid, pair in items:
        passage = d.passage_by_id(pid)  # raises KeyError for unresolvable ids
        wh_counts[classify_wh(pair.question)] += 1
        at_counts[classify_answer_type(passage, pair.answer)] += 1
        total += 1
    if total == 0:
        raise ValueError("no pairs to report on")
    report = MetricReport(
        wh_distribution={c: wh_counts[c] / total for c in WH_CLASSES},
        answer_type_distribution={c: at_counts[c] / total for c in at_counts},
    )
    report.counts = {"pairs": total, **wh_counts, **at_counts}
    return report


def render_map_table(rows: Mapping[str, MetricReport]) -> str:
    """Fixed-width table: one row per system, columns Top N descending."""
    ns = sorted({n for r in rows.values() for m in (r.map_rouge, r.map_embed)
                 if m for n in m}, reverse=True)
    blocks = [("MAP@N (Rouge-L F1)", "map_rouge"), ("MAP@N (Embed F1)", "map_embed")]
    blocks = [(title, attr) for title, attr in blocks
              if any(getattr(r, attr) for r in rows.values())]
    header = ["Method"] + [f"{title} Top {n}" for title, _ in blocks for n in ns]
    widths = [max(len(header[0]), *(len(name) for name in rows))] + [len(h) for h in header[1:]]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    for name, report in rows.items():
        cells = [name.ljust(widths[0])]
        i = 1
        for _, attr in blocks:
            m = getattr(report, attr) or {}
            for n in ns:
                cell = f"{m[n]:.3f}" if n in m else "-"
                cells.append(cell.ljust(widths[i]))
                i += 1
        lines.append("  ".join(cells))
    return "\n".join(lines) + "\n"


def _collect_units(ratings: Sequence[Sequence[float | None]]) -> list[list[float]]:
    if len(ratings) < 2:
        raise ValueError("need at least two raters")
    width = max((len(r) for r in ratings), default=0)
    units = []
    for col in range(width):
        vals = []
        for row in ratings:
            if col >= len(row):
                continue
            v = row[col]
            if v is None:
                continue
            v = float(v)
            if math.isnan(v):
                continue
            vals.append(v)
        if len(vals) >= 2:
            units.append(vals)
    if not units:
        raise ValueError("need at least one item rated by two or more raters")
    return units


def krippendorff_alpha(ratings: Sequence[Sequence[float | None]],
                       level: str = "interval") -> float:
    """Coincidence-matrix alpha with pairwise exclusion of missing cells.

    ratings is raters x items; missing cells are None or NaN. level selects
    the difference function: squared value difference (interval) or the
    squared cumulative-frequency distance (ordinal). Raises when fewer than
    two raters share an item or when the pairable values carry no variance.
    """
    if level not in ("ordinal", "interval"):
        raise ValueError("level must be 'ordinal' or 'interval'")
    units = _collect_units(ratings)

    values = sorted({v for unit in units for v in unit})
    if len(values) < 2:
        raise ValueError("alpha undefined: pairable ratings have no variance")
    index = {v: i for i, v in enumerate(values)}
    size = len(values)

    coincidence = [[0.0] * size for _ in range(size)]
    for unit in units:
        weight = 1.0 / (len(unit) - 1)
        for i, a in enumerate(unit):
            for j, b in enumerate(unit):
                if i != j:
                    coincidence[index[a]][index[b]] += weight
    marginals = [sum(row) for row in coincidence]
    n_total = sum(marginals)

    if level == "interval":
        def delta2(ci, ki):
            return (values[ci] - values[ki]) ** 2
    else:
        def delta2(ci, ki):
            lo, hi = (ci, ki) if ci <= ki else (ki, ci)
            span = sum(marginals[g] for g in range(lo, hi + 1))
            return (span - (marginals[ci] + marginals[ki]) / 2.0) ** 2

    d_o = sum(coincidence[c][k] * delta2(c, k)
              for c in range(size) for k in range(size) if c != k) / n_total
    d_e = sum(marginals[c] * marginals[k] * delta2(c, k)
              for c in range(size) for k in range(size) if c != k) / (n_total * (n_total - 1))
    if d_e == 0.0:
        raise ValueError("alpha undefined: expected disagreement is zero")
    return 1.0 - d_o / d_e
