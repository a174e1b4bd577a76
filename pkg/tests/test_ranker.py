import io
import math
import random

import pytest

from qagkit.corpus import Dataset, QAPair, make_passage
from qagkit.modelio import MockBackend, PairScore
from qagkit.ranker import (
    ContrastiveExample,
    ScoredCandidate,
    build_contrastive_examples,
    ranking_score,
    read_ranked,
    score_candidates,
    select_top_k,
    select_top_k_em,
    write_ranked,
)


def dataset_with_counts(ms):
    passages = []
    gt = {}
    for i, m in enumerate(ms):
        p = make_passage(f"Passage number {i} speaks of ancient things.", id=f"p{i}")
        passages.append(p)
        gt[p.id] = tuple(
            QAPair(question=f"What is fact {i}-{j}?", answer=f"fact {i}-{j}")
            for j in range(m)
        )
    return Dataset(passages=tuple(passages), gt_pairs=gt)


def cand(question, answer, score):
    return ScoredCandidate(
        pair=QAPair(question=question, answer=answer, source="generated", stage="qa2"),
        score=score,
    )


def random_candidates(rng, n=None):
    n = n or rng.randint(1, 12)
    words = ["ruby", "ember", "willow", "stone", "cloud", "thorn"]
    out = []
    for i in range(n):
        phrase = " ".join(rng.choice(words) for _ in range(rng.randint(1, 4)))
        score = round(rng.uniform(-1, 1), 2)  # coarse grid so ties happen
        out.append(cand(f"Why {phrase} {i}?", phrase, score))
    return out


class TestContrastive:
    def test_m3(self):
        examples = build_contrastive_examples(dataset_with_counts([3]))
        pos = [e for e in examples if e.label == "positive"]
        neg = [e for e in examples if e.label == "negative"]
        assert len(pos) == 3 and len(neg) == 6

    def test_m1_no_negatives(self):
        examples = build_contrastive_examples(dataset_with_counts([1]))
        assert [e.label for e in examples] == ["positive"]

    def test_two_passages_no_crossing(self):
        d = dataset_with_counts([2, 2])
        examples = build_contrastive_examples(d)
        assert sum(e.label == "positive" for e in examples) == 4
        assert sum(e.label == "negative" for e in examples) == 4
        gt_texts = {p.id: {(q.question, a.answer) for q in d.gt_pairs[p.id]
                           for a in d.gt_pairs[p.id]} for p in d.passages}
        for e in examples:
            assert (e.question, e.answer) in gt_texts[e.passage_id]

    def test_grid_order_i_major(self):
        examples = build_contrastive_examples(dataset_with_counts([2]))
        got = [(e.question[-4:-1], e.answer[-3:], e.label) for e in examples]
        assert got == [
            ("0-0", "0-0", "positive"),
            ("0-0", "0-1", "negative"),
            ("0-1", "0-0", "negative"),
            ("0-1", "0-1", "positive"),
        ]

    def test_label_validation(self):
        with pytest.raises(ValueError):
            ContrastiveExample(passage_id="p", question="q", answer="a", label="maybe")


class TestRankingScore:
    def test_symmetry_zero(self):
        assert ranking_score(PairScore(1.5, 1.5)) == 0.0

    def test_softmax_difference(self):
        expected = (math.e**2 - 1) / (math.e**2 + 1)
        assert ranking_score(PairScore(2.0, 0.0)) == pytest.approx(expected, abs=1e-4)

    def test_saturation_bounds(self):
        assert ranking_score(PairScore(20.0, -20.0)) == pytest.approx(1.0, abs=1e-12)
        assert ranking_score(PairScore(-20.0, 20.0)) == pytest.approx(-1.0, abs=1e-12)
        assert abs(ranking_score(PairScore(20.0, -20.0))) <= 1.0
        assert -1.0 < ranking_score(PairScore(8.0, -8.0)) < 1.0

    def test_monotone_in_gap(self):
        scores = [ranking_score(PairScore(g, 0.0)) for g in (-2.0, -0.5, 0.0, 0.5, 2.0)]
        assert scores == sorted(scores)


class TestSelectTopK:
    def test_duplicate_suppression(self):
        cands = [
            cand("q one?", "the golden bird", 0.9),
            cand("q two?", "the golden bird", 0.8),
            cand("q three?", "a silver fish", 0.5),
        ]
        picked = select_top_k(cands, 2, criterion="answer", metric="rouge_l")
        assert [c.score for c in picked] == [0.9, 0.5]
        assert picked[0].rescaled == 0.9
        assert picked[1].rescaled == 0.5

    def test_zero_overlap_is_stable_sort(self):
        rng = random.Random(23)
        for _ in range(100):
            n = rng.randint(1, 10)
            cands = [cand(f"Why w{i}x?", f"w{i}x", round(rng.uniform(-1, 1), 1))
                     for i in range(n)]
            k = rng.randint(1, n + 2)
            picked = select_top_k(cands, k, criterion="answer", metric="rouge_l")
            expected = sorted(range(n), key=lambda i: -cands[i].score)[:k]
            assert [c.pair for c in picked] == [cands[i].pair for i in expected]

    def test_constant_zero_metric_is_stable_sort(self):
        rng = random.Random(29)
        for _ in range(500):
            cands = random_candidates(rng)
            k = rng.randint(1, len(cands) + 2)
            picked = select_top_k(cands, k, criterion="answer", metric=lambda a, b: 0.0)
            expected = sorted(range(len(cands)), key=lambda i: -cands[i].score)[:k]
            assert [c.pair for c in picked] == [cands[i].pair for i in expected]

    def test_first_pick_is_global_max(self):
        rng = random.Random(31)
        for _ in range(200):
            cands = random_candidates(rng)
            picked = select_top_k(cands, 1, criterion="question", metric="bleu")
            best = max(range(len(cands)), key=lambda i: (cands[i].score, -i))
            assert picked[0].pair == cands[best].pair
            assert picked[0].rescaled == cands[best].score

    def test_k_exceeds_pool(self):
        cands = [cand("Why a?", "a", 0.3), cand("Why b?", "b", 0.7)]
        picked = select_top_k(cands, 10)
        assert len(picked) == 2
        assert [c.score for c in picked] == [0.7, 0.3]

    def test_rescaled_never_above_score(self):
        rng = random.Random(37)
        for _ in range(100):
            cands = random_candidates(rng)
            for c in select_top_k(cands, len(cands)):
                assert c.rescaled <= c.score + 1e-15

    def test_empty_pool(self):
        with pytest.raises(ValueError):
            select_top_k([], 3)

    def test_outputs_are_distinct_inputs(self):
        rng = random.Random(41)
        cands = random_candidates(rng, n=8)
        picked = select_top_k(cands, 5)
        ids = [id(c.pair) for c in picked]
        assert len(set(ids)) == len(ids)
        assert all(any(c.pair is orig.pair for orig in cands) for c in picked)


class TestSelectTopKEm:
    def test_duplicate_answers_keep_best(self):
        cands = [cand("q1?", "Same Answer", 0.8), cand("q2?", "same  answer", 0.9)]
        picked = select_top_k_em(cands, 5, criterion="answer")
        assert len(picked) == 1
        assert picked[0].score == 0.9

    def test_unique_criteria_is_plain_sort(self):
        cands = [cand("q?", f"answer {i}", s) for i, s in enumerate([0.1, 0.9, 0.5])]
        picked = select_top_k_em(cands, 3, criterion="answer")
        assert [c.score for c in picked] == [0.9, 0.5, 0.1]

    def test_three_duplicates_two_unique(self):
        cands = [cand("q1?", "alpha", 0.9), cand("q2?", "alpha", 0.7),
                 cand("q3?", "beta", 0.4)]
        picked = select_top_k_em(cands, 3, criterion="answer")
        assert len(picked) == 2
        assert [c.score for c in picked] == [0.9, 0.4]

    def test_k1_matches_algorithm(self):
        rng = random.Random(43)
        for _ in range(500):
            cands = random_candidates(rng)
            alg = select_top_k(cands, 1, criterion="answer", metric="rouge_l")
            em = select_top_k_em(cands, 1, criterion="answer")
            assert alg[0].pair == em[0].pair
            assert alg[0].score == em[0].score

    def test_empty_pool(self):
        with pytest.raises(ValueError):
            select_top_k_em([], 1)


class TestScoreAndIO:
    def test_score_candidates_uses_backend(self):
        p = make_passage("Golden bird sang.", id="pp")
        pairs = [QAPair(question="golden bird", answer="sang golden",
                        source="generated", stage="qa2")]
        scored = score_candidates(p, pairs, MockBackend())
        assert scored[0].score == pytest.approx(math.tanh(2.0))

    def test_ranked_roundtrip(self):
        selected = [cand("Why one?", "one", 0.9), cand("Why two?", "two", 0.5)]
        selected = [ScoredCandidate(pair=c.pair, score=c.score, rescaled=c.score)
                    for c in selected]
        buf = io.StringIO()
        assert write_ranked(buf, "px", selected) == 2
        buf.seek(0)
        grouped = read_ranked(buf)
        assert [p.question for p in grouped["px"]] == ["Why one?", "Why two?"]
