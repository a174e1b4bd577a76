"""Deterministic text normalization and surface-overlap metrics.

Every metric in this package goes through :func:`tokenize` so that numbers
are comparable across modules. The lemmatizer is a small rule-based suffix
stripper (see docs/text_rules.md for the full rule table); it is meant for
overlap comparison, not linguistic correctness, and both sides of a
comparison are always lemmatized with the same rules.
"""

from __future__ import annotations

import math
import string
from collections import Counter
from dataclasses import dataclass
from importlib import resources
from typing import Callable, Sequence

import numpy as np

_STRIP_CHARS = string.punctuation + "“”‘«»—–‐‑…"
_VOWELS = "aeiou"


def _load_wordlist(name: str) -> frozenset[str]:
    text = resources.files("qagkit.data").joinpath(name).read_text(encoding="utf-8")
    words = set()
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(line)
    return frozenset(words)


STOPWORDS: frozenset[str] = _load_wordlist("stopwords.txt")
ABBREVIATIONS: frozenset[str] = _load_wordlist("abbreviations.txt")


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, strip edge punctuation, drop empties.

    Curly apostrophes are normalized to straight ones before splitting so
    contractions keep a single form.
    """
    out = []
    for raw in text.replace("’", "'").lower().split():
        tok = raw.strip(_STRIP_CHARS)
        if tok:
            out.append(tok)
    return out


def _is_consonant(ch: str) -> bool:
    return ch.isalpha() and ch not in _VOWELS


def _has_vowel(stem: str) -> bool:
    return any(ch in _VOWELS for ch in stem)


def _cvc(stem: str) -> bool:
    return (
        len(stem) >= 3
        and _is_consonant(stem[-1])
        and stem[-2] in _VOWELS
        and _is_consonant(stem[-3])
    )


def _repair(stem: str) -> str:
    # undouble trailing consonant (runn -> run) or restore a silent e (mak -> make)
    if len(stem) >= 2 and stem[-1] == stem[-2] and _is_consonant(stem[-1]) and stem[-1] not in "lsz":
        return stem[:-1]
    if _cvc(stem) and stem[-1] not in "wxy":
        return stem + "e"
    return stem


def lemmatize_token(token: str) -> str:
    """Apply at most one suffix rule family; stopwords pass through unchanged."""
    if token in STOPWORDS:
        return token
    if token.endswith("'s") and len(token) >= 4:
        return token[:-2]
    if token.endswith("ing") and len(token) >= 6:
        stem = token[:-3]
        return _repair(stem) if _has_vowel(stem) else token
    if token.endswith("ied") and len(token) >= 5:
        return token[:-3] + "y"
    if token.endswith("ed") and len(token) >= 5:
        stem = token[:-2]
        return _repair(stem) if _has_vowel(stem) else token
    if token.endswith(("ss", "us", "is")):
        return token
    if token.endswith("ies") and len(token) >= 5:
        return token[:-3] + "y"
    if token.endswith(("sses", "xes", "ches", "shes")):
        return token[:-2]
    if token.endswith("s") and len(token) >= 4:
        return token[:-1]
    return token


def lemmatize_and_destop(tokens: Sequence[str]) -> list[str]:
    """Lemmatize every token, then remove tokens on the stopword list."""
    lemmas = (lemmatize_token(t) for t in tokens)
    return [t for t in lemmas if t not in STOPWORDS]


def content_tokens(text: str) -> list[str]:
    """Shorthand for lemmatize_and_destop(tokenize(text))."""
    return lemmatize_and_destop(tokenize(text))


def lcs_len(a: Sequence[str], b: Sequence[str]) -> int:
    """Length of the longest common subsequence of two token sequences."""
    if not a or not b:
        return 0
    # single-row DP over the shorter sequence
    if len(b) > len(a):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for tok in a:
        cur = [0]
        for j, other in enumerate(b, start=1):
            if tok == other:
                cur.append(prev[j - 1] + 1)
            else:
                cur.append(max(prev[j], cur[-1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: Sequence[str], reference: Sequence[str]) -> RougeScore:
    lcs = lcs_len(candidate, reference)
    p = lcs / len(candidate) if candidate else 0.0
    r = lcs / len(reference) if reference else 0.0
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return RougeScore(precision=p, recall=r, f1=f1)


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidate: Sequence[str], reference: Sequence[str], max_n: int = 4) -> float:
    """Sentence-level BLEU with add-one smoothing on zero counts for n >= 2.

    Brevity penalty exp(1 - |ref|/|cand|) applies only when the candidate is
    shorter than the reference. A zero unigram precision gives 0 outright.
    """
    if max_n < 1:
        raise ValueError("max_n must be >= 1")
    if not candidate:
        return 0.0
    log_sum = 0.0
    for n in range(1, max_n + 1):
        total = max(len(candidate) - n + 1, 0)
        cand_counts = _ngram_counts(candidate, n)
        ref_counts = _ngram_counts(reference, n)
        matched = sum(min(c, ref_counts[g]) for g, c in cand_counts.items())
        if n == 1:
            if matched == 0:
                return 0.0
            p = matched / total
        elif matched == 0:
            p = (matched + 1) / (total + 1)
        else:
            p = matched / total
        log_sum += math.log(p)
    bp = math.exp(1.0 - len(reference) / len(candidate)) if len(candidate) < len(reference) else 1.0
    return bp * math.exp(log_sum / max_n)


OverlapMetric = Callable[[Sequence[str], Sequence[str]], float]


def rouge_l_f1(candidate: Sequence[str], reference: Sequence[str]) -> float:
    return rouge_l(candidate, reference).f1


def greedy_match_f1(cand_vecs: Sequence[Sequence[float]], ref_vecs: Sequence[Sequence[float]]) -> float:
    """Greedy-matching F1 over two lists of unit vectors.

    Precision is the mean over candidate vectors of the best cosine against
    any reference vector; recall is symmetric. No idf weighting, no baseline
    rescaling. Vectors are assumed unit length, so cosine is a dot product.
    """
    a = np.asarray(cand_vecs, dtype=float)
    b = np.asarray(ref_vecs, dtype=float)
    if a.size == 0 or b.size == 0:
        raise ValueError("vector lists must be non-empty")
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ValueError("vectors must share one dimension")
    sims = a @ b.T
    p = float(sims.max(axis=1).mean())
    r = float(sims.max(axis=0).mean())
    if p + r <= 0:
        return 0.0
    return 2 * p * r / (p + r)
