import random
from pathlib import Path

import pytest

from qagkit.corpus import Dataset, QAPair, load_dataset, make_passage

DATA_DIR = Path(__file__).parent / "data"
FIXTURE_CORPUS = DATA_DIR / "fixture_corpus.jsonl"

WORDS = [
    "hunter", "fox", "miller", "goose", "princess", "dragon", "farmer", "wolf",
    "raven", "fisherman", "forest", "river", "mountain", "village", "castle",
    "meadow", "cave", "harbor", "brave", "golden", "quiet", "tall", "hungry",
    "clever", "tired", "silver", "young", "gentle", "bread", "ring", "song",
    "stone", "lantern", "boat", "garden", "tower",
]


def synthetic_sentence(rng: random.Random) -> str:
    n = rng.randint(4, 9)
    words = [rng.choice(WORDS) for _ in range(n)]
    return (" ".join(words)).capitalize() + "."


def synthetic_passage(rng: random.Random, pid: str, n_sentences: int | None = None,
                      split: str = "test"):
    n = n_sentences if n_sentences is not None else rng.randint(2, 6)
    text = " ".join(synthetic_sentence(rng) for _ in range(n))
    return make_passage(text, id=pid, book_id="synth", split=split)


def synthetic_dataset(rng: random.Random, n_passages: int, max_pairs: int = 4,
                      split: str = "test") -> Dataset:
    passages = []
    gt = {}
    for i in range(n_passages):
        p = synthetic_passage(rng, f"syn-{i:03d}", split=split)
        passages.append(p)
        pairs = []
        for _ in range(rng.randint(1, max_pairs)):
            q = "What happened to the " + rng.choice(WORDS) + "?"
            a = " ".join(rng.choice(WORDS) for _ in range(rng.randint(2, 6)))
            pairs.append(QAPair(question=q, answer=a))
        gt[p.id] = tuple(pairs)
    return Dataset(passages=tuple(passages), gt_pairs=gt)


@pytest.fixture(scope="session")
def fixture_dataset() -> Dataset:
    return load_dataset(FIXTURE_CORPUS)
