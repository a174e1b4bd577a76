"""qagkit: question-answer pair generation, ranking and evaluation toolkit."""

__version__ = "0.1.0"

from .corpus import Dataset, Passage, QAPair, load_dataset, split_sentences, validate_dataset
from .modelio import BackendConfig, MockBackend, PairScore, RemoteBackend, make_backend
from .genpipe import CandidateSet, TrainExample, run_pipeline
from .ranker import ScoredCandidate, build_contrastive_examples, ranking_score, select_top_k, select_top_k_em
from .evaluation import MetricReport, classify_answer_type, classify_wh, krippendorff_alpha, map_at_n

__all__ = [
    "BackendConfig",
    "CandidateSet",
    "Dataset",
    "MetricReport",
    "MockBackend",
    "PairScore",
    "Passage",
    "QAPair",
    "RemoteBackend",
    "ScoredCandidate",
    "TrainExample",
    "build_contrastive_examples",
    "classify_answer_type",
    "classify_wh",
    "krippendorff_alpha",
    "load_dataset",
    "make_backend",
    "map_at_n",
    "ranking_score",
    "run_pipeline",
    "select_top_k",
    "select_top_k_em",
    "split_sentences",
    "validate_dataset",
]
