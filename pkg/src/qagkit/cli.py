"""Command-line entry point wiring corpus -> genpipe -> ranker -> evaluation.

Configuration is a single flat JSON document; command-line flags override
file values and every field has a deterministic default, so an empty config
gives a reproducible mock run. Passages are processed in parallel up to
--jobs, but outputs are written by a single writer in dataset order, making
reruns byte-identical regardless of the job count.

Exit codes: 0 success, 1 validation failure, 2 I/O failure, 3 backend failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

from . import corpus, evaluation, genpipe, ranker
from .corpus import Dataset, DatasetFormatError
from .modelio import Backend, BackendConfig, BackendError, DecodeConfig, make_backend

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_BACKEND = 3


@dataclass
class RunConfig:
    dataset: str = "dataset.jsonl"
    backend: str = "mock"  # "mock" or an http(s) endpoint URL
    k: int = 10
    criterion: str = "answer"
    overlap_metric: str = "rouge-l"
    dedup: str = "alg1"
    iterations: int = 0
    jobs: int = 1
    n_list: list[int] = field(default_factory=lambda: [1, 3, 5, 10])
    seed: int = 0  # reserved; all defaults are deterministic without it
    out: str = "out"
    timeout_ms: int = 10_000
    max_in_flight: int = 4
    beam_size: int = 4
    max_len: int = 64
    temperature: float = 0.0

    def backend_config(self) -> BackendConfig:
        decode = DecodeConfig(beam_size=self.beam_size, max_len=self.max_len,
                              temperature=self.temperature)
        if self.backend == "mock":
            return BackendConfig(kind="mock", decode=decode,
                                 timeout_ms=self.timeout_ms, max_in_flight=self.max_in_flight)
        return BackendConfig(kind="remote", endpoint=self.backend, decode=decode,
                             timeout_ms=self.timeout_ms, max_in_flight=self.max_in_flight)

    def overlap_metric_key(self) -> str:
        return {"rouge-l": "rouge_l", "bleu": "bleu"}[self.overlap_metric]


def load_config(path: str | None, overrides: dict) -> RunConfig:
    values = {}
    if path:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        if not isinstance(doc, dict):
            raise DatasetFormatError("config file must hold a JSON object")
        known = {f.name for f in fields(RunConfig)}
        unknown = set(doc) - known
        if unknown:
            raise DatasetFormatError(f"unknown config keys: {sorted(unknown)}")
        values.update(doc)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**values)


def _load_and_validate(cfg: RunConfig) -> Dataset:
    d = corpus.load_dataset(cfg.dataset, format="canonical_jsonl")
    report = corpus.validate_dataset(d)
    if not report.ok:
        for v in report.violations:
            print(f"validation: {v}", file=sys.stderr)
        raise DatasetFormatError(f"{len(report.violations)} dataset violation(s)")
    return d


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_traindata(cfg: RunConfig) -> int:
    d = _load_and_validate(cfg)
    backend = make_backend(cfg.backend_config())
    out = _outdir(cfg)

    agm = genpipe.build_agm_examples(d, backend)
    qgm, qgm_skipped = genpipe.build_qgm_examples(d)
    qam = genpipe.build_qam_examples(d)
    contrastive = ranker.build_contrastive_examples(d)

    for name, examples in (("agm", agm), ("qgm", qgm), ("qam", qam)):
        with open(out / f"{name}.jsonl", "w", encoding="utf-8", newline="\n") as fh:
            genpipe.write_train_examples(fh, examples)
    with open(out / "ranker.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        pos, neg = ranker.write_contrastive(fh, contrastive)

    counts = {"agm": len(agm), "qgm": len(qgm), "qgm_skipped": qgm_skipped,
              "qam": len(qam), "ranker_positives": pos, "ranker_negatives": neg}
    with open(out / "counts.json", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(counts, indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(agm)} agm, {len(qgm)} qgm ({qgm_skipped} skipped), "
          f"{len(qam)} qam, {pos}+{neg} ranker examples to {out}")
    return EXIT_OK


def cmd_generate(cfg: RunConfig) -> int:
    d = _load_and_validate(cfg)
    backend = make_backend(cfg.backend_config())
    out = _outdir(cfg)

    def one(p):
        return genpipe.run_pipeline(p, backend, extra_iterations=cfg.iterations)

    with ThreadPoolExecutor(max_workers=max(cfg.jobs, 1)) as pool:
        candidate_sets = list(pool.map(one, d.passages))

    path = out / "candidates.jsonl"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        n = genpipe.write_candidates(fh, candidate_sets)
    print(f"wrote {n} candidates for {len(d.passages)} passages to {path}")
    return EXIT_OK


def cmd_rank(cfg: RunConfig, candidates_path: str | None = None) -> int:
    d = _load_and_validate(cfg)
    backend = make_backend(cfg.backend_config())
    out = _outdir(cfg)
    cand_path = Path(candidates_path) if candidates_path else out / "candidates.jsonl"

    with open(cand_path, encoding="utf-8") as fh:
        grouped = genpipe.read_candidates(fh)
    orphans = [pid for pid in grouped if pid not in {p.id for p in d.passages}]
    if orphans:
        raise DatasetFormatError(f"candidates reference unknown passages: {sorted(orphans)}")

    ordered = [p for p in d.passages if p.id in grouped]

    def one(p):
        scored = ranker.score_candidates(p, grouped[p.id], backend)
        if cfg.dedup == "em":
            return ranker.select_top_k_em(scored, cfg.k, criterion=cfg.criterion)
        return ranker.select_top_k(scored, cfg.k, criterion=cfg.criterion,
                                   metric=cfg.overlap_metric_key())

    with ThreadPoolExecutor(max_workers=max(cfg.jobs, 1)) as pool:
        selections = list(pool.map(one, ordered))

    path = out / "ranked.jsonl"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        total = sum(ranker.write_ranked(fh, p.id, sel) for p, sel in zip(ordered, selections))
    print(f"wrote {total} ranked pairs for {len(ordered)} passages to {path}")
    return EXIT_OK


def cmd_eval(cfg: RunConfig, ranked_path: str | None = None) -> int:
    d = _load_and_validate(cfg)
    backend = make_backend(cfg.backend_config())
    out = _outdir(cfg)
    path = Path(ranked_path) if ranked_path else out / "ranked.jsonl"

    with open(path, encoding="utf-8") as fh:
        ranked = ranker.read_ranked(fh)
    known = {p.id for p in d.passages}
    orphans = sorted(pid for pid in ranked if pid not in known)
    if orphans:
        raise DatasetFormatError(f"ranked file references unknown passages: {orphans}")

    report = evaluation.MetricReport(
        map_rouge={n: evaluation.corpus_map_at_n(d, ranked, n, sim="rouge_l_f1")
                   for n in cfg.n_list},
        map_embed={n: evaluation.corpus_map_at_n(d, ranked, n, sim="embed_f1", backend=backend)
                   for n in cfg.n_list},
    )
    items = [(pid, pair) for p in d.passages if p.id in ranked
             for pid, pair in ((p.id, pair) for pair in ranked[p.id])]
    diversity = evaluation.diversity_report(items, d)
    report.wh_distribution = diversity.wh_distribution
    report.answer_type_distribution = diversity.answer_type_distribution
    report.counts = diversity.counts

    with open(out / "report.json", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report.to_json() + "\n")
    table = evaluation.render_map_table({"run": report})
    with open(out / "report.txt", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(table)
    print(table, end="")
    return EXIT_OK


def cmd_stats(cfg: RunConfig, pairs_path: str | None = None) -> int:
    d = _load_and_validate(cfg)
    out = _outdir(cfg)
    path = Path(pairs_path) if pairs_path else out / "ranked.jsonl"

    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        fh.seek(0)
        reader = ranker.read_ranked if first and "\"rank\"" in first else genpipe.read_candidates
        grouped = reader(fh)
    known = {p.id for p in d.passages}
    orphans = sorted(pid for pid in grouped if pid not in known)
    if orphans:
        raise DatasetFormatError(f"pairs file references unknown passages: {orphans}")

    items = [(pid, pair) for pid in grouped for pair in grouped[pid]]
    report = evaluation.diversity_report(items, d)
    with open(out / "stats.json", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report.to_json() + "\n")
    print(report.to_json())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qag",
                                     description="QA-pair generation, ranking and evaluation")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat JSON config file")
        p.add_argument("--dataset", help="canonical JSONL dataset path")
        p.add_argument("--backend", help="'mock' or a server URL")
        p.add_argument("--k", type=int)
        p.add_argument("--criterion", choices=("question", "answer"))
        p.add_argument("--overlap-metric", dest="overlap_metric", choices=("rouge-l", "bleu"))
        p.add_argument("--dedup", choices=("alg1", "em"))
        p.add_argument("--iterations", type=int, choices=(0, 1, 2))
        p.add_argument("--jobs", type=int)
        p.add_argument("--out", help="output directory")

    for name in ("traindata", "generate", "rank", "eval", "stats"):
        p = sub.add_parser(name)
        common(p)
        if name == "rank":
            p.add_argument("--candidates", help="candidates JSONL (default <out>/candidates.jsonl)")
        if name == "eval":
            p.add_argument("--ranked", help="ranked JSONL (default <out>/ranked.jsonl)")
        if name == "stats":
            p.add_argument("--pairs", help="candidates or ranked JSONL (default <out>/ranked.jsonl)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: getattr(args, k, None)
                 for k in ("dataset", "backend", "k", "criterion", "overlap_metric",
                           "dedup", "iterations", "jobs", "out")}
    try:
        cfg = load_config(args.config, overrides)
        if args.command == "traindata":
            return cmd_traindata(cfg)
        if args.command == "generate":
            return cmd_generate(cfg)
        if args.command == "rank":
            return cmd_rank(cfg, args.candidates)
        if args.command == "eval":
            return cmd_eval(cfg, args.ranked)
        if args.command == "stats":
            return cmd_stats(cfg, args.pairs)
        raise AssertionError(f"unhandled command {args.command}")
    except DatasetFormatError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except BackendError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BACKEND


if __name__ == "__main__":
    sys.exit(main())
