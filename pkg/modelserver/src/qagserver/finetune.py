"""Fine-tuning for the generation roles and the ranker classifier.

Reads the training files the pipeline exports: {"task","input","target"}
JSONL for the seq2seq roles, {"passage_id","question","answer","label"}
JSONL plus the canonical dataset for the ranker. Batches are packed by a
token budget (default 2048 padded tokens). Generation tasks train with
AdamW under polynomial learning-rate decay and optional early stopping
(patience 10) on a validation file; the ranker trains for 5 epochs at a
fixed learning rate.

Per-task defaults:

    task    lr       dropout  epochs  schedule
    agm     3e-05    0.1      30      polynomial decay, early stop 10
    qgm     3e-05    0.1      30      polynomial decay, early stop 10
    qam     2e-05    0.2      30      polynomial decay, early stop 10
    ranker  5e-07    model    5       fixed learning rate
"""

from __future__ import annotations

import argparse
import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path

import torch
from torch.optim import AdamW
from transformers import (
    AutoConfig,
    AutoModelForSeq2SeqLM,
    AutoModelForSequenceClassification,
    AutoTokenizer,
)

from .config import SEP

log = logging.getLogger(__name__)

GEN_TASKS = ("agm", "qgm", "qam")
TASK_DEFAULTS = {
    "agm": {"lr": 3e-05, "dropout": 0.1, "epochs": 30},
    "qgm": {"lr": 3e-05, "dropout": 0.1, "epochs": 30},
    "qam": {"lr": 2e-05, "dropout": 0.2, "epochs": 30},
    "ranker": {"lr": 5e-07, "dropout": None, "epochs": 5},
}
EARLY_STOP_PATIENCE = 10


@dataclass
class Hyperparams:
    task: str
    lr: float
    dropout: float | None
    epochs: int
    batch_tokens: int = 2048
    max_source_len: int = 1024
    max_target_len: int = 128
    seed: int = 0


def resolve_hyperparams(task: str, lr=None, dropout=None, epochs=None, **kwargs) -> Hyperparams:
    defaults = TASK_DEFAULTS[task]
    return Hyperparams(
        task=task,
        lr=defaults["lr"] if lr is None else lr,
        dropout=defaults["dropout"] if dropout is None else dropout,
        epochs=defaults["epochs"] if epochs is None else epochs,
        **kwargs,
    )


def read_jsonl(path) -> list[dict]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    if not out:
        raise ValueError(f"{path}: no examples")
    return out


def read_passage_texts(dataset_path) -> dict[str, str]:
    """Pull passage id -> text out of a canonical dataset file."""
    texts = {}
    with open(dataset_path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if obj.get("kind") == "passage":
                texts[obj["id"]] = obj["text"]
    if not texts:
        raise ValueError(f"{dataset_path}: no passage records")
    return texts


def pack_batches(lengths: list[int], budget: int) -> list[list[int]]:
    """Length-sorted greedy packing under a padded-token budget."""
    order = sorted(range(len(lengths)), key=lambda i: lengths[i])
    batches: list[list[int]] = []
    current: list[int] = []
    current_max = 0
    for idx in order:
        new_max = max(current_max, lengths[idx])
        if current and new_max * (len(current) + 1) > budget:
            batches.append(current)
            current, current_max = [], 0
            new_max = lengths[idx]
        current.append(idx)
        current_max = new_max
    if current:
        batches.append(current)
    return batches


def _apply_dropout(config, dropout: float | None):
    if dropout is None:
        return
    for attr in ("dropout", "hidden_dropout_prob", "attention_probs_dropout_prob",
                 "attention_dropout", "activation_dropout"):
        if hasattr(config, attr):
            setattr(config, attr, dropout)


def _ensure_sep(tokenizer, model):
    if SEP not in tokenizer.get_vocab():
        tokenizer.add_special_tokens({"additional_special_tokens": [SEP]})
        model.resize_token_embeddings(len(tokenizer))


def _polynomial_lr(base_lr: float, step: int, total_steps: int) -> float:
    remaining = max(total_steps - step, 0) / max(total_steps, 1)
    return base_lr * remaining


class _Seq2SeqData:
    def __init__(self, tokenizer, records, hp: Hyperparams):
        self.tokenizer = tokenizer
        self.sources = [r["input"] for r in records]
        self.targets = [r["target"] for r in records]
        self.hp = hp
        enc = tokenizer(self.sources, truncation=True, max_length=hp.max_source_len)
        self.lengths = [len(ids) for ids in enc["input_ids"]]

    def collate(self, indices: list[int]):
        src = self.tokenizer([self.sources[i] for i in indices], return_tensors="pt",
                             padding=True, truncation=True, max_length=self.hp.max_source_len)
        tgt = self.tokenizer([self.targets[i] for i in indices], return_tensors="pt",
                             padding=True, truncation=True, max_length=self.hp.max_target_len)
        labels = tgt["input_ids"].masked_fill(
            tgt["input_ids"] == self.tokenizer.pad_token_id, -100)
        return src, labels


def _epoch_loss(model, data: _Seq2SeqData, batches, device, optimizer=None,
                lr_schedule=None, step_offset=0) -> tuple[float, int]:
    total = 0.0
    steps = 0
    for batch in batches:
        src, labels = data.collate(batch)
        src = {k: v.to(device) for k, v in src.items()}
        labels = labels.to(device)
        if optimizer is not None:
            optimizer.zero_grad()
            loss = model(**src, labels=labels).loss
            loss.backward()
            if lr_schedule is not None:
                lr = lr_schedule(step_offset + steps)
                for group in optimizer.param_groups:
                    group["lr"] = lr
            optimizer.step()
        else:
            with torch.no_grad():
                loss = model(**src, labels=labels).loss
        total += float(loss.detach())
        steps += 1
    return total / max(steps, 1), steps


def finetune_generation(examples_path, base_model, out_dir, hp: Hyperparams,
                        val_path=None, device="cpu") -> Path:
    torch.manual_seed(hp.seed)
    records = read_jsonl(examples_path)
    bad = [r for r in records if r.get("task") != hp.task]
    if bad:
        raise ValueError(f"{examples_path}: {len(bad)} records are not task {hp.task!r}")

    config = AutoConfig.from_pretrained(base_model)
    _apply_dropout(config, hp.dropout)
    tokenizer = AutoTokenizer.from_pretrained(base_model)
    model = AutoModelForSeq2SeqLM.from_pretrained(base_model, config=config)
    _ensure_sep(tokenizer, model)
    model.to(device).train()

    data = _Seq2SeqData(tokenizer, records, hp)
    batches = pack_batches(data.lengths, hp.batch_tokens)
    val_data = None
    if val_path:
        val_records = read_jsonl(val_path)
        val_data = _Seq2SeqData(tokenizer, val_records, hp)
        val_batches = pack_batches(val_data.lengths, hp.batch_tokens)

    optimizer = AdamW(model.parameters(), lr=hp.lr)
    total_steps = len(batches) * hp.epochs
    schedule = lambda step: _polynomial_lr(hp.lr, step, total_steps)

    history = []
    best_val = None
    stale = 0
    step = 0
    started = time.time()
    for epoch in range(1, hp.epochs + 1):
        model.train()
        train_loss, steps = _epoch_loss(model, data, batches, device,
                                        optimizer=optimizer, lr_schedule=schedule,
                                        step_offset=step)
        step += steps
        entry = {"epoch": epoch, "train_loss": train_loss}
        if val_data is not None:
            model.eval()
            val_loss, _ = _epoch_loss(model, val_data, val_batches, device)
            entry["val_loss"] = val_loss
            if best_val is None or val_loss < best_val:
                best_val, stale = val_loss, 0
            else:
                stale += 1
        history.append(entry)
        log.info("epoch %d: %s", epoch, entry)
        if val_data is not None and stale >= EARLY_STOP_PATIENCE:
            log.info("early stopping after %d stale epochs", stale)
            break

    return _save(model, tokenizer, out_dir, hp, history, time.time() - started)


def finetune_ranker(examples_path, dataset_path, base_model, out_dir, hp: Hyperparams,
                    device="cpu") -> Path:
    torch.manual_seed(hp.seed)
    records = read_jsonl(examples_path)
    texts = read_passage_texts(dataset_path)
    missing = {r["passage_id"] for r in records} - set(texts)
    if missing:
        raise ValueError(f"{len(missing)} passage ids missing from dataset: {sorted(missing)[:5]}")

    config = AutoConfig.from_pretrained(
        base_model, num_labels=2,
        id2label={0: "negative", 1: "positive"},
        label2id={"negative": 0, "positive": 1})
    _apply_dropout(config, hp.dropout)
    tokenizer = AutoTokenizer.from_pretrained(base_model)
    model = AutoModelForSequenceClassification.from_pretrained(base_model, config=config)
    _ensure_sep(tokenizer, model)
    model.to(device).train()

    inputs = [SEP.join([r["question"], r["answer"], texts[r["passage_id"]]]) for r in records]
    labels = [1 if r["label"] == "positive" else 0 for r in records]
    enc = tokenizer(inputs, truncation=True, max_length=hp.max_source_len)
    lengths = [len(ids) for ids in enc["input_ids"]]
    batches = pack_batches(lengths, hp.batch_tokens)

    optimizer = AdamW(model.parameters(), lr=hp.lr)  # fixed rate, no decay
    history = []
    started = time.time()
    for epoch in range(1, hp.epochs + 1):
        total = 0.0
        for batch in batches:
            batch_enc = tokenizer([inputs[i] for i in batch], return_tensors="pt",
                                  padding=True, truncation=True, max_length=hp.max_source_len)
            batch_enc = {k: v.to(device) for k, v in batch_enc.items()}
            target = torch.tensor([labels[i] for i in batch], device=device)
            optimizer.zero_grad()
            loss = model(**batch_enc, labels=target).loss
            loss.backward()
            optimizer.step()
            total += float(loss.detach())
        history.append({"epoch": epoch, "train_loss": total / max(len(batches), 1)})
        log.info("epoch %d: %s", epoch, history[-1])

    return _save(model, tokenizer, out_dir, hp, history, time.time() - started)


def _save(model, tokenizer, out_dir, hp: Hyperparams, history, elapsed) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model.save_pretrained(out)
    tokenizer.save_pretrained(out)
    with open(out / "training_log.json", "w", encoding="utf-8") as fh:
        json.dump({"hyperparams": hp.__dict__, "history": history,
                   "elapsed_s": round(elapsed, 2)}, fh, indent=2)
    log.info("saved checkpoint to %s", out)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qag-finetune")
    parser.add_argument("task", choices=(*GEN_TASKS, "ranker"))
    parser.add_argument("--examples", required=True, help="training examples JSONL")
    parser.add_argument("--val-examples", help="validation JSONL for early stopping")
    parser.add_argument("--dataset", help="canonical dataset JSONL (ranker only)")
    parser.add_argument("--base-model", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--lr", type=float)
    parser.add_argument("--dropout", type=float)
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--batch-tokens", type=int, default=2048)
    parser.add_argument("--max-source-len", type=int, default=1024)
    parser.add_argument("--max-target-len", type=int, default=128)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--device", default="cpu")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO)
    args = build_parser().parse_args(argv)
    hp = resolve_hyperparams(args.task, lr=args.lr, dropout=args.dropout, epochs=args.epochs,
                             batch_tokens=args.batch_tokens,
                             max_source_len=args.max_source_len,
                             max_target_len=args.max_target_len, seed=args.seed)
    if args.task == "ranker":
        if not args.dataset:
            raise SystemExit("ranker fine-tuning requires --dataset for passage texts")
        finetune_ranker(args.examples, args.dataset, args.base_model, args.out, hp,
                        device=args.device)
    else:
        finetune_generation(args.examples, args.base_model, args.out, hp,
                            val_path=args.val_examples, device=args.device)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
