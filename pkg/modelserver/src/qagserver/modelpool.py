"""Checkpoint loading and inference for the six serving roles.

Checkpoints shared between roles are loaded once. Inference inputs are the
wire-protocol fields joined with the `<sep>` token, matching the training
files the pipeline exports: agm passage<sep>summary, qgm
passage<sep>answer<sep>wh, qam passage<sep>question, qfs passage<sep>query,
ranker question<sep>answer<sep>passage.
"""

from __future__ import annotations

import logging

import torch
from transformers import (
    AutoModel,
    AutoModelForSeq2SeqLM,
    AutoModelForSequenceClassification,
    AutoTokenizer,
)

from .config import GENERATION_ROLES, SEP, ServerConfig

log = logging.getLogger(__name__)


class ModelPool:
    def __init__(self, cfg: ServerConfig):
        self.cfg = cfg
        self.device = torch.device(cfg.device)
        torch.manual_seed(0)

        seq2seq_cache: dict[str, tuple] = {}
        self._gen = {}
        for role in GENERATION_ROLES:
            path = getattr(cfg, role)
            if path not in seq2seq_cache:
                log.info("loading seq2seq checkpoint %s", path)
                tokenizer = AutoTokenizer.from_pretrained(path)
                model = AutoModelForSeq2SeqLM.from_pretrained(path)
                model.to(self.device).eval()
                seq2seq_cache[path] = (tokenizer, model)
            self._gen[role] = seq2seq_cache[path]

        log.info("loading ranker checkpoint %s", cfg.ranker)
        self._rank_tokenizer = AutoTokenizer.from_pretrained(cfg.ranker)
        self._rank_model = AutoModelForSequenceClassification.from_pretrained(cfg.ranker)
        self._rank_model.to(self.device).eval()
        label2id = getattr(self._rank_model.config, "label2id", None) or {}
        lowered = {str(k).lower(): v for k, v in label2id.items()}
        self._pos_index = lowered.get("positive", 1)
        self._neg_index = lowered.get("negative", 0)

        log.info("loading embed checkpoint %s", cfg.embed)
        self._embed_tokenizer = AutoTokenizer.from_pretrained(cfg.embed)
        self._embed_model = AutoModel.from_pretrained(cfg.embed)
        self._embed_model.to(self.device).eval()

    def _encode(self, tokenizer, text: str):
        return tokenizer(text, return_tensors="pt", truncation=True,
                         max_length=self.cfg.max_source_len).to(self.device)

    def generate(self, role: str, parts: list[str],
                 beam_size: int | None = None, max_len: int | None = None,
                 temperature: float | None = None) -> str:
        tokenizer, model = self._gen[role]
        text = SEP.join(parts)
        inputs = self._encode(tokenizer, text)
        decode = self.cfg.decode
        temperature = decode.temperature if temperature is None else temperature
        kwargs = dict(
            num_beams=beam_size or decode.beam_size,
            max_new_tokens=max_len or decode.max_len,
            min_new_tokens=2,
            do_sample=temperature > 0,
        )
        if temperature > 0:
            kwargs["temperature"] = temperature
        # keep <unk> out of the output so decoded text is never empty
        if tokenizer.unk_token_id is not None:
            kwargs["suppress_tokens"] = [tokenizer.unk_token_id]
        with torch.no_grad():
            output = model.generate(**inputs, **kwargs)
        return tokenizer.decode(output[0], skip_special_tokens=True).strip()

    def score(self, question: str, answer: str, passage: str) -> tuple[float, float]:
        text = SEP.join([question, answer, passage])
        inputs = self._encode(self._rank_tokenizer, text)
        with torch.no_grad():
            logits = self._rank_model(**inputs).logits[0]
        return float(logits[self._pos_index]), float(logits[self._neg_index])

    def embed(self, text: str) -> list[list[float]]:
        ids = self._embed_tokenizer(text, add_special_tokens=False, truncation=True,
                                    max_length=self.cfg.max_source_len)["input_ids"]
        if not ids:
            return []
        batch = torch.tensor([ids], device=self.device)
        with torch.no_grad():
            hidden = self._embed_model(input_ids=batch).last_hidden_state[0]
        normed = torch.nn.functional.normalize(hidden, p=2, dim=1)
        return [[float(c) for c in row] for row in normed]
