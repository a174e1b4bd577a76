import json

import pytest
import torch
from tokenizers import Tokenizer, models, pre_tokenizers
from transformers import (
    BartConfig,
    BartForConditionalGeneration,
    PreTrainedTokenizerFast,
    RobertaConfig,
    RobertaForSequenceClassification,
)

from qagserver.config import SEP

WORDS = [
    "the", "a", "an", "old", "miller", "kept", "grey", "goose", "near", "river",
    "one", "winter", "morning", "found", "golden", "ring", "in", "frozen", "reeds",
    "sold", "and", "bought", "bread", "for", "whole", "village", "what", "who",
    "why", "where", "when", "how", "did", "find", "cat", "sat", "fox", "ran",
    "wolf", "slept", "?", ".",
]


def build_tokenizer(out_dir):
    vocab = {"<pad>": 0, "<s>": 1, "</s>": 2, "<unk>": 3, SEP: 4}
    for word in WORDS:
        vocab.setdefault(word, len(vocab))
    tok = Tokenizer(models.WordLevel(vocab, unk_token="<unk>"))
    tok.pre_tokenizer = pre_tokenizers.Whitespace()
    fast = PreTrainedTokenizerFast(
        tokenizer_object=tok, pad_token="<pad>", bos_token="<s>", eos_token="</s>",
        unk_token="<unk>", additional_special_tokens=[SEP], model_max_length=512)
    fast.save_pretrained(out_dir)
    return len(vocab)


def build_seq2seq(out_dir, vocab_size):
    torch.manual_seed(7)
    config = BartConfig(
        vocab_size=vocab_size, d_model=32, encoder_layers=2, decoder_layers=2,
        encoder_attention_heads=2, decoder_attention_heads=2,
        encoder_ffn_dim=64, decoder_ffn_dim=64, max_position_embeddings=512,
        pad_token_id=0, bos_token_id=1, eos_token_id=2,
        decoder_start_token_id=2, forced_eos_token_id=2)
    BartForConditionalGeneration(config).save_pretrained(out_dir)


def build_classifier(out_dir, vocab_size):
    torch.manual_seed(11)
    config = RobertaConfig(
        vocab_size=vocab_size, hidden_size=32, num_hidden_layers=2,
        num_attention_heads=2, intermediate_size=64, max_position_embeddings=514,
        pad_token_id=0, bos_token_id=1, eos_token_id=2, num_labels=2,
        id2label={0: "negative", 1: "positive"}, label2id={"negative": 0, "positive": 1})
    RobertaForSequenceClassification(config).save_pretrained(out_dir)


@pytest.fixture(scope="session")
def tiny_checkpoints(tmp_path_factory):
    root = tmp_path_factory.mktemp("checkpoints")
    gen = root / "gen"
    ranker = root / "ranker"
    gen.mkdir()
    ranker.mkdir()
    vocab_size = build_tokenizer(gen)
    build_seq2seq(gen, vocab_size)
    build_tokenizer(ranker)
    build_classifier(ranker, vocab_size)
    return {"gen": str(gen), "ranker": str(ranker)}


@pytest.fixture(scope="session")
def toy_training_files(tmp_path_factory):
    """Ten agm examples, a ranker file, and a matching canonical dataset."""
    root = tmp_path_factory.mktemp("toydata")
    agm = root / "agm.jsonl"
    with open(agm, "w", encoding="utf-8") as fh:
        for i in range(10):
            fh.write(json.dumps({
                "task": "agm",
                "input": f"the fox ran near the river {SEP} the golden ring",
                "target": "the golden ring"}) + "\n")

    dataset = root / "dataset.jsonl"
    with open(dataset, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"kind": "passage", "id": "p0", "book_id": "b",
                             "split": "train", "text": "The fox ran near the river."}) + "\n")
        fh.write(json.dumps({"kind": "qa", "passage_id": "p0", "question": "Who ran?",
                             "answer": "the fox", "wh": None}) + "\n")

    ranker = root / "ranker.jsonl"
    with open(ranker, "w", encoding="utf-8") as fh:
        for i in range(6):
            fh.write(json.dumps({
                "passage_id": "p0", "question": "who ran near the river ?",
                "answer": "the fox" if i % 2 == 0 else "the wolf",
                "label": "positive" if i % 2 == 0 else "negative"}) + "\n")

    return {"agm": str(agm), "dataset": str(dataset), "ranker": str(ranker)}
