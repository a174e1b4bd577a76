import json
from pathlib import Path

import pytest
import torch
from transformers import AutoModelForSeq2SeqLM, AutoModelForSequenceClassification, AutoTokenizer

from qagserver.finetune import main, pack_batches, resolve_hyperparams


class TestHyperparamDefaults:
    def test_agm_qgm(self):
        for task in ("agm", "qgm"):
            hp = resolve_hyperparams(task)
            assert hp.lr == 3e-05 and hp.dropout == 0.1

    def test_qam(self):
        hp = resolve_hyperparams("qam")
        assert hp.lr == 2e-05 and hp.dropout == 0.2

    def test_ranker(self):
        hp = resolve_hyperparams("ranker")
        assert hp.lr == 5e-07 and hp.epochs == 5

    def test_overrides(self):
        hp = resolve_hyperparams("agm", lr=1e-4, epochs=2)
        assert hp.lr == 1e-4 and hp.epochs == 2 and hp.dropout == 0.1

    def test_batch_token_default(self):
        assert resolve_hyperparams("agm").batch_tokens == 2048


class TestPackBatches:
    def test_budget_respected(self):
        lengths = [10, 20, 30, 40, 5]
        batches = pack_batches(lengths, budget=60)
        assert sorted(i for b in batches for i in b) == [0, 1, 2, 3, 4]
        for batch in batches:
            assert max(lengths[i] for i in batch) * len(batch) <= 60

    def test_single_long_item_gets_own_batch(self):
        batches = pack_batches([100, 1], budget=50)
        assert sorted(map(len, batches)) == [1, 1]


class TestSmokeFinetune:
    def test_generation_one_epoch_saves_loadable(self, tiny_checkpoints, toy_training_files,
                                                 tmp_path):
        out = tmp_path / "agm_ckpt"
        rc = main(["agm", "--examples", toy_training_files["agm"],
                   "--base-model", tiny_checkpoints["gen"], "--out", str(out),
                   "--epochs", "1", "--batch-tokens", "256"])
        assert rc == 0
        model = AutoModelForSeq2SeqLM.from_pretrained(out)
        tokenizer = AutoTokenizer.from_pretrained(out)
        model.eval()
        ids = tokenizer("the fox ran", return_tensors="pt")
        with torch.no_grad():
            generated = model.generate(**ids, num_beams=2, max_new_tokens=8, min_new_tokens=2,
                                       do_sample=False)
        assert generated.shape[0] == 1
        log = json.loads((out / "training_log.json").read_text())
        assert log["hyperparams"]["lr"] == 3e-05
        assert len(log["history"]) == 1
        assert "train_loss" in log["history"][0]

    def test_generation_rejects_wrong_task(self, tiny_checkpoints, toy_training_files, tmp_path):
        with pytest.raises(ValueError, match="not task"):
            main(["qgm", "--examples", toy_training_files["agm"],
                  "--base-model", tiny_checkpoints["gen"], "--out", str(tmp_path / "x"),
                  "--epochs", "1"])

    def test_ranker_five_epoch_default_and_loadable(self, tiny_checkpoints, toy_training_files,
                                                    tmp_path):
        out = tmp_path / "ranker_ckpt"
        rc = main(["ranker", "--examples", toy_training_files["ranker"],
                   "--dataset", toy_training_files["dataset"],
                   "--base-model", tiny_checkpoints["ranker"], "--out", str(out),
                   "--batch-tokens", "256"])
        assert rc == 0
        model = AutoModelForSequenceClassification.from_pretrained(out)
        assert model.config.label2id == {"negative": 0, "positive": 1}
        log = json.loads((out / "training_log.json").read_text())
        assert log["hyperparams"]["lr"] == 5e-07
        assert len(log["history"]) == 5

    def test_empty_examples_rejected(self, tiny_checkpoints, tmp_path):
        empty = tmp_path / "empty.jsonl"
        empty.write_text("")
        with pytest.raises(ValueError, match="no examples"):
            main(["agm", "--examples", str(empty),
                  "--base-model", tiny_checkpoints["gen"], "--out", str(tmp_path / "x")])

    def test_early_stopping_on_validation(self, tiny_checkpoints, toy_training_files, tmp_path):
        out = tmp_path / "early"
        # lr 0 keeps the model frozen, so val loss never improves after epoch 1
        rc = main(["agm", "--examples", toy_training_files["agm"],
                   "--val-examples", toy_training_files["agm"],
                   "--base-model", tiny_checkpoints["gen"], "--out", str(out),
                   "--epochs", "30", "--lr", "0.0", "--batch-tokens", "256"])
        assert rc == 0
        history = json.loads((out / "training_log.json").read_text())["history"]
        assert len(history) == 11  # epoch 1 sets best, 10 stale epochs then stop
