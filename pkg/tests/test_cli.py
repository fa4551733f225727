import json

import numpy as np
import pytest
from click.testing import CliRunner

from elisabot.cli import main
from elisabot.data import FeatureGrid, pseudo_encoder, save_feature_grid
from elisabot.training import save_chatbot
from elisabot.vocab import RESERVED_TOKENS, Vocabulary


@pytest.fixture
def runner():
    return CliRunner()


def write_question_dataset(tmp_path, n_images=2, rows=3, cols=4):
    """Tiny dataset plus matching .feat files next to it."""
    records = []
    for i in range(n_images):
        image_id = "img%d" % i
        grid = pseudo_encoder(image_id, rows, cols)
        save_feature_grid(grid, tmp_path / ("%s.feat" % image_id))
        records.append({"image_id": image_id,
                        "features": "%s.feat" % image_id,
                        "questions": ["how old is the dog ?",
                                      "where was this ?"]})
    path = tmp_path / "questions.jsonl"
    path.write_text("\n".join(json.dumps(r) for r in records) + "\n")
    return path


def write_dialogue_dataset(tmp_path):
    pairs = [{"context": "hi there", "reply": "hello you"},
             {"context": "how are you", "reply": "i am fine"}]
    path = tmp_path / "dialogue.jsonl"
    path.write_text("\n".join(json.dumps(p) for p in pairs) + "\n")
    return path


def train_toy_vqg(runner, tmp_path, target_loss="0.05"):
    dataset = write_question_dataset(tmp_path)
    ckpt = tmp_path / "vqg.ckpt"
    result = runner.invoke(main, [
        "train-vqg", str(dataset), "--out", str(ckpt),
        "--annotation-dim", "4", "--attention-dim", "8",
        "--embedding-dim", "8", "--lstm-dim", "8", "--dropout", "0",
        "--min-count", "1", "--steps", "400", "--lr", "1e-2",
        "--batch-size", "8", "--target-loss", target_loss])
    assert result.exit_code == 0, result.output
    return dataset, ckpt


class TestTrainVqg:
    def test_trains_and_reports(self, runner, tmp_path):
        _, ckpt = train_toy_vqg(runner, tmp_path)
        assert ckpt.exists()

    def test_missing_dataset_is_usage_error(self, runner, tmp_path):
        result = runner.invoke(main, ["train-vqg", str(tmp_path / "no.jsonl"),
                                      "--out", str(tmp_path / "o.ckpt")])
        assert result.exit_code != 0

    def test_out_required(self, runner, tmp_path):
        dataset = write_question_dataset(tmp_path)
        result = runner.invoke(main, ["train-vqg", str(dataset)])
        assert result.exit_code != 0
        assert "--out" in result.output


class TestGenQuestions:
    def test_memorized_question_ranks_first(self, runner, tmp_path):
        _, ckpt = train_toy_vqg(runner, tmp_path)
        result = runner.invoke(main, [
            "gen-questions", "--checkpoint", str(ckpt),
            "--features", str(tmp_path / "img0.feat")])
        assert result.exit_code == 0, result.output
        first = result.output.splitlines()[0]
        assert first.startswith("1. ")
        assert first[3:] in ("how old is the dog ?", "where was this ?")

    def test_rejects_garbage_checkpoint(self, runner, tmp_path):
        bad = tmp_path / "bad.ckpt"
        bad.write_bytes(b"not a checkpoint")
        grid_path = tmp_path / "g.feat"
        save_feature_grid(FeatureGrid(np.ones((2, 4), dtype=np.float32)),
                          grid_path)
        result = runner.invoke(main, ["gen-questions", "--checkpoint",
                                      str(bad), "--features",
                                      str(grid_path)])
        assert result.exit_code != 0


class TestEvalBleu:
    def test_overfit_model_scores_high(self, runner, tmp_path):
        dataset, ckpt = train_toy_vqg(runner, tmp_path)
        result = runner.invoke(main, ["eval-bleu", "--checkpoint", str(ckpt),
                                      "--dataset", str(dataset)])
        assert result.exit_code == 0, result.output
        report = json.loads(result.output)
        assert set(report) >= {"score", "score_x100", "precisions",
                               "brevity_penalty"}
        # each top question is one of its two references verbatim
        assert report["score"] == pytest.approx(1.0)
        assert report["score_x100"] == pytest.approx(100.0)


class TestTrainChatbot:
    def test_train_and_fine_tune(self, runner, tmp_path):
        dataset = write_dialogue_dataset(tmp_path)
        ckpt = tmp_path / "cb.ckpt"
        result = runner.invoke(main, [
            "train-chatbot", str(dataset), "--out", str(ckpt),
            "--hidden-dim", "8", "--embedding-dim", "8", "--dropout", "0",
            "--min-count", "1", "--steps", "20", "--lr", "1e-2"])
        assert result.exit_code == 0, result.output
        assert ckpt.exists()

        tuned = tmp_path / "cb2.ckpt"
        result = runner.invoke(main, [
            "train-chatbot", str(dataset), "--out", str(tuned),
            "--fine-tune", str(ckpt), "--dropout", "0",
            "--steps", "5", "--lr", "1e-3"])
        assert result.exit_code == 0, result.output
        assert tuned.exists()


class TestServe:
    def test_requires_checkpoints(self, runner):
        result = runner.invoke(main, ["serve"], env={})
        assert result.exit_code != 0
        assert "checkpoint" in result.output

    def test_kind_mismatch_exits_nonzero(self, runner, tmp_path):
        # a chatbot checkpoint offered in the question-generator slot
        from elisabot.chatbot import ChatbotConfig, ChatbotParams
        vocab = Vocabulary(list(RESERVED_TOKENS) + ["a"], min_count=1)
        cfg = ChatbotConfig(hidden_dim=4, embedding_dim=4, dropout=0.0)
        params = ChatbotParams.init(cfg, len(vocab),
                                    np.random.default_rng(0))
        ckpt = tmp_path / "cb.ckpt"
        save_chatbot(ckpt, params, vocab)
        result = runner.invoke(main, [
            "serve", "--vqg-checkpoint", str(ckpt),
            "--chatbot-checkpoint", str(ckpt)])
        assert result.exit_code == 1
        assert "checkpoint error" in result.output


class TestUsage:
    def test_help_lists_commands(self, runner):
        result = runner.invoke(main, ["--help"])
        assert result.exit_code == 0
        for cmd in ("train-vqg", "train-chatbot", "eval-bleu",
                    "gen-questions", "chat", "serve"):
            assert cmd in result.output
