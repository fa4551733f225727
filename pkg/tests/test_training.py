import numpy as np
import pytest

from conftest import random_dialogue_pairs
from elisabot.autodiff import Tensor, tsum
from elisabot.chatbot import ChatbotConfig, ChatbotParams
from elisabot.training import (AdamState, CheckpointError, TrainConfig,
                               adam_step, clip_gradients, load_chatbot,
                               load_checkpoint, load_vqg, save_chatbot,
                               save_checkpoint, save_vqg, train,
                               train_chatbot_model)
from elisabot.vocab import RESERVED_TOKENS, Vocabulary
from elisabot.vqg import VqgConfig, VqgParams


def vocab4(extra=("a", "b")):
    return Vocabulary(list(RESERVED_TOKENS) + list(extra), min_count=1)


class TestAdam:
    def test_zero_gradient_is_identity(self):
        p = {"w": Tensor([1.0, -2.0, 3.0])}
        state = AdamState.init(p, lr=0.1)
        for _ in range(10):
            adam_step(p, {"w": np.zeros(3)}, state)
        assert np.array_equal(p["w"].data, [1.0, -2.0, 3.0])

    def test_first_step_closed_form(self):
        p = {"w": Tensor([1.0])}
        state = AdamState.init(p, lr=0.1)
        adam_step(p, {"w": np.array([1.0])}, state)
        # m_hat = v_hat = 1 after bias correction: theta' = 1 - 0.1/(1+eps)
        expected = 1.0 - 0.1 * 1.0 / (1.0 + 1e-8)
        assert p["w"].data[0] == pytest.approx(expected, abs=1e-9)

    def test_constant_gradient_steps_near_lr(self):
        p = {"w": Tensor([5.0])}
        state = AdamState.init(p, lr=0.1)
        prev = p["w"].data[0]
        for _ in range(2):
            adam_step(p, {"w": np.array([2.0])}, state)
            delta = abs(p["w"].data[0] - prev)
            assert delta == pytest.approx(0.1, rel=0.01)
            prev = p["w"].data[0]

    def test_shape_mismatch_rejected(self):
        p = {"w": Tensor([1.0, 2.0])}
        state = AdamState.init(p)
        with pytest.raises(ValueError):
            adam_step(p, {"w": np.zeros(3)}, state)


class TestClipGradients:
    def test_zero_norm_unchanged(self):
        g = {"w": np.zeros(4)}
        out = clip_gradients(g, 5.0)
        assert np.array_equal(out["w"], np.zeros(4))

    def test_exact_boundary_unchanged(self):
        g = {"w": np.array([3.0, 4.0])}
        out = clip_gradients(g, 5.0)
        assert np.array_equal(out["w"], [3.0, 4.0])

    def test_scaling(self):
        g = {"w": np.array([6.0, 8.0])}
        out = clip_gradients(g, 5.0)
        assert np.allclose(out["w"], [3.0, 4.0], atol=1e-12)

    def test_norm_never_exceeds_cap(self, rng):
        for _ in range(20):
            g = {"a": rng.standard_normal(5) * 10,
                 "b": rng.standard_normal((3, 3)) * 10}
            out = clip_gradients(g, 5.0)
            norm = np.sqrt(sum(np.sum(v * v) for v in out.values()))
            assert norm <= 5.0 + 1e-9

    def test_invalid_max_norm(self):
        with pytest.raises(ValueError):
            clip_gradients({"w": np.ones(2)}, 0.0)


class TestTrainLoop:
    @staticmethod
    def _quadratic_setup():
        w = Tensor([4.0, -3.0])

        def loss_fn(example, rng):
            return tsum((w - Tensor(example)) * (w - Tensor(example)))

        return w, loss_fn

    def test_empty_dataset_rejected(self):
        w, loss_fn = self._quadratic_setup()
        with pytest.raises(ValueError):
            train([], loss_fn, {"w": w}, TrainConfig())

    def test_loss_decreases_on_single_example(self):
        w, loss_fn = self._quadratic_setup()
        curve = train([np.array([1.0, 1.0])], loss_fn, {"w": w},
                      TrainConfig(batch_size=1, max_steps=10, lr=1e-3,
                                  seed=0))
        assert all(b < a for a, b in zip(curve, curve[1:]))

    def test_same_seed_same_curve(self):
        pairs = random_dialogue_pairs(6, seed=0, vocab_size=8)
        cfg = ChatbotConfig(hidden_dim=6, embedding_dim=6, dropout=0.1)
        tc = TrainConfig(batch_size=4, max_steps=8, lr=1e-3, seed=42)
        _, _, curve_a = train_chatbot_model(pairs, cfg, tc, min_count=1)
        _, _, curve_b = train_chatbot_model(pairs, cfg, tc, min_count=1)
        assert curve_a == curve_b

    def test_batch_larger_than_dataset_uses_everything(self):
        seen = []
        w = Tensor([0.0])

        def loss_fn(example, rng):
            seen.append(example)
            return tsum(w * w) + Tensor(0.0)

        train([1, 2, 3], loss_fn, {"w": w},
              TrainConfig(batch_size=64, max_steps=1, lr=1e-3, seed=0))
        assert sorted(seen) == [1, 2, 3]

    def test_target_loss_stops_early(self):
        w, loss_fn = self._quadratic_setup()
        curve = train([np.array([4.0, -3.0])], loss_fn, {"w": w},
                      TrainConfig(batch_size=1, max_steps=1000, lr=1e-2,
                                  seed=0, target_loss=1e-6))
        assert len(curve) < 1000


class TestCheckpoint:
    def _vqg(self, seed=0):
        cfg = VqgConfig(annotation_dim=4, attention_dim=3, embedding_dim=3,
                        lstm_dim=3, dropout=0.0, beam_width=2,
                        outputs_per_image=2)
        vocab = vocab4()
        return VqgParams.init(cfg, len(vocab),
                              np.random.default_rng(seed)), vocab

    def test_vqg_round_trip_bit_exact(self, tmp_path):
        params, vocab = self._vqg()
        path = tmp_path / "m.ckpt"
        save_vqg(path, params, vocab)
        loaded, loaded_vocab = load_vqg(path)
        assert loaded_vocab == vocab
        for name, t in params.parameters().items():
            assert np.array_equal(loaded.parameters()[name].data, t.data), \
                name

    def test_save_load_save_identical_bytes(self, tmp_path):
        params, vocab = self._vqg(seed=3)
        a, b = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        save_vqg(a, params, vocab)
        loaded, loaded_vocab = load_vqg(a)
        save_vqg(b, loaded, loaded_vocab)
        assert a.read_bytes() == b.read_bytes()

    def test_chatbot_round_trip(self, tmp_path):
        cfg = ChatbotConfig(hidden_dim=4, embedding_dim=4, dropout=0.0)
        vocab = vocab4()
        params = ChatbotParams.init(cfg, len(vocab),
                                    np.random.default_rng(1))
        path = tmp_path / "c.ckpt"
        save_chatbot(path, params, vocab)
        loaded, _ = load_chatbot(path)
        for name, t in params.parameters().items():
            assert np.array_equal(loaded.parameters()[name].data, t.data)

    def test_corrupted_magic_rejected(self, tmp_path):
        params, vocab = self._vqg()
        path = tmp_path / "m.ckpt"
        save_vqg(path, params, vocab)
        raw = bytearray(path.read_bytes())
        raw[:4] = b"XXXX"
        path.write_bytes(bytes(raw))
        with pytest.raises(CheckpointError, match="magic"):
            load_checkpoint(path)

    def test_unknown_version_rejected(self, tmp_path):
        params, vocab = self._vqg()
        path = tmp_path / "m.ckpt"
        save_vqg(path, params, vocab)
        raw = bytearray(path.read_bytes())
        raw[4] = 99
        path.write_bytes(bytes(raw))
        with pytest.raises(CheckpointError, match="version"):
            load_checkpoint(path)

    def test_kind_mismatch_rejected(self, tmp_path):
        params, vocab = self._vqg()
        path = tmp_path / "m.ckpt"
        save_vqg(path, params, vocab)
        with pytest.raises(CheckpointError, match="kind"):
            load_chatbot(path)

    def test_shape_table_validated(self, tmp_path):
        vocab = vocab4()
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, "vqg", {}, vocab,
                        {"w": np.ones((2, 3), dtype=np.float32)})
        raw = bytearray(path.read_bytes())
        # flip a declared extent inside the JSON metadata
        idx = raw.find(b'"w": [2, 3]')
        assert idx != -1
        raw[idx:idx + 11] = b'"w": [3, 2]'
        path.write_bytes(bytes(raw))
        with pytest.raises(CheckpointError, match="shape"):
            load_checkpoint(path)

    def test_many_random_round_trips(self, tmp_path, rng):
        for i in range(20):
            tensors = {"t%d" % j: rng.standard_normal(
                (rng.integers(1, 5), rng.integers(1, 5))
            ).astype(np.float32) for j in range(3)}
            path = tmp_path / ("r%d.ckpt" % i)
            save_checkpoint(path, "vqg", {"i": i}, vocab4(), tensors)
            ckpt = load_checkpoint(path)
            for name, a in tensors.items():
                assert np.array_equal(ckpt.tensors[name], a)
