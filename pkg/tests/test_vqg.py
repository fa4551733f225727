import math

import numpy as np
import pytest

from conftest import finite_difference_check
from elisabot.autodiff import Tensor
from elisabot.data import FeatureGrid, pseudo_encoder
from elisabot.vocab import END, UNK, RESERVED_TOKENS, Vocabulary, encode
from elisabot.vqg import (VqgConfig, VqgParams, beam_search, beam_search_ids,
                          decode_step, greedy_decode_ids, init_decoder_state,
                          vqg_loss)

SMALL = VqgConfig(annotation_dim=6, attention_dim=5, embedding_dim=4,
                  lstm_dim=4, dropout=0.0, beam_width=3, outputs_per_image=3,
                  max_question_len=6)


def small_vocab(extra=("how", "old", "is", "the", "dog", "?")):
    return Vocabulary(list(RESERVED_TOKENS) + list(extra), min_count=1)


def small_params(seed=0, config=SMALL, vocab=None):
    vocab = vocab or small_vocab()
    return VqgParams.init(config, len(vocab),
                          np.random.default_rng(seed)), vocab


class TestConfig:
    def test_defaults_match_recipe(self):
        c = VqgConfig()
        assert (c.annotation_dim, c.attention_dim, c.embedding_dim,
                c.lstm_dim) == (2048, 512, 512, 512)
        assert c.dropout == 0.5
        assert c.beam_width == 7
        assert c.outputs_per_image == 5
        assert c.max_question_len == 6

    def test_outputs_cannot_exceed_beam(self):
        with pytest.raises(ValueError):
            VqgConfig(beam_width=3, outputs_per_image=4)


class TestInitDecoderState:
    def test_zero_grid_gives_zero_state(self):
        params, _ = small_params()
        h0, c0 = init_decoder_state(FeatureGrid(np.zeros((4, 6))), params)
        assert np.array_equal(h0.data, np.zeros(4))
        assert np.array_equal(c0.data, np.zeros(4))

    def test_identical_rows_equal_single_row(self, rng):
        params, _ = small_params()
        r = rng.standard_normal(6).astype(np.float32)
        multi = init_decoder_state(FeatureGrid(np.tile(r, (5, 1))), params)
        single = init_decoder_state(FeatureGrid(r[None, :]), params)
        assert np.allclose(multi[0].data, single[0].data, atol=1e-12)
        assert np.allclose(multi[1].data, single[1].data, atol=1e-12)

    def test_matches_explicit_recomputation(self, rng):
        params, _ = small_params()
        grid = FeatureGrid(rng.standard_normal((3, 6)).astype(np.float32))
        h0, c0 = init_decoder_state(grid, params)
        mean = grid.values.astype(np.float64).mean(axis=0)
        assert np.allclose(h0.data, np.tanh(params.w_init_h.data @ mean),
                           atol=1e-12)
        assert np.allclose(c0.data, np.tanh(params.w_init_c.data @ mean),
                           atol=1e-12)

    def test_dimension_mismatch(self, rng):
        params, _ = small_params()
        with pytest.raises(ValueError):
            init_decoder_state(FeatureGrid(rng.standard_normal((3, 5))),
                               params)


class TestDecodeStep:
    def test_probabilities_and_weights_normalize(self, rng):
        params, _ = small_params()
        grid = pseudo_encoder("img", 4, 6)
        grid_t = Tensor(np.asarray(grid.values, dtype=np.float64))
        h, c = init_decoder_state(grid, params)
        logits, h2, c2, weights = decode_step(1, h, c, grid_t, params)
        p = np.exp(logits.data - logits.data.max())
        p /= p.sum()
        assert abs(p.sum() - 1.0) <= 1e-9
        assert abs(weights.data.sum() - 1.0) <= 1e-9

    def test_out_of_range_token_rejected(self, rng):
        params, vocab = small_params()
        grid = pseudo_encoder("img", 4, 6)
        grid_t = Tensor(np.asarray(grid.values, dtype=np.float64))
        h, c = init_decoder_state(grid, params)
        with pytest.raises(ValueError):
            decode_step(len(vocab), h, c, grid_t, params)

    def test_masked_argmax_never_reserved(self):
        for seed in range(100):
            params, _ = small_params(seed=seed)
            grid = pseudo_encoder("img-%d" % seed, 3, 6)
            grid_t = Tensor(np.asarray(grid.values, dtype=np.float64))
            h, c = init_decoder_state(grid, params)
            logits, _, _, _ = decode_step(1, h, c, grid_t, params,
                                          mask_inference=True)
            top = int(np.argmax(logits.data))
            assert top == END or top >= 4


class TestVqgLoss:
    def test_uniform_logits_give_log_k_per_token(self):
        params, vocab = small_params()
        # zero everything past the state init: logits become all equal
        params.embedding.data = np.zeros_like(params.embedding.data)
        params.w_out.data = np.zeros_like(params.w_out.data)
        params.b_out.data = np.zeros_like(params.b_out.data)
        grid = pseudo_encoder("img", 4, 6)
        target = encode(["how", "old"], vocab, 6)
        loss = vqg_loss(grid, target, params)
        assert loss.item() == pytest.approx(math.log(len(vocab)), abs=1e-12)

    def test_empty_target_rejected(self):
        params, _ = small_params()
        with pytest.raises(ValueError):
            vqg_loss(pseudo_encoder("img", 4, 6), [], params)

    def test_overlong_target_rejected(self):
        params, _ = small_params()
        with pytest.raises(ValueError):
            vqg_loss(pseudo_encoder("img", 4, 6), [4] * 7 + [END], params)

    def test_likelihood_consistency(self, rng):
        # exp(-loss * C) equals the product of per-token probabilities
        params, vocab = small_params(seed=5)
        grid = pseudo_encoder("img", 4, 6)
        target = encode(["how", "old", "is"], vocab, 6)
        loss = vqg_loss(grid, target, params)

        grid_t = Tensor(np.asarray(grid.values, dtype=np.float64))
        h, c = init_decoder_state(grid, params)
        prev, prod = 1, 1.0
        for tok in target:
            logits, h, c, _ = decode_step(prev, h, c, grid_t, params)
            z = np.exp(logits.data - logits.data.max())
            prod *= (z / z.sum())[tok]
            prev = tok
        assert math.exp(-loss.item() * len(target)) == \
            pytest.approx(prod, abs=1e-9)

    @pytest.mark.parametrize("draw", range(3))
    def test_gradient_matches_finite_differences(self, draw):
        cfg = VqgConfig(annotation_dim=3, attention_dim=3, embedding_dim=3,
                        lstm_dim=3, dropout=0.0, beam_width=2,
                        outputs_per_image=2, max_question_len=4)
        vocab = small_vocab(("a", "b"))
        params = VqgParams.init(cfg, len(vocab),
                                np.random.default_rng(400 + draw))
        grid = pseudo_encoder("img-%d" % draw, 2, 3)
        target = encode(["a", "b"], vocab, 4)

        def make_loss():
            return vqg_loss(grid, target, params)

        finite_difference_check(make_loss, params.parameters())


class TestBeamSearch:
    def test_beam_one_equals_greedy(self):
        for seed in range(100):
            cfg = VqgConfig(annotation_dim=6, attention_dim=5,
                            embedding_dim=4, lstm_dim=4, dropout=0.0,
                            beam_width=1, outputs_per_image=1,
                            max_question_len=6)
            params, _ = small_params(seed=seed, config=cfg)
            grid = pseudo_encoder("img-%d" % seed, 3, 6)
            beam = beam_search_ids(grid, params)
            greedy = greedy_decode_ids(grid, params)
            assert beam, "beam search returned nothing"
            assert beam[0][0] == greedy

    def test_reserved_only_vocab_gives_empty_question(self):
        vocab = Vocabulary(list(RESERVED_TOKENS), min_count=1)
        params, _ = small_params(vocab=vocab)
        out = beam_search(pseudo_encoder("img", 3, 6), params, vocab)
        assert out[0] == ""

    def test_results_sorted_and_bounded(self):
        for seed in range(30):
            params, vocab = small_params(seed=seed)
            ranked = beam_search_ids(pseudo_encoder("i%d" % seed, 3, 6),
                                     params)
            scores = [s for _, s in ranked]
            assert scores == sorted(scores, reverse=True)
            assert len(ranked) <= params.config.outputs_per_image
            for tokens, _ in ranked:
                content = [t for t in tokens if t != END]
                assert len(content) <= params.config.max_question_len
                assert UNK not in tokens

    def test_no_duplicate_outputs(self):
        for seed in range(20):
            params, _ = small_params(seed=seed)
            ranked = beam_search_ids(pseudo_encoder("d%d" % seed, 3, 6),
                                     params)
            keys = [tuple(t) for t, _ in ranked]
            assert len(keys) == len(set(keys))

    def test_questions_terminate(self):
        params, vocab = small_params()
        for q in beam_search(pseudo_encoder("img", 4, 6), params, vocab):
            assert len(q.split()) <= 6
