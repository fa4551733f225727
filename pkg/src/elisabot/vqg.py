"""Visual question generation: attention-LSTM decoder over a feature grid.

Training maximizes the likelihood of reference questions under teacher
forcing; decoding is beam search (width 7 by default) returning up to 5
questions ranked by length-normalized log-probability.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import vocab as V
from .autodiff import Tensor, element, log_softmax, matmul, tanh, tmean
from .nn import (AttentionParams, LstmParams, additive_attention, concat_vecs,
                 dropout, init_weight, lstm_step, row)


@dataclass
class VqgConfig:
    annotation_dim: int = 2048
    attention_dim: int = 512
    embedding_dim: int = 512
    lstm_dim: int = 512
    dropout: float = 0.5
    beam_width: int = 7
    outputs_per_image: int = 5
    max_question_len: int = 6

    def __post_init__(self):
        for name in ("annotation_dim", "attention_dim", "embedding_dim",
                     "lstm_dim", "beam_width", "outputs_per_image",
                     "max_question_len"):
            if getattr(self, name) < 1:
                raise ValueError("%s must be >= 1" % name)
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.outputs_per_image > self.beam_width:
            raise ValueError("outputs_per_image cannot exceed beam_width")

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class VqgParams:
    embedding: Tensor           # (K, embedding_dim)
    lstm: LstmParams            # input = embedding_dim + annotation_dim
    attention: AttentionParams  # query = lstm_dim, annotation = annotation_dim
    w_init_h: Tensor            # (lstm_dim, annotation_dim)
    w_init_c: Tensor
    w_out: Tensor               # (K, lstm_dim)
    b_out: Tensor               # (K,)
    config: VqgConfig

    @classmethod
    def init(cls, config: VqgConfig, vocab_size: int, rng):
        c = config
        return cls(
            embedding=init_weight(rng, vocab_size, c.embedding_dim),
            lstm=LstmParams.init(c.embedding_dim + c.annotation_dim,
                                 c.lstm_dim, rng),
            attention=AttentionParams.init(c.lstm_dim, c.annotation_dim,
                                           c.attention_dim, rng),
            w_init_h=init_weight(rng, c.lstm_dim, c.annotation_dim),
            w_init_c=init_weight(rng, c.lstm_dim, c.annotation_dim),
            w_out=init_weight(rng, vocab_size, c.lstm_dim),
            b_out=Tensor(np.zeros(vocab_size)),
            config=config,
        )

    @property
    def vocab_size(self):
        return self.embedding.data.shape[0]

    def parameters(self) -> dict[str, Tensor]:
        out = {"embedding": self.embedding,
               "w_init_h": self.w_init_h, "w_init_c": self.w_init_c,
               "w_out": self.w_out, "b_out": self.b_out}
        out.update(self.lstm.tensors("lstm."))
        out.update(self.attention.tensors("attn."))
        return out


def init_decoder_state(grid, params: VqgParams):
    """h0/c0 from tanh projections of the mean annotation vector."""
    values = np.asarray(grid.values if hasattr(grid, "values") else grid,
                        dtype=np.float64)
    if values.shape[1] != params.config.annotation_dim:
        raise ValueError("grid annotation dim %d does not match config %d"
                         % (values.shape[1], params.config.annotation_dim))
    mean = Tensor(values.mean(axis=0))
    h0 = tanh(matmul(params.w_init_h, mean))
    c0 = tanh(matmul(params.w_init_c, mean))
    return h0, c0


def decode_step(prev_token: int, h, c, grid_t: Tensor, params: VqgParams,
                mask_inference: bool = False, train_rng=None,
                dropout_rate: float = 0.0):
    """One decoder step: attention, LSTM update, output logits.

    ``mask_inference`` forces the unk (and other reserved non-end) logits to
    -inf so decoding never emits them.
    """
    if not 0 <= prev_token < params.vocab_size:
        raise ValueError("token id %d out of range for vocabulary of %d"
                         % (prev_token, params.vocab_size))
    weights, context = additive_attention(h, grid_t, params.attention)
    x = concat_vecs(row(params.embedding, prev_token), context)
    h2, c2 = lstm_step(x, h, c, params.lstm)
    hid = dropout(h2, dropout_rate, training=train_rng is not None,
                  rng=train_rng)
    logits = matmul(params.w_out, hid) + params.b_out
    if mask_inference:
        logits.data[V.UNK] = -np.inf
        logits.data[V.PAD] = -np.inf
        logits.data[V.START] = -np.inf
    return logits, h2, c2, weights


def vqg_loss(grid, target_ids: list[int], params: VqgParams,
             rng=None) -> Tensor:
    """Mean token cross-entropy under teacher forcing.

    ``target_ids`` is the encoded question (content ids plus end id).
    Dropout is active iff ``rng`` is given.
    """
    cfg = params.config
    if not target_ids:
        raise ValueError("empty target sequence")
    if len(target_ids) > cfg.max_question_len + 1:
        raise ValueError("target of %d tokens exceeds max length %d"
                         % (len(target_ids), cfg.max_question_len + 1))
    grid_t = Tensor(np.asarray(grid.values, dtype=np.float64))
    h, c = init_decoder_state(grid, params)
    prev = V.START
    terms = []
    for tok in target_ids:
        logits, h, c, _ = decode_step(prev, h, c, grid_t, params,
                                      train_rng=rng,
                                      dropout_rate=cfg.dropout)
        logp = log_softmax(logits)
        terms.append(element(logp, tok))
        prev = tok
    from .autodiff import concat
    return -tmean(concat(terms))


@dataclass
class BeamHypothesis:
    tokens: list[int] = field(default_factory=list)
    log_prob: float = 0.0
    scored: int = 0
    complete: bool = False
    h: object = None
    c: object = None

    @property
    def normalized(self):
        return self.log_prob / max(1, self.scored)


def _expand(hyps, grid_t, params, step_fn, width):
    """One beam step: score every continuation of every live hypothesis and
    keep the best ``width`` by (cumulative log-prob, parent order, token id)."""
    candidates = []
    for order, hyp in enumerate(hyps):
        logits, h2, c2, _ = step_fn(hyp)
        z = logits.data - np.max(logits.data)
        logp = z - np.log(np.sum(np.exp(z)))
        for tok in range(logp.shape[0]):
            if not np.isfinite(logp[tok]):
                continue
            candidates.append((-(hyp.log_prob + logp[tok]), order, tok,
                               hyp, h2, c2))
    candidates.sort(key=lambda c: c[:3])
    return candidates[:width]


def beam_search(grid, params: VqgParams, vocabulary: V.Vocabulary,
                config: VqgConfig | None = None) -> list[str]:
    """Ranked question strings (up to outputs_per_image, duplicates removed)."""
    seqs = beam_search_ids(grid, params, config)
    out = []
    for tokens, _score in seqs:
        out.append(" ".join(V.decode(tokens, vocabulary)))
    return out


def beam_search_ids(grid, params: VqgParams,
                    config: VqgConfig | None = None):
    """Beam search returning [(token ids incl. terminal end, normalized
    log-prob)] ranked best first."""
    cfg = config or params.config
    grid_t = Tensor(np.asarray(grid.values, dtype=np.float64))
    h0, c0 = init_decoder_state(grid, params)
    live = [BeamHypothesis(tokens=[], log_prob=0.0, scored=0,
                           h=h0, c=c0)]
    completed = []

    def step_fn(hyp):
        prev = hyp.tokens[-1] if hyp.tokens else V.START
        return decode_step(prev, hyp.h, hyp.c, grid_t, params,
                           mask_inference=True)

    for _ in range(cfg.max_question_len + 1):
        if not live:
            break
        next_live = []
        for neg_score, _order, tok, hyp, h2, c2 in _expand(
                live, grid_t, params, step_fn, cfg.beam_width):
            new = BeamHypothesis(tokens=hyp.tokens + [tok],
                                 log_prob=-neg_score,
                                 scored=hyp.scored + 1, h=h2, c=c2)
            if tok == V.END:
                new.complete = True
                completed.append(new)
            elif len(new.tokens) >= cfg.max_question_len:
                completed.append(new)
            else:
                next_live.append(new)
        live = next_live

    seen = set()
    ranked = []
    completed.sort(key=lambda hyp: (-hyp.normalized, tuple(hyp.tokens)))
    for hyp in completed:
        key = tuple(hyp.tokens)
        if key in seen:
            continue
        seen.add(key)
        ranked.append((list(hyp.tokens), hyp.normalized))
        if len(ranked) >= cfg.outputs_per_image:
            break
    return ranked


def greedy_decode_ids(grid, params: VqgParams,
                      config: VqgConfig | None = None) -> list[int]:
    """Pure greedy decoding (argmax each step); reference for beam width 1."""
    cfg = config or params.config
    grid_t = Tensor(np.asarray(grid.values, dtype=np.float64))
    h, c = init_decoder_state(grid, params)
    prev = V.START
    tokens = []
    for _ in range(cfg.max_question_len + 1):
        logits, h, c, _ = decode_step(prev, h, c, grid_t, params,
                                      mask_inference=True)
        tok = int(np.argmax(logits.data))
        tokens.append(tok)
        if tok == V.END or len([t for t in tokens if t != V.END]) \
                >= cfg.max_question_len:
            break
        prev = tok
    return tokens
