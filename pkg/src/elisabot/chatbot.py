"""Feedback chatbot: bidirectional-GRU encoder with summed directions and
an attention GRU decoder decoded greedily (max 12 content tokens)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import vocab as V
from .autodiff import (Tensor, concat, element, log_softmax, matmul,
                       stack_rows, tmean)
from .nn import (AttentionParams, GruParams, additive_attention, concat_vecs,
                 dropout, gru_step, init_weight, row)


@dataclass
class ChatbotConfig:
    hidden_dim: int = 500
    embedding_dim: int = 500
    dropout: float = 0.25
    max_reply_len: int = 12
    encoder_layers: int = 1
    decoder_layers: int = 1

    def __post_init__(self):
        if self.hidden_dim < 1 or self.embedding_dim < 1:
            raise ValueError("dimensions must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.max_reply_len < 1:
            raise ValueError("max_reply_len must be >= 1")

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class ChatbotParams:
    embedding: Tensor        # (K, embedding_dim), shared by both sides
    gru_fwd: GruParams
    gru_bwd: GruParams
    gru_dec: GruParams       # input = embedding_dim + hidden_dim
    attention: AttentionParams
    w_out: Tensor            # (K, hidden_dim)
    b_out: Tensor
    config: ChatbotConfig

    @classmethod
    def init(cls, config: ChatbotConfig, vocab_size: int, rng):
        c = config
        return cls(
            embedding=init_weight(rng, vocab_size, c.embedding_dim),
            gru_fwd=GruParams.init(c.embedding_dim, c.hidden_dim, rng),
            gru_bwd=GruParams.init(c.embedding_dim, c.hidden_dim, rng),
            gru_dec=GruParams.init(c.embedding_dim + c.hidden_dim,
                                   c.hidden_dim, rng),
            attention=AttentionParams.init(c.hidden_dim, c.hidden_dim,
                                           c.hidden_dim, rng),
            w_out=init_weight(rng, vocab_size, c.hidden_dim),
            b_out=Tensor(np.zeros(vocab_size)),
            config=config,
        )

    @property
    def vocab_size(self):
        return self.embedding.data.shape[0]

    def parameters(self) -> dict[str, Tensor]:
        out = {"embedding": self.embedding,
               "w_out": self.w_out, "b_out": self.b_out}
        out.update(self.gru_fwd.tensors("fwd."))
        out.update(self.gru_bwd.tensors("bwd."))
        out.update(self.gru_dec.tensors("dec."))
        out.update(self.attention.tensors("attn."))
        return out


@dataclass
class EncoderOutputs:
    outputs: Tensor   # (T, hidden_dim): per-step sum of both directions
    final: Tensor     # (hidden_dim,): summed final hidden states


def encode_sequence(input_ids: list[int], params: ChatbotParams
                    ) -> EncoderOutputs:
    """Run both GRU directions over the input and sum them per step."""
    if not input_ids:
        raise ValueError("cannot encode an empty input sequence")
    c = params.config
    embs = [row(params.embedding, i) for i in input_ids]
    zero = Tensor(np.zeros(c.hidden_dim))

    h = zero
    fwd = []
    for e in embs:
        h = gru_step(e, h, params.gru_fwd)
        fwd.append(h)
    fwd_final = h

    h = zero
    bwd_rev = []
    for e in reversed(embs):
        h = gru_step(e, h, params.gru_bwd)
        bwd_rev.append(h)
    bwd_final = h
    bwd = list(reversed(bwd_rev))

    summed = [f + b for f, b in zip(fwd, bwd)]
    return EncoderOutputs(outputs=stack_rows(summed),
                          final=fwd_final + bwd_final)


def _decoder_step(prev_token, h, enc: EncoderOutputs, params: ChatbotParams,
                  mask_inference=False, train_rng=None, dropout_rate=0.0):
    _, context = additive_attention(h, enc.outputs, params.attention)
    x = concat_vecs(row(params.embedding, prev_token), context)
    h2 = gru_step(x, h, params.gru_dec)
    hid = dropout(h2, dropout_rate, training=train_rng is not None,
                  rng=train_rng)
    logits = matmul(params.w_out, hid) + params.b_out
    if mask_inference:
        logits.data[V.UNK] = -np.inf
        logits.data[V.PAD] = -np.inf
        logits.data[V.START] = -np.inf
    return logits, h2


def greedy_decode(enc: EncoderOutputs, params: ChatbotParams,
                  vocabulary: V.Vocabulary,
                  config: ChatbotConfig | None = None) -> str:
    """Argmax decoding until end or the reply-length cap; never emits unk."""
    cfg = config or params.config
    h = enc.final
    prev = V.START
    tokens: list[int] = []
    for _ in range(cfg.max_reply_len):
        logits, h = _decoder_step(prev, h, enc, params, mask_inference=True)
        tok = int(np.argmax(logits.data))
        if tok == V.END:
            break
        tokens.append(tok)
        prev = tok
    return " ".join(V.decode(tokens + [V.END], vocabulary))


def reply_to(text: str, params: ChatbotParams, vocabulary: V.Vocabulary,
             config: ChatbotConfig | None = None) -> str:
    """Convenience wrapper: tokenize, encode, decode a feedback comment."""
    cfg = config or params.config
    ids = V.encode(V.tokenize(text), vocabulary, cfg.max_reply_len)
    enc = encode_sequence(ids, params)
    return greedy_decode(enc, params, vocabulary, cfg)


def chatbot_loss(context_ids: list[int], reply_ids: list[int],
                 params: ChatbotParams, rng=None) -> Tensor:
    """Teacher-forced mean cross-entropy over the reply tokens."""
    if not context_ids or not reply_ids:
        raise ValueError("both sides of a dialogue pair must be nonempty")
    cfg = params.config
    enc = encode_sequence(context_ids, params)
    h = enc.final
    prev = V.START
    terms = []
    for tok in reply_ids:
        logits, h = _decoder_step(prev, h, enc, params, train_rng=rng,
                                  dropout_rate=cfg.dropout)
        logp = log_softmax(logits)
        terms.append(element(logp, tok))
        prev = tok
    return -tmean(concat(terms))
