"""Adam optimization, batched training loops, and checkpoint persistence.

Checkpoints are a self-describing binary container: ``ELSB`` magic, format
version, a JSON metadata block (model kind, hyperparameters, vocabulary in
id order, tensor shape table), then named float32 tensors.  Loading
validates magic, version and the shape table before accepting anything.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import Tape, Tensor
from .chatbot import ChatbotConfig, ChatbotParams, chatbot_loss
from .vocab import Vocabulary, build_vocabulary, encode, tokenize
from .vqg import VqgConfig, VqgParams, vqg_loss

CKPT_MAGIC = b"ELSB"
CKPT_VERSION = 1


class CheckpointError(ValueError):
    """A checkpoint file failed validation."""


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    lr: float = 1e-4

    @classmethod
    def init(cls, params: dict[str, Tensor], lr: float = 1e-4):
        return cls(m={k: np.zeros_like(p.data) for k, p in params.items()},
                   v={k: np.zeros_like(p.data) for k, p in params.items()},
                   lr=lr)


def adam_step(params: dict[str, Tensor], grads: dict[str, np.ndarray],
              state: AdamState):
    """One bias-corrected Adam update; parameter arrays are replaced, not
    mutated, so concurrent readers never see a half-applied step."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.data.shape:
            raise ValueError("gradient shape %r does not match parameter "
                             "%s of shape %r" % (g.shape, name, p.data.shape))
        state.m[name] = b1 * state.m[name] + (1.0 - b1) * g
        state.v[name] = b2 * state.v[name] + (1.0 - b2) * g * g
        m_hat = state.m[name] / bc1
        v_hat = state.v[name] / bc2
        p.data = p.data - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params, state


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float):
    """Scale all gradients together so the global L2 norm is <= max_norm."""
    if max_norm <= 0:
        raise ValueError("max_norm must be positive, got %r" % (max_norm,))
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total > max_norm:
        scale = max_norm / total
        grads = {k: g * scale for k, g in grads.items()}
    return grads


@dataclass
class TrainConfig:
    batch_size: int = 64
    max_steps: int = 1000
    clip_norm: float = 5.0
    lr: float = 1e-4
    seed: int = 0
    target_loss: float | None = None  # stop early once mean batch loss drops
    log_every: int = 0                # 0 = silent

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def train(examples: list, loss_fn, params: dict[str, Tensor],
          config: TrainConfig) -> list[float]:
    """Generic training loop: seeded shuffled batches, mean batch loss,
    backward, clip, Adam.  ``loss_fn(example, rng)`` must return a scalar
    Tensor while a tape is active.  Returns the per-step loss curve."""
    if not examples:
        raise ValueError("cannot train on an empty dataset")
    rng = np.random.default_rng(config.seed)
    state = AdamState.init(params, lr=config.lr)
    order: list[int] = []
    curve: list[float] = []
    for step in range(config.max_steps):
        if len(order) < config.batch_size:
            epoch = list(rng.permutation(len(examples)))
            order.extend(epoch)
        batch = [examples[i] for i in order[:config.batch_size]]
        del order[:min(config.batch_size, len(order))]

        with Tape() as tape:
            total = None
            for ex in batch:
                loss = loss_fn(ex, rng)
                total = loss if total is None else total + loss
            mean_loss = total * (1.0 / len(batch))
        grads = tape.gradients(mean_loss, params)
        grads = clip_gradients(grads, config.clip_norm)
        adam_step(params, grads, state)
        value = mean_loss.item()
        curve.append(value)
        if config.log_every and (step + 1) % config.log_every == 0:
            print("step %d  loss %.4f" % (step + 1, value))
        if config.target_loss is not None and value < config.target_loss:
            break
    return curve


# --- model training recipes ----------------------------------------------

def train_vqg_model(records, grids: dict, config: VqgConfig,
                    train_cfg: TrainConfig, min_count: int = 3,
                    use_dropout: bool = True):
    """First recipe: build the vocabulary from the reference questions, then
    fit the question decoder on every (grid, question) pair.

    ``grids`` maps image_id to FeatureGrid.  Returns (params, vocab, curve).
    """
    sentences = [tokenize(q) for r in records for q in r.questions]
    vocab = build_vocabulary(sentences, min_count)
    params = VqgParams.init(config, len(vocab),
                            np.random.default_rng(train_cfg.seed))
    examples = []
    for r in records:
        grid = grids[r.image_id]
        for q in r.questions:
            ids = encode(tokenize(q), vocab, config.max_question_len)
            examples.append((grid, ids))

    def loss_fn(ex, rng):
        grid, ids = ex
        return vqg_loss(grid, ids, params,
                        rng=rng if use_dropout else None)

    curve = train(examples, loss_fn, params.parameters(), train_cfg)
    return params, vocab, curve


def _encode_pairs(pairs, vocab, max_len):
    encoded = []
    for p in pairs:
        ctx = encode(tokenize(p.context), vocab, max_len)
        rep = encode(tokenize(p.reply), vocab, max_len)
        encoded.append((ctx, rep))
    return encoded


def train_chatbot_model(pairs, config: ChatbotConfig, train_cfg: TrainConfig,
                        min_count: int = 3, use_dropout: bool = True):
    """Second recipe, phase one: vocabulary and weights from the first
    dialogue corpus.  Returns (params, vocab, curve)."""
    sentences = [tokenize(p.context) for p in pairs]
    sentences += [tokenize(p.reply) for p in pairs]
    vocab = build_vocabulary(sentences, min_count)
    params = ChatbotParams.init(config, len(vocab),
                                np.random.default_rng(train_cfg.seed))
    curve = _run_chatbot_training(pairs, params, vocab, train_cfg,
                                  use_dropout)
    return params, vocab, curve


def fine_tune_chatbot(params: ChatbotParams, vocab: Vocabulary, pairs_b,
                      train_cfg: TrainConfig, use_dropout: bool = True):
    """Phase two: continue Adam training on a second corpus with the
    vocabulary frozen; unseen tokens map to unk."""
    return _run_chatbot_training(pairs_b, params, vocab, train_cfg,
                                 use_dropout)


def _run_chatbot_training(pairs, params, vocab, train_cfg, use_dropout):
    examples = _encode_pairs(pairs, vocab, params.config.max_reply_len)

    def loss_fn(ex, rng):
        ctx, rep = ex
        return chatbot_loss(ctx, rep, params,
                            rng=rng if use_dropout else None)

    return train(examples, loss_fn, params.parameters(), train_cfg)


def mean_corpus_loss(pairs, params: ChatbotParams, vocab) -> float:
    """Dropout-free mean loss over a dialogue corpus (fine-tune oracle)."""
    examples = _encode_pairs(pairs, vocab, params.config.max_reply_len)
    total = 0.0
    for ctx, rep in examples:
        total += chatbot_loss(ctx, rep, params).item()
    return total / len(examples)


# --- checkpoint container -------------------------------------------------

@dataclass
class ModelCheckpoint:
    kind: str                       # "vqg" | "chatbot"
    hyper: dict
    vocab: Vocabulary
    tensors: dict[str, np.ndarray]  # float32
    version: int = CKPT_VERSION


def save_checkpoint(path, kind: str, hyper: dict, vocab: Vocabulary,
                    tensors: dict[str, Tensor | np.ndarray]) -> None:
    arrays = {name: np.asarray(getattr(t, "data", t), dtype="<f4")
              for name, t in tensors.items()}
    meta = {
        "kind": kind,
        "hyper": hyper,
        "vocab": vocab.id_to_token,
        "min_count": vocab.min_count,
        "tensors": {name: list(a.shape) for name, a in arrays.items()},
    }
    meta_bytes = json.dumps(meta, sort_keys=True).encode("utf-8")
    out = bytearray()
    out += CKPT_MAGIC
    out += struct.pack("<I", CKPT_VERSION)
    out += struct.pack("<I", len(meta_bytes))
    out += meta_bytes
    out += struct.pack("<I", len(arrays))
    for name in sorted(arrays):
        a = arrays[name]
        nb = name.encode("utf-8")
        out += struct.pack("<I", len(nb)) + nb
        out += struct.pack("<I", a.ndim)
        out += struct.pack("<%dI" % a.ndim, *a.shape)
        out += a.tobytes()
    tmp = Path(str(path) + ".tmp")
    tmp.write_bytes(bytes(out))
    tmp.replace(path)


def load_checkpoint(path) -> ModelCheckpoint:
    raw = Path(path).read_bytes()
    if raw[:4] != CKPT_MAGIC:
        raise CheckpointError("bad checkpoint magic: expected %r"
                              % (CKPT_MAGIC,))
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != CKPT_VERSION:
        raise CheckpointError("unknown checkpoint version %d" % version)
    (meta_len,) = struct.unpack_from("<I", raw, 8)
    meta = json.loads(raw[12:12 + meta_len].decode("utf-8"))
    off = 12 + meta_len
    (count,) = struct.unpack_from("<I", raw, off)
    off += 4
    tensors = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<I", raw, off)
        off += 4
        name = raw[off:off + name_len].decode("utf-8")
        off += name_len
        (rank,) = struct.unpack_from("<I", raw, off)
        off += 4
        shape = struct.unpack_from("<%dI" % rank, raw, off)
        off += 4 * rank
        n = int(np.prod(shape)) if rank else 1
        a = np.frombuffer(raw, dtype="<f4", count=n, offset=off)
        off += 4 * n
        tensors[name] = a.reshape(shape).copy()
    declared = meta.get("tensors", {})
    if set(declared) != set(tensors):
        raise CheckpointError("tensor table mismatch: metadata declares %d "
                              "tensors, payload has %d"
                              % (len(declared), len(tensors)))
    for name, shape in declared.items():
        if list(tensors[name].shape) != list(shape):
            raise CheckpointError("tensor %s shape %r does not match "
                                  "declared %r"
                                  % (name, tensors[name].shape, shape))
    vocab = Vocabulary(meta["vocab"], min_count=meta.get("min_count", 1))
    return ModelCheckpoint(kind=meta["kind"], hyper=meta["hyper"],
                           vocab=vocab, tensors=tensors, version=version)


# --- model <-> checkpoint adapters ---------------------------------------

def save_vqg(path, params: VqgParams, vocab: Vocabulary) -> None:
    save_checkpoint(path, "vqg", params.config.as_dict(), vocab,
                    params.parameters())


def save_chatbot(path, params: ChatbotParams, vocab: Vocabulary) -> None:
    save_checkpoint(path, "chatbot", params.config.as_dict(), vocab,
                    params.parameters())


def _restore(param_obj, tensors):
    for name, p in param_obj.parameters().items():
        if name not in tensors:
            raise CheckpointError("checkpoint is missing tensor %r" % name)
        p.data = np.asarray(tensors[name], dtype=np.float64)


def load_vqg(path):
    ckpt = load_checkpoint(path)
    if ckpt.kind != "vqg":
        raise CheckpointError("checkpoint kind %r, expected 'vqg'"
                              % ckpt.kind)
    config = VqgConfig(**ckpt.hyper)
    params = VqgParams.init(config, len(ckpt.vocab),
                            np.random.default_rng(0))
    _restore(params, ckpt.tensors)
    return params, ckpt.vocab


def load_chatbot(path):
    ckpt = load_checkpoint(path)
    if ckpt.kind != "chatbot":
        raise CheckpointError("checkpoint kind %r, expected 'chatbot'"
                              % ckpt.kind)
    config = ChatbotConfig(**ckpt.hyper)
    params = ChatbotParams.init(config, len(ckpt.vocab),
                                np.random.default_rng(0))
    _restore(params, ckpt.tensors)
    return params, ckpt.vocab
