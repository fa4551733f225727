"""Feature-grid files, the deterministic pseudo encoder, and dataset loaders.

Feature grids stand in for CNN output: N annotation vectors of dimension D
per image, stored as ``FEAT`` / version / rows / cols / f32 payload (all
little-endian).  Datasets are line-delimited JSON.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FEAT_MAGIC = b"FEAT"
FEAT_VERSION = 1


class FormatError(ValueError):
    """A file did not match its declared binary format."""


class DatasetError(ValueError):
    """A dataset line could not be parsed."""


@dataclass
class FeatureGrid:
    values: np.ndarray  # (N, D) float32

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float32)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError("feature grid must be a non-empty 2-D array, "
                             "got shape %r" % (v.shape,))
        if not np.all(np.isfinite(v)):
            raise ValueError("feature grid contains non-finite values")
        self.values = v

    @property
    def rows(self):
        return self.values.shape[0]

    @property
    def cols(self):
        return self.values.shape[1]


def feature_grid_bytes(grid: FeatureGrid) -> bytes:
    payload = grid.values.astype("<f4").tobytes()
    header = FEAT_MAGIC + struct.pack("<III", FEAT_VERSION, grid.rows,
                                      grid.cols)
    return header + payload


def save_feature_grid(grid: FeatureGrid, path) -> None:
    Path(path).write_bytes(feature_grid_bytes(grid))


def parse_feature_grid(raw: bytes) -> FeatureGrid:
    if len(raw) < 4 or raw[:4] != FEAT_MAGIC:
        raise FormatError("bad feature-grid magic at byte 0: expected %r"
                          % (FEAT_MAGIC,))
    if len(raw) < 16:
        raise FormatError("truncated feature-grid header: expected 16 bytes, "
                          "got %d" % len(raw))
    version, rows, cols = struct.unpack_from("<III", raw, 4)
    if version != FEAT_VERSION:
        raise FormatError("unsupported feature-grid version %d at byte 4"
                          % version)
    expected = 16 + rows * cols * 4
    if len(raw) != expected:
        raise FormatError("feature-grid payload size mismatch at byte 16: "
                          "expected %d bytes total, got %d"
                          % (expected, len(raw)))
    values = np.frombuffer(raw, dtype="<f4", offset=16).reshape(rows, cols)
    return FeatureGrid(values.copy())


def load_feature_grid(path) -> FeatureGrid:
    return parse_feature_grid(Path(path).read_bytes())


def pseudo_encoder(image_id: str, n: int, d: int) -> FeatureGrid:
    """Deterministic stand-in for a CNN encoder: grid values in [-1, 1]
    seeded from a hash of the image id."""
    if n < 1 or d < 1:
        raise ValueError("grid dimensions must be >= 1, got (%d, %d)" % (n, d))
    digest = hashlib.sha256(image_id.encode("utf-8")).digest()
    seed = int.from_bytes(digest[:8], "little")
    rng = np.random.Generator(np.random.PCG64(seed))
    values = rng.uniform(-1.0, 1.0, size=(n, d)).astype(np.float32)
    return FeatureGrid(values)


@dataclass
class QuestionRecord:
    image_id: str
    features: str  # path to the FeatureGrid file, relative to the dataset
    questions: list[str]

    def __post_init__(self):
        if not self.questions:
            raise ValueError("question record %r has no questions"
                             % self.image_id)


@dataclass
class DialoguePair:
    context: str
    reply: str


def _iter_jsonl(path):
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as e:
                raise DatasetError("%s line %d: invalid JSON (%s)"
                                   % (path, lineno, e)) from e


def load_question_dataset(path) -> list[QuestionRecord]:
    records = []
    for lineno, obj in _iter_jsonl(path):
        try:
            records.append(QuestionRecord(
                image_id=obj["image_id"],
                features=obj["features"],
                questions=list(obj["questions"]),
            ))
        except (KeyError, TypeError, ValueError) as e:
            raise DatasetError("%s line %d: %s" % (path, lineno, e)) from e
    return records


def load_dialogue_pairs(path) -> list[DialoguePair]:
    pairs = []
    for lineno, obj in _iter_jsonl(path):
        try:
            pairs.append(DialoguePair(context=obj["context"],
                                      reply=obj["reply"]))
        except (KeyError, TypeError) as e:
            raise DatasetError("%s line %d: %s" % (path, lineno, e)) from e
    return pairs
