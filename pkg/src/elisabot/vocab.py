"""Tokenization and vocabulary construction.

Tokens are lowercased; the punctuation characters ``. , ! ? ' "`` split off
as standalone tokens.  Vocabulary ids 0..3 are reserved for pad/start/end/
unk; the remaining ids are assigned by descending corpus frequency with
lexicographic tie-break, which keeps checkpoints reproducible.
"""

from __future__ import annotations

import re
from collections import Counter
from collections.abc import Iterable

PAD, START, END, UNK = 0, 1, 2, 3
RESERVED_TOKENS = ("<pad>", "<start>", "<end>", "<unk>")

_TOKEN_RE = re.compile(r"[.,!?'\"]|[^\s.,!?'\"]+")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


class Vocabulary:
    def __init__(self, tokens_in_id_order: list[str], min_count: int = 1):
        if list(tokens_in_id_order[:4]) != list(RESERVED_TOKENS):
            raise ValueError("first four vocabulary entries must be the "
                             "reserved tokens %r" % (RESERVED_TOKENS,))
        self.id_to_token = list(tokens_in_id_order)
        self.token_to_id = {t: i for i, t in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            raise ValueError("duplicate token in vocabulary")
        self.min_count = min_count

    def __len__(self):
        return len(self.id_to_token)

    def __contains__(self, token):
        return token in self.token_to_id

    def id_of(self, token: str) -> int:
        return self.token_to_id.get(token, UNK)

    def token_of(self, idx: int) -> str:
        return self.id_to_token[idx]

    def __eq__(self, other):
        return (isinstance(other, Vocabulary)
                and self.id_to_token == other.id_to_token)


def build_vocabulary(corpus: Iterable[list[str]], min_count: int) -> Vocabulary:
    """Keep exactly the tokens seen at least ``min_count`` times."""
    if min_count < 1:
        raise ValueError("min_count must be >= 1, got %d" % min_count)
    counts = Counter()
    for sentence in corpus:
        counts.update(sentence)
    for reserved in RESERVED_TOKENS:
        counts.pop(reserved, None)
    kept = [t for t, n in counts.items() if n >= min_count]
    kept.sort(key=lambda t: (-counts[t], t))
    return Vocabulary(list(RESERVED_TOKENS) + kept, min_count=min_count)


def encode(tokens: list[str], vocab: Vocabulary, max_len: int) -> list[int]:
    """Token ids truncated to ``max_len`` content tokens, end id appended.
    Out-of-vocabulary tokens map to unk."""
    if max_len < 1:
        raise ValueError("max_len must be >= 1, got %d" % max_len)
    ids = [vocab.id_of(t) for t in tokens[:max_len]]
    ids.append(END)
    return ids


def decode(ids: Iterable[int], vocab: Vocabulary) -> list[str]:
    """Tokens for the given ids, stopping at end and skipping reserved ids."""
    out = []
    for i in ids:
        if i == END:
            break
        if i in (PAD, START):
            continue
        out.append(vocab.token_of(i))
    return out
