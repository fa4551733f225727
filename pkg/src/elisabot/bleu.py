"""Corpus BLEU with modified n-gram precision and brevity penalty.

BLEU-4 with uniform weights.  Zero higher-order precisions (n >= 2) get
add-one smoothing so short question-style candidates still score; a zero
unigram precision makes the score 0.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

MAX_ORDER = 4


@dataclass
class BleuReport:
    precisions: list[float]      # modified precisions, n = 1..4
    brevity_penalty: float
    score: float                 # in [0, 1]
    candidate_length: int
    reference_length: int

    def as_dict(self):
        return {
            "precisions": self.precisions,
            "brevity_penalty": self.brevity_penalty,
            "score": self.score,
            "score_x100": self.score * 100.0,
            "candidate_length": self.candidate_length,
            "reference_length": self.reference_length,
        }


def _ngrams(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _clipped_counts(candidate, references, n):
    cand = _ngrams(candidate, n)
    if not cand:
        return 0, 0
    max_ref = Counter()
    for ref in references:
        for gram, count in _ngrams(ref, n).items():
            if count > max_ref[gram]:
                max_ref[gram] = count
    matched = sum(min(count, max_ref[gram]) for gram, count in cand.items())
    return matched, sum(cand.values())


def modified_precision(candidates, reference_sets, n) -> float:
    """Corpus-level clipped n-gram precision; 0 when no candidate has an
    n-gram of that order."""
    if n < 1:
        raise ValueError("n must be >= 1, got %d" % n)
    matched = total = 0
    for cand, refs in zip(candidates, reference_sets):
        m, t = _clipped_counts(cand, refs, n)
        matched += m
        total += t
    if total == 0:
        return 0.0
    return matched / total


def _closest_ref_length(candidate, references):
    # ties broken toward the shorter reference
    return min((abs(len(r) - len(candidate)), len(r)) for r in references)[1]


def corpus_bleu(candidates, reference_sets) -> BleuReport:
    if len(candidates) != len(reference_sets):
        raise ValueError("candidate/reference length mismatch: %d vs %d"
                         % (len(candidates), len(reference_sets)))
    if not candidates:
        raise ValueError("empty candidate corpus")
    for refs in reference_sets:
        if not refs:
            raise ValueError("every candidate needs at least one reference")

    precisions = []
    for n in range(1, MAX_ORDER + 1):
        matched = total = 0
        for cand, refs in zip(candidates, reference_sets):
            m, t = _clipped_counts(cand, refs, n)
            matched += m
            total += t
        if total == 0:
            # no n-grams of this order exist in the corpus; skip via p = 1
            precisions.append(1.0)
        elif matched == 0 and n >= 2:
            precisions.append((matched + 1) / (total + 1))
        else:
            precisions.append(matched / total)

    cand_len = sum(len(c) for c in candidates)
    ref_len = sum(_closest_ref_length(c, r)
                  for c, r in zip(candidates, reference_sets))
    if cand_len > ref_len:
        bp = 1.0
    elif cand_len == 0:
        bp = math.exp(1.0 - float("inf")) if ref_len else 1.0
    else:
        bp = math.exp(1.0 - ref_len / cand_len)

    if precisions[0] == 0.0:
        score = 0.0
    else:
        score = bp * math.exp(sum(math.log(p) for p in precisions)
                              / MAX_ORDER)
    return BleuReport(precisions=precisions, brevity_penalty=bp, score=score,
                      candidate_length=cand_len, reference_length=ref_len)
