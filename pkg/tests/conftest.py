import numpy as np
import pytest

from elisabot.autodiff import Tape
from elisabot.data import DialoguePair

EPS = 1e-5
REL_TOL = 1e-4


def finite_difference_check(make_loss, params, eps=EPS, tol=REL_TOL):
    """Compare tape gradients with central finite differences.

    ``make_loss`` builds the scalar loss from scratch on each call (it must
    not capture a tape).  ``params`` is {name: Tensor}.  Returns the worst
    relative error seen.
    """
    with Tape() as tape:
        loss = make_loss()
    grads = tape.gradients(loss, params)

    worst = 0.0
    for name, p in params.items():
        g = grads[name]
        it = np.nditer(p.data, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = p.data[idx]
            p.data[idx] = orig + eps
            f_plus = make_loss().item()
            p.data[idx] = orig - eps
            f_minus = make_loss().item()
            p.data[idx] = orig
            fd = (f_plus - f_minus) / (2 * eps)
            err = abs(fd - g[idx]) / max(1e-2, abs(fd), abs(g[idx]))
            worst = max(worst, err)
            assert err <= tol, (
                "gradient mismatch for %s[%s]: autodiff %g vs fd %g "
                "(rel err %g)" % (name, idx, g[idx], fd, err))
    return worst


def random_dialogue_pairs(n, seed, vocab_size=30, reply_len=(3, 7),
                          context_len=(2, 6)):
    words = ["w%d" % i for i in range(vocab_size)]
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(n):
        ctx = " ".join(rng.choice(words,
                                  size=rng.integers(*context_len)))
        rep = " ".join(rng.choice(words, size=rng.integers(*reply_len)))
        pairs.append(DialoguePair(ctx, rep))
    return pairs


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
