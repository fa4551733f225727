"""Benchmark the compiled recurrent-cell kernels against the numpy fallback.

Runs the fused GRU/LSTM forward and backward steps at a few sizes and
prints per-call times for both backends plus the speedup.  Usage:

    python3 benchmarks/bench_kernels.py [--repeats 2000]
"""

import argparse
import time

import numpy as np

from elisabot.kernels import _npk
from elisabot.nn import GruParams, LstmParams

try:
    from elisabot.kernels import _cyk
except ImportError:
    _cyk = None

SIZES = [(32, 32), (128, 128), (512, 512)]


def _bench(fn, args, repeats):
    fn(*args)  # warm up
    start = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - start) / repeats


def _gru_args(input_dim, hidden_dim, rng):
    p = GruParams.init(input_dim, hidden_dim, rng)
    x = rng.standard_normal(input_dim)
    h = rng.standard_normal(hidden_dim)
    return (x, h) + p._raw()


def _lstm_args(input_dim, hidden_dim, rng):
    p = LstmParams.init(input_dim, hidden_dim, rng)
    x = rng.standard_normal(input_dim)
    h = rng.standard_normal(hidden_dim)
    c = rng.standard_normal(hidden_dim)
    return (x, h, c) + p._raw()


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=2000)
    args = parser.parse_args()

    if _cyk is None:
        print("compiled backend not available; nothing to compare")
        return

    rng = np.random.default_rng(0)
    print("%-22s %12s %12s %9s" % ("kernel", "numpy", "cython", "speedup"))
    for input_dim, hidden_dim in SIZES:
        cases = {
            "gru_forward": _gru_args(input_dim, hidden_dim, rng),
            "lstm_forward": _lstm_args(input_dim, hidden_dim, rng),
        }
        # backward calls take the forward's saved activations
        gf = cases["gru_forward"]
        _, gcache = _npk.gru_forward(*gf)
        dh = rng.standard_normal(hidden_dim)
        cases["gru_backward"] = (dh,) + gf + (gcache,)
        lf = cases["lstm_forward"]
        _, _, lcache = _npk.lstm_forward(*lf)
        dc = rng.standard_normal(hidden_dim)
        cases["lstm_backward"] = (dh, dc) + lf + (lcache,)

        for name, call_args in cases.items():
            t_np = _bench(getattr(_npk, name), call_args, args.repeats)
            t_cy = _bench(getattr(_cyk, name), call_args, args.repeats)
            label = "%s %dx%d" % (name, input_dim, hidden_dim)
            print("%-22s %10.1fus %10.1fus %8.2fx"
                  % (label, t_np * 1e6, t_cy * 1e6, t_np / t_cy))


if __name__ == "__main__":
    main()
