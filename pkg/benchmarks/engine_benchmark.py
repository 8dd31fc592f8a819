"""Timing comparison of the two evaluation engine backends.

Runs each engine kernel on identical inputs through the pure-Python
backend and the compiled backend, checks the outputs agree bit for bit,
and prints median wall times plus the speedup. Usage:

    python3 benchmarks/engine_benchmark.py [--steps N] [--repeats N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from mdlpredict._engine import encode as enc
from mdlpredict._engine import kernels_py


def _bank() -> enc.EncodedBank:
    """A mixed bank covering every measure family the engines dispatch on."""
    rng = np.random.default_rng(12345)
    t1 = rng.dirichlet(np.ones(2), size=2)
    t2 = rng.dirichlet(np.ones(2), size=4)
    models = [
        enc.encode_iid([0.5, 0.5]),
        enc.encode_iid([0.25, 0.75]),
        enc.encode_markov(1, [0.5, 0.5], t1),
        enc.encode_markov(2, [0.5, 0.5], t2),
        enc.encode_deterministic([1, 1, 0, 1], 0, 2),
        enc.encode_osc_bernoulli(0.5, 0.008, 0.01, 0.05),
        enc.encode_branching([0.5, 0.5], [enc.encode_iid([0.2, 0.8]),
                                          enc.encode_iid([0.9, 0.1])]),
    ]
    return enc.bank_of(models)


def _median_time(fn, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    times.sort()
    return times[len(times) // 2]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--steps", type=int, default=20000,
                        help="path length for the path-shaped kernels")
    parser.add_argument("--repeats", type=int, default=7,
                        help="timing repeats; the median is reported")
    args = parser.parse_args()

    try:
        from mdlpredict._engine import kernels_cy
    except ImportError:
        print("compiled backend is not built; nothing to compare")
        return 1

    bank = _bank()
    rng = np.random.default_rng(0)
    x = rng.integers(0, 2, size=args.steps).astype(np.int64)
    u_path = rng.random(args.steps)
    u_mc = rng.random((4096, 9))

    cases = [
        ("pred_bank", lambda k: k.pred_bank(bank, x)),
        ("block_probs(h=10)", lambda k: k.block_probs(bank, 3, x[:50], 10)),
        ("mc_block_scores(h=8)", lambda k: k.mc_block_scores(bank, 0, 3, x[:50], 8, u_mc)),
        ("sample_path", lambda k: k.sample_path(bank, 3, args.steps, u_path)),
    ]

    print(f"path length {args.steps}, bank of {bank.size} models, "
          f"median of {args.repeats} repeats")
    print(f"{'kernel':<22}{'python':>12}{'compiled':>12}{'speedup':>10}")
    for name, call in cases:
        ref = call(kernels_py)
        got = call(kernels_cy)
        assert np.asarray(ref).tobytes() == np.asarray(got).tobytes(), \
            f"{name}: backends disagree"
        t_py = _median_time(lambda: call(kernels_py), args.repeats)
        t_cy = _median_time(lambda: call(kernels_cy), args.repeats)
        print(f"{name:<22}{t_py * 1e3:>10.2f}ms{t_cy * 1e3:>10.2f}ms"
              f"{t_py / t_cy:>9.1f}x")
    print("outputs bitwise identical across backends")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
