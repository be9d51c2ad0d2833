"""Time the compiled kernels against the numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat N]

Prints one line per kernel and size with the best-of-N time for each
backend and the speedup.  Without a compiled extension only the fallback
is timed.
"""
import argparse
import timeit

import numpy as np

from inertialbcd import _kernels_py

try:
    from inertialbcd import _kernels as _compiled
except ImportError:
    _compiled = None


def _cases(rng):
    for m, r in ((200, 20), (1000, 50)):
        W = rng.random((m, r))
        H = rng.random((r, 300))
        G = H @ H.T
        P = rng.random((m, 300)) @ H.T
        yield (f"column_sweep m={m} r={r}",
               lambda mod, W=W, G=G, P=P: mod.column_sweep(W.copy(), G, P))
        W_hat = W.copy()
        yield (f"column_sweep+prox m={m} r={r}",
               lambda mod, W=W, G=G, P=P, Wh=W_hat: mod.column_sweep(W.copy(), G, P, Wh, 1e-3))
    for n, r in ((20, 5), (60, 10)):
        A, B = rng.random((n, r)), rng.random((n, r))
        yield (f"khatri_rao n={n} r={r}", lambda mod, A=A, B=B: mod.khatri_rao(A, B))
    for n in (20, 100):
        X = rng.random((n, n))
        M = X @ X.T
        x0 = np.full(n, 1.0 / np.sqrt(n))
        yield (f"power_iteration n={n}",
               lambda mod, M=M, x0=x0: mod.power_iteration(M, x0, 1e-9, 1000))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--number", type=int, default=20)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"{'kernel':<34} {'python s':>11} {'cython s':>11} {'speedup':>8}")
    for name, fn in _cases(rng):
        t_py = min(timeit.repeat(lambda: fn(_kernels_py), repeat=args.repeat,
                                 number=args.number)) / args.number
        if _compiled is None:
            print(f"{name:<34} {t_py:11.3e} {'n/a':>11} {'n/a':>8}")
            continue
        t_cy = min(timeit.repeat(lambda: fn(_compiled), repeat=args.repeat,
                                 number=args.number)) / args.number
        print(f"{name:<34} {t_py:11.3e} {t_cy:11.3e} {t_py / t_cy:8.2f}")


if __name__ == "__main__":
    main()
