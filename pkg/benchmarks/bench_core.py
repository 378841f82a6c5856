"""Time the compiled core against the numpy fallback.

Usage::

    python3 benchmarks/bench_core.py [--n 100 200 400] [--repeat 5]

Each kernel is run on identical inputs by both implementations; the table
reports the best wall time of ``--repeat`` runs and the largest difference
between the two outputs, relative to the largest output entry.
"""
import argparse
import timeit

import numpy as np

from kcmd._backend import implementations


def inputs(n, rng):
    x = rng.standard_normal((n, 3))
    F = rng.standard_normal((n, 50))
    w = np.full(50, 1.0 / 49)
    A = rng.standard_normal((n, n))
    C = np.exp(-np.abs(A + A.T))
    # compact-support Gram at a statistic-sized bandwidth, as in the pipeline
    K = implementations()["python"].smoothing_gram_cont(x[:, :1].copy(), 1.1 * n ** -0.2, 2)
    G = F @ F.T
    W = K / K.sum(axis=1, keepdims=True)
    return {
        "smoothing_gram_cont": (x, 0.8, 4),
        "pairwise_sq_dist": (F, w),
        "weighted_diff": (W, F),
        "collision_sums": (C, K, G),
    }


def max_diff(a, b):
    """Largest difference relative to the largest entry of ``b``."""
    if isinstance(a, tuple):
        return max(max_diff(u, v) for u, v in zip(a, b))
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[100, 200, 400])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    impls = implementations()
    if "compiled" not in impls:
        print("compiled core not built; only the fallback is available")
    names = sorted(impls)
    print(f"{'kernel':<22}{'n':>6}" + "".join(f"{nm + ' ms':>14}" for nm in names)
          + f"{'speedup':>10}{'rel diff':>12}")
    rng = np.random.default_rng(0)
    for n in args.n:
        for kernel, a in inputs(n, rng).items():
            times, outs = {}, {}
            for nm in names:
                fn = getattr(impls[nm], kernel)
                outs[nm] = fn(*a)
                times[nm] = min(timeit.repeat(lambda: fn(*a), number=1, repeat=args.repeat))
            speed = times["python"] / times["compiled"] if "compiled" in times else float("nan")
            diff = max_diff(outs["python"], outs["compiled"]) if "compiled" in outs else 0.0
            print(f"{kernel:<22}{n:>6}" + "".join(f"{1e3 * times[nm]:>14.2f}" for nm in names)
                  + f"{speed:>10.2f}{diff:>12.2e}")


if __name__ == "__main__":
    main()
