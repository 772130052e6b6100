"""Compiled versus NumPy inner-KL kernels on batches typical of a risk run.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Prints one line per kernel with the best wall time of each backend, the
speed-up and the largest absolute disagreement.
"""

from __future__ import annotations

import argparse
import time

import numpy as np
from scipy import stats

from bayespred import kernels


def _cases(rng):
    y = np.arange(60)
    p = stats.poisson.pmf(y, 4.0)
    lp = stats.poisson.logpmf(y, 4.0)
    shape = 0.5 + rng.poisson(4.0 * 50, size=20_000)
    q = stats.nbinom.pmf(y, 3, 0.6)
    lq = stats.nbinom.logpmf(y, 3, 0.6)
    a = 0.5 + rng.integers(0, 400, size=20_000)
    b = 0.5 + 3 * 100.0 + rng.random(20_000)
    m = rng.normal(0.0, 0.1, size=20_000)
    s2 = 1.0 + 0.1 * rng.standard_normal(20_000) ** 2
    nu = np.full(20_000, 99.0)
    lam = rng.gamma(50.0, 1 / 50.0, size=(20_000, 3)) / 100.0
    t = kernels.FRULLANI_T
    h = kernels.FRULLANI_H
    return {
        "poisson_negbin_kl": (lambda be: be.poisson_negbin_kl(p, lp, shape, 50.0)),
        "negbin_betanegbin_kl": (lambda be: be.negbin_betanegbin_kl(q, lq, 3.0, a, b)),
        "normal_student_kl": (lambda be: be.normal_student_kl(0.0, 1.0, m, s2, nu, t, h)),
        "mean_log1p_quadform": (lambda be: be.mean_log1p_quadform(np.ascontiguousarray(lam), t, h)),
    }


def _best(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, np.asarray(out)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if kernels.compiled_backend is None:
        print("compiled extension not built; only the NumPy backend is available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':24s} {'python s':>10s} {'compiled s':>11s} {'speed-up':>9s} {'max |diff|':>11s}")
    for name, call in _cases(rng).items():
        tp, vp = _best(lambda: call(kernels.python_backend), args.repeat)
        if kernels.compiled_backend is None:
            print(f"{name:24s} {tp:10.4f} {'-':>11s} {'-':>9s} {'-':>11s}")
            continue
        tc, vc = _best(lambda: call(kernels.compiled_backend), args.repeat)
        print(f"{name:24s} {tp:10.4f} {tc:11.4f} {tp / tc:9.1f} {float(np.max(np.abs(vp - vc))):11.2e}")


if __name__ == "__main__":
    main()
