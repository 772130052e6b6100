"""Inner-KL kernels: compiled extension when built, NumPy fallback otherwise.

Set ``BAYESPRED_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernels_py as python_backend

compiled_backend = None
if os.environ.get("BAYESPRED_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as compiled_backend  # type: ignore[attr-defined,no-redef]
    except ImportError:
        compiled_backend = None

_active = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "compiled" if compiled_backend is not None else "python"

# E log(1 + Q) = int_0^inf e^{-t} (1 - E e^{-tQ}) dt / t, trapezoid in log t
FRULLANI_H = 0.1
FRULLANI_T = np.exp(np.arange(-50.0, 4.0 + 1e-9, FRULLANI_H))


def _c(a):
    return np.ascontiguousarray(a, dtype=float).reshape(-1)


def poisson_negbin_kl(p, logp, shape, rate):
    """KL(truth || NB(shape, rate/(rate+1))), truth pmf ``p`` on 0..len(p)-1."""
    return _active.poisson_negbin_kl(_c(p), _c(logp), _c(shape), float(rate))


def negbin_betanegbin_kl(p, logp, r, a, b):
    """KL(truth || beta-negative-binomial(r, a, b))."""
    return _active.negbin_betanegbin_kl(_c(p), _c(logp), float(r), _c(a), _c(b))


def normal_student_kl(mu, v, m, s2, nu):
    """KL(N(mu, v) || t_nu(m, s2)) for arrays m, s2, nu."""
    return _active.normal_student_kl(float(mu), float(v), _c(m), _c(s2), _c(nu), FRULLANI_T, FRULLANI_H)


def mean_log1p_quadform(lam):
    """E log(1 + sum_i lam_i z_i^2), z standard normal, for each row of ``lam``."""
    return _active.mean_log1p_quadform(np.ascontiguousarray(lam, dtype=float), FRULLANI_T, FRULLANI_H)
