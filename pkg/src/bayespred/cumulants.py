"""Per-observation expectations of products of log-likelihood derivatives.

A tensor ``L_{ij,r,s}`` is ``E[l_ij l_r l_s]``: each comma-separated group
is one derivative, the letters are parameter indices.  Tensors are stored
by *partition*, the tuple of group sizes in non-increasing order, with
axes laid out group by group in that order (``(2, 1, 1)`` holds
``E[l_ab l_c l_d]`` with axes ``a, b, c, d``).  Groups of equal size are
exchangeable, so any index pattern maps onto a stored tensor by a stable
sort of its groups; see :meth:`CumulantTensors.term`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .families import Family, FamilyError
from .rng import block_rngs

PARTITIONS: tuple[tuple[int, ...], ...] = (
    (1,),
    (1, 1),
    (2,),
    (3,),
    (2, 1),
    (1, 1, 1),
    (4,),
    (3, 1),
    (2, 2),
    (2, 1, 1),
    (1, 1, 1, 1),
)

_LETTERS = "abcdefgh"


class SingularFisherError(FamilyError):
    """Fisher information is singular or not positive definite (Assumption A6)."""


def _pattern_key(pattern: str) -> tuple[tuple[int, ...], str]:
    groups = pattern.split(",")
    if any(not g for g in groups):
        raise ValueError(f"malformed index pattern {pattern!r}")
    ordered = sorted(groups, key=len, reverse=True)
    return tuple(len(g) for g in ordered), "".join(ordered)


def _moment(weights: np.ndarray, factors: list[np.ndarray]) -> np.ndarray:
    """Weighted mean over the batch axis of an outer product of derivative arrays."""
    subs = []
    used = 0
    for f in factors:
        k = f.ndim - 1
        subs.append("z" + _LETTERS[used : used + k])
        used += k
    spec = "z," + ",".join(subs) + "->" + _LETTERS[:used]
    return np.einsum(spec, weights, *factors, optimize=True)


def _factors(d, partition):
    return [d.order(k) for k in partition]


@dataclass(frozen=True)
class CumulantTensors:
    """Partition-indexed per-observation tensors plus Fisher information."""

    tensors: dict
    fisher: np.ndarray
    fisher_inv: np.ndarray
    std_errors: dict | None = None
    method: str = "analytic"
    theta: tuple = field(default=())

    @property
    def dim(self) -> int:
        return self.fisher.shape[0]

    def get(self, pattern: str, out: str | None = None) -> np.ndarray:
        """Tensor for an index pattern with axes ordered as ``out``.

        ``out`` defaults to the pattern's letters in alphabetical order, so
        ``get("jk,i,l")`` and ``get("ijkl")`` line up axis by axis.
        """
        key, letters = _pattern_key(pattern)
        if key not in self.tensors:
            raise KeyError(f"tensor for partition {pattern!r} not available")
        if out is None:
            out = "".join(sorted(letters))
        src = self.tensors[key]
        return np.einsum(f"{letters}->{out}", src) if letters != out else src

    def term(self, pattern: str) -> tuple[np.ndarray, str]:
        """(tensor, einsum subscript) pair for use in contractions."""
        key, letters = _pattern_key(pattern)
        if key not in self.tensors:
            raise KeyError(f"tensor for partition {pattern!r} not available")
        return self.tensors[key], letters

    def contract(self, inverse_pairs: list[str], patterns: list[str], out: str = "") -> np.ndarray:
        """Contract inverse-information factors with L tensors.

        ``contract(["ir", "js"], ["ij,r,s"])`` is
        ``L^{-1}_{i,r} L^{-1}_{j,s} L_{ij,r,s}`` summed over all indices
        not listed in ``out``.
        """
        operands = []
        subs = []
        for pair in inverse_pairs:
            operands.append(self.fisher_inv)
            subs.append(pair)
        for pat in patterns:
            t, s = self.term(pat)
            operands.append(t)
            subs.append(s)
        return np.einsum(",".join(subs) + "->" + out, *operands, optimize=True)


def _finish(tensors, errors, method, theta, dim) -> CumulantTensors:
    fisher = tensors[(1, 1)]
    fisher = 0.5 * (fisher + fisher.T)
    try:
        chol = np.linalg.cholesky(fisher)
    except np.linalg.LinAlgError:
        raise SingularFisherError(
            "Fisher information is not positive definite (Assumption A6 violated)"
        ) from None
    ident = np.eye(dim)
    inv = np.linalg.solve(chol.T, np.linalg.solve(chol, ident))
    inv = 0.5 * (inv + inv.T)
    return CumulantTensors(tensors, fisher, inv, errors, method, tuple(np.asarray(theta).tolist()))


def cumulants(
    family: Family,
    theta,
    method: str = "analytic",
    reps: int = 1_000_000,
    seed: int = 0,
    block: int = 50_000,
) -> CumulantTensors:
    """Per-observation tensors at ``theta``.

    ``method="analytic"`` integrates exactly against the family's
    expectation rule; ``method="monte-carlo"`` averages over ``reps``
    draws and also returns entry-wise standard errors.
    """
    th = family.check_interior(theta)
    if method == "analytic":
        rule = family.expectation_rule(th)
        d = family.derivatives(rule.points, th)
        tensors = {part: _moment(rule.weights, _factors(d, part)) for part in PARTITIONS}
        return _finish(tensors, None, "analytic", th, family.dim)
    if method != "monte-carlo":
        raise ValueError(f"unknown method {method!r}")
    sums = {part: 0.0 for part in PARTITIONS}
    sq = {part: 0.0 for part in PARTITIONS}
    done = 0
    for rng, count in block_rngs(seed, reps, block):
        x = family.sample(th, rng, count)
        d = family.derivatives(x, th)
        for part in PARTITIONS:
            prod = _per_draw(d, part)
            sums[part] = sums[part] + prod.sum(axis=0)
            sq[part] = sq[part] + (prod**2).sum(axis=0)
        done += count
    tensors = {}
    errors = {}
    for part in PARTITIONS:
        mean = sums[part] / done
        var = np.maximum(sq[part] / done - mean**2, 0.0) * done / (done - 1)
        tensors[part] = mean
        errors[part] = np.sqrt(var / done)
    return _finish(tensors, errors, "monte-carlo", th, family.dim)


def _per_draw(d, partition) -> np.ndarray:
    factors = _factors(d, partition)
    subs = []
    used = 0
    for f in factors:
        k = f.ndim - 1
        subs.append("z" + _LETTERS[used : used + k])
        used += k
    return np.einsum(",".join(subs) + "->z" + _LETTERS[:used], *factors, optimize=True)


# ---------------------------------------------------------------------------
# likelihood identities
# ---------------------------------------------------------------------------

IDENTITIES: dict[str, list[str]] = {
    "first": ["i"],
    "second": ["ij", "i,j"],
    "third": ["ijk", "ij,k", "ik,j", "jk,i", "i,j,k"],
    "fourth": [
        "ijkl",
        "ijk,l",
        "ijl,k",
        "ikl,j",
        "jkl,i",
        "ij,kl",
        "ik,jl",
        "il,jk",
        "ij,k,l",
        "ik,j,l",
        "il,j,k",
        "jk,i,l",
        "jl,i,k",
        "kl,i,j",
        "i,j,k,l",
    ],
}


@dataclass(frozen=True)
class IdentityResidual:
    name: str
    max_abs: float
    max_z: float
    passed: bool


def _sum_pattern(ct: CumulantTensors, patterns: list[str], errors: bool):
    total = 0.0
    var = 0.0
    for pat in patterns:
        total = total + ct.get(pat)
        if errors:
            key, letters = _pattern_key(pat)
            se = ct.std_errors[key]
            out = "".join(sorted(letters))
            if letters != out:
                se = np.einsum(f"{letters}->{out}", se)
            # the terms share draws; adding variances ignores their covariance,
            # so this is an approximation used only for flagging
            var = var + se**2
    return np.asarray(total), np.sqrt(np.asarray(var))


def identities_check(
    family: Family,
    theta,
    method: str = "analytic",
    reps: int = 1_000_000,
    seed: int = 0,
    analytic_tol: float = 1e-8,
    z_tol: float = 4.0,
) -> list[IdentityResidual]:
    """Residuals of the four likelihood identities.

    Analytic residuals are flagged above ``analytic_tol`` (relative to the
    scale of the terms involved); Monte Carlo residuals are flagged above
    ``z_tol`` standard errors.
    """
    if method == "analytic":
        ct = cumulants(family, theta)
    else:
        ct = _identity_mc(family, theta, reps, seed)
    out = []
    for name, pats in IDENTITIES.items():
        if method == "analytic":
            res, _ = _sum_pattern(ct, pats, errors=False)
            scale = max(1.0, max(float(np.max(np.abs(ct.get(p)))) for p in pats))
            m = float(np.max(np.abs(res)))
            out.append(IdentityResidual(name, m, 0.0, m <= analytic_tol * scale))
        else:
            res, se = ct[name]
            m = float(np.max(np.abs(res)))
            with np.errstate(divide="ignore", invalid="ignore"):
                z = np.where(se > 0, np.abs(res) / se, np.where(np.abs(res) > 1e-12, np.inf, 0.0))
            mz = float(np.max(z))
            out.append(IdentityResidual(name, m, mz, mz <= z_tol))
    return out


def _identity_mc(family, theta, reps, seed, block=50_000):
    """Per-draw identity sums, so the standard error accounts for covariance between terms."""
    th = family.check_interior(theta)
    acc = {name: [0.0, 0.0] for name in IDENTITIES}
    done = 0
    for rng, count in block_rngs(seed, reps, block):
        x = family.sample(th, rng, count)
        d = family.derivatives(x, th)
        for name, pats in IDENTITIES.items():
            total = 0.0
            for pat in pats:
                groups = pat.split(",")
                factors = [d.order(len(g)) for g in groups]
                subs = ",".join("z" + g for g in groups)
                flat = "".join(sorted(set(pat.replace(",", ""))))
                total = total + np.einsum(subs + "->z" + flat, *factors, optimize=True)
            acc[name][0] = acc[name][0] + total.sum(axis=0)
            acc[name][1] = acc[name][1] + (total**2).sum(axis=0)
        done += count
    out = {}
    for name, (s, s2) in acc.items():
        mean = s / done
        var = np.maximum(s2 / done - mean**2, 0.0) * done / (done - 1)
        out[name] = (mean, np.sqrt(var / done))
    return out
