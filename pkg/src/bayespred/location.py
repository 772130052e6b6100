"""Location families: the prior term as a Laplacian, superharmonic priors and dominance.

For a location family whose information is the identity, the Jeffreys
prior is uniform and a prior with density ``h = g^2`` changes the
second-order risk constant by ``L^-1_{ir}(h_ir + h_i h_r / 2)`` in
log-derivatives, which collapses to a multiple of ``Delta g / g``.  The
shrinkage priors ``g(mu) = (1 + |mu|^2)^alpha`` have

    Delta g = 2 alpha (1 + r^2)^(alpha - 2) (p + (p + 2 alpha - 2) r^2),

negative everywhere exactly when ``1 - p/2 < alpha < 0``, an interval
that is empty for ``p <= 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .families import MvnLocation
from .priors import Prior, ShrinkagePrior, shrinkage_prior, uniform_prior
from .risk import RiskDifference, risk_difference


class LocationError(ValueError):
    pass


# factor between the risk constant of the expansion and Delta g / g for h = g^2
ASYMPTOTIC_FACTOR = 2.0


def admissible_range(p: int) -> tuple[float, float] | None:
    """Open interval of shrinkage exponents with Delta g < 0 everywhere, or None."""
    lo = 1.0 - p / 2.0
    return (lo, 0.0) if lo < 0.0 else None


def _fd_step(mu: np.ndarray) -> float:
    return max(1e-4, 1e-4 * (1.0 + float(np.linalg.norm(mu))))


def fd_second_derivatives(fn: Callable[[np.ndarray], float], mu) -> np.ndarray:
    """Central-difference ``d^2 fn / d mu_i^2`` for each axis."""
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    h = _fd_step(mu)
    f0 = fn(mu)
    out = np.empty(mu.size)
    for i in range(mu.size):
        e = np.zeros_like(mu)
        e[i] = h
        out[i] = (fn(mu + e) - 2.0 * f0 + fn(mu - e)) / (h * h)
    return out


def fd_laplacian(fn: Callable[[np.ndarray], float], mu) -> float:
    """Central-difference Laplacian of ``fn`` at ``mu``."""
    return float(np.sum(fd_second_derivatives(fn, mu)))


def fd_relative_error(fn, exact: float, mu) -> float:
    """Finite-difference Laplacian error relative to the sum of |d^2 fn / d mu_i^2|.

    Near a zero of the Laplacian the axis terms cancel, so their absolute
    sum, not the Laplacian itself, sets the attainable accuracy.
    """
    terms = fd_second_derivatives(fn, mu)
    scale = max(float(np.sum(np.abs(terms))), 1e-300)
    return abs(float(np.sum(terms)) - exact) / scale


def prior_term_location(prior: Prior, mu, family: MvnLocation | None = None) -> float:
    """``Delta g / g`` at ``mu`` for the prior ``h = g^2``, in information-whitened coordinates.

    The second-order risk constant of the predictive density changes by
    ``ASYMPTOTIC_FACTOR`` times this value relative to the uniform prior.
    Shrinkage priors act on the whitened mean; other priors are mapped
    through their log-derivatives, ``Delta g / g = tr(S H)/2 + d' S d / 4``
    with ``S`` the covariance, ``d`` and ``H`` the log-prior gradient and
    Hessian.
    """
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    if isinstance(prior, ShrinkagePrior):
        if family is not None:
            mu = family.whitening() @ mu
        if prior.g(mu) <= 0.0:
            raise LocationError("g must be positive at mu")
        return prior.laplacian_over_g(mu)
    if prior.log_density is not None and not np.isfinite(prior.log_density(mu)):
        raise LocationError("g must be positive at mu")
    S = np.eye(mu.size) if family is None else family.covariance
    d = prior.grad(mu)
    H = prior.hess(mu)
    return 0.5 * float(np.sum(S * H)) + 0.25 * float(d @ S @ d)


def asymptotic_prior_term(prior: Prior, mu, family: MvnLocation | None = None) -> float:
    """Change in ``G`` against the uniform prior, ``2 Delta g / g``."""
    return ASYMPTOTIC_FACTOR * prior_term_location(prior, mu, family)


# ---------------------------------------------------------------------------
# Laplacian scans


@dataclass(frozen=True)
class LaplacianReport:
    p: int
    alpha: float
    grid: np.ndarray
    delta_g: np.ndarray
    delta_g_over_g: np.ndarray
    sign_summary: str
    sup_delta_over_g: float
    fd_max_rel_error: float
    admissible_range: tuple[float, float] | None
    in_range: bool
    limit_coefficient: float

    def as_rows(self) -> list[dict]:
        return [
            {"p": self.p, "alpha": self.alpha, "r": float(r), "delta_g": float(d), "delta_g_over_g": float(q)}
            for r, d, q in zip(self.grid, self.delta_g, self.delta_g_over_g)
        ]

    def summary(self) -> dict:
        rng = self.admissible_range
        return {
            "p": self.p,
            "alpha": self.alpha,
            "sign_summary": self.sign_summary,
            "sup_delta_over_g": self.sup_delta_over_g,
            "fd_max_rel_error": self.fd_max_rel_error,
            "admissible_range": "empty" if rng is None else f"({rng[0]:g}, {rng[1]:g})",
            "in_range": self.in_range,
            "limit_coefficient": self.limit_coefficient,
        }


def _classify(values: np.ndarray) -> str:
    if np.all(values < 0):
        return "all-negative"
    if np.all(values <= 0):
        return "all-nonpositive"
    if np.all(values > 0):
        return "all-positive"
    return "mixed"


def superharmonic_scan(p: int, alpha: float, radius_max: float = 1e3, grid_size: int = 200, fd_points: int = 25) -> LaplacianReport:
    """Sign of ``Delta g`` along a radial grid out to ``radius_max``.

    ``g`` is radial, so one ray suffices; finite differences are checked on
    a subset of points placed in random directions.  ``limit_coefficient``
    is ``lim r^2 Delta g / g = 2 alpha (p + 2 alpha - 2)``.
    """
    prior = shrinkage_prior(p, alpha)
    r = np.concatenate([[0.0], np.geomspace(1e-3, radius_max, grid_size - 1)])
    rng = np.random.default_rng(0)
    dg = np.empty(r.size)
    dq = np.empty(r.size)
    for k, rk in enumerate(r):
        mu = np.zeros(p)
        mu[0] = rk
        dg[k] = prior.laplacian_g(mu)
        dq[k] = prior.laplacian_over_g(mu)
    fd_err = 0.0
    for rk in r[:: max(1, r.size // fd_points)]:
        if rk > 1e2:
            continue
        u = rng.standard_normal(p)
        mu = rk * u / np.linalg.norm(u)
        fd_err = max(fd_err, fd_relative_error(prior.g, prior.laplacian_g(mu), mu))
    rng_ = admissible_range(p)
    return LaplacianReport(
        p=int(p),
        alpha=float(alpha),
        grid=r,
        delta_g=dg,
        delta_g_over_g=dq,
        sign_summary=_classify(dg),
        sup_delta_over_g=float(dq.max()),
        fd_max_rel_error=float(fd_err),
        admissible_range=rng_,
        in_range=rng_ is not None and rng_[0] < alpha < rng_[1],
        limit_coefficient=2.0 * alpha * (p + 2.0 * alpha - 2.0),
    )


@dataclass(frozen=True)
class GapReport:
    """Running supremum of ``Delta g / g`` over balls of growing radius."""

    radii: np.ndarray
    value_at_radius: np.ndarray
    running_sup: np.ndarray
    sup: float
    uniform_gap: bool

    def as_rows(self) -> list[dict]:
        return [
            {"radius": float(r), "delta_g_over_g": float(v), "running_sup": float(s)}
            for r, v, s in zip(self.radii, self.value_at_radius, self.running_sup)
        ]


def uniform_gap_probe(p: int, prior: Prior | None = None, radii=None, tol: float = 1e-3) -> GapReport:
    """Does ``Delta g / g <= -c < 0`` hold everywhere for some ``c``?

    ``uniform_gap`` is False when the values at the largest radii come
    within ``tol`` of zero, the behaviour that leaves the uniform prior
    minimax.
    """
    if prior is None:
        prior = uniform_prior(p)
    radii = np.geomspace(1.0, 1e3, 31) if radii is None else np.asarray(radii, dtype=float)
    vals = np.empty(radii.size)
    for k, r in enumerate(radii):
        mu = np.zeros(p)
        mu[0] = r
        vals[k] = prior_term_location(prior, mu)
    origin = prior_term_location(prior, np.zeros(p))
    running = np.maximum.accumulate(np.maximum(vals, origin))
    sup = float(running[-1])
    return GapReport(radii, vals, running, sup, bool(abs(vals[-1]) >= tol and sup < 0))


# ---------------------------------------------------------------------------
# dominance experiment


@dataclass(frozen=True)
class DominanceProbe:
    mu: tuple[float, ...]
    difference: RiskDifference
    delta_g_over_g: float
    predicted: float
    sign_agrees: bool | None

    def as_row(self) -> dict:
        row = self.difference.as_row()
        row.update({"mu": list(self.mu), "delta_g_over_g": self.delta_g_over_g, "predicted": self.predicted, "sign_agrees": self.sign_agrees})
        return row


@dataclass(frozen=True)
class DominanceVerdict:
    p: int
    alpha: float
    n: int
    reps: int
    seed: int
    probes: tuple[DominanceProbe, ...]
    verdict: str
    no_uniform_gap: bool
    gap: GapReport = field(repr=False, default=None)

    def as_rows(self) -> list[dict]:
        return [dict(pr.as_row(), verdict=self.verdict, no_uniform_gap=self.no_uniform_gap) for pr in self.probes]


def _check_range(p: int, alpha: float):
    rng = admissible_range(p)
    if rng is None:
        raise LocationError(f"empty range for p = {p}: 1 - p/2 = {1 - p / 2:g} is not below 0, so no shrinkage exponent is superharmonic")
    if not (rng[0] < alpha < rng[1]):
        raise LocationError(f"shrink alpha {alpha:g} outside the range ({rng[0]:g}, 0) for p = {p}")


def dominance_experiment(
    p: int,
    shrink_alpha: float,
    probes=None,
    n: int = 25,
    reps: int = 200_000,
    seed: int = 0,
    threads: int = 1,
) -> DominanceVerdict:
    """Paired risk differences predictive(g^2) - predictive(uniform) on N(mu, I).

    The prediction printed alongside is ``2 (Delta g / g) / n^2``.  The
    verdict is ``dominates`` when every 95% interval lies below zero,
    ``dominated`` when every one lies above, and ``inconclusive`` otherwise.
    """
    p = int(p)
    _check_range(p, shrink_alpha)
    if probes is None:
        far = np.zeros(p)
        far[0] = 3.0
        probes = [np.zeros(p), far]
    probes = [np.atleast_1d(np.asarray(m, dtype=float)) for m in probes]
    for m in probes:
        if m.size != p:
            raise LocationError(f"probe {m.tolist()} does not have dimension {p}")
    if not any(np.allclose(m, 0.0) for m in probes):
        raise LocationError("probes must include the origin")
    if not any(np.linalg.norm(m) >= 3.0 for m in probes):
        raise LocationError("probes must include a point with |mu| >= 3")
    fam = MvnLocation(p=p)
    shrink = shrinkage_prior(p, shrink_alpha)
    flat = uniform_prior(p, fam)
    rows = []
    for m in probes:
        diff = risk_difference(fam, m, n, "predictive", "predictive", priors=(shrink, flat), reps=reps, seed=seed, threads=threads)
        q = prior_term_location(shrink, m)
        pred = ASYMPTOTIC_FACTOR * q / n**2
        agrees = None
        if abs(pred) > 3.0 * diff.std_error:
            agrees = bool(np.sign(pred) == np.sign(diff.delta))
        rows.append(DominanceProbe(tuple(m.tolist()), diff, q, pred, agrees))
    if all(r.difference.ci()[1] < 0 for r in rows):
        verdict = "dominates"
    elif all(r.difference.ci()[0] > 0 for r in rows):
        verdict = "dominated"
    else:
        verdict = "inconclusive"
    gap = uniform_gap_probe(p, shrink)
    return DominanceVerdict(p, float(shrink_alpha), int(n), int(reps), int(seed), tuple(rows), verdict, not gap.uniform_gap, gap)


# ---------------------------------------------------------------------------
# alternative base densities, p = 1


@dataclass(frozen=True)
class LocationBase:
    """A one-dimensional location density ``f(x - mu)`` with its sampler."""

    name: str
    log_density: Callable[[np.ndarray], np.ndarray]
    sampler: Callable[[np.random.Generator, int], np.ndarray]
    scale: float = 1.0


def _posterior_grid(base: LocationBase, prior: Prior, data: np.ndarray, nodes: int = 4001):
    centre = float(np.median(data))
    half = 40.0 * base.scale / math.sqrt(max(data.size, 1)) + 10.0 * base.scale
    mu = np.linspace(centre - half, centre + half, nodes)
    loglik = base.log_density(data[None, :] - mu[:, None]).sum(axis=1)
    logprior = np.array([prior.log_density(np.array([m])) for m in mu]) if prior.log_density is not None else 0.0
    lw = loglik + logprior
    lw -= lw.max()
    w = np.exp(lw)
    w /= integrate.trapezoid(w, mu)
    return mu, w


def location_predictive_1d(base: LocationBase, prior: Prior, data) -> Callable[[np.ndarray], np.ndarray]:
    """Bayes predictive density for ``f(x - mu)`` under ``prior``, by quadrature on a mu grid."""
    data = np.asarray(data, dtype=float).reshape(-1)
    if data.size == 0:
        raise LocationError("at least one observation is needed")
    mu, w = _posterior_grid(base, prior, data)

    def density(y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        f = np.exp(base.log_density(y[:, None] - mu[None, :]))
        return integrate.trapezoid(f * w[None, :], mu, axis=1)

    return density


def location_risk_mc_1d(base: LocationBase, prior: Prior, mu: float, n: int, reps: int = 200, seed: int = 0) -> tuple[float, float]:
    """Monte Carlo KL risk of the quadrature predictive; returns (mean, std_error)."""
    if reps < 2:
        raise LocationError("reps must be at least 2")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    losses = np.empty(reps)
    span = 30.0 * base.scale
    y = np.linspace(mu - span, mu + span, 6001)
    truth = np.exp(base.log_density(y - mu))
    for k in range(reps):
        x = mu + base.sampler(rng, n)
        fhat = location_predictive_1d(base, prior, x)(y)
        integrand = np.where(truth > 0, truth * (np.log(np.maximum(truth, 1e-300)) - np.log(np.maximum(fhat, 1e-300))), 0.0)
        losses[k] = integrate.trapezoid(integrand, y)
    return float(losses.mean()), float(losses.std(ddof=1) / math.sqrt(reps))


def logistic_base() -> LocationBase:
    """Standard logistic location density, a heavier-tailed alternative to the normal."""
    return LocationBase(
        "logistic",
        lambda z: -z - 2.0 * np.log1p(np.exp(-z)),
        lambda rng, k: rng.logistic(size=k),
        scale=1.8,
    )


__all__ = [
    "ASYMPTOTIC_FACTOR",
    "DominanceProbe",
    "DominanceVerdict",
    "GapReport",
    "LaplacianReport",
    "LocationBase",
    "LocationError",
    "admissible_range",
    "asymptotic_prior_term",
    "dominance_experiment",
    "fd_laplacian",
    "fd_relative_error",
    "fd_second_derivatives",
    "location_predictive_1d",
    "location_risk_mc_1d",
    "logistic_base",
    "prior_term_location",
    "superharmonic_scan",
    "uniform_gap_probe",
]
