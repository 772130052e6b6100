"""Prior densities in integral and differential form.

A :class:`Prior` carries an (optional, possibly unnormalized or improper)
log density together with the gradient ``h_i`` and Hessian ``h_ij`` of
that log density.  The asymptotic formulas only read the differential
form; the predictive module needs the density and, when the pair
(family, prior) is conjugate, the ``conjugate`` tag that selects a closed
form.

Conjugate tags, always in the family's own parametrization:

* ``("gamma", a, b)``: Poisson, density theta^(a-1) exp(-b theta)
* ``("beta", a, b)``: Bernoulli / negative binomial, density
  m^(a-1) (1-m)^(b-1) dm in the mean-like coordinate m = expit(theta)
  or m = e^theta respectively
* ``("normal", m, v)``: location mean, v = inf for the flat prior
* ``("power-v", k)``: normal location-scale, density v^(-k) in (mu, v)
* ``("power-det", c)``: mvn-scale, density |V|^(-c)
* ``("radial", alpha)``: location shrinkage (1 + |mu|^2)^(2 alpha)
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .families import Family, FamilyError, MvnLocation, NormalLocation


class PriorSpecError(ValueError):
    """Malformed prior specification string."""


PRIOR_GRAMMAR = 'jeffreys | uniform | alpha:<real> | shrink:<real>'


@dataclass(frozen=True)
class Prior:
    label: str
    dim: int
    log_grad: Callable[[np.ndarray], np.ndarray]
    log_hess: Callable[[np.ndarray], np.ndarray]
    log_density: Callable[[np.ndarray], float] | None = None
    proper: str = "unknown"
    conjugate: tuple | None = None

    def density(self, theta) -> float:
        if self.log_density is None:
            raise ValueError(f"prior {self.label!r} has no density evaluator")
        return math.exp(self.log_density(np.atleast_1d(np.asarray(theta, dtype=float))))

    def grad(self, theta) -> np.ndarray:
        return np.asarray(self.log_grad(np.atleast_1d(np.asarray(theta, dtype=float))), dtype=float)

    def hess(self, theta) -> np.ndarray:
        return np.asarray(self.log_hess(np.atleast_1d(np.asarray(theta, dtype=float))), dtype=float)


@dataclass(frozen=True)
class AlphaPrior(Prior):
    alpha: float = 0.5
    family: Family | None = field(default=None, compare=False)

    def gradient_condition_residual(self, theta) -> float:
        """max |h_i - L^{-1}_{j,s}(alpha L_{i,j,s} + L_{ij,s})| at ``theta``."""
        from .cumulants import cumulants

        ct = cumulants(self.family, theta)
        target = self.alpha * ct.contract(["js"], ["i,j,s"], out="i") + ct.contract(["js"], ["ij,s"], out="i")
        return float(np.max(np.abs(self.grad(theta) - target)))


def _alpha_proper(family: Family, alpha: float) -> str:
    name = family.name
    if name == "bernoulli-canonical":
        return "proper" if alpha > 0 else "improper"
    if name == "negbinomial-canonical":
        return "proper" if 0 < alpha < 0.5 else "improper"
    return "improper"


def _alpha_conjugate(family: Family, alpha: float) -> tuple | None:
    name = family.name
    if name == "poisson":
        return ("gamma", alpha, 0.0)
    if name == "bernoulli-canonical":
        return ("beta", alpha, alpha)
    if name == "negbinomial-canonical":
        return ("beta", alpha, 1.0 - 2.0 * alpha)
    if name in ("normal-location", "mvn-location"):
        return ("normal", 0.0, math.inf)
    if name == "normal-location-scale":
        return ("power-v", 3.0 - 3.0 * alpha)
    if name == "mvn-scale":
        a, b = family.alpha_power()
        return ("power-det", a + b * alpha)
    return None


def alpha_prior(family: Family, alpha: float, label: str | None = None, check: bool = True) -> AlphaPrior:
    """Member of the relatively invariant alpha-class of ``family``.

    The closed-form density is checked against the defining gradient
    condition at a few interior points when ``check`` is set.
    """
    alpha = float(alpha)
    try:
        family.alpha_parts(family.random_interior(np.random.default_rng(0), 1)[0])
    except NotImplementedError:
        warnings.warn(f"{family.name}: no closed-form alpha-class density; differential form only")
        raise FamilyError(f"{family.name}: alpha-class not available") from None

    def log_density(th):
        return float(family.alpha_parts(th).log_prior(alpha)[0])

    def log_grad(th):
        return family.alpha_parts(th).log_prior(alpha)[1]

    def log_hess(th):
        return family.alpha_parts(th).log_prior(alpha)[2]

    prior = AlphaPrior(
        label=label or f"alpha:{alpha:g}",
        dim=family.dim,
        log_grad=log_grad,
        log_hess=log_hess,
        log_density=log_density,
        proper=_alpha_proper(family, alpha),
        conjugate=_alpha_conjugate(family, alpha),
        alpha=alpha,
        family=family,
    )
    if check:
        pts = family.random_interior(np.random.default_rng(12345), 3)
        worst = max(prior.gradient_condition_residual(t) for t in pts)
        if worst > 1e-8:
            raise FamilyError(f"{family.name}: alpha-class density fails the gradient condition ({worst:.2e})")
    return prior


def jeffreys(family: Family) -> AlphaPrior:
    """Jeffreys prior, det^(1/2) of the Fisher information; the alpha = 1/2 member."""
    prior = alpha_prior(family, 0.5, label="jeffreys", check=False)
    return prior


def uniform_prior(p: int, family: Family | None = None) -> Prior:
    """Flat prior on R^p (or on the family's parameter space)."""
    zero = np.zeros(p)
    conj = None
    if family is not None:
        if family.dim != p:
            raise FamilyError("uniform prior dimension does not match the family")
        conj = {
            "poisson": ("gamma", 1.0, 0.0),
            "bernoulli-canonical": ("beta", 0.0, 0.0),
            "negbinomial-canonical": ("beta", 0.0, 1.0),
            "normal-location": ("normal", 0.0, math.inf),
            "mvn-location": ("normal", 0.0, math.inf),
            "normal-location-scale": ("power-v", 0.0),
            "mvn-scale": ("power-det", 0.0),
        }.get(family.name)
    elif p >= 1:
        conj = ("normal", 0.0, math.inf)
    return Prior(
        label="uniform",
        dim=p,
        log_grad=lambda th: zero.copy(),
        log_hess=lambda th: np.zeros((p, p)),
        log_density=lambda th: 0.0,
        proper="improper",
        conjugate=conj,
    )


@dataclass(frozen=True)
class ShrinkagePrior(Prior):
    """Prior density g^2 with g(mu) = (1 + |mu|^2)^alpha on a location parameter."""

    alpha: float = 0.0

    def g(self, mu) -> float:
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        return float((1.0 + mu @ mu) ** self.alpha)

    def laplacian_g(self, mu) -> float:
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        r2 = float(mu @ mu)
        a, p = self.alpha, self.dim
        return 2.0 * a * (1.0 + r2) ** (a - 2.0) * (p + (p + 2.0 * a - 2.0) * r2)

    def laplacian_over_g(self, mu) -> float:
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        r2 = float(mu @ mu)
        a, p = self.alpha, self.dim
        return 2.0 * a * (p + (p + 2.0 * a - 2.0) * r2) / (1.0 + r2) ** 2


def shrinkage_prior(p: int, alpha: float) -> ShrinkagePrior:
    p = int(p)
    alpha = float(alpha)
    if p < 1:
        raise FamilyError("shrinkage prior needs p >= 1")

    def log_density(mu):
        return 2.0 * alpha * math.log1p(float(mu @ mu))

    def log_grad(mu):
        return 4.0 * alpha * mu / (1.0 + mu @ mu)

    def log_hess(mu):
        s = 1.0 + mu @ mu
        return 4.0 * alpha * (np.eye(p) / s - 2.0 * np.outer(mu, mu) / s**2)

    return ShrinkagePrior(
        label=f"shrink:{alpha:g}",
        dim=p,
        log_grad=log_grad,
        log_hess=log_hess,
        log_density=log_density,
        proper="proper" if 4.0 * alpha < -p else "improper",
        conjugate=("radial", alpha),
        alpha=alpha,
    )


def normal_prior(mean: float, var: float) -> Prior:
    """Conjugate normal prior for the one-dimensional normal-location mean."""

    def log_density(th):
        return float(-0.5 * (th[0] - mean) ** 2 / var)

    return Prior(
        label=f"normal:{mean:g},{var:g}",
        dim=1,
        log_grad=lambda th: np.array([-(th[0] - mean) / var]),
        log_hess=lambda th: np.array([[-1.0 / var]]),
        log_density=log_density,
        proper="proper",
        conjugate=("normal", float(mean), float(var)),
    )


_SPEC = re.compile(r"^(jeffreys|uniform|alpha:(?P<a>[^:]+)|shrink:(?P<s>[^:]+))$")


def parse_prior(spec: str, family: Family) -> Prior:
    """Build a prior from its CLI spec string."""
    m = _SPEC.match(spec.strip())
    if not m:
        raise PriorSpecError(f"malformed prior spec {spec!r}; expected {PRIOR_GRAMMAR}")
    if spec == "jeffreys":
        return jeffreys(family)
    if spec == "uniform":
        return uniform_prior(family.dim, family)
    try:
        value = float(m.group("a") if m.group("a") is not None else m.group("s"))
    except ValueError:
        raise PriorSpecError(f"malformed prior spec {spec!r}; expected {PRIOR_GRAMMAR}") from None
    if m.group("a") is not None:
        return alpha_prior(family, value)
    if not isinstance(family, (MvnLocation, NormalLocation)):
        raise PriorSpecError(f"shrink:<real> applies to location families, not {family.name}")
    return shrinkage_prior(family.dim, value)
