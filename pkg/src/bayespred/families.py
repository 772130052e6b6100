"""Parametric families with analytic log-density derivatives.

Every family exposes the same small surface: a log density, its mixed
partial derivatives in the parameter up to order four (evaluated on a
batch of observations at once), a sampler, a sufficient-statistic
reducer and an *expectation rule*, i.e. a set of support points and
weights that integrates every product of up to four derivatives exactly
(Gauss-Hermite for the Gaussian families) or to within a tail mass far
below 1e-12 (series truncation for the discrete ones).

Parametrizations are fixed per family:

========================  ===========================================
poisson                   mean theta > 0
bernoulli-canonical       log-odds theta
negbinomial-canonical     theta = log q < 0 for NBin(r, 1 - q)
normal-location           mean mu, sigma known
normal-location-scale     (mu, v) with v = sigma**2
mvn-location              mean vector, covariance known
mvn-scale                 upper-triangle entries V[i, i'] (i <= i')
========================  ===========================================
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy import special, stats

BOUNDARY_EPS = 1e-6


class FamilyError(ValueError):
    """Invalid family name, hyperparameter or parameter value."""


@dataclass(frozen=True)
class Derivatives:
    """Log-density derivatives on a batch of points.

    ``d1[n, i]``, ``d2[n, i, j]``, ``d3[n, i, j, k]`` and
    ``d4[n, i, j, k, l]`` hold the partial derivatives of
    ``log f(x_n | theta)``.
    """

    d1: np.ndarray
    d2: np.ndarray
    d3: np.ndarray
    d4: np.ndarray

    def order(self, k: int) -> np.ndarray:
        return (self.d1, self.d2, self.d3, self.d4)[k - 1]


@dataclass(frozen=True)
class ExpectationRule:
    """Points and weights such that ``sum(w * g(x))`` equals ``E_theta[g]``."""

    points: np.ndarray
    weights: np.ndarray
    exact: bool


@dataclass(frozen=True)
class AlphaParts:
    """``log h = alpha * u + w`` for the alpha-class of a family, with derivatives."""

    u: float
    u_grad: np.ndarray
    u_hess: np.ndarray
    w: float
    w_grad: np.ndarray
    w_hess: np.ndarray

    def log_prior(self, alpha: float):
        return (
            alpha * self.u + self.w,
            alpha * self.u_grad + self.w_grad,
            alpha * self.u_hess + self.w_hess,
        )


def _as_theta(theta, dim: int) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(theta, dtype=float))
    if arr.shape != (dim,):
        raise FamilyError(f"parameter must have {dim} component(s), got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class Family:
    """Base class; concrete families override the evaluators."""

    name: str = field(init=False, default="")
    dim: int = field(init=False, default=1)
    discrete: bool = field(init=False, default=False)
    improper_jeffreys: bool = field(init=False, default=True)

    # -- domain ---------------------------------------------------------
    def param_names(self) -> list[str]:
        return [f"theta{i}" for i in range(self.dim)]

    def in_domain(self, theta) -> bool:
        return True

    def boundary_distance(self, theta) -> float:
        return math.inf

    def check_interior(self, theta) -> np.ndarray:
        """Validate ``theta`` and return it as a float vector.

        Points within ``BOUNDARY_EPS`` of the domain boundary are rejected
        rather than extrapolated.
        """
        th = _as_theta(theta, self.dim)
        if not np.all(np.isfinite(th)) or not self.in_domain(th):
            raise FamilyError(f"{self.name}: parameter {th.tolist()} outside the domain")
        if self.boundary_distance(th) < BOUNDARY_EPS:
            raise FamilyError(f"{self.name}: parameter {th.tolist()} is on the domain boundary")
        return th

    def random_interior(self, rng: np.random.Generator, count: int) -> np.ndarray:
        raise NotImplementedError

    # -- evaluators -----------------------------------------------------
    def log_density(self, x, theta) -> np.ndarray:
        raise NotImplementedError

    def derivatives(self, x, theta) -> Derivatives:
        raise NotImplementedError

    def log_density_deriv(self, x, theta, multi_index) -> np.ndarray:
        """Mixed partial of ``log f(x | theta)`` for a tuple of parameter indices."""
        idx = tuple(multi_index)
        k = len(idx)
        if k == 0:
            return self.log_density(x, theta)
        if k > 4:
            raise FamilyError("analytic derivatives are provided up to total order 4")
        d = self.derivatives(x, theta).order(k)
        return d[(slice(None),) + idx]

    def sample(self, theta, rng: np.random.Generator, count: int) -> np.ndarray:
        raise NotImplementedError

    def sufficient_stat(self, data) -> tuple:
        raise NotImplementedError

    def expectation_rule(self, theta) -> ExpectationRule:
        raise NotImplementedError

    def fisher(self, theta) -> np.ndarray:
        raise NotImplementedError

    def in_support(self, x) -> bool:
        return True

    def normalization_error(self, theta) -> float:
        """|total mass - 1| of the density at ``theta`` (series or quadrature)."""
        rule = self.expectation_rule(theta)
        # the rule integrates polynomials against f_theta, so check it on the raw density
        if self.discrete:
            xs = self.support_grid(theta, tail=1e-16)
            return abs(float(np.sum(np.exp(self.log_density(xs, theta)))) - 1.0)
        return abs(float(np.sum(rule.weights)) - 1.0) if rule.exact else math.nan

    def alpha_parts(self, theta) -> AlphaParts:
        raise NotImplementedError

    def jeffreys_log(self, theta):
        """Closed-form log Jeffreys density (up to a constant) with gradient and Hessian."""
        return self.alpha_parts(theta).log_prior(0.5)

    # -- sample batches -------------------------------------------------
    def as_batch(self, data) -> np.ndarray:
        arr = np.asarray(data, dtype=float)
        if self.event_dim == 0:
            arr = arr.reshape(-1)
        else:
            arr = arr.reshape(-1, self.event_dim)
        if not self.in_support(arr):
            raise FamilyError(f"{self.name}: observations outside the support")
        return arr

    @property
    def event_dim(self) -> int:
        return 0

    def describe(self) -> dict:
        return {"name": self.name, "dim": self.dim}


# ---------------------------------------------------------------------------
# discrete families
# ---------------------------------------------------------------------------


class _DiscreteFamily(Family):
    def in_support(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all((x >= 0) & (x == np.floor(x))))

    def mean_sd(self, theta) -> tuple[float, float]:
        raise NotImplementedError

    def support_grid(self, theta, tail: float = 1e-18) -> np.ndarray:
        """0..x_max with the pmf beyond x_max summing to well under ``tail``."""
        th = _as_theta(theta, self.dim)
        m, sd = self.mean_sd(th)
        hi = int(math.ceil(m + 8.0 * sd + 10.0))
        # past the mode the pmf decays at least geometrically; stop once a
        # point is far below the tail budget
        while self.log_density(np.array([float(hi)]), th)[0] > math.log(tail) - 7.0:
            hi = int(hi * 1.25) + 5
        return np.arange(hi + 1, dtype=float)

    def expectation_rule(self, theta) -> ExpectationRule:
        th = self.check_interior(theta)
        xs = self.support_grid(th)
        w = np.exp(self.log_density(xs, th))
        return ExpectationRule(xs, w, exact=False)


def _one_param(d1, d2, d3, d4) -> Derivatives:
    n = d1.shape[0]
    return Derivatives(
        d1.reshape(n, 1),
        np.broadcast_to(d2, (n,)).reshape(n, 1, 1).copy(),
        np.broadcast_to(d3, (n,)).reshape(n, 1, 1, 1).copy(),
        np.broadcast_to(d4, (n,)).reshape(n, 1, 1, 1, 1).copy(),
    )


@dataclass(frozen=True)
class Poisson(_DiscreteFamily):
    def __post_init__(self):
        object.__setattr__(self, "name", "poisson")
        object.__setattr__(self, "discrete", True)

    def param_names(self):
        return ["theta"]

    def in_domain(self, theta):
        return bool(theta[0] > 0)

    def boundary_distance(self, theta):
        return float(theta[0])

    def random_interior(self, rng, count):
        return np.exp(rng.uniform(np.log(0.05), np.log(20.0), size=(count, 1)))

    def log_density(self, x, theta):
        t = _as_theta(theta, 1)[0]
        x = np.asarray(x, dtype=float)
        return x * np.log(t) - t - special.gammaln(x + 1)

    def derivatives(self, x, theta):
        t = _as_theta(theta, 1)[0]
        x = np.asarray(x, dtype=float).reshape(-1)
        return _one_param(x / t - 1.0, -x / t**2, 2.0 * x / t**3, -6.0 * x / t**4)

    def sample(self, theta, rng, count):
        return rng.poisson(_as_theta(theta, 1)[0], size=count).astype(float)

    def sufficient_stat(self, data):
        x = self.as_batch(data)
        return (x.size, float(x.sum()))

    def mean_sd(self, theta):
        t = _as_theta(theta, 1)[0]
        return t, math.sqrt(t)

    def fisher(self, theta):
        t = self.check_interior(theta)[0]
        return np.array([[1.0 / t]])

    def alpha_parts(self, theta):
        t = _as_theta(theta, 1)[0]
        g = np.array([1.0 / t])
        H = np.array([[-1.0 / t**2]])
        return AlphaParts(math.log(t), g, H, -math.log(t), -g, -H)


class _CanonicalExpFamily(_DiscreteFamily):
    """One-parameter canonical exponential family: log f = x*theta - A(theta) + c(x)."""

    def cumulant_fn(self, theta) -> tuple[float, float, float, float, float]:
        """A and its first four derivatives."""
        raise NotImplementedError

    def log_base(self, x):
        raise NotImplementedError

    def log_density(self, x, theta):
        t = _as_theta(theta, 1)[0]
        x = np.asarray(x, dtype=float)
        return x * t - self.cumulant_fn(t)[0] + self.log_base(x)

    def derivatives(self, x, theta):
        t = _as_theta(theta, 1)[0]
        x = np.asarray(x, dtype=float).reshape(-1)
        _, a1, a2, a3, a4 = self.cumulant_fn(t)
        return _one_param(x - a1, -a2, -a3, -a4)

    def sufficient_stat(self, data):
        x = self.as_batch(data)
        return (x.size, float(x.sum()))

    def fisher(self, theta):
        t = self.check_interior(theta)[0]
        return np.array([[self.cumulant_fn(t)[2]]])

    def param_names(self):
        return ["theta"]


@dataclass(frozen=True)
class BernoulliCanonical(_CanonicalExpFamily):
    def __post_init__(self):
        object.__setattr__(self, "name", "bernoulli-canonical")
        object.__setattr__(self, "discrete", True)
        object.__setattr__(self, "improper_jeffreys", False)

    def in_support(self, x):
        x = np.asarray(x, dtype=float)
        return bool(np.all((x == 0) | (x == 1)))

    def random_interior(self, rng, count):
        return rng.uniform(-4.0, 4.0, size=(count, 1))

    def cumulant_fn(self, t):
        pi = special.expit(t)
        a2 = pi * (1 - pi)
        return (np.logaddexp(0.0, t), pi, a2, a2 * (1 - 2 * pi), a2 * (1 - 6 * a2))

    def log_base(self, x):
        return np.zeros_like(x)

    def support_grid(self, theta, tail=1e-18):
        return np.array([0.0, 1.0])

    def expectation_rule(self, theta):
        th = self.check_interior(theta)
        xs = np.array([0.0, 1.0])
        return ExpectationRule(xs, np.exp(self.log_density(xs, th)), exact=True)

    def sample(self, theta, rng, count):
        pi = special.expit(_as_theta(theta, 1)[0])
        return (rng.random(count) < pi).astype(float)

    def alpha_parts(self, theta):
        t = _as_theta(theta, 1)[0]
        pi = special.expit(t)
        # u = log(pi (1 - pi)) = t - 2 log(1 + e^t)
        u = t - 2.0 * np.logaddexp(0.0, t)
        g = np.array([1.0 - 2.0 * pi])
        H = np.array([[-2.0 * pi * (1 - pi)]])
        z = np.zeros(1)
        return AlphaParts(float(u), g, H, 0.0, z, np.zeros((1, 1)))


@dataclass(frozen=True)
class NegBinomialCanonical(_CanonicalExpFamily):
    """Failures before the r-th success, success probability 1 - e^theta."""

    r: int = 1

    def __post_init__(self):
        object.__setattr__(self, "name", "negbinomial-canonical")
        object.__setattr__(self, "discrete", True)
        if not (isinstance(self.r, (int, np.integer)) and self.r >= 1):
            raise FamilyError(f"negbinomial-canonical: r must be an integer >= 1, got {self.r!r}")

    def in_domain(self, theta):
        return bool(theta[0] < 0)

    def boundary_distance(self, theta):
        return float(-theta[0])

    def random_interior(self, rng, count):
        return -np.exp(rng.uniform(np.log(0.05), np.log(3.0), size=(count, 1)))

    def cumulant_fn(self, t):
        q = math.exp(t)
        r = self.r
        om = -math.expm1(t)
        return (
            -r * math.log1p(-q),
            r * q / om,
            r * q / om**2,
            r * q * (1 + q) / om**3,
            r * q * (1 + 4 * q + q * q) / om**4,
        )

    def log_base(self, x):
        return special.gammaln(x + self.r) - special.gammaln(x + 1) - special.gammaln(self.r)

    def mean_sd(self, theta):
        _, a1, a2, _, _ = self.cumulant_fn(_as_theta(theta, 1)[0])
        return a1, math.sqrt(a2)

    def sample(self, theta, rng, count):
        q = math.exp(_as_theta(theta, 1)[0])
        return rng.negative_binomial(self.r, 1 - q, size=count).astype(float)

    def alpha_parts(self, theta):
        t = _as_theta(theta, 1)[0]
        q = math.exp(t)
        om = -math.expm1(t)
        # u = log(q / (1 - q)^2)
        u = t - 2.0 * math.log(om)
        g = np.array([1.0 + 2.0 * q / om])
        H = np.array([[2.0 * q / om**2]])
        return AlphaParts(u, g, H, 0.0, np.zeros(1), np.zeros((1, 1)))

    def describe(self):
        return {"name": self.name, "dim": 1, "r": self.r}


# ---------------------------------------------------------------------------
# Gaussian families
# ---------------------------------------------------------------------------


def _hermite_rule(mean: np.ndarray, cov: np.ndarray, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    z, w = hermegauss(nodes)
    w = w / w.sum()
    d = mean.size
    chol = np.linalg.cholesky(cov)
    grid = np.array(list(itertools.product(z, repeat=d)))
    weights = np.prod(np.array(list(itertools.product(w, repeat=d))), axis=1)
    return mean + grid @ chol.T, weights


@dataclass(frozen=True)
class NormalLocation(Family):
    sigma: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "name", "normal-location")
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise FamilyError(f"normal-location: sigma must be > 0, got {self.sigma!r}")

    def param_names(self):
        return ["mu"]

    def random_interior(self, rng, count):
        return rng.uniform(-10, 10, size=(count, 1))

    def log_density(self, x, theta):
        mu = _as_theta(theta, 1)[0]
        x = np.asarray(x, dtype=float)
        return stats.norm.logpdf(x, mu, self.sigma)

    def derivatives(self, x, theta):
        mu = _as_theta(theta, 1)[0]
        x = np.asarray(x, dtype=float).reshape(-1)
        s2 = self.sigma**2
        return _one_param((x - mu) / s2, -1.0 / s2, 0.0, 0.0)

    def sample(self, theta, rng, count):
        return rng.normal(_as_theta(theta, 1)[0], self.sigma, size=count)

    def sufficient_stat(self, data):
        x = self.as_batch(data)
        return (x.size, float(x.mean()))

    def expectation_rule(self, theta):
        mu = self.check_interior(theta)
        pts, w = _hermite_rule(mu, np.array([[self.sigma**2]]), 6)
        return ExpectationRule(pts[:, 0], w, exact=True)

    def fisher(self, theta):
        self.check_interior(theta)
        return np.array([[1.0 / self.sigma**2]])

    def alpha_parts(self, theta):
        z = np.zeros(1)
        Z = np.zeros((1, 1))
        return AlphaParts(0.0, z, Z, 0.0, z, Z)

    def describe(self):
        return {"name": self.name, "dim": 1, "sigma": self.sigma}


@dataclass(frozen=True)
class NormalLocationScale(Family):
    def __post_init__(self):
        object.__setattr__(self, "name", "normal-location-scale")
        object.__setattr__(self, "dim", 2)

    def param_names(self):
        return ["mu", "v"]

    def in_domain(self, theta):
        return bool(theta[1] > 0)

    def boundary_distance(self, theta):
        return float(theta[1])

    def random_interior(self, rng, count):
        mu = rng.uniform(-5, 5, size=count)
        v = np.exp(rng.uniform(np.log(0.1), np.log(10.0), size=count))
        return np.column_stack([mu, v])

    def log_density(self, x, theta):
        mu, v = _as_theta(theta, 2)
        x = np.asarray(x, dtype=float)
        return -0.5 * np.log(2 * np.pi * v) - (x - mu) ** 2 / (2 * v)

    def derivatives(self, x, theta):
        mu, v = _as_theta(theta, 2)
        y = np.asarray(x, dtype=float).reshape(-1) - mu
        n = y.size
        one = np.ones(n)
        d1 = np.empty((n, 2))
        d1[:, 0] = y / v
        d1[:, 1] = -0.5 / v + y**2 / (2 * v**2)

        d2 = np.empty((n, 2, 2))
        d2[:, 0, 0] = -one / v
        d2[:, 0, 1] = d2[:, 1, 0] = -y / v**2
        d2[:, 1, 1] = 0.5 / v**2 - y**2 / v**3

        # entries indexed by the number of v-derivatives
        third = [0.0 * one, one / v**2, 2 * y / v**3, -one / v**3 + 3 * y**2 / v**4]
        fourth = [0.0 * one, 0.0 * one, -2 * one / v**3, -6 * y / v**4, 3 * one / v**4 - 12 * y**2 / v**5]
        d3 = np.empty((n, 2, 2, 2))
        for idx in itertools.product(range(2), repeat=3):
            d3[(slice(None),) + idx] = third[sum(idx)]
        d4 = np.empty((n, 2, 2, 2, 2))
        for idx in itertools.product(range(2), repeat=4):
            d4[(slice(None),) + idx] = fourth[sum(idx)]
        return Derivatives(d1, d2, d3, d4)

    def sample(self, theta, rng, count):
        mu, v = _as_theta(theta, 2)
        return rng.normal(mu, math.sqrt(v), size=count)

    def sufficient_stat(self, data):
        x = self.as_batch(data)
        return (x.size, float(x.mean()), float(np.sum((x - x.mean()) ** 2)))

    def expectation_rule(self, theta):
        mu, v = self.check_interior(theta)
        pts, w = _hermite_rule(np.array([mu]), np.array([[v]]), 6)
        return ExpectationRule(pts[:, 0], w, exact=True)

    def fisher(self, theta):
        _, v = self.check_interior(theta)
        return np.diag([1.0 / v, 0.5 / v**2])

    def alpha_parts(self, theta):
        _, v = _as_theta(theta, 2)
        g = np.array([0.0, 3.0 / v])
        H = np.array([[0.0, 0.0], [0.0, -3.0 / v**2]])
        lv = 3.0 * math.log(v)
        return AlphaParts(lv, g, H, -lv, -g, -H)


@dataclass(frozen=True)
class MvnLocation(Family):
    p: int = 1
    cov: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "name", "mvn-location")
        if not (isinstance(self.p, (int, np.integer)) and self.p >= 1):
            raise FamilyError(f"mvn-location: p must be an integer >= 1, got {self.p!r}")
        object.__setattr__(self, "dim", int(self.p))
        cov = np.eye(self.p) if self.cov is None else np.asarray(self.cov, dtype=float)
        if cov.shape != (self.p, self.p) or not np.allclose(cov, cov.T):
            raise FamilyError("mvn-location: covariance must be a symmetric p x p matrix")
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise FamilyError("mvn-location: covariance must be positive definite") from None
        object.__setattr__(self, "cov", tuple(map(tuple, cov)))

    @property
    def covariance(self) -> np.ndarray:
        return np.asarray(self.cov)

    @property
    def precision(self) -> np.ndarray:
        return np.linalg.inv(self.covariance)

    @property
    def event_dim(self):
        return self.p

    def param_names(self):
        return [f"mu{i}" for i in range(self.p)]

    def random_interior(self, rng, count):
        return rng.uniform(-5, 5, size=(count, self.p))

    def log_density(self, x, theta):
        mu = _as_theta(theta, self.p)
        x = np.asarray(x, dtype=float).reshape(-1, self.p)
        return stats.multivariate_normal.logpdf(x, mu, self.covariance).reshape(-1)

    def derivatives(self, x, theta):
        mu = _as_theta(theta, self.p)
        x = np.asarray(x, dtype=float).reshape(-1, self.p)
        n, p = x.shape
        P = self.precision
        d1 = (x - mu) @ P
        d2 = np.broadcast_to(-P, (n, p, p)).copy()
        return Derivatives(d1, d2, np.zeros((n, p, p, p)), np.zeros((n, p, p, p, p)))

    def sample(self, theta, rng, count):
        mu = _as_theta(theta, self.p)
        return rng.multivariate_normal(mu, self.covariance, size=count, method="cholesky")

    def sufficient_stat(self, data):
        x = self.as_batch(data)
        return (x.shape[0], tuple(x.mean(axis=0).tolist()))

    def expectation_rule(self, theta):
        mu = self.check_interior(theta)
        pts, w = _hermite_rule(mu, self.covariance, 3 if self.p > 3 else 5)
        return ExpectationRule(pts, w, exact=True)

    def fisher(self, theta):
        self.check_interior(theta)
        return self.precision

    def alpha_parts(self, theta):
        z = np.zeros(self.p)
        Z = np.zeros((self.p, self.p))
        return AlphaParts(0.0, z, Z, 0.0, z, Z)

    def whitening(self) -> np.ndarray:
        """Matrix A with A Sigma A^T = I, applied to data and parameters alike."""
        return np.linalg.inv(np.linalg.cholesky(self.covariance))

    def describe(self):
        d = {"name": self.name, "dim": self.p, "p": self.p}
        if not np.allclose(self.covariance, np.eye(self.p)):
            d["cov"] = [list(r) for r in self.cov]
        return d


def sym_index(p: int) -> list[tuple[int, int]]:
    """Flat ordering of the (i, i') pairs with i <= i'."""
    return [(i, j) for i in range(p) for j in range(i, p)]


def sym_basis(p: int) -> np.ndarray:
    """Symmetric unit matrices E_a with dV = sum_a dtheta_a E_a."""
    pairs = sym_index(p)
    E = np.zeros((len(pairs), p, p))
    for a, (i, j) in enumerate(pairs):
        E[a, i, j] = 1.0
        E[a, j, i] = 1.0
    return E


def _symmetrize(T: np.ndarray) -> np.ndarray:
    """Sum of T over all permutations of its trailing axes (leading axis is batch when 1+k dims)."""
    k = T.ndim
    out = np.zeros_like(T)
    for perm in itertools.permutations(range(k)):
        out += np.transpose(T, perm)
    return out


@dataclass(frozen=True)
class MvnScale(Family):
    """Zero-mean multivariate normal parametrized by the covariance entries V[i, i'], i <= i'."""

    p: int = 2

    def __post_init__(self):
        object.__setattr__(self, "name", "mvn-scale")
        if not (isinstance(self.p, (int, np.integer)) and self.p >= 1):
            raise FamilyError(f"mvn-scale: p must be an integer >= 1, got {self.p!r}")
        object.__setattr__(self, "dim", self.p * (self.p + 1) // 2)

    @property
    def event_dim(self):
        return self.p

    def param_names(self):
        return [f"V{i}{j}" for i, j in sym_index(self.p)]

    def to_matrix(self, theta) -> np.ndarray:
        th = _as_theta(theta, self.dim)
        V = np.zeros((self.p, self.p))
        for a, (i, j) in enumerate(sym_index(self.p)):
            V[i, j] = V[j, i] = th[a]
        return V

    def from_matrix(self, V) -> np.ndarray:
        V = np.asarray(V, dtype=float)
        return np.array([V[i, j] for i, j in sym_index(self.p)])

    def in_domain(self, theta):
        try:
            np.linalg.cholesky(self.to_matrix(theta))
        except np.linalg.LinAlgError:
            return False
        return True

    def boundary_distance(self, theta):
        return float(np.linalg.eigvalsh(self.to_matrix(theta))[0])

    def random_interior(self, rng, count):
        out = []
        for _ in range(count):
            A = rng.normal(size=(self.p, self.p))
            out.append(self.from_matrix(A @ A.T / self.p + 0.3 * np.eye(self.p)))
        return np.array(out)

    def log_density(self, x, theta):
        V = self.to_matrix(theta)
        x = np.asarray(x, dtype=float).reshape(-1, self.p)
        return stats.multivariate_normal.logpdf(x, np.zeros(self.p), V).reshape(-1)

    def derivatives(self, x, theta):
        V = self.to_matrix(theta)
        x = np.asarray(x, dtype=float).reshape(-1, self.p)
        W = np.linalg.inv(V)
        E = sym_basis(self.p)
        u = x @ W
        WE = np.einsum("ij,ajk->aik", W, E)  # W E_a
        out = []
        # chain_k[a1..ak] = E_a1 W E_a2 W ... W E_ak
        chain = E
        for k in range(1, 5):
            if k > 1:
                chain = np.einsum("...ij,bjk->...bik", chain, WE)
            quad = np.einsum("ni,...ij,nj->n...", u, chain, u)
            trace = np.einsum("ij,...ji->...", W, chain)
            sym_q = _symmetrize_batch(quad)
            sym_t = _symmetrize(trace) if k > 1 else trace
            dk = -0.5 * (-1) ** k * sym_q - 0.5 * (-1) ** (k - 1) / k * sym_t
            out.append(dk)
        return Derivatives(*out)

    def sample(self, theta, rng, count):
        V = self.to_matrix(theta)
        return rng.multivariate_normal(np.zeros(self.p), V, size=count, method="cholesky")

    def sufficient_stat(self, data):
        x = self.as_batch(data)
        S = x.T @ x
        return (x.shape[0], tuple(self.from_matrix(S).tolist()))

    def expectation_rule(self, theta):
        self.check_interior(theta)
        V = self.to_matrix(theta)
        pts, w = _hermite_rule(np.zeros(self.p), V, 5)
        return ExpectationRule(pts, w, exact=True)

    def fisher(self, theta):
        self.check_interior(theta)
        W = np.linalg.inv(self.to_matrix(theta))
        E = sym_basis(self.p)
        WE = np.einsum("ij,ajk->aik", W, E)
        return 0.5 * np.einsum("aij,bji->ab", WE, WE)

    def _logdet_derivs(self, theta):
        V = self.to_matrix(theta)
        W = np.linalg.inv(V)
        E = sym_basis(self.p)
        WE = np.einsum("ij,ajk->aik", W, E)
        g = np.einsum("aii->a", WE)
        H = -np.einsum("aij,bji->ab", WE, WE)
        return float(np.linalg.slogdet(V)[1]), g, H

    def alpha_parts(self, theta):
        # log h = -(a + b*alpha) log|V|; constants fixed by the gradient condition at V = I
        a, b = self.alpha_power()
        ld, g, H = self._logdet_derivs(theta)
        return AlphaParts(-b * ld, -b * g, -b * H, -a * ld, -a * g, -a * H)

    def alpha_power(self) -> tuple[float, float]:
        """(a, b) such that the alpha-class prior is |V|^-(a + b*alpha)."""
        return _mvn_scale_alpha_power(self.p)

    def describe(self):
        return {"name": self.name, "dim": self.dim, "p": self.p}


def _symmetrize_batch(T: np.ndarray) -> np.ndarray:
    k = T.ndim - 1
    out = np.zeros_like(T)
    for perm in itertools.permutations(range(1, k + 1)):
        out += np.transpose(T, (0,) + perm)
    return out


_ALPHA_POWER_CACHE: dict[int, tuple[float, float]] = {}


def _mvn_scale_alpha_power(p: int) -> tuple[float, float]:
    if p not in _ALPHA_POWER_CACHE:
        fam = MvnScale(p)
        theta = fam.from_matrix(np.eye(p))
        rule = fam.expectation_rule(theta)
        d = fam.derivatives(rule.points, theta)
        w = rule.weights
        fisher = np.einsum("n,ni,nj->ij", w, d.d1, d.d1)
        inv = np.linalg.inv(fisher)
        l111 = np.einsum("n,ni,nj,nk->ijk", w, d.d1, d.d1, d.d1)
        l21 = np.einsum("n,nij,nk->ijk", w, d.d2, d.d1)
        grad0 = np.einsum("js,ijs->i", inv, l21)
        grad1 = np.einsum("js,ijs->i", inv, l111)
        # d log|V| / dV_00 = 1 at V = I, entry 0 is the (0, 0) pair
        _ALPHA_POWER_CACHE[p] = (-float(grad0[0]), -float(grad1[0]))
    return _ALPHA_POWER_CACHE[p]


FAMILY_NAMES = (
    "poisson",
    "bernoulli-canonical",
    "negbinomial-canonical",
    "normal-location",
    "normal-location-scale",
    "mvn-location",
    "mvn-scale",
)


def make_family(name: str, **hyper) -> Family:
    """Build a family by name.

    Hyperparameters: ``r`` for negbinomial-canonical, ``sigma`` for
    normal-location, ``p`` (and optionally ``cov``) for mvn-location,
    ``p`` for mvn-scale.
    """
    allowed = {
        "poisson": set(),
        "bernoulli-canonical": set(),
        "negbinomial-canonical": {"r"},
        "normal-location": {"sigma"},
        "normal-location-scale": set(),
        "mvn-location": {"p", "cov"},
        "mvn-scale": {"p"},
    }
    if name not in allowed:
        raise FamilyError(f"unknown family {name!r}; expected one of {', '.join(FAMILY_NAMES)}")
    extra = set(hyper) - allowed[name]
    if extra:
        raise FamilyError(f"{name}: unexpected hyperparameter(s) {sorted(extra)}")
    if name == "poisson":
        return Poisson()
    if name == "bernoulli-canonical":
        return BernoulliCanonical()
    if name == "negbinomial-canonical":
        r = hyper.get("r", 1)
        if isinstance(r, float) and r.is_integer():
            r = int(r)
        return NegBinomialCanonical(r=r)
    if name == "normal-location":
        return NormalLocation(sigma=float(hyper.get("sigma", 1.0)))
    if name == "normal-location-scale":
        return NormalLocationScale()
    if name == "mvn-location":
        return MvnLocation(p=hyper.get("p", 1), cov=hyper.get("cov"))
    return MvnScale(p=hyper.get("p", 2))
