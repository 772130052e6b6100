"""Bayes predictive and estimative densities for the next observation.

The Bayes predictive density is the posterior density of the next
observation,

    f_h(y | x) = int f(y | theta) h(theta | x) dtheta.

Everything is computed from the sufficient statistic, so a predictive
built from raw data and one built from its reduction coincide exactly.
Conjugate-representable pairs (see :mod:`bayespred.priors`) get closed
forms; other priors fall back to log-domain quadrature over the
parameter (p <= 3).  Improper priors are allowed; an infinite posterior
normalizer is an error.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, optimize, special

from .families import Family, FamilyError, MvnLocation
from .priors import Prior


class PredictiveError(ValueError):
    pass


class ImproperPosteriorError(PredictiveError):
    """The posterior normalizer is infinite (improper prior, too little data)."""


class QuadratureError(PredictiveError):
    pass


QUAD_RTOL = 1e-8


# ---------------------------------------------------------------------------
# radial marginal for location shrinkage priors
# ---------------------------------------------------------------------------


def _log_sphere_mean(p: int, kappa: np.ndarray) -> np.ndarray:
    """log of int_{S^{p-1}} exp(kappa cos angle) dsigma, stable in kappa."""
    kappa = np.asarray(kappa, dtype=float)
    nu = 0.5 * p - 1.0
    small = kappa < 1e-4
    out = np.empty_like(kappa)
    k = np.where(small, 1.0, kappa)
    out[~small] = (
        0.5 * p * math.log(2 * math.pi)
        - nu * np.log(k[~small])
        + np.log(special.ive(nu, k[~small]))
        + k[~small]
    )
    # kappa^{-nu} I_nu(kappa) = 2^{-nu} / Gamma(nu + 1) (1 + kappa^2 / (2p) + ...)
    ks = kappa[small]
    out[small] = 0.5 * p * math.log(2 * math.pi) - nu * math.log(2.0) - special.gammaln(nu + 1) + ks**2 / (2 * p)
    return out


@dataclass(frozen=True)
class RadialMarginal:
    """m(s; v) = int N_p(z; mu, v I) (1 + |mu|^2)^(2 alpha) dmu at |z| = s.

    The angular integral is a modified Bessel function, so only the
    radial integral is done numerically (Gauss-Legendre on a window of
    +-12 standard deviations around the data radius).
    """

    p: int
    alpha: float
    nodes: int = 160

    def log_m(self, s, v: float) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        sd = math.sqrt(v)
        x, w = np.polynomial.legendre.leggauss(self.nodes)
        lo = np.maximum(0.0, s - 12.0 * sd)
        hi = s + 12.0 * sd
        half = 0.5 * (hi - lo)
        r = lo[:, None] + half[:, None] * (x[None, :] + 1.0)
        kappa = r * s[:, None] / v
        log_f = (
            2.0 * self.alpha * np.log1p(r * r)
            + (self.p - 1) * np.log(r)
            - 0.5 * self.p * math.log(2 * math.pi * v)
            - 0.5 * (r - s[:, None]) ** 2 / v
            - kappa
            + _log_sphere_mean(self.p, kappa)
        )
        return special.logsumexp(log_f + np.log(w)[None, :], axis=1) + np.log(half)

    def spline(self, s_max: float, v: float, points: int = 4001):
        """Cubic spline of s -> log m(s; v) on [0, s_max]."""
        from scipy.interpolate import CubicSpline

        grid = np.linspace(0.0, s_max, points)
        vals = self.log_m(grid, v)
        # log m is even in s; a clamped zero slope at the origin keeps that
        return CubicSpline(grid, vals, bc_type=((1, 0.0), "not-a-knot"))


# ---------------------------------------------------------------------------
# densities
# ---------------------------------------------------------------------------


def _as_points(family: Family, y) -> np.ndarray:
    arr = np.asarray(y, dtype=float)
    return arr.reshape(-1) if family.event_dim == 0 else arr.reshape(-1, family.event_dim)


@dataclass(frozen=True)
class PredictiveDensity:
    family: Family
    prior_label: str
    n: int
    stat: tuple
    method: str
    kind: str
    params: dict = field(default_factory=dict)
    log_fn: Callable[[np.ndarray], np.ndarray] = field(default=None, repr=False, compare=False)

    def log_eval(self, y) -> np.ndarray:
        return np.asarray(self.log_fn(_as_points(self.family, y)), dtype=float)

    def eval(self, y) -> np.ndarray:
        return np.exp(self.log_eval(y))

    @property
    def provenance(self) -> dict:
        return {"family": self.family.describe(), "prior": self.prior_label, "n": self.n, "stat": list(self.stat)}

    def normalization_error(self) -> float:
        """|total mass - 1| by summation or quadrature."""
        return abs(_total_mass(self) - 1.0)


@dataclass(frozen=True)
class EstimativeDensity:
    family: Family
    mle: np.ndarray
    boundary: bool
    n: int
    stat: tuple
    log_fn: Callable[[np.ndarray], np.ndarray] = field(default=None, repr=False, compare=False)

    method = "plug-in"

    def log_eval(self, y) -> np.ndarray:
        return np.asarray(self.log_fn(_as_points(self.family, y)), dtype=float)

    def eval(self, y) -> np.ndarray:
        return np.exp(self.log_eval(y))


def _stat_of(family: Family, data, stat) -> tuple:
    if stat is not None:
        return tuple(stat)
    if data is None:
        return _empty_stat(family)
    x = family.as_batch(data)
    if x.shape[0] == 0:
        return _empty_stat(family)
    return family.sufficient_stat(x)


def _empty_stat(family: Family) -> tuple:
    name = family.name
    if name in ("poisson", "bernoulli-canonical", "negbinomial-canonical", "normal-location"):
        return (0, 0.0)
    if name == "normal-location-scale":
        return (0, 0.0, 0.0)
    if name == "mvn-location":
        return (0, tuple([0.0] * family.p))
    return (0, tuple([0.0] * family.dim))


def log_likelihood_stat(family: Family, stat: tuple, theta) -> float:
    """Log-likelihood of the data through its sufficient statistic, up to a constant."""
    n = stat[0]
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    name = family.name
    if n == 0:
        return 0.0
    if name == "poisson":
        return stat[1] * math.log(th[0]) - n * th[0]
    if name in ("bernoulli-canonical", "negbinomial-canonical"):
        return stat[1] * th[0] - n * family.cumulant_fn(th[0])[0]
    if name == "normal-location":
        return -0.5 * n * (stat[1] - th[0]) ** 2 / family.sigma**2
    if name == "normal-location-scale":
        mu, v = th
        return -0.5 * n * math.log(v) - 0.5 * (stat[2] + n * (stat[1] - mu) ** 2) / v
    if name == "mvn-location":
        d = np.asarray(stat[1]) - th
        return -0.5 * n * float(d @ family.precision @ d)
    if name == "mvn-scale":
        V = family.to_matrix(th)
        S = family.to_matrix(np.asarray(stat[1]))
        sign, logdet = np.linalg.slogdet(V)
        return -0.5 * n * logdet - 0.5 * float(np.trace(np.linalg.solve(V, S)))
    raise FamilyError(f"no sufficient-statistic likelihood for {name}")


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------


def _need(cond: bool, what: str):
    if not cond:
        raise ImproperPosteriorError(f"posterior normalizer infinite: {what}")


def _closed_form(family: Family, prior: Prior, stat: tuple) -> PredictiveDensity | None:
    tag = prior.conjugate
    if tag is None:
        return None
    name = family.name
    n = stat[0]
    kind = tag[0]
    mk = lambda k, params, fn: PredictiveDensity(family, prior.label, n, stat, "closed-form", k, params, fn)

    if name == "poisson" and kind == "gamma":
        A, B = tag[1] + stat[1], tag[2] + n
        _need(A > 0 and B > 0, f"gamma posterior shape {A:g}, rate {B:g}")
        lr, l1 = math.log(B / (B + 1.0)), math.log1p(B)

        def log_fn(y):
            return special.gammaln(y + A) - special.gammaln(y + 1) - special.gammaln(A) + A * lr - y * l1

        return mk("negative-binomial", {"shape": A, "rate": B}, log_fn)

    if name == "bernoulli-canonical" and kind == "beta":
        A, B = tag[1] + stat[1], tag[2] + n - stat[1]
        _need(A > 0 and B > 0, f"beta posterior ({A:g}, {B:g})")
        q1 = A / (A + B)

        def log_fn(y):
            with np.errstate(divide="ignore"):
                return np.where(y == 1, math.log(q1), np.where(y == 0, math.log1p(-q1), -np.inf))

        return mk("bernoulli", {"a": A, "b": B, "p1": q1}, log_fn)

    if name == "negbinomial-canonical" and kind == "beta":
        r = family.r
        A, B = tag[1] + stat[1], tag[2] + n * r
        _need(A > 0 and B > 0, f"beta posterior ({A:g}, {B:g})")

        def log_fn(y):
            return (
                special.gammaln(y + r)
                - special.gammaln(y + 1)
                - special.gammaln(r)
                + special.betaln(A + y, B + r)
                - special.betaln(A, B)
            )

        return mk("beta-negative-binomial", {"r": r, "a": A, "b": B}, log_fn)

    if name == "normal-location" and kind == "normal":
        s2 = family.sigma**2
        m0, v0 = tag[1], tag[2]
        prec = (0.0 if math.isinf(v0) else 1.0 / v0) + n / s2
        _need(prec > 0, "flat prior with no data")
        vn = 1.0 / prec
        mn = vn * ((0.0 if math.isinf(v0) else m0 / v0) + n * stat[1] / s2)
        var = s2 + vn

        def log_fn(y):
            return -0.5 * math.log(2 * math.pi * var) - 0.5 * (y - mn) ** 2 / var

        return mk("normal", {"mean": mn, "var": var}, log_fn)

    if name == "normal-location-scale" and kind == "power-v":
        k = tag[1]
        nu = 2.0 * k + n - 3.0
        _need(n >= 2 and stat[2] > 0 and nu > 0, f"power prior v^-{k:g} with n = {n} (degrees of freedom {nu:g})")
        m = stat[1]
        s2 = stat[2] * (1.0 + 1.0 / n) / nu
        c0 = special.gammaln(0.5 * (nu + 1)) - special.gammaln(0.5 * nu) - 0.5 * math.log(nu * math.pi * s2)

        def log_fn(y):
            return c0 - 0.5 * (nu + 1) * np.log1p((y - m) ** 2 / (nu * s2))

        return mk("student-t", {"df": nu, "loc": m, "scale2": s2}, log_fn)

    if name == "mvn-location" and kind == "normal":
        _need(math.isinf(tag[2]) and n >= 1, "flat prior with no data")
        xbar = np.asarray(stat[1])
        C = family.covariance * (1.0 + 1.0 / n)
        Ci = np.linalg.inv(C)
        ld = np.linalg.slogdet(C)[1]
        p = family.p

        def log_fn(y):
            d = y - xbar
            return -0.5 * (p * math.log(2 * math.pi) + ld) - 0.5 * np.einsum("ni,ij,nj->n", d, Ci, d)

        return mk("normal", {"mean": xbar.tolist(), "cov": C.tolist()}, log_fn)

    if name in ("mvn-location", "normal-location") and kind == "radial":
        return _radial_predictive(family, prior, stat)

    if name == "mvn-scale" and kind == "power-det":
        p = family.p
        c = tag[1]
        nu = 2.0 * c + n - p - 1.0
        S = family.to_matrix(np.asarray(stat[1]))
        _need(n >= p and nu > p - 1 and np.linalg.eigvalsh(S)[0] > 0, f"|V|^-{c:g} prior with n = {n}")
        Si = np.linalg.inv(S)
        c0 = (
            -0.5 * p * math.log(math.pi)
            + special.gammaln(0.5 * (nu + 1))
            - special.gammaln(0.5 * (nu + 1 - p))
            - 0.5 * np.linalg.slogdet(S)[1]
        )

        def log_fn(y):
            return c0 - 0.5 * (nu + 1) * np.log1p(np.einsum("ni,ij,nj->n", y, Si, y))

        return mk("multivariate-t", {"nu": nu, "scatter": S.tolist()}, log_fn)
    return None


def _whitener(family: Family) -> np.ndarray:
    if isinstance(family, MvnLocation):
        return family.whitening()
    return np.array([[1.0 / family.sigma]])


def _radial_predictive(family: Family, prior: Prior, stat: tuple) -> PredictiveDensity:
    """Shrinkage prior on the whitened mean.

    p_g(y | x) = p_U(y | x) m(w; 1/(n+1)) / m(xbar; 1/n), w = (y + n xbar)/(n+1),
    with p_U the flat-prior predictive and m the radial marginal.
    """
    n = stat[0]
    _need(n >= 1, "shrinkage prior with no data")
    A = _whitener(family)
    p = A.shape[0]
    xbar = np.atleast_1d(np.asarray(stat[1], dtype=float))
    rm = RadialMarginal(p, prior.alpha)
    zbar = A @ xbar
    base = float(rm.log_m(np.linalg.norm(zbar), 1.0 / n)[0])
    c = 1.0 + 1.0 / n
    log_det_a = float(np.linalg.slogdet(A)[1])

    def log_fn(y):
        z = (y.reshape(-1, p) @ A.T) if y.ndim > 1 or p > 1 else (y.reshape(-1, 1) * A[0, 0])
        d = z - zbar
        log_u = -0.5 * p * math.log(2 * math.pi * c) - 0.5 * np.sum(d * d, axis=1) / c + log_det_a
        w = (z + n * zbar) / (n + 1.0)
        return log_u + rm.log_m(np.linalg.norm(w, axis=1), 1.0 / (n + 1.0)) - base

    return PredictiveDensity(
        family,
        prior.label,
        n,
        stat,
        "quadrature",
        "radial-shrinkage",
        {"alpha": prior.alpha, "zbar": zbar.tolist()},
        log_fn,
    )


# ---------------------------------------------------------------------------
# generic log-domain quadrature
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Chart:
    """Unconstrained coordinates u with theta = to_theta(u)."""

    to_theta: Callable[[np.ndarray], np.ndarray]
    log_jac: Callable[[np.ndarray], float]


def _chart(family: Family) -> _Chart:
    name = family.name
    if name == "poisson":
        return _Chart(lambda u: np.exp(u), lambda u: float(u[0]))
    if name == "negbinomial-canonical":
        return _Chart(lambda u: -np.exp(u), lambda u: float(u[0]))
    if name == "normal-location-scale":
        return _Chart(lambda u: np.array([u[0], math.exp(u[1])]), lambda u: float(u[1]))
    if name == "mvn-scale":
        p = family.p
        rows, cols = np.tril_indices(p)

        def to_theta(u):
            L = np.zeros((p, p))
            L[rows, cols] = u
            L[np.diag_indices(p)] = np.exp(np.diag(L))
            return family.from_matrix(L @ L.T)

        def log_jac(u):
            L = np.zeros((p, p))
            L[rows, cols] = u
            d = np.diag(L)
            # V = L L^T has Jacobian 2^p prod L_ii^(p - i + 1); L_ii = e^{u_ii} adds prod L_ii
            return p * math.log(2.0) + float(np.sum((p - np.arange(p) + 1) * d))

        return _Chart(to_theta, log_jac)
    return _Chart(lambda u: np.asarray(u, dtype=float), lambda u: 0.0)


def _quadrature_predictive(family: Family, prior: Prior, stat: tuple) -> PredictiveDensity:
    if prior.log_density is None:
        raise PredictiveError(f"prior {prior.label!r} has no density; a predictive needs one")
    n = stat[0]
    if n == 0 and prior.proper != "proper":
        raise ImproperPosteriorError("posterior normalizer infinite: improper prior with no data")
    chart = _chart(family)
    k = family.dim
    if k > 3:
        raise PredictiveError("quadrature predictive supports at most 3 parameters")

    def log_post(u):
        u = np.atleast_1d(u)
        if np.any(np.abs(u) > 700.0):
            return -np.inf
        th = chart.to_theta(u)
        if not (np.all(np.isfinite(th)) and family.in_domain(th)):
            return -np.inf
        with np.errstate(all="ignore"):
            val = log_likelihood_stat(family, stat, th) + prior.log_density(th) + chart.log_jac(u)
        return val if np.isfinite(val) else -np.inf

    u0 = _start(family, stat, chart, log_post)
    res = optimize.minimize(lambda u: -log_post(u), u0, method="Nelder-Mead",
                            options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 20000})
    mode = np.atleast_1d(res.x)
    top = log_post(mode)
    if not np.isfinite(top):
        raise QuadratureError("could not locate the posterior mode")
    if np.any(np.abs(mode) > 600.0):
        raise ImproperPosteriorError(
            "posterior normalizer infinite: posterior mass escapes to the edge of the parameter space"
        )
    # standardized coordinates u = mode + C z with C C^T the Laplace covariance
    C = _laplace_factor(log_post, mode)
    lp_z = lambda z: log_post(mode + C @ z)
    # widen the window until the posterior is negligible at every face
    half = np.full(k, 12.0)
    while any(lp_z(z) - top > -46.0 for z in _box_corners(np.zeros(k), half)):
        half = half * 2.0
        if np.any(half > 1e4):
            raise ImproperPosteriorError(
                "posterior normalizer infinite: posterior does not decay away from its mode"
            )

    def integrate_fn(g):
        if k == 1:
            val, err = integrate.quad(lambda a: g(np.array([a])), -half[0], half[0],
                                      epsabs=0.0, epsrel=QUAD_RTOL, limit=400, points=[0.0])
        else:
            # inner axes unbounded: for scale parameters the conditional spread of the
            # other coordinates grows with the outer one, so no fixed box holds the mass
            inner = {"epsabs": 0.0, "epsrel": QUAD_RTOL, "limit": 200}
            outer = dict(inner, points=[-2.0, 0.0, 2.0])
            ranges = [(-np.inf, np.inf)] * (k - 1) + [(-half[-1], half[-1])]
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", integrate.IntegrationWarning)
                val, err = integrate.nquad(lambda *a: g(np.array(a)), ranges, opts=[inner] * (k - 1) + [outer])
        if not np.isfinite(val) or (val > 0 and err > 1e3 * QUAD_RTOL * abs(val)):
            raise QuadratureError(f"quadrature did not converge (achieved relative error {err / abs(val):.2e})")
        return val

    Z = integrate_fn(lambda z: math.exp(max(lp_z(z) - top, -745.0)))
    if not Z > 0:
        raise QuadratureError("posterior normalizer evaluated to zero")
    logZ = math.log(Z) + top

    def log_fn(y):
        out = np.empty(y.shape[0])
        for j in range(y.shape[0]):
            yy = y[j : j + 1]

            def g(z):
                u = mode + C @ z
                lp = log_post(u)
                if lp - top < -745.0:
                    return 0.0
                if not np.isfinite(lp):
                    return 0.0
                return math.exp(float(family.log_density(yy, chart.to_theta(u))[0]) + lp - top)

            val = integrate_fn(g)
            out[j] = math.log(val) + top - logZ if val > 0 else -np.inf
        return out

    return PredictiveDensity(family, prior.label, n, stat, "quadrature", "quadrature",
                             {"mode": chart.to_theta(mode).tolist()}, log_fn)


def _start(family, stat, chart, log_post):
    k = family.dim
    n = stat[0]
    name = family.name
    if n > 0 and name == "poisson":
        return np.array([math.log((stat[1] + 0.5) / n)])
    if n > 0 and name == "bernoulli-canonical":
        return np.array([special.logit((stat[1] + 0.5) / (n + 1.0))])
    if n > 0 and name == "negbinomial-canonical":
        m = (stat[1] + 0.5) / n
        return np.array([math.log(-math.log(m / (family.r + m)))])
    if n > 0 and name in ("normal-location", "mvn-location"):
        return np.atleast_1d(np.asarray(stat[1], dtype=float))
    if n > 1 and name == "normal-location-scale":
        return np.array([stat[1], math.log(max(stat[2] / n, 1e-12))])
    best, arg = -np.inf, np.zeros(k)
    for g in np.linspace(-5, 5, 21):
        u = np.full(k, g)
        v = log_post(u)
        if v > best:
            best, arg = v, u
    return arg


def _laplace_factor(log_post, mode) -> np.ndarray:
    """Cholesky factor of the inverse negative Hessian at the mode (identity if not definite)."""
    k = mode.size
    h = 1e-4 * (1 + np.abs(mode))
    H = np.empty((k, k))
    for i in range(k):
        for j in range(i, k):
            ei = np.zeros(k)
            ej = np.zeros(k)
            ei[i] = h[i]
            ej[j] = h[j]
            val = (
                log_post(mode + ei + ej) - log_post(mode + ei - ej) - log_post(mode - ei + ej) + log_post(mode - ei - ej)
            ) / (4 * h[i] * h[j])
            H[i, j] = H[j, i] = val
    try:
        return np.linalg.cholesky(np.linalg.inv(-H))
    except np.linalg.LinAlgError:
        return np.eye(k)


def _box_corners(mode, half):
    k = mode.size
    for i in range(k):
        for s in (-1.0, 1.0):
            u = mode.copy()
            u[i] += s * half[i]
            yield u


# ---------------------------------------------------------------------------
# public constructors
# ---------------------------------------------------------------------------


def bayes_predictive(
    family: Family,
    prior: Prior,
    data=None,
    stat: tuple | None = None,
    force_quadrature: bool = False,
) -> PredictiveDensity:
    """Predictive density of the next observation.

    Parameters
    ----------
    family, prior
        Model and prior (possibly improper).
    data
        Raw observations; ignored when ``stat`` is given.
    stat
        Sufficient statistic as returned by ``family.sufficient_stat``.
    force_quadrature
        Skip the closed form (used to cross-check the two paths).
    """
    if prior.dim != family.dim:
        raise PredictiveError("prior dimension does not match the family")
    st = _stat_of(family, data, stat)
    if st[0] == 0 and prior.proper != "proper":
        raise ImproperPosteriorError("posterior normalizer infinite: improper prior with no data")
    if not force_quadrature:
        pd = _closed_form(family, prior, st)
        if pd is not None:
            return pd
    return _quadrature_predictive(family, prior, st)


def mle(family: Family, stat: tuple) -> tuple[np.ndarray, bool]:
    """Maximum likelihood estimate from the sufficient statistic and a boundary flag."""
    n = stat[0]
    if n == 0:
        raise PredictiveError("estimative density needs at least one observation")
    name = family.name
    if name == "poisson":
        t = stat[1] / n
        return np.array([t]), t == 0.0
    if name == "bernoulli-canonical":
        m = stat[1] / n
        with np.errstate(divide="ignore"):
            return np.array([special.logit(m)]), m in (0.0, 1.0)
    if name == "negbinomial-canonical":
        m = stat[1] / n
        if m == 0:
            return np.array([-np.inf]), True
        return np.array([math.log(m / (family.r + m))]), False
    if name == "normal-location":
        return np.array([stat[1]]), False
    if name == "normal-location-scale":
        return np.array([stat[1], stat[2] / n]), stat[2] <= 0
    if name == "mvn-location":
        return np.asarray(stat[1], dtype=float), False
    if name == "mvn-scale":
        th = np.asarray(stat[1], dtype=float) / n
        return th, not family.in_domain(th) or family.boundary_distance(th) <= 0
    raise FamilyError(f"no MLE for {name}")


def _boundary_log_fn(family: Family, theta: np.ndarray):
    """Boundary-limit density: a point mass for the discrete families, else none."""
    name = family.name
    if name in ("poisson", "negbinomial-canonical") or (name == "bernoulli-canonical" and theta[0] < 0):
        return lambda y: np.where(y == 0, 0.0, -np.inf)
    if name == "bernoulli-canonical":
        return lambda y: np.where(y == 1, 0.0, -np.inf)
    return lambda y: np.full(y.shape[0], -np.inf)


def estimative(family: Family, data=None, stat: tuple | None = None) -> EstimativeDensity:
    """Plug-in density at the MLE; boundary MLEs are flagged, not raised."""
    st = _stat_of(family, data, stat)
    th, boundary = mle(family, st)
    if boundary:
        fn = _boundary_log_fn(family, th)
    else:
        fn = lambda y: family.log_density(y, th)
    return EstimativeDensity(family, th, bool(boundary), st[0], st, fn)


# ---------------------------------------------------------------------------
# normalization checks
# ---------------------------------------------------------------------------


def _discrete_mass(log_eval) -> float:
    total, lo, chunk = 0.0, 0, 256
    while True:
        ys = np.arange(lo, lo + chunk, dtype=float)
        vals = np.exp(log_eval(ys))
        total += float(np.sum(vals))
        if lo > 0 and vals[-1] < 1e-17 * max(total, 1e-300) and vals[-1] <= vals[0]:
            return total
        lo += chunk
        chunk *= 2
        if lo > 10**8:
            return total


def _total_mass(pd: PredictiveDensity) -> float:
    fam = pd.family
    if fam.discrete:
        if fam.name == "bernoulli-canonical":
            return float(np.sum(pd.eval(np.array([0.0, 1.0]))))
        return _discrete_mass(pd.log_eval)
    if fam.event_dim == 0:
        center = float(pd.params.get("loc", pd.params.get("mean", pd.stat[1])))
        return _quad_line(pd, center)[0]
    p = fam.event_dim
    if pd.kind in ("normal", "multivariate-t"):
        shape = np.asarray(pd.params.get("cov", pd.params.get("scatter")))
        center = np.asarray(pd.params.get("mean", np.zeros(p)), dtype=float)
        L = np.linalg.cholesky(shape)
        # elliptical: mass = |L| * area(S^{p-1}) * int r^{p-1} f(center + L u r) dr, any unit u
        u = np.zeros(p)
        u[0] = 1.0
        area = 2 * math.pi ** (p / 2) / math.gamma(p / 2)
        det = float(np.prod(np.diag(L)))
        f = lambda r: r ** (p - 1) * float(pd.eval((center + L @ (u * r))[None, :])[0])
        val, _ = integrate.quad(f, 0, np.inf, epsabs=0, epsrel=1e-11, limit=400)
        return det * area * val
    if pd.kind == "radial-shrinkage":
        n = pd.n
        A = _whitener(fam)
        zbar = np.asarray(pd.params["zbar"])
        c = 1.0 + 1.0 / n
        k = 24
        z, w = np.polynomial.hermite_e.hermegauss(k)
        w = w / w.sum()
        grids = np.meshgrid(*([z] * p), indexing="ij")
        pts = np.stack([g.reshape(-1) for g in grids], axis=1)
        wts = np.prod(np.stack(np.meshgrid(*([w] * p), indexing="ij")).reshape(p, -1), axis=0)
        zs = zbar + math.sqrt(c) * pts
        ys = np.linalg.solve(A, zs.T).T
        # the predictive over the flat-prior predictive is m(w)/m(xbar)
        log_u = -0.5 * p * math.log(2 * math.pi * c) - 0.5 * np.sum(pts * pts, axis=1) + float(np.linalg.slogdet(A)[1])
        ratio = np.exp(pd.log_eval(ys) - log_u)
        return float(np.sum(wts * ratio))
    raise PredictiveError(f"no normalization check for {pd.kind} predictives of dimension {p}")


def _quad_line(pd: PredictiveDensity, center: float):
    f = lambda y: float(pd.eval(np.array([y]))[0])
    total, err = 0.0, 0.0
    for a, b in ((-np.inf, center - 50), (center - 50, center), (center, center + 50), (center + 50, np.inf)):
        v, e = integrate.quad(f, a, b, epsabs=1e-13, epsrel=1e-11, limit=400)
        total += v
        err += e
    return total, err
