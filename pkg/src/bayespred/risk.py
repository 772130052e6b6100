"""Kullback-Leibler loss and frequentist risk of predictive procedures.

The risk of a procedure at ``theta`` is the expectation over samples of
size ``n`` of D(f_theta || f_hat).  Replicates draw the sufficient
statistic directly from its sampling distribution (the procedures only
see the data through it), and the inner KL is a closed form or a
one-dimensional series/integral.  Discrete families also admit exact
enumeration over the sufficient statistic.

Estimative replicates whose MLE is on the boundary have infinite loss;
they are excluded and the excluded probability (or fraction) reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special, stats

from . import kernels
from .families import Family, FamilyError, NegBinomialCanonical, Poisson
from .predictive import RadialMarginal, _log_sphere_mean
from .priors import Prior
from .rng import DEFAULT_BLOCK, map_blocks


class RiskError(ValueError):
    pass


PROCEDURES = ("predictive", "estimative", "truth")
MAX_EXCLUDED = 0.5


@dataclass(frozen=True)
class Procedure:
    kind: str
    prior: Prior | None = None

    def __post_init__(self):
        if self.kind not in PROCEDURES:
            raise RiskError(f"unknown procedure {self.kind!r}; expected one of {PROCEDURES}")
        if self.kind == "predictive" and self.prior is None:
            raise RiskError("the predictive procedure needs a prior")

    @property
    def label(self) -> str:
        return f"predictive({self.prior.label})" if self.kind == "predictive" else self.kind


def as_procedure(procedure, prior: Prior | None = None) -> Procedure:
    if isinstance(procedure, Procedure):
        return procedure
    return Procedure(str(procedure), prior if procedure == "predictive" else None)


@dataclass(frozen=True)
class RiskEstimate:
    value: float
    std_error: float
    reps: int
    seed: int | None
    method: str
    excluded_fraction: float = 0.0
    truncation_mass: float = 0.0
    procedure: str = ""
    n: int = 0
    theta: tuple = ()

    def as_row(self) -> dict:
        return {
            "theta": list(self.theta),
            "n": self.n,
            "procedure": self.procedure,
            "value": self.value,
            "std_error": self.std_error,
            "method": self.method,
            "reps": self.reps,
            "seed": self.seed,
            "excluded_fraction": self.excluded_fraction,
        }


@dataclass(frozen=True)
class RiskDifference:
    delta: float
    std_error: float
    reps: int
    seed: int
    label_a: str
    label_b: str
    excluded_fraction: float = 0.0
    n: int = 0
    theta: tuple = ()

    def ci(self, level: float = 0.95) -> tuple[float, float]:
        z = stats.norm.ppf(0.5 + level / 2)
        return (self.delta - z * self.std_error, self.delta + z * self.std_error)

    def excludes_zero(self, level: float = 0.95) -> bool:
        lo, hi = self.ci(level)
        return lo > 0 or hi < 0

    def as_row(self) -> dict:
        lo, hi = self.ci()
        return {
            "theta": list(self.theta),
            "n": self.n,
            "procedure_a": self.label_a,
            "procedure_b": self.label_b,
            "delta": self.delta,
            "std_error": self.std_error,
            "ci_low": lo,
            "ci_high": hi,
            "reps": self.reps,
            "seed": self.seed,
            "excluded_fraction": self.excluded_fraction,
        }


# ---------------------------------------------------------------------------
# KL divergence
# ---------------------------------------------------------------------------


def kl_divergence(family: Family, theta, fhat) -> float:
    """D(f_theta || fhat) in nats; ``math.inf`` when fhat vanishes where f_theta does not.

    ``fhat`` is anything with a ``log_eval`` method (predictive or
    estimative density).  Discrete supports are summed until the truth's
    tail mass is below 1e-12 (in fact ~1e-18); one-dimensional
    continuous supports use adaptive quadrature with absolute tolerance
    1e-9; multivariate normal truths use a tensor Gauss-Hermite rule.
    """
    th = family.check_interior(theta)
    if family.discrete:
        ys = family.support_grid(th)
        lp = family.log_density(ys, th)
        lq = fhat.log_eval(ys)
        p = np.exp(lp)
        live = p > 0
        if np.any(np.isneginf(lq[live])):
            return math.inf
        return max(float(np.sum(p[live] * (lp[live] - lq[live]))), 0.0)
    if family.event_dim == 0:
        mean, sd = _normal_moments(family, th)

        def f(y):
            lp = float(family.log_density(np.array([y]), th)[0])
            lq = float(fhat.log_eval(np.array([y]))[0])
            if math.isinf(lq):
                return math.inf
            return math.exp(lp) * (lp - lq)

        total = 0.0
        for a, b in ((mean - 40 * sd, mean), (mean, mean + 40 * sd)):
            val, _ = integrate.quad(f, a, b, epsabs=1e-10, epsrel=1e-10, limit=400)
            if not math.isfinite(val):
                return math.inf
            total += val
        return max(total, 0.0)
    pts, w = _dense_rule(family, th)
    lp = family.log_density(pts, th)
    lq = fhat.log_eval(pts)
    if np.any(np.isneginf(lq)):
        return math.inf
    return max(float(np.sum(w * (lp - lq))), 0.0)


def _normal_moments(family: Family, th) -> tuple[float, float]:
    if family.name == "normal-location":
        return float(th[0]), family.sigma
    if family.name == "normal-location-scale":
        return float(th[0]), math.sqrt(th[1])
    raise FamilyError(f"no continuous KL rule for {family.name}")


def _dense_rule(family: Family, th) -> tuple[np.ndarray, np.ndarray]:
    p = family.event_dim
    k = {1: 80, 2: 64}.get(p, 24)
    z, w = np.polynomial.hermite_e.hermegauss(k)
    w = w / w.sum()
    if family.name == "mvn-location":
        mean, cov = th, family.covariance
    else:
        mean, cov = np.zeros(p), family.to_matrix(th)
    L = np.linalg.cholesky(cov)
    grids = np.meshgrid(*([z] * p), indexing="ij")
    pts = np.stack([g.reshape(-1) for g in grids], axis=1)
    wts = np.prod(np.stack(np.meshgrid(*([w] * p), indexing="ij")).reshape(p, -1), axis=0)
    return mean + pts @ L.T, wts


# ---------------------------------------------------------------------------
# per-family engines: sufficient-statistic sampler and vectorized inner KL
# ---------------------------------------------------------------------------


def _bern_kl(p, q):
    with np.errstate(divide="ignore", invalid="ignore"):
        return p * (math.log(p) - np.log(q)) + (1 - p) * (math.log1p(-p) - np.log1p(-q))


def _gauss_kl(mu, v, m, w):
    """KL(N(mu, v) || N(m, w)), vectorized in m, w."""
    return 0.5 * (v / w + (mu - m) ** 2 / w - 1.0 + np.log(w / v))


class _Engine:
    exact_ok = False

    def __init__(self, family: Family, theta: np.ndarray, n: int):
        self.family = family
        self.theta = theta
        self.n = int(n)

    def draw(self, rng, count) -> dict:
        raise NotImplementedError

    def enumerate(self) -> tuple[dict, np.ndarray, float]:
        raise RiskError(f"risk_exact needs a discrete family; use risk_mc for {self.family.name}")

    def kl(self, proc: Procedure, st: dict) -> tuple[np.ndarray, np.ndarray]:
        size = next(iter(st.values())).shape[0]
        if proc.kind == "truth":
            return np.zeros(size), np.zeros(size, dtype=bool)
        if proc.kind == "estimative":
            return self.kl_estimative(st)
        tag = proc.prior.conjugate
        if tag is None:
            raise RiskError(
                f"prior {proc.prior.label!r} has no conjugate representation for {self.family.name}; "
                "the risk engine needs one"
            )
        return self.kl_predictive(tag, st)

    def check(self, proc: Procedure):
        """Deterministic validity checks done before any sampling."""
        if proc.kind == "predictive" and proc.prior.conjugate is None:
            self.kl(proc, self.draw(np.random.default_rng(0), 1))


class _DiscreteEngine(_Engine):
    exact_ok = True

    def __init__(self, family, theta, n):
        super().__init__(family, theta, n)
        ys = family.support_grid(theta)
        self.logp = family.log_density(ys, theta)
        self.p = np.exp(self.logp)

    def stat_family(self):
        raise NotImplementedError

    def enumerate(self):
        fam, th = self.stat_family()
        s = fam.support_grid(th)
        w = np.exp(fam.log_density(s, th))
        return {"S": s}, w, max(0.0, 1.0 - float(np.sum(w)))


class _PoissonEngine(_DiscreteEngine):
    def stat_family(self):
        return Poisson(), np.array([self.n * self.theta[0]])

    def draw(self, rng, count):
        return {"S": rng.poisson(self.n * self.theta[0], size=count).astype(float)}

    def kl_predictive(self, tag, st):
        if tag[0] != "gamma":
            raise RiskError(f"unsupported prior form {tag[0]} for poisson")
        A = tag[1] + st["S"]
        B = tag[2] + self.n
        bad = (A <= 0) | (B <= 0)
        out = np.full(A.shape, np.nan)
        if B > 0 and np.any(~bad):
            out[~bad] = kernels.poisson_negbin_kl(self.p, self.logp, A[~bad], B)
        return out, bad

    def kl_estimative(self, st):
        t = self.theta[0]
        est = st["S"] / self.n
        bad = est <= 0
        with np.errstate(divide="ignore", invalid="ignore"):
            out = t * (math.log(t) - np.log(est)) - t + est
        return np.where(bad, np.nan, out), bad


class _BernoulliEngine(_DiscreteEngine):
    def __init__(self, family, theta, n):
        super().__init__(family, theta, n)
        self.pi = float(special.expit(theta[0]))

    def enumerate(self):
        s = np.arange(self.n + 1, dtype=float)
        return {"S": s}, stats.binom.pmf(s, self.n, self.pi), 0.0

    def draw(self, rng, count):
        return {"S": rng.binomial(self.n, self.pi, size=count).astype(float)}

    def kl_predictive(self, tag, st):
        if tag[0] != "beta":
            raise RiskError(f"unsupported prior form {tag[0]} for bernoulli-canonical")
        A = tag[1] + st["S"]
        B = tag[2] + self.n - st["S"]
        bad = (A <= 0) | (B <= 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = _bern_kl(self.pi, A / (A + B))
        return np.where(bad, np.nan, out), bad

    def kl_estimative(self, st):
        q = st["S"] / self.n
        bad = (q <= 0) | (q >= 1)
        return np.where(bad, np.nan, _bern_kl(self.pi, q)), bad


class _NegBinEngine(_DiscreteEngine):
    def stat_family(self):
        return NegBinomialCanonical(r=self.n * self.family.r), self.theta

    def draw(self, rng, count):
        q = math.exp(self.theta[0])
        return {"S": rng.negative_binomial(self.n * self.family.r, 1 - q, size=count).astype(float)}

    def kl_predictive(self, tag, st):
        if tag[0] != "beta":
            raise RiskError(f"unsupported prior form {tag[0]} for negbinomial-canonical")
        r = self.family.r
        A = tag[1] + st["S"]
        B = np.full(A.shape, tag[2] + self.n * r)
        bad = (A <= 0) | (B <= 0)
        out = np.full(A.shape, np.nan)
        if np.any(~bad):
            out[~bad] = kernels.negbin_betanegbin_kl(self.p, self.logp, r, A[~bad], B[~bad])
        return out, bad

    def kl_estimative(self, st):
        r = self.family.r
        q = math.exp(self.theta[0])
        m = st["S"] / self.n
        bad = m <= 0
        with np.errstate(divide="ignore", invalid="ignore"):
            qh = m / (r + m)
            out = r * q / (1 - q) * (math.log(q) - np.log(qh)) + r * (math.log1p(-q) - np.log1p(-qh))
        return np.where(bad, np.nan, out), bad


class _RadialMixin:
    """Shrinkage-prior inner KL on whitened location data.

    KL(g) = KL(flat) + log m(|zbar|; 1/n) - E log m(|W|; 1/(n+1)), where
    W = (n zbar + Y)/(n+1) ~ N((n zbar + nu)/(n+1), I/(n+1)^2).
    """

    _splines: dict

    def _radial_parts(self, alpha, p, nu, n):
        key = float(alpha)
        if key not in self._splines:
            rm = RadialMarginal(p, alpha)
            s_max = float(np.linalg.norm(nu)) + 12.0 / math.sqrt(n) + 2.0
            self._splines[key] = (rm, s_max, rm.spline(s_max, 1.0 / n), rm.spline(s_max, 1.0 / (n + 1.0)))
        return self._splines[key]

    def radial_delta(self, alpha, zbar, nu):
        """log m(|zbar|; 1/n) - E log m(|W|; 1/(n+1)) per row of zbar."""
        n = self.n
        p = zbar.shape[1]
        rm, s_max, sp_n, sp_w = self._radial_parts(alpha, p, nu, n)

        def log_m(sp, s, v):
            out = np.empty_like(s)
            inside = s <= s_max
            out[inside] = sp(s[inside])
            if np.any(~inside):
                out[~inside] = rm.log_m(s[~inside], v)
            return out

        first = log_m(sp_n, np.linalg.norm(zbar, axis=1), 1.0 / n)
        c = np.linalg.norm((n * zbar + nu) / (n + 1.0), axis=1)
        tau2 = 1.0 / (n + 1.0) ** 2
        tau = math.sqrt(tau2)
        x, w = np.polynomial.legendre.leggauss(64)
        lo = np.maximum(0.0, c - 12.0 * tau)
        half = 0.5 * (c + 12.0 * tau - lo)
        s = lo[:, None] + half[:, None] * (x[None, :] + 1.0)
        kappa = s * c[:, None] / tau2
        with np.errstate(divide="ignore"):
            log_dens = (
                (p - 1) * np.log(s)
                - 0.5 * (s - c[:, None]) ** 2 / tau2
                - kappa
                + _log_sphere_mean(p, kappa.reshape(-1)).reshape(kappa.shape)
            )
        wts = np.exp(log_dens - log_dens.max(axis=1, keepdims=True)) * w[None, :]
        wts /= wts.sum(axis=1, keepdims=True)
        vals = log_m(sp_w, s.reshape(-1), 1.0 / (n + 1.0)).reshape(s.shape)
        return first - np.sum(wts * vals, axis=1)


class _NormalLocationEngine(_RadialMixin, _Engine):
    def __init__(self, family, theta, n):
        super().__init__(family, theta, n)
        self._splines = {}

    def draw(self, rng, count):
        return {"xbar": rng.normal(self.theta[0], self.family.sigma / math.sqrt(self.n), size=count)}

    def kl_predictive(self, tag, st):
        s2 = self.family.sigma**2
        mu = self.theta[0]
        xbar = st["xbar"]
        ok = np.zeros(xbar.shape, dtype=bool)
        if tag[0] == "normal":
            m0, v0 = tag[1], tag[2]
            prec = (0.0 if math.isinf(v0) else 1.0 / v0) + self.n / s2
            vn = 1.0 / prec
            mn = vn * ((0.0 if math.isinf(v0) else m0 / v0) + self.n * xbar / s2)
            return _gauss_kl(mu, s2, mn, s2 + vn), ok
        if tag[0] == "radial":
            sig = self.family.sigma
            c = 1.0 + 1.0 / self.n
            zbar = (xbar / sig)[:, None]
            nu = np.array([mu / sig])
            flat = 0.5 * (1.0 / c + (zbar[:, 0] - nu[0]) ** 2 / c - 1.0 + math.log(c))
            return flat + self.radial_delta(tag[1], zbar, nu), ok
        raise RiskError(f"unsupported prior form {tag[0]} for normal-location")

    def kl_estimative(self, st):
        d = st["xbar"] - self.theta[0]
        return 0.5 * d * d / self.family.sigma**2, np.zeros(d.shape, dtype=bool)


class _LocationScaleEngine(_Engine):
    def draw(self, rng, count):
        mu, v = self.theta
        if self.n < 2:
            raise RiskError("normal-location-scale risk needs n >= 2")
        xbar = rng.normal(mu, math.sqrt(v / self.n), size=count)
        ss = v * rng.chisquare(self.n - 1, size=count)
        return {"xbar": xbar, "ss": ss}

    def kl_predictive(self, tag, st):
        if tag[0] != "power-v":
            raise RiskError(f"unsupported prior form {tag[0]} for normal-location-scale")
        nu = 2.0 * tag[1] + self.n - 3.0
        if nu <= 0:
            raise RiskError(f"posterior improper for every sample: v^-{tag[1]:g} prior with n = {self.n}")
        mu, v = self.theta
        s2 = st["ss"] * (1.0 + 1.0 / self.n) / nu
        out = kernels.normal_student_kl(mu, v, st["xbar"], s2, np.full(s2.shape, nu))
        return out, np.zeros(s2.shape, dtype=bool)

    def kl_estimative(self, st):
        mu, v = self.theta
        vh = st["ss"] / self.n
        bad = vh <= 0
        with np.errstate(divide="ignore", invalid="ignore"):
            out = _gauss_kl(mu, v, st["xbar"], vh)
        return np.where(bad, np.nan, out), bad


class _MvnLocationEngine(_RadialMixin, _Engine):
    def __init__(self, family, theta, n):
        super().__init__(family, theta, n)
        self.A = family.whitening()
        self.nu = self.A @ theta
        self._splines = {}

    def draw(self, rng, count):
        p = self.family.p
        return {"zbar": self.nu + rng.standard_normal((count, p)) / math.sqrt(self.n)}

    def kl_predictive(self, tag, st):
        p = self.family.p
        zbar = st["zbar"]
        c = 1.0 + 1.0 / self.n
        d2 = np.sum((zbar - self.nu) ** 2, axis=1)
        flat = 0.5 * (p / c + d2 / c - p + p * math.log(c))
        ok = np.zeros(d2.shape, dtype=bool)
        if tag[0] == "normal" and math.isinf(tag[2]):
            return flat, ok
        if tag[0] == "radial":
            return flat + self.radial_delta(tag[1], zbar, self.nu), ok
        raise RiskError(f"unsupported prior form {tag[0]} for mvn-location")

    def kl_estimative(self, st):
        d2 = np.sum((st["zbar"] - self.nu) ** 2, axis=1)
        return 0.5 * d2, np.zeros(d2.shape, dtype=bool)


class _MvnScaleEngine(_Engine):
    def __init__(self, family, theta, n):
        super().__init__(family, theta, n)
        self.L = np.linalg.cholesky(family.to_matrix(theta))

    def draw(self, rng, count):
        p = self.family.p
        # S = L Z^T Z L^T with Z an n x p standard normal matrix; keep the whitened Z^T Z
        z = rng.standard_normal((count, self.n, p))
        return {"W": np.einsum("kni,knj->kij", z, z)}

    def _lam(self, st):
        # eigenvalues of L^T S^{-1} L = (Z^T Z)^{-1}
        ev = np.linalg.eigvalsh(st["W"])
        with np.errstate(divide="ignore"):
            return 1.0 / ev, ev <= 1e-300

    def kl_predictive(self, tag, st):
        if tag[0] != "power-det":
            raise RiskError(f"unsupported prior form {tag[0]} for mvn-scale")
        p = self.family.p
        nu = 2.0 * tag[1] + self.n - p - 1.0
        if self.n < p or nu <= p - 1:
            raise RiskError(f"posterior improper for every sample: |V|^-{tag[1]:g} prior with n = {self.n}")
        lam, bad = self._lam(st)
        c0 = -0.5 * p * math.log(math.pi) + special.gammaln(0.5 * (nu + 1)) - special.gammaln(0.5 * (nu + 1 - p))
        e = kernels.mean_log1p_quadform(np.where(bad, 1.0, lam))
        out = -0.5 * p * math.log(2 * math.pi * math.e) - c0 - 0.5 * np.sum(np.log(lam), axis=1) + 0.5 * (nu + 1) * e
        return np.where(bad.any(axis=1), np.nan, out), bad.any(axis=1)

    def kl_estimative(self, st):
        p = self.family.p
        lam, bad = self._lam(st)
        n = self.n
        with np.errstate(invalid="ignore", divide="ignore"):
            out = 0.5 * (n * np.sum(lam, axis=1) - p - np.sum(np.log(n * lam), axis=1))
        b = bad.any(axis=1) | (n < p)
        return np.where(b, np.nan, out), b


_ENGINES = {
    "poisson": _PoissonEngine,
    "bernoulli-canonical": _BernoulliEngine,
    "negbinomial-canonical": _NegBinEngine,
    "normal-location": _NormalLocationEngine,
    "normal-location-scale": _LocationScaleEngine,
    "mvn-location": _MvnLocationEngine,
    "mvn-scale": _MvnScaleEngine,
}


def _engine(family: Family, theta, n: int) -> _Engine:
    th = family.check_interior(theta)
    if int(n) != n or n < 1:
        raise RiskError(f"sample size must be a positive integer, got {n!r}")
    try:
        cls = _ENGINES[family.name]
    except KeyError:
        raise RiskError(f"no risk engine for {family.name}") from None
    return cls(family, th, int(n))


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------


def _excluded_check(frac: float, what: str):
    if frac > MAX_EXCLUDED:
        raise RiskError(
            f"{frac:.1%} of {what} excluded (boundary MLE or improper posterior); the estimate is meaningless"
        )


def risk_exact(family: Family, theta, n: int, procedure="predictive", prior: Prior | None = None) -> RiskEstimate:
    """Exact risk by enumerating the sufficient statistic (discrete families)."""
    proc = as_procedure(procedure, prior)
    eng = _engine(family, theta, n)
    if not eng.exact_ok:
        raise RiskError(f"risk_exact needs a discrete family; use risk_mc for {family.name}")
    st, w, tail = eng.enumerate()
    kl, bad = eng.kl(proc, st)
    excl = float(np.sum(w[bad]))
    _excluded_check(excl, "the sampling probability")
    keep = ~bad
    value = float(np.sum(w[keep] * kl[keep]) / np.sum(w[keep]))
    return RiskEstimate(
        value=value,
        std_error=0.0,
        reps=int(w.size),
        seed=None,
        method="exact",
        excluded_fraction=excl,
        truncation_mass=tail,
        procedure=proc.label,
        n=int(n),
        theta=tuple(eng.theta.tolist()),
    )


def _mc_losses(eng: _Engine, procs: list[Procedure], reps, seed, threads, block):
    if reps < 100:
        raise RiskError(f"reps must be at least 100, got {reps}")
    for proc in procs:
        eng.check(proc)

    def run(rng, count, _b):
        st = eng.draw(rng, count)
        cols = []
        for proc in procs:
            kl, bad = eng.kl(proc, st)
            cols.append(np.where(bad, np.nan, kl))
        return np.stack(cols, axis=1)

    return map_blocks(run, seed, int(reps), threads=threads, block=block)


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    m = x.size
    mean = float(np.sum(x) / m)
    sd = float(np.sqrt(np.sum((x - mean) ** 2) / (m - 1))) if m > 1 else math.nan
    return mean, sd / math.sqrt(m)


def risk_mc(
    family: Family,
    theta,
    n: int,
    procedure="predictive",
    prior: Prior | None = None,
    reps: int = 100_000,
    seed: int = 0,
    threads: int = 1,
    block: int = DEFAULT_BLOCK,
) -> RiskEstimate:
    """Monte Carlo risk; bit-identical for a given seed whatever ``threads`` is."""
    if seed is None:
        raise RiskError("risk_mc needs an explicit seed")
    proc = as_procedure(procedure, prior)
    eng = _engine(family, theta, n)
    losses = _mc_losses(eng, [proc], reps, seed, threads, block)[:, 0]
    bad = np.isnan(losses)
    excl = float(np.mean(bad))
    _excluded_check(excl, "replicates")
    value, se = _mean_se(losses[~bad])
    return RiskEstimate(
        value=value,
        std_error=se,
        reps=int(reps),
        seed=int(seed),
        method="monte-carlo",
        excluded_fraction=excl,
        procedure=proc.label,
        n=int(n),
        theta=tuple(eng.theta.tolist()),
    )


def risk_difference(
    family: Family,
    theta,
    n: int,
    proc_a,
    proc_b,
    priors: tuple = (None, None),
    reps: int = 100_000,
    seed: int = 0,
    threads: int = 1,
    block: int = DEFAULT_BLOCK,
) -> RiskDifference:
    """Paired risk difference R(A) - R(B) with common random numbers."""
    if seed is None:
        raise RiskError("risk_difference needs an explicit seed")
    pa = as_procedure(proc_a, priors[0])
    pb = as_procedure(proc_b, priors[1])
    eng = _engine(family, theta, n)
    losses = _mc_losses(eng, [pa, pb], reps, seed, threads, block)
    bad = np.isnan(losses).any(axis=1)
    excl = float(np.mean(bad))
    _excluded_check(excl, "replicates")
    diff = losses[~bad, 0] - losses[~bad, 1]
    delta, se = _mean_se(diff)
    return RiskDifference(
        delta=delta,
        std_error=se,
        reps=int(reps),
        seed=int(seed),
        label_a=pa.label,
        label_b=pb.label,
        excluded_fraction=excl,
        n=int(n),
        theta=tuple(eng.theta.tolist()),
    )
