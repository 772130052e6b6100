"""Second-order Kullback-Leibler risk expansion of Bayes predictive densities.

The risk of the Bayes predictive density under prior ``h`` expands as

    R(theta, n) = p/(2n) - p/(4n^2) + G(theta)/n^2 + O(n^-3)

with ``G`` built from per-observation tensors ``L`` (see
:mod:`bayespred.cumulants`) and the log-prior derivatives ``h_i``,
``h_ij``:

    G = A - p/4 + B_i h_i + L^{-1}_{i,r} (h_ir + h_i h_r / 2)
    B_i = L^{-1}_{i,r} L^{-1}_{j,s} (L_{rj,s} + L_{rjs})

``A`` is the prior-free contraction listed in :data:`LIKELIHOOD_TABLE`.
The ``-p/4`` shift removes the leading-order part that raw
per-observation moments such as ``L_{ij,rs}`` carry (``L_ij L_rs``
contracts to ``p``); without it the normal location family, whose risk
is exactly ``(p/2) log(1 + 1/n)``, would not have ``G = 0``.

Splitting at the Jeffreys prior ``J`` gives the likelihood term
``G(J)`` and the prior term ``G(h) - G(J)``; both are invariant under
reparametrization and the prior term vanishes for ``h = J``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cumulants import CumulantTensors, cumulants
from .families import Family, FamilyError
from .priors import Prior, alpha_prior


class ExpansionError(ValueError):
    pass


@dataclass(frozen=True)
class Coefficient:
    coef: float
    inverse: tuple[str, ...]
    patterns: tuple[str, ...]
    note: str = ""


# prior-free part of G; the one-dimensional reduction is the bracket of the
# scalar risk formula (L_{1,2}^2 collects the first two three-inverse rows,
# 5/2 L_3 L_{1,2} the fourth and fifth, 13/12 L_3^2 the sixth and seventh)
LIKELIHOOD_TABLE: tuple[Coefficient, ...] = (
    Coefficient(1 / 2, ("ir", "js"), ("ij,r,s",), "1-D: L_{1,1,2}"),
    Coefficient(3 / 4, ("ir", "js"), ("ij,rs",), "1-D: L_{2,2}"),
    Coefficient(1.0, ("ir", "js"), ("irj,s",), "1-D: L_{1,3}"),
    Coefficient(1 / 2, ("ir", "js"), ("irjs",), "1-D: L_4"),
    Coefficient(1 / 2, ("ir", "js", "kt"), ("i,rj", "k,st"), "1-D: L_{1,2}^2, half"),
    Coefficient(1 / 2, ("ir", "js", "kt"), ("i,jk", "t,rs"), "1-D: L_{1,2}^2, half"),
    Coefficient(1 / 6, ("ir", "js", "kt"), ("ijk", "r,s,t"), "1-D: L_3 L_{1,1,1}"),
    Coefficient(1.0, ("ir", "js", "kt"), ("irj", "k,st"), "1-D: L_3 L_{1,2}"),
    Coefficient(3 / 2, ("ir", "js", "kt"), ("ijk", "r,st"), "1-D: L_3 L_{1,2}"),
    Coefficient(1 / 2, ("ir", "js", "kt"), ("irj", "skt"), "1-D: L_3^2"),
    Coefficient(7 / 12, ("ir", "js", "kt"), ("ijk", "rst"), "1-D: L_3^2"),
)


def likelihood_contraction(ct: CumulantTensors, table=LIKELIHOOD_TABLE) -> float:
    total = 0.0
    for c in table:
        total += c.coef * float(ct.contract(list(c.inverse), list(c.patterns)))
    return total


def coupling_vector(ct: CumulantTensors) -> np.ndarray:
    """B_i, the coefficient of h_i in G."""
    return ct.contract(["ir", "js"], ["rj,s"], out="i") + ct.contract(["ir", "js"], ["rjs"], out="i")


@dataclass(frozen=True)
class ExpansionResult:
    n_free: float
    p: int
    g_theta: float
    likelihood_term: float
    prior_term: float
    prior_free: float = math.nan
    prior_part: float = math.nan
    theta: tuple = field(default=())
    prior_label: str = ""

    def first_order(self, n: float) -> float:
        return self.p / (2.0 * n)

    def second_order_const(self, n: float) -> float:
        return -self.p / (4.0 * n * n)

    def total(self, n: float) -> float:
        return self.first_order(n) + self.second_order_const(n) + self.g_theta / (n * n)

    def as_row(self) -> dict:
        return {
            "theta": list(self.theta),
            "prior": self.prior_label,
            "g_theta": self.g_theta,
            "likelihood_term": self.likelihood_term,
            "prior_term": self.prior_term,
            "prior_free": self.prior_free,
            "prior_part": self.prior_part,
        }


def _log_derivs(prior: Prior, theta):
    return prior.grad(theta), prior.hess(theta)


def g_from_derivs(ct: CumulantTensors, h_grad, h_hess) -> float:
    p = ct.dim
    inv = ct.fisher_inv
    B = coupling_vector(ct)
    quad = float(np.sum(inv * (h_hess + 0.5 * np.outer(h_grad, h_grad))))
    return likelihood_contraction(ct) - p / 4.0 + float(B @ h_grad) + quad


def prior_term_from_derivs(ct: CumulantTensors, h_grad, h_hess, j_grad, j_hess) -> float:
    """G(h) - G(J) written in the centred differences d = h - J."""
    d1 = h_grad - j_grad
    d2 = h_hess - j_hess
    B = coupling_vector(ct)
    inv = ct.fisher_inv
    return float(B @ d1) + float(np.sum(inv * (d2 + 0.5 * np.outer(d1, d1) + np.outer(d1, j_grad))))


def g_term_general(family: Family, prior: Prior, theta, ct: CumulantTensors | None = None) -> ExpansionResult:
    """Likelihood term + prior term for any dimension."""
    th = family.check_interior(theta)
    if ct is None:
        ct = cumulants(family, th)
    _, j_grad, j_hess = family.jeffreys_log(th)
    h_grad, h_hess = _log_derivs(prior, th)
    lik = g_from_derivs(ct, j_grad, j_hess)
    pri = prior_term_from_derivs(ct, h_grad, h_hess, j_grad, j_hess)
    return ExpansionResult(
        n_free=lik + pri,
        p=family.dim,
        g_theta=lik + pri,
        likelihood_term=lik,
        prior_term=pri,
        theta=tuple(th.tolist()),
        prior_label=prior.label,
    )


def g_term_1d(
    family: Family,
    prior: Prior,
    theta,
    ct: CumulantTensors | None = None,
    printed_coupling: bool = False,
) -> ExpansionResult:
    """Scalar-parameter bracket.

    ``printed_coupling`` swaps the h_1 coefficient L_{1,1}^{-2}(L_{1,2}+L_3)
    for the dimensionally inconsistent L_{1,1}^{-1}(L_{1,2}+L_3); it is kept
    for diagnostics only.
    """
    if family.dim != 1:
        raise ExpansionError(f"g_term_1d needs a one-parameter family; use g_term_general for p = {family.dim}")
    th = family.check_interior(theta)
    if ct is None:
        ct = cumulants(family, th)
    L11 = ct.get("i,j")[0, 0]
    L112 = ct.get("ij,r,s")[0, 0, 0, 0]
    L22 = ct.get("ij,rs")[0, 0, 0, 0]
    L13 = ct.get("ijk,l")[0, 0, 0, 0]
    L4 = ct.get("ijkl")[0, 0, 0, 0]
    L12 = ct.get("ij,k")[0, 0, 0]
    L3 = ct.get("ijk")[0, 0, 0]
    L111 = ct.get("i,j,k")[0, 0, 0]
    free = (
        (0.5 * L112 + 0.75 * L22 + L13 + 0.5 * L4) / L11**2
        + (L12**2 + L3 * L111 / 6.0 + 2.5 * L3 * L12 + 13.0 / 12.0 * L3**2) / L11**3
        - 0.25
    )
    h1 = prior.grad(th)[0]
    h2 = prior.hess(th)[0, 0]
    coupling = (L12 + L3) / (L11 if printed_coupling else L11**2)
    part = coupling * h1 + (h2 + 0.5 * h1 * h1) / L11
    _, jg, jh = family.jeffreys_log(th)
    j1, j2 = jg[0], jh[0, 0]
    lik = free + coupling * j1 + (j2 + 0.5 * j1 * j1) / L11
    total = free + part
    return ExpansionResult(
        n_free=total,
        p=1,
        g_theta=total,
        likelihood_term=lik,
        prior_term=total - lik,
        prior_free=free,
        prior_part=part,
        theta=tuple(th.tolist()),
        prior_label=prior.label,
    )


def g_theta(family: Family, prior: Prior, theta) -> float:
    if family.dim == 1:
        return g_term_1d(family, prior, theta).g_theta
    return g_term_general(family, prior, theta).g_theta


# ---------------------------------------------------------------------------
# alpha-class search

_VANDER_ALPHAS = (0.0, 0.5, 1.0)
_VANDER = np.array([[a * a, a, 1.0] for a in _VANDER_ALPHAS])


def default_theta_grid(family: Family, size: int = 9) -> np.ndarray:
    """Nine-point probe grid, log-spaced over the natural scale of each parameter."""
    scale = np.geomspace(0.25, 4.0, size)
    name = family.name
    if name == "poisson":
        return scale[:, None]
    if name == "negbinomial-canonical":
        # canonical theta = log(1 - q) < 0; spread the failure probability log-evenly
        return np.log1p(-np.geomspace(0.05, 0.8, size))[:, None]
    if name == "bernoulli-canonical":
        return np.log(scale)[:, None] * 1.5
    if name == "normal-location":
        return np.log(scale)[:, None]
    if name == "normal-location-scale":
        return np.column_stack([np.log(scale[::-1]), scale])
    if name == "mvn-location":
        return np.outer(np.log(scale), np.ones(family.dim))
    if name == "mvn-scale":
        rng = np.random.default_rng(0)
        out = []
        for k, s in enumerate(scale):
            q, _ = np.linalg.qr(rng.standard_normal((family.p, family.p)))
            V = s * q @ np.diag(np.geomspace(1.0, 1.0 + k / 4.0, family.p)) @ q.T
            out.append(family.from_matrix(V))
        return np.array(out)
    rng = np.random.default_rng(0)
    return family.random_interior(rng, size)


@dataclass(frozen=True)
class AlphaSolveResult:
    """Quadratic dependence of G on alpha and the alphas it singles out.

    ``coefficients`` are ``(a, b, c)`` of ``G = a alpha^2 + b alpha + c``
    averaged over the grid; ``per_theta`` keeps them point by point.
    ``roots`` are the common zeros of the theta-dependent part of the
    quadratic and ``constant_risk_alphas`` those roots confirmed by direct
    evaluation of ``G`` over the grid; ``least_constant_alpha`` is the one
    with the lowest level.  ``argmin_alpha`` is set only when the
    stationary point is the same at every grid point (transitive problems);
    otherwise ``argmin_per_theta`` carries the pointwise values, NaN where
    ``G`` is linear in alpha.
    """

    family: str
    coefficients: tuple[float, float, float]
    per_theta: np.ndarray
    theta_grid: np.ndarray
    argmin_alpha: float | None
    argmin_spread: float
    argmin_per_theta: np.ndarray
    roots: tuple[float, ...]
    root_residuals: tuple[float, ...]
    constant_risk_alphas: tuple[float, ...]
    constant_levels: tuple[float, ...]
    degenerate: bool
    least_constant_alpha: float | None = None
    printed_condition_alpha: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def quadratic(self, alpha: float) -> float:
        a, b, c = self.coefficients
        return a * alpha * alpha + b * alpha + c

    def as_rows(self) -> list[dict]:
        a, b, c = self.coefficients
        base = {"family": self.family, "a": a, "b": b, "c": c}
        rows = [dict(base, kind="argmin", alpha=self.argmin_alpha, level=self.quadratic(self.argmin_alpha) if self.argmin_alpha is not None else None)]
        for al, lev in zip(self.constant_risk_alphas, self.constant_levels):
            kind = "least-constant-risk" if al == self.least_constant_alpha else "constant-risk"
            rows.append(dict(base, kind=kind, alpha=al, level=lev))
        return rows


def _alpha_g(family, alpha, theta, ct):
    prior = alpha_prior(family, alpha, check=False)
    if family.dim == 1 and ct is None:
        return g_term_1d(family, prior, theta).g_theta
    return g_term_general(family, prior, theta, ct=ct).g_theta


def _common_roots(coefs: np.ndarray) -> list[float]:
    """Real alphas at which every row's quadratic vanishes, up to rounding."""
    scale = np.max(np.abs(coefs), axis=1)
    if np.all(scale < 1e-12 * (1 + np.max(np.abs(coefs)))):
        return []
    row = coefs[int(np.argmax(scale))]
    cand = np.roots(row) if abs(row[0]) > 1e-14 * scale.max() else np.roots(row[1:])
    out = []
    for r in cand:
        if abs(r.imag) > 1e-9:
            continue
        out.append(float(r.real))
    return sorted(out)


def remark6_printed_alpha(ct: CumulantTensors) -> float:
    """Alpha from the minimum-risk condition as printed after Remark 6.

    Solves ``(alpha - 1) L^-1 L^-1 L^-1 L_{i,j,s} L_{r,k,t} = RHS`` with the
    inverse factors paired ``(i r)(j s)(k t)``.  Reported as a diagnostic;
    the stationary point of the fitted quadratic is authoritative.
    """
    three = ["ir", "js", "kt"]
    two = ["ir", "js"]
    lhs = float(ct.contract(three, ["i,j,s", "r,k,t"]))
    rhs = -sum(float(ct.contract(two, [pat])) for pat in ("ir,j,s", "i,jr,s", "i,j,rs", "i,r,j,s"))
    rhs += float(ct.contract(three, ["r,j,s", "i,k,t"]))
    rhs += 2.0 * float(ct.contract(three, ["rs,k", "i,j,t"]))
    rhs += float(ct.contract(three, ["r,s,k", "i,j,t"]))
    if abs(lhs) < 1e-14:
        return math.nan
    return 1.0 + rhs / lhs


def alpha_solve(
    family: Family,
    theta_grid=None,
    tensors=None,
) -> AlphaSolveResult:
    """Locate the minimum-risk and constant-risk members of the alpha-class.

    ``G`` is quadratic in alpha at each theta, so three evaluations fix it.
    ``tensors`` optionally maps a theta to a :class:`CumulantTensors` (for
    example the closed-form multivariate normal scale tensors) in place of
    the family's own quadrature.
    """
    grid = default_theta_grid(family) if theta_grid is None else np.atleast_2d(np.asarray(theta_grid, dtype=float))
    if grid.shape[1] != family.dim:
        grid = grid.reshape(-1, family.dim)
    try:
        alpha_prior(family, 0.5, check=False)
    except FamilyError as exc:
        raise ExpansionError(f"{family.name}: alpha-class priors unavailable ({exc})") from None
    cts = [None if tensors is None else tensors(th) for th in grid]
    if tensors is None and family.dim > 1:
        cts = [cumulants(family, th) for th in grid]
    values = np.array([[_alpha_g(family, a, th, ct) for a in _VANDER_ALPHAS] for th, ct in zip(grid, cts)])
    per = np.linalg.solve(_VANDER, values.T).T
    coef = per.mean(axis=0)
    scale = max(1.0, float(np.max(np.abs(per))))
    degenerate = bool(np.all(np.abs(per[:, 0]) < 1e-10 * scale))
    curved = np.abs(per[:, 0]) > 1e-10 * scale
    stationary = np.full(len(grid), math.nan)
    stationary[curved] = -per[curved, 1] / (2.0 * per[curved, 0])
    argmin, spread = None, math.nan
    if np.all(curved):
        spread = float(np.ptp(stationary))
        if spread <= 1e-6 * (1.0 + abs(float(np.mean(stationary)))):
            argmin = float(np.mean(stationary))
    dev = per - coef
    roots = _common_roots(dev)
    resid = tuple(float(np.max(np.abs(dev @ np.array([r * r, r, 1.0])))) for r in roots)
    kept_roots = tuple(r for r, e in zip(roots, resid) if e < 1e-8 * scale)
    resid = tuple(e for e in resid if e < 1e-8 * scale)
    const_alphas, levels = [], []
    for r in kept_roots:
        g = np.array([_alpha_g(family, r, th, ct) for th, ct in zip(grid, cts)])
        level = float(np.mean(g))
        if np.ptp(g) < 1e-8 * (1.0 + abs(level)):
            const_alphas.append(r)
            levels.append(level)
    if degenerate and np.all(np.abs(dev) < 1e-10 * scale):
        diag_const = "every alpha gives constant risk"
    else:
        diag_const = ""
    printed = []
    for th, ct in zip(grid, cts):
        printed.append(remark6_printed_alpha(ct if ct is not None else cumulants(family, th)))
    diagnostics = {
        "stationary_spread": spread,
        "printed_condition_per_theta": [float(x) for x in printed],
        "max_root_residual": max(resid) if resid else 0.0,
    }
    if diag_const:
        diagnostics["note"] = diag_const
    return AlphaSolveResult(
        family=family.name,
        coefficients=tuple(float(x) for x in coef),
        per_theta=per,
        theta_grid=grid,
        argmin_alpha=argmin,
        argmin_spread=spread,
        argmin_per_theta=stationary,
        roots=kept_roots,
        root_residuals=resid,
        constant_risk_alphas=tuple(const_alphas),
        constant_levels=tuple(levels),
        degenerate=degenerate,
        least_constant_alpha=const_alphas[int(np.argmin(levels))] if levels else None,
        printed_condition_alpha=float(np.mean(printed)),
        diagnostics=diagnostics,
    )


# ---------------------------------------------------------------------------
# finite-n oracle


class ExtrapolationError(ExpansionError):
    pass


@dataclass(frozen=True)
class Extrapolation:
    """G fitted from risks at several n; ``cubic`` is the 1/n^3 coefficient."""

    g_theta: float
    cubic: float
    residual: float
    noise: float
    n_grid: tuple[int, ...]
    risks: tuple[float, ...]
    std_errors: tuple[float, ...]
    method: str

    def __float__(self) -> float:
        return self.g_theta


def excess_risk_extrapolate(
    family: Family,
    prior: Prior,
    theta,
    n_grid=(20, 40, 80, 160),
    reps: int | None = None,
    seed: int | None = None,
    threads: int = 1,
) -> Extrapolation:
    """Fit ``R(n) - p/(2n) + p/(4n^2) = G/n^2 + c/n^3`` over ``n_grid``.

    Exact risks are used for discrete families unless ``reps`` is given;
    otherwise the Monte Carlo error of each ``n^2 R(n)`` must stay below
    10% of the fitted ``|G|``.
    """
    from .risk import risk_exact, risk_mc

    ns = np.asarray(n_grid, dtype=int)
    if ns.size < 4 or np.any(np.diff(ns) <= 0):
        raise ExtrapolationError(f"n_grid must hold at least four increasing sizes, got {tuple(ns.tolist())}")
    p = family.dim
    exact = reps is None
    risks, ses = [], []
    for n in ns:
        if exact:
            est = risk_exact(family, theta, int(n), "predictive", prior)
        else:
            if seed is None:
                raise ExtrapolationError("a seed is required for Monte Carlo extrapolation")
            est = risk_mc(family, theta, int(n), "predictive", prior, reps=reps, seed=seed, threads=threads)
        risks.append(est.value)
        ses.append(est.std_error)
    R = np.array(risks)
    se = np.array(ses)
    if exact and np.any(np.diff(R) >= 0):
        raise ExtrapolationError(f"risk is not decreasing in n: {R.tolist()}")
    y = ns**2 * (R - p / (2.0 * ns) + p / (4.0 * ns**2))
    X = np.column_stack([np.ones(ns.size), 1.0 / ns])
    fit, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = float(np.max(np.abs(y - X @ fit)))
    noise = float(np.max(ns**2 * se))
    g = float(fit[0])
    if not exact and noise >= 0.1 * abs(g):
        raise ExtrapolationError(
            f"noise-dominated fit: n^2 * std_error reaches {noise:.3g} against |G| = {abs(g):.3g}; "
            "increase reps or use a discrete family with exact risks"
        )
    return Extrapolation(g, float(fit[1]), resid, noise, tuple(int(n) for n in ns), tuple(R.tolist()), tuple(se.tolist()), "exact" if exact else "monte-carlo")


# ---------------------------------------------------------------------------
# minimaxity probe


@dataclass(frozen=True)
class MinimaxRow:
    alpha: float
    sup_gap: float
    inf_gap: float
    verdict: str


@dataclass(frozen=True)
class MinimaxReport:
    """G of comparison priors against the constant level of ``alpha_star``.

    ``sup_gap`` is ``sup_theta G(alpha) - level``: a prior whose gap is
    negative everywhere has smaller risk everywhere, and a gap tending to
    zero from below leaves the constant-risk prior minimax.
    ``minimax_on_grid`` holds when no comparison prior has a smaller
    maximum over the grid.
    """

    family: str
    alpha_star: float
    level: float
    level_range: float
    theta_grid: np.ndarray
    rows: tuple[MinimaxRow, ...]
    minimax_on_grid: bool = False

    def as_rows(self) -> list[dict]:
        return [
            {"family": self.family, "alpha_star": self.alpha_star, "level": self.level, "alpha": r.alpha,
             "sup_gap": r.sup_gap, "inf_gap": r.inf_gap, "verdict": r.verdict}
            for r in self.rows
        ]


def minimax_probe_1d(family: Family, alpha_star: float, theta_grid, comparison_alphas) -> MinimaxReport:
    if family.dim != 1:
        raise ExpansionError("minimax_probe_1d needs a one-parameter family")
    grid = np.asarray(theta_grid, dtype=float).reshape(-1, 1)
    star = np.array([_alpha_g(family, alpha_star, th, None) for th in grid])
    level = float(np.mean(star))
    tol = 1e-8 * (1.0 + abs(level))
    rows = []
    for a in comparison_alphas:
        gap = np.array([_alpha_g(family, a, th, None) for th in grid]) - level
        if np.all(np.abs(gap) <= tol):
            verdict = "equal"
        elif np.all(gap < tol):
            verdict = "below"
        elif np.all(gap > -tol):
            verdict = "above"
        else:
            verdict = "crossing"
        rows.append(MinimaxRow(float(a), float(gap.max()), float(gap.min()), verdict))
    minimax = all(r.sup_gap >= -tol for r in rows)
    return MinimaxReport(family.name, float(alpha_star), level, float(np.ptp(star)), grid, tuple(rows), minimax)
