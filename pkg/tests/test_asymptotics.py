import math
from dataclasses import dataclass

import numpy as np
import pytest

from bayespred.asymptotics import (
    ExpansionError,
    ExtrapolationError,
    alpha_solve,
    excess_risk_extrapolate,
    g_term_1d,
    g_term_general,
    g_theta,
    minimax_probe_1d,
)
from bayespred.families import AlphaParts, Poisson, _as_theta, _one_param, make_family
from bayespred.priors import alpha_prior, jeffreys, normal_prior, uniform_prior

from conftest import build

ROOTS = (1 - 1 / math.sqrt(6), 1 + 1 / math.sqrt(6))


@dataclass(frozen=True)
class LogPoisson(Poisson):
    """Poisson indexed by phi = log(mean)."""

    def __post_init__(self):
        object.__setattr__(self, "name", "poisson-log")
        object.__setattr__(self, "discrete", True)

    def in_domain(self, theta):
        return True

    def boundary_distance(self, theta):
        return math.inf

    def log_density(self, x, theta):
        return super().log_density(x, np.exp(_as_theta(theta, 1)))

    def derivatives(self, x, theta):
        m = math.exp(_as_theta(theta, 1)[0])
        x = np.asarray(x, dtype=float).reshape(-1)
        return _one_param(x - m, -m, -m, -m)

    def mean_sd(self, theta):
        m = math.exp(_as_theta(theta, 1)[0])
        return m, math.sqrt(m)

    def fisher(self, theta):
        return np.array([[math.exp(self.check_interior(theta)[0])]])

    def alpha_parts(self, theta):
        # h_phi = h_theta(e^phi) e^phi = e^(alpha phi)
        phi = _as_theta(theta, 1)[0]
        z = np.zeros(1)
        return AlphaParts(phi, np.ones(1), np.zeros((1, 1)), 0.0, z, np.zeros((1, 1)))


def poisson_part(alpha, theta):
    return ((alpha - 1) ** 2 / 2 - 1 / 12) / theta


# ------------------------------------------------------------ Corollary 1


@pytest.mark.parametrize("alpha", [0.3, 0.5, 1.0, 1.7])
def test_poisson_parameter_part(alpha):
    fam = make_family("poisson")
    pr = alpha_prior(fam, alpha)
    g = [g_term_1d(fam, pr, [t]).g_theta for t in (0.5, 1.0, 3.0)]
    want = [poisson_part(alpha, t) for t in (0.5, 1.0, 3.0)]
    np.testing.assert_allclose(np.diff(g), np.diff(want), atol=1e-10)


def test_poisson_roots_constant_risk():
    fam = make_family("poisson")
    for a in ROOTS:
        g = [g_term_1d(fam, alpha_prior(fam, a), [t]).g_theta for t in (0.25, 1.0, 4.0)]
        assert np.ptp(g) < 1e-10


def test_normal_location_uniform_prior_part_zero():
    fam = make_family("normal-location")
    for mu in (-2.0, 0.0, 3.0):
        assert g_term_1d(fam, uniform_prior(1, fam), [mu]).prior_part == pytest.approx(0.0, abs=1e-12)


def test_g_term_1d_refuses_vector_family():
    with pytest.raises(ExpansionError, match="g_term_general"):
        g_term_1d(make_family("normal-location-scale"), jeffreys(make_family("normal-location-scale")), [0, 1])


def test_printed_coupling_differs():
    fam = make_family("poisson")
    pr = alpha_prior(fam, 0.5)
    a = g_term_1d(fam, pr, [2.0]).g_theta
    b = g_term_1d(fam, pr, [2.0], printed_coupling=True).g_theta
    assert abs(a - b) > 1e-3


# ------------------------------------------------------------ Remark 5


@pytest.mark.parametrize("name", ["poisson", "bernoulli-canonical", "negbinomial-canonical", "normal-location-scale", "mvn-scale"])
def test_jeffreys_prior_term_zero(name):
    fam = build(name)
    from conftest import INTERIOR

    assert g_term_general(fam, jeffreys(fam), INTERIOR[name]).prior_term == pytest.approx(0.0, abs=1e-10)


def test_location_likelihood_term_constant():
    fam = make_family("mvn-location", p=3)
    pr = uniform_prior(3, fam)
    a = g_term_general(fam, pr, [0.0, 0.0, 0.0]).likelihood_term
    b = g_term_general(fam, pr, [2.0, -1.0, 5.0]).likelihood_term
    assert a == pytest.approx(b, abs=1e-10)


@pytest.mark.parametrize("name", ["poisson", "bernoulli-canonical"])
def test_split_consistency(name):
    fam = build(name)
    rng = np.random.default_rng(5)
    for th in fam.random_interior(rng, 10):
        for pr in (jeffreys(fam), alpha_prior(fam, 1.3), normal_prior(0.5, 2.0)):
            gen = g_term_general(fam, pr, th)
            one = g_term_1d(fam, pr, th)
            assert gen.g_theta == pytest.approx(one.g_theta, abs=1e-6)
            assert gen.likelihood_term + gen.prior_term == pytest.approx(gen.g_theta, abs=1e-8)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.3])
def test_reparametrization_invariance_log_theta(alpha):
    base, logf = make_family("poisson"), LogPoisson()
    for t in (0.3, 1.0, 4.0):
        a = g_term_general(base, alpha_prior(base, alpha), [t]).g_theta
        b = g_term_general(logf, alpha_prior(logf, alpha, check=False), [math.log(t)]).g_theta
        assert a == pytest.approx(b, abs=1e-6)


# ------------------------------------------------------------ alpha search


def test_alpha_solve_poisson():
    res = alpha_solve(make_family("poisson"))
    np.testing.assert_allclose(sorted(res.constant_risk_alphas), ROOTS, atol=1e-6)
    assert res.argmin_alpha == pytest.approx(1.0, abs=1e-8)
    assert all(r < 1e-8 for r in res.root_residuals)


def test_alpha_solve_location_scale():
    fam = make_family("normal-location-scale")
    res = alpha_solve(fam)
    assert res.argmin_alpha == pytest.approx(2 / 3, abs=1e-8)
    assert g_theta(fam, alpha_prior(fam, 2 / 3), [0, 1]) < g_theta(fam, jeffreys(fam), [0, 1])


@pytest.mark.parametrize("name", ["poisson", "bernoulli-canonical", "normal-location-scale"])
def test_jeffreys_membership(name):
    fam = build(name)
    res = alpha_solve(fam)
    for th, (a, b, c) in zip(res.theta_grid, res.per_theta):
        assert a / 4 + b / 2 + c == pytest.approx(g_theta(fam, jeffreys(fam), th), abs=1e-8)


def test_negbinomial_least_constant():
    res = alpha_solve(build("negbinomial-canonical"))
    assert res.least_constant_alpha == pytest.approx(ROOTS[0], abs=1e-4)
    assert res.argmin_alpha is None


def test_bernoulli_minimax():
    fam = make_family("bernoulli-canonical")
    res = alpha_solve(fam)
    assert res.least_constant_alpha == pytest.approx(ROOTS[1], abs=1e-6)
    rep = minimax_probe_1d(fam, ROOTS[1], np.linspace(-3, 3, 13), [0.5, 1.0, ROOTS[0], 1.6])
    assert rep.minimax_on_grid


def test_poisson_minimax_probe():
    fam = make_family("poisson")
    grid = np.geomspace(1e-2, 1e6, 20)
    rep = minimax_probe_1d(fam, ROOTS[0], grid, [1.0, ROOTS[1]])
    below, equal = rep.rows
    assert below.verdict == "below" and below.sup_gap >= -1e-6
    assert equal.verdict == "equal"


# ------------------------------------------------------------ extrapolation


def test_extrapolation_poisson_jeffreys():
    fam = make_family("poisson")
    ex = excess_risk_extrapolate(fam, jeffreys(fam), [1.0])
    assert float(ex) == pytest.approx(g_theta(fam, jeffreys(fam), [1.0]), rel=0.05)


def test_extrapolation_roots_constant():
    fam = make_family("poisson")
    for a in ROOTS:
        gs = [excess_risk_extrapolate(fam, alpha_prior(fam, a), [t]).g_theta for t in (0.5, 1.0, 2.0)]
        # the level itself is near zero; judge the spread against the
        # theta-dependent scale 1/(12 theta) that alpha = 1 would show
        assert np.ptp(gs) < 0.05 / (12 * 2.0)


def test_extrapolation_needs_seed_and_rejects_noise():
    fam = make_family("normal-location-scale")
    with pytest.raises(ExtrapolationError):
        excess_risk_extrapolate(fam, jeffreys(fam), [0, 1], reps=1000)
    with pytest.raises(ExtrapolationError, match="noise"):
        excess_risk_extrapolate(fam, jeffreys(fam), [0, 1], reps=1000, seed=0)
