import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special, stats

from bayespred import kernels
from bayespred.families import make_family
from bayespred.predictive import bayes_predictive, estimative
from bayespred.priors import alpha_prior, jeffreys, shrinkage_prior, uniform_prior
from bayespred.risk import RiskError, kl_divergence, risk_difference, risk_exact, risk_mc

from conftest import build

pytestmark = pytest.mark.filterwarnings("ignore::RuntimeWarning")


# ---------------------------------------------------------------- kernels


@pytest.mark.skipif(kernels.compiled_backend is None, reason="compiled extension not built")
def test_compiled_and_python_kernels_agree():
    rng = np.random.default_rng(0)
    y = np.arange(40)
    p, lp = stats.poisson.pmf(y, 3.0), stats.poisson.logpmf(y, 3.0)
    shape = 0.5 + rng.integers(0, 100, 50)
    cb, pb = kernels.compiled_backend, kernels.python_backend
    np.testing.assert_allclose(cb.poisson_negbin_kl(p, lp, shape, 20.0), pb.poisson_negbin_kl(p, lp, shape, 20.0), atol=1e-12)
    a = 0.5 + rng.integers(0, 50, 50).astype(float)
    b = 5.0 + rng.random(50)
    np.testing.assert_allclose(cb.negbin_betanegbin_kl(p, lp, 2.0, a, b), pb.negbin_betanegbin_kl(p, lp, 2.0, a, b), atol=1e-11)
    m, s2, nu = rng.normal(size=50), 0.5 + rng.random(50), 3.0 + rng.integers(0, 30, 50)
    t, h = kernels.FRULLANI_T, kernels.FRULLANI_H
    np.testing.assert_allclose(cb.normal_student_kl(0.2, 1.3, m, s2, nu, t, h), pb.normal_student_kl(0.2, 1.3, m, s2, nu, t, h), atol=1e-13)
    lam = np.ascontiguousarray(rng.random((50, 3)))
    np.testing.assert_allclose(cb.mean_log1p_quadform(lam, t, h), pb.mean_log1p_quadform(lam, t, h), atol=1e-14)


@pytest.mark.parametrize("c", [1e-3, 0.1, 1.0, 50.0])
def test_frullani_matches_direct_quadrature(c):
    got = kernels.mean_log1p_quadform(np.array([[1.0 / c]]))[0]
    want = integrate.quad(lambda z: math.log1p(z * z / c) * stats.norm.pdf(z), -np.inf, np.inf, epsabs=1e-13)[0]
    assert got == pytest.approx(want, abs=1e-10)


def test_normal_student_kl_matches_quadrature():
    mu, v, m, s2, nu = 0.3, 2.0, -0.1, 1.5, 7.0
    got = kernels.normal_student_kl(mu, v, [m], [s2], [nu])[0]
    f = stats.norm(mu, math.sqrt(v))
    g = stats.t(nu, m, math.sqrt(s2))
    want = integrate.quad(lambda y: f.pdf(y) * (f.logpdf(y) - g.logpdf(y)), -40, 40, epsabs=1e-13, limit=200)[0]
    assert got == pytest.approx(want, abs=1e-10)


# ---------------------------------------------------------------- KL


def test_poisson_kl_known_value():
    fam = make_family("poisson")
    e = estimative(fam, data=[2])
    assert kl_divergence(fam, [1.0], e) == pytest.approx(2.0 - 1.0 - math.log(2.0), rel=1e-10)


def test_gaussian_kl_against_estimative():
    fam = make_family("normal-location-scale")
    e = estimative(fam, data=[0.0, 2.0])  # mean 1, variance 1
    mu, v = 0.5, 1.2
    want = 0.5 * (v / 1.0 + (mu - 1.0) ** 2 / 1.0 - 1 - math.log(v / 1.0))
    assert kl_divergence(fam, [mu, v], e) == pytest.approx(want, rel=1e-8)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 8.0), st.lists(st.integers(0, 10), min_size=1, max_size=6), st.floats(0.1, 2.0))
def test_kl_nonnegative_poisson(theta, data, alpha):
    fam = make_family("poisson")
    pd = bayes_predictive(fam, alpha_prior(fam, alpha), data=data)
    assert kl_divergence(fam, [theta], pd) >= 0.0


# ---------------------------------------------------------------- risk


@pytest.mark.parametrize("name,theta", [("poisson", [1.5]), ("bernoulli-canonical", [0.3]), ("negbinomial-canonical", [-0.6])])
def test_exact_risk_equals_brute_force(name, theta):
    fam = build(name)
    pr = jeffreys(fam)
    n = 6
    exact = risk_exact(fam, theta, n, "predictive", pr).value
    total = 0.0
    if name == "poisson":
        S = np.arange(0, 80)
        w = stats.poisson.pmf(S, n * theta[0])
    elif name == "bernoulli-canonical":
        S = np.arange(0, n + 1)
        w = stats.binom.pmf(S, n, special.expit(theta[0]))
    else:
        S = np.arange(0, 300)
        w = stats.nbinom.pmf(S, n * fam.r, 1 - math.exp(theta[0]))
    for s, wi in zip(S, w):
        if wi < 1e-20:
            continue
        pd = bayes_predictive(fam, pr, stat=(n, float(s)))
        total += wi * kl_divergence(fam, theta, pd)
    assert exact == pytest.approx(total, rel=1e-9)


def test_mc_agrees_with_exact():
    fam = make_family("poisson")
    pr = jeffreys(fam)
    ex = risk_exact(fam, [2.0], 10, "predictive", pr).value
    mc = risk_mc(fam, [2.0], 10, "predictive", pr, reps=40_000, seed=3)
    assert abs(mc.value - ex) < 4 * mc.std_error


def test_location_scale_mc_matches_closed_form():
    fam = make_family("normal-location-scale")
    n = 10
    k = 3 - 3 * 0.5
    nu = 2 * k + n - 3
    e_log_ss = special.digamma((n - 1) / 2) + math.log(2)
    e_logc = special.gammaln((nu + 1) / 2) - special.gammaln(nu / 2) - 0.5 * math.log(math.pi * (1 + 1 / n)) - 0.5 * e_log_ss
    want = -0.5 * math.log(2 * math.pi * math.e) - e_logc + (nu + 1) / 2 * (special.digamma(n / 2) - special.digamma((n - 1) / 2))
    mc = risk_mc(fam, [0.0, 1.0], n, "predictive", jeffreys(fam), reps=40_000, seed=1)
    assert abs(mc.value - want) < 4 * mc.std_error


def test_mvn_scale_mc_matches_wishart_oracle():
    fam = make_family("mvn-scale", p=2)
    p, n = 2, 8
    a, b = fam.alpha_power()
    c = a + 0.5 * b
    nu = 2 * c + n - p - 1

    def e_logdet(m):
        return sum(special.digamma((m - i) / 2) for i in range(p)) + p * math.log(2)

    want = (-(p / 2) * math.log(2 * math.pi * math.e) + (p / 2) * math.log(math.pi) - special.gammaln((nu + 1) / 2)
            + special.gammaln((nu + 1 - p) / 2) - (nu / 2) * e_logdet(n) + ((nu + 1) / 2) * e_logdet(n + 1))
    mc = risk_mc(fam, [1.0, 0.0, 1.0], n, "predictive", jeffreys(fam), reps=40_000, seed=2)
    assert abs(mc.value - want) < 4 * mc.std_error


def test_mvn_location_flat_prior_exact_value():
    fam = make_family("mvn-location", p=3)
    mc = risk_mc(fam, [0.0, 1.0, 0.0], 10, "predictive", uniform_prior(3, fam), reps=20_000, seed=0)
    assert abs(mc.value - 1.5 * math.log(1.1)) < 4 * mc.std_error


def test_threads_do_not_change_results():
    fam = make_family("poisson")
    pr = jeffreys(fam)
    a = risk_mc(fam, [1.0], 20, "predictive", pr, reps=20_000, seed=9, threads=1)
    b = risk_mc(fam, [1.0], 20, "predictive", pr, reps=20_000, seed=9, threads=4)
    assert a.value == b.value and a.std_error == b.std_error


def test_risk_difference_paired():
    fam = make_family("mvn-location", p=3)
    d = risk_difference(fam, [0, 0, 0], 25, "predictive", "predictive", priors=(shrinkage_prior(3, -0.25), uniform_prior(3, fam)), reps=20_000, seed=4)
    assert d.delta < 0 and d.excludes_zero()


def test_estimative_exclusion_reported():
    fam = make_family("bernoulli-canonical")
    r = risk_exact(fam, [0.5], 10, "estimative")
    assert 0 < r.excluded_fraction < 0.05 and r.value > 0


def test_risk_errors():
    fam = make_family("poisson")
    with pytest.raises(RiskError):
        risk_mc(fam, [1.0], 5, "predictive", jeffreys(fam), reps=10, seed=0)
    with pytest.raises(RiskError):
        risk_exact(make_family("normal-location"), [0.0], 5, "predictive", jeffreys(make_family("normal-location")))
    with pytest.raises(RiskError):
        risk_exact(make_family("bernoulli-canonical"), [4.0], 2, "estimative")


def test_pure_python_fallback_env_switch():
    import subprocess
    import sys

    code = ("from bayespred import kernels, BACKEND;"
            "import numpy as np;"
            "print(BACKEND, kernels.mean_log1p_quadform(np.array([[1.0]]))[0])")
    out = subprocess.run([sys.executable, "-c", code], env={**__import__("os").environ, "BAYESPRED_PURE_PYTHON": "1"},
                         capture_output=True, text=True, check=True).stdout.split()
    assert out[0] == "python"
    assert float(out[1]) == pytest.approx(kernels.mean_log1p_quadform(np.array([[1.0]]))[0], abs=1e-13)
