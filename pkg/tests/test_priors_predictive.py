import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bayespred.families import FamilyError, make_family
from bayespred.predictive import ImproperPosteriorError, bayes_predictive, estimative, mle
from bayespred.priors import PriorSpecError, alpha_prior, jeffreys, parse_prior, shrinkage_prior, uniform_prior

from conftest import INTERIOR, build

ALPHA_FAMILIES = ["poisson", "bernoulli-canonical", "negbinomial-canonical", "normal-location-scale", "mvn-scale", "normal-location", "mvn-location"]


@pytest.mark.parametrize("name", ALPHA_FAMILIES)
@pytest.mark.parametrize("alpha", [0.0, 0.5, 1.3])
def test_alpha_class_gradient_condition(name, alpha):
    fam = build(name)
    prior = alpha_prior(fam, alpha)
    assert prior.gradient_condition_residual(INTERIOR[name]) < 1e-8


@pytest.mark.parametrize("name", ALPHA_FAMILIES)
def test_jeffreys_is_half_log_det_fisher(name):
    fam = build(name)
    th = np.array(INTERIOR[name], dtype=float)
    j = jeffreys(fam)
    h = 1e-5
    grad = np.empty(fam.dim)
    for i in range(fam.dim):
        e = np.zeros(fam.dim)
        e[i] = h
        up = np.linalg.slogdet(fam.fisher(th + e))[1]
        dn = np.linalg.slogdet(fam.fisher(th - e))[1]
        grad[i] = 0.25 * (up - dn) / h
    np.testing.assert_allclose(j.grad(th), grad, atol=1e-6)


def test_parse_prior_grammar():
    fam = make_family("poisson")
    assert parse_prior("jeffreys", fam).label == "jeffreys"
    assert parse_prior("alpha:1.3", fam).alpha == pytest.approx(1.3)
    assert parse_prior("uniform", fam).grad([2.0])[0] == 0.0
    for bad in ("jefreys", "alpha:", "alpha:x", "shrink"):
        with pytest.raises(PriorSpecError):
            parse_prior(bad, fam)


def test_shrinkage_prior_derivatives():
    sp = shrinkage_prior(3, -0.25)
    mu = np.array([0.3, -1.0, 2.0])
    h = 1e-6
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        fd = (sp.log_density(mu + e) - sp.log_density(mu - e)) / (2 * h)
        assert sp.grad(mu)[i] == pytest.approx(fd, rel=1e-6)
    assert sp.laplacian_over_g(np.zeros(3)) == pytest.approx(2 * -0.25 * 3)


def test_poisson_jeffreys_predictive_at_zero():
    pd = bayes_predictive(make_family("poisson"), jeffreys(make_family("poisson")), data=[0])
    assert pd.eval([0])[0] == pytest.approx(2 ** -0.5, rel=1e-12)


def test_normal_uniform_predictive():
    fam = make_family("normal-location")
    pd = bayes_predictive(fam, uniform_prior(1, fam), data=[0.0])
    assert pd.eval([0.0])[0] == pytest.approx(1 / (2 * math.sqrt(math.pi)), rel=1e-12)


@pytest.mark.parametrize(
    "name,data,prior",
    [
        ("poisson", [0, 3, 1], "jeffreys"),
        ("poisson", [2], "alpha:1.3"),
        ("bernoulli-canonical", [0, 1, 1], "jeffreys"),
        ("negbinomial-canonical", [0, 4], "alpha:0.3"),
    ],
)
def test_closed_form_matches_quadrature(name, data, prior):
    fam = build(name)
    pr = parse_prior(prior, fam)
    a = bayes_predictive(fam, pr, data=data)
    b = bayes_predictive(fam, pr, data=data, force_quadrature=True)
    ys = np.arange(8.0) if name != "bernoulli-canonical" else np.array([0.0, 1.0])
    np.testing.assert_allclose(a.eval(ys), b.eval(ys), rtol=1e-7, atol=1e-12)


@pytest.mark.parametrize(
    "name,data",
    [
        ("normal-location-scale", [0.1, 1.3, -0.4]),
        ("mvn-scale", [[0.3, 1.0], [1.2, -0.5], [-1.0, 0.2], [0.4, 0.4]]),
        ("mvn-location", [[0.1, 0.2, 0.3], [1.0, -1.0, 0.5]]),
    ],
)
def test_continuous_predictive_normalizes(name, data):
    fam = build(name)
    pd = bayes_predictive(fam, jeffreys(fam), data=data)
    assert pd.normalization_error() < 1e-8


def test_shrinkage_predictive_normalizes():
    fam = make_family("mvn-location", p=3)
    pd = bayes_predictive(fam, shrinkage_prior(3, -0.25), data=[[0.5, 0.1, -0.3], [1.0, 0.0, 0.2]])
    assert pd.normalization_error() < 1e-8


def test_improper_posterior_is_refused():
    fam = make_family("poisson")
    with pytest.raises((ImproperPosteriorError, FamilyError, ValueError)):
        bayes_predictive(fam, uniform_prior(1, fam).__class__(
            label="alpha:-1", dim=1, log_grad=lambda t: -2.0 / t, log_hess=lambda t: np.array([[2.0 / t[0] ** 2]]),
            log_density=lambda t: -2.0 * math.log(t[0])), data=[0], force_quadrature=True)
    with pytest.raises(ValueError):
        bayes_predictive(fam, jeffreys(fam), data=[])


def test_estimative_and_boundary():
    fam = make_family("poisson")
    th, boundary = mle(fam, fam.sufficient_stat([2, 4]))
    assert th[0] == pytest.approx(3.0) and not boundary
    b = make_family("bernoulli-canonical")
    _, boundary = mle(b, b.sufficient_stat([0, 0, 0]))
    assert boundary
    e = estimative(fam, data=[2, 4])
    assert e.eval([3])[0] == pytest.approx(math.exp(3 * math.log(3) - 3 - math.lgamma(4)))


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(0, 12), min_size=1, max_size=8), st.floats(0.05, 2.0))
def test_poisson_predictive_mass_is_one(data, alpha):
    fam = make_family("poisson")
    pd = bayes_predictive(fam, alpha_prior(fam, alpha), data=data)
    assert pd.normalization_error() < 1e-10


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=1, max_size=10), st.floats(0.05, 2.0))
def test_bernoulli_predictive_mass_is_one(data, alpha):
    fam = make_family("bernoulli-canonical")
    pd = bayes_predictive(fam, alpha_prior(fam, alpha), data=data)
    assert abs(float(np.sum(pd.eval([0.0, 1.0]))) - 1.0) < 1e-12
