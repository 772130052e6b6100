import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bayespred.asymptotics import g_term_general
from bayespred.families import make_family
from bayespred.location import (
    ASYMPTOTIC_FACTOR,
    LocationError,
    admissible_range,
    dominance_experiment,
    fd_laplacian,
    fd_relative_error,
    location_predictive_1d,
    logistic_base,
    prior_term_location,
    superharmonic_scan,
    uniform_gap_probe,
)
from bayespred.priors import shrinkage_prior, uniform_prior
from bayespred.risk import risk_mc


def test_admissible_range():
    assert admissible_range(1) is None and admissible_range(2) is None
    assert admissible_range(3) == (-0.5, 0.0)


def test_constant_g_gives_zero():
    assert prior_term_location(uniform_prior(3), np.ones(3)) == 0.0


def test_origin_value():
    assert prior_term_location(shrinkage_prior(3, -0.25), np.zeros(3)) == pytest.approx(-1.5, abs=1e-12)


@pytest.mark.parametrize("p", [1, 2, 3, 5])
def test_analytic_laplacian_matches_fd(p):
    pr = shrinkage_prior(p, -0.25)
    rng = np.random.default_rng(p)
    for mu in rng.normal(scale=3.0, size=(100, p)):
        assert fd_relative_error(pr.g, pr.laplacian_g(mu), mu) < 1e-5


def test_fd_laplacian_simple():
    assert fd_laplacian(lambda m: float(m @ m), np.array([1.0, 2.0])) == pytest.approx(4.0, abs=1e-6)


def test_cross_module_prior_term():
    fam = make_family("mvn-location", p=3)
    pr = shrinkage_prior(3, -0.25)
    rng = np.random.default_rng(0)
    for mu in rng.normal(scale=2.0, size=(10, 3)):
        q = prior_term_location(pr, mu, family=fam)
        assert g_term_general(fam, pr, mu).prior_term == pytest.approx(ASYMPTOTIC_FACTOR * q, abs=1e-6)


def test_scans():
    assert superharmonic_scan(3, -0.25).sign_summary == "all-negative"
    assert superharmonic_scan(3, -0.75).sign_summary == "mixed"
    rep = superharmonic_scan(2, -0.1)
    assert rep.admissible_range is None and not rep.in_range


def test_gap_probe():
    rep = uniform_gap_probe(3, shrinkage_prior(3, -0.25), radii=np.geomspace(1, 100, 20))
    assert abs(rep.value_at_radius[-1]) < 1e-3
    assert rep.sup < 0 and not rep.uniform_gap
    assert uniform_gap_probe(3).sup == 0.0


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.49, -0.01), st.floats(0.0, 1e3))
def test_superharmonic_in_range(alpha, r):
    mu = np.array([r, 0.0, 0.0])
    assert shrinkage_prior(3, alpha).laplacian_g(mu) < 0


def test_dominance_range_errors():
    with pytest.raises(LocationError, match="empty range"):
        dominance_experiment(1, -0.1)
    with pytest.raises(LocationError, match="outside"):
        dominance_experiment(3, -0.75)
    with pytest.raises(LocationError, match="origin"):
        dominance_experiment(3, -0.25, probes=[[3, 0, 0]])


def test_dominance_small_run():
    v = dominance_experiment(3, -0.25, n=25, reps=20_000, seed=3)
    origin = v.probes[0]
    assert origin.difference.delta < 0 and origin.difference.ci()[1] < 0
    assert origin.sign_agrees is True


def test_uniform_prior_constant_risk():
    fam = make_family("mvn-location", p=3)
    a = risk_mc(fam, [0, 0, 0], 10, "predictive", uniform_prior(3, fam), reps=20_000, seed=1)
    b = risk_mc(fam, [4, 0, 1], 10, "predictive", uniform_prior(3, fam), reps=20_000, seed=2)
    assert abs(a.value - b.value) < 3 * math.hypot(a.std_error, b.std_error)


def test_logistic_predictive_normalized():
    from scipy import integrate

    dens = location_predictive_1d(logistic_base(), uniform_prior(1), [0.3, -1.0, 2.0])
    y = np.linspace(-40, 40, 8001)
    assert integrate.trapezoid(dens(y), y) == pytest.approx(1.0, abs=1e-6)
