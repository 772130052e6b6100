import numpy as np
import pytest

from bayespred.families import FAMILY_NAMES, make_family

FAMILY_KW = {
    "poisson": {},
    "bernoulli-canonical": {},
    "negbinomial-canonical": {"r": 3},
    "normal-location": {"sigma": 1.5},
    "normal-location-scale": {},
    "mvn-location": {"p": 3},
    "mvn-scale": {"p": 2},
}

INTERIOR = {
    "poisson": [1.7],
    "bernoulli-canonical": [0.4],
    "negbinomial-canonical": [-0.7],
    "normal-location": [0.3],
    "normal-location-scale": [0.5, 2.0],
    "mvn-location": [0.5, -1.0, 2.0],
    "mvn-scale": [2.0, 0.5, 1.0],
}


def build(name):
    return make_family(name, **FAMILY_KW[name])


@pytest.fixture(params=FAMILY_NAMES)
def family_and_theta(request):
    return build(request.param), np.array(INTERIOR[request.param])
