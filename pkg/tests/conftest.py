import pytest

from triplewell.classifier import classify_all
from triplewell.fock import ModelParams, solve


@pytest.fixture(scope="session")
def params():
    return ModelParams()


@pytest.fixture(scope="session")
def stated_params():
    """Well ordering with the positive linear frequency on well 1."""
    return ModelParams().mirrored()


@pytest.fixture(scope="session")
def system(params):
    return solve(params)


@pytest.fixture(scope="session")
def assignments(system, params):
    basis, es = system
    return classify_all(es, basis, params=params)
