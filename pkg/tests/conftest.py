import numpy as np
import pytest

import spingap as sg


@pytest.fixture(scope="session")
def gauss():
    return sg.normalize(sg.gaussian(), (-10.0, 10.0), extend=False)


@pytest.fixture(scope="session")
def tse():
    return sg.normalize(sg.two_sided_exp(), (-40.0, 40.0), extend=False)


@pytest.fixture(scope="session")
def unif():
    return sg.normalize(sg.uniform(1.0))


@pytest.fixture(scope="session")
def log_concave_corpus(gauss, tse, unif):
    return {
        "gaussian": gauss,
        "two_sided_exp": tse,
        "power(1.5)": sg.normalize(sg.power(1.5)),
        "power(3)": sg.normalize(sg.power(3.0)),
        "uniform": unif,
    }


@pytest.fixture(scope="session")
def gauss_stats(gauss):
    return sg.stats(gauss, 1.0)


@pytest.fixture(scope="session")
def tse_stats(tse):
    return sg.stats(tse, 1.0)


def assert_close(actual, expected, tol, label=""):
    assert abs(actual - expected) <= tol, (
        f"{label}: {actual!r} vs expected {expected!r} (tol {tol})")
