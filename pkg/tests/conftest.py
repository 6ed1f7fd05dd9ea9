import math

import pytest

from grazslide.dynsys import default_phi, from_json, make_example_family
from grazslide.integrate import IntegratorOptions

# filled by test_acceptance.py, printed at the end of the run
ACCEPTANCE = {}


@pytest.fixture(scope="session")
def phi():
    return default_phi()


@pytest.fixture(scope="session")
def example1():
    return make_example_family(1.0, 0.0)


@pytest.fixture(scope="session")
def example02():
    return make_example_family(0.2, 0.0)


@pytest.fixture(scope="session")
def normal02():
    return from_json({"family": "normal_form_example", "kappa": 0.2, "mu": 0.0})


@pytest.fixture(scope="session")
def tight():
    return IntegratorOptions(rel_tol=1e-12, abs_tol=1e-14, event_tol=1e-14)


_MU_STAR = {}


@pytest.fixture(scope="session")
def mu_star():
    """Cached saddle-node location for the kappa = 1 example, keyed by eps."""
    from grazslide.bifurcation import locate_mu_star

    def get(eps):
        if eps not in _MU_STAR:
            _MU_STAR[eps] = locate_mu_star(make_example_family(1.0, 0.0), default_phi(), eps)
        return _MU_STAR[eps]

    return get


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, text = ACCEPTANCE[k]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {k:>2}  {text}")


def close(a, b, rel=0.0, abs_=0.0):
    return abs(a - b) <= max(abs_, rel * max(abs(a), abs(b)))


def nan(v):
    return isinstance(v, float) and math.isnan(v)
