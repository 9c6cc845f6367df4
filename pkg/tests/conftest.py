import os

import pytest
from hypothesis import HealthCheck, settings

from mvhedge import ModelParams, PdeGrid, make_claim, solve_surfaces

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=200,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

BASE = ModelParams(mu=0.5, sigma=1.0, rho=0.5, T=1.0)


@pytest.fixture(scope="session")
def base_model():
    return BASE


@pytest.fixture(scope="session")
def surfaces_for():
    """Memoised surfaces keyed by (claim name, sorted params, model)."""
    cache = {}

    def get(name, m=BASE, **params):
        key = (name, tuple(sorted(params.items())), m)
        if key not in cache:
            c = make_claim(name, mu=m.mu, sigma=m.sigma, T=m.T, **params)
            cache[key] = (c, solve_surfaces(c, m.theta, m.context(), PdeGrid.centered(m.T)))
        return cache[key]

    return get


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
