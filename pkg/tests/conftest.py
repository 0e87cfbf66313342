import numpy as np
import pytest
from hypothesis import strategies as st

from igeo.distributions import as_pmf


def random_pmf(rng, n, min_mass=1e-3):
    while True:
        p = rng.dirichlet(np.ones(n))
        if p.min() >= min_mass:
            return as_pmf(p / p.sum())


def interior_theta(rng, M, min_mass=0.05):
    """Simplex-chart coordinates whose pmf keeps every mass >= min_mass."""
    while True:
        p = rng.dirichlet(np.ones(M + 1))
        if p.min() >= min_mass:
            return p[1:]


@st.composite
def pmfs(draw, size=None, min_mass=1e-3):
    n = size if size is not None else draw(st.integers(2, 6))
    raw = draw(st.lists(st.floats(min_mass, 1.0), min_size=n, max_size=n))
    p = np.asarray(raw) / np.sum(raw)
    p[-1] = 1.0 - p[:-1].sum()
    if p.min() <= 1e-12:
        p = np.full(n, 1.0 / n)
    return p


@st.composite
def pmf_pairs(draw):
    n = draw(st.integers(2, 6))
    return draw(pmfs(size=n)), draw(pmfs(size=n))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
