import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from spectral_rank import ComparisonDataset

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# Toy five-product example, 0-based: (set, winner)
FIG1 = [((1, 2, 3, 4), 2), ((0, 1, 2), 1), ((1, 4), 1), ((3, 4), 3),
        ((1, 3), 3), ((0, 3), 0), ((3, 4), 4)]
FIG1_CSV = "n=5\n2,1,2,3,4\n1,0,1,2\n1,1,4\n3,3,4\n3,1,3\n0,0,3\n4,3,4\n"


@pytest.fixture
def fig1():
    return ComparisonDataset.from_comparisons(FIG1, n_items=5)


@pytest.fixture
def fig1_csv(tmp_path):
    p = tmp_path / "fig1.csv"
    p.write_text(FIG1_CSV)
    return p


@st.composite
def rankable_comparisons(draw, min_n=3, max_n=6, max_extra=12):
    """Random comparisons over a cycle backbone, so every dataset is rankable."""
    n = draw(st.integers(min_n, max_n))
    comps = [((i, (i + 1) % n), (i + 1) % n) for i in range(n)]
    extra = draw(st.integers(0, max_extra))
    for _ in range(extra):
        k = draw(st.integers(2, min(4, n)))
        A = draw(st.lists(st.integers(0, n - 1), min_size=k, max_size=k, unique=True))
        c = draw(st.sampled_from(A))
        comps.append((tuple(A), c))
    return n, comps


def make_ds(n, comps):
    return ComparisonDataset.from_comparisons(comps, n_items=n)


def small_fixed_design(seed=0, D=3000, n=25):
    from spectral_rank import FixedGraphConfig, gen_fixed_heterogeneous
    return gen_fixed_heterogeneous(FixedGraphConfig(n=n, total_comparisons=D, seed=seed))


@pytest.fixture
def small_ds():
    return small_fixed_design()


def rng(seed=0):
    return np.random.default_rng(seed)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
