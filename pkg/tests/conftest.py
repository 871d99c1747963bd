import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from clusterkit.core import DistanceMatrix, Partition

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def record():
    """Log one line per acceptance criterion; printed in the terminal summary."""

    def _record(name: str, ok: bool, detail: str = "") -> None:
        _ACCEPTANCE.append((name, bool(ok), detail))

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")


@pytest.fixture
def four_point():
    """Running example: pairs at distance 1, 10 across."""
    d = DistanceMatrix(
        [[0, 1, 10, 10], [1, 0, 10, 10], [10, 10, 0, 1], [10, 10, 1, 0]]
    )
    return d, Partition(((0, 1), (2, 3)))


def random_matrix(rng: np.random.Generator, n: int, lo: float = 0.5, hi: float = 5.0) -> DistanceMatrix:
    u = np.triu(rng.uniform(lo, hi, size=(n, n)), 1)
    return DistanceMatrix(u + u.T)


def random_partition(rng: np.random.Generator, n: int, k: int) -> Partition:
    """Uniformly shuffled points split into k blocks of size >= 2."""
    extra = rng.multinomial(n - 2 * k, np.ones(k) / k)
    sizes = 2 + extra
    perm = rng.permutation(n)
    out, start = [], 0
    for s in sizes:
        out.append(tuple(int(i) for i in perm[start : start + s]))
        start += s
    return Partition(tuple(out))


@st.composite
def matrix_and_partition(draw, max_n: int = 10):
    n = draw(st.integers(2, max_n))
    k = draw(st.integers(1, n // 2))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    return random_matrix(rng, n), random_partition(rng, n, k)
