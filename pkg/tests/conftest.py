import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "suite",
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0xC0FFEE)


_criterion_lines: list = []


@pytest.fixture
def criterion():
    """Collect one summary line per acceptance check.

    Lines are echoed in a dedicated terminal section after the run, so they
    stay visible even though pytest captures stdout during the tests.
    """

    def report(line: str) -> None:
        _criterion_lines.append(line)
        print(line)

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _criterion_lines:
        terminalreporter.section("acceptance criteria")
        for line in _criterion_lines:
            terminalreporter.line(line)


def dyadic(rng: np.random.Generator, bits: int = 16) -> float:
    """Random phase coefficient in [0, 1) with a short mantissa.

    Products with integer monomials of modest size then stay exactly
    representable in binary64, so float and Fraction evaluation agree to
    the last bit.
    """
    return int(rng.integers(0, 1 << bits)) / float(1 << bits)


def random_lattice_values(rng: np.random.Generator, points, density: float = 0.6) -> dict:
    out = {}
    for p in points:
        if rng.random() < density:
            out[tuple(int(c) for c in p)] = complex(rng.normal(), rng.normal())
    if not out:
        p = tuple(int(c) for c in points[0])
        out[p] = 1.0 + 0j
    return out
