import random

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from fpsearch.fingerprint import Fingerprint

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def fingerprints(length: int = 128, max_bits: int | None = None):
    """Hypothesis strategy for fingerprints of a fixed length."""
    limit = length if max_bits is None else max_bits
    return st.sets(st.integers(0, length - 1), max_size=limit).map(
        lambda s: Fingerprint.from_positions(s, length)
    )


def random_db(n: int, length: int = 128, seed: int = 0, density: float = 0.2) -> list[Fingerprint]:
    """Small independent random database; Bernoulli bits, ids 0..n-1."""
    rng = random.Random(seed)
    out = []
    for i in range(n):
        pos = [p for p in range(length) if rng.random() < density]
        out.append(Fingerprint.from_positions(pos, length, i))
    return out


@pytest.fixture
def small_db():
    return random_db(300, 128, seed=7)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[1].rstrip("."))):
            terminalreporter.write_line(line)
