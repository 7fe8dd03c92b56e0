import numpy as np
import pytest

from blockjacobi import PeriodicScalarModel, build_periodic_scalar, random_admissible

# (criterion, PASS/FAIL, detail) lines collected by the acceptance suite
ACCEPTANCE_LINES = []


def periodic_corpus(count=15, seed=100):
    """Periodic scalar models with 2 <= L <= 5 and 2 <= K <= 6."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        L = 2 + i % 4
        K = 2 + (i // 4) % 5
        out.append(PeriodicScalarModel(tuple(1.5 * rng.standard_normal(L)), K))
    return out


def random_corpus(count=15, seed=200):
    """Random admissible operators with total dimension at most 60."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        rank = 1 + len(out) % 2
        op = random_admissible(rng, N=int(rng.integers(3, 8)), rank=rank)
        if op.total_dim <= 60:
            out.append(op)
    return out


def corpus(count_each=15):
    ops = [build_periodic_scalar(m) for m in periodic_corpus(count_each)]
    return ops + random_corpus(count_each)


@pytest.fixture(scope="session")
def golden():
    """Four-site scalar chain with zero potential as a 2-site, 2-channel-cell operator."""
    return build_periodic_scalar(PeriodicScalarModel((0.0, 0.0), 2))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
