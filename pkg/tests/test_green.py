import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockjacobi import EnergyAtPole, green_blocks, green_blocks_derivative, random_admissible, require_admissible


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.floats(-3, 3))
def test_blocks_reassemble_the_resolvent(seed, E):
    op = random_admissible(seed, N=3, rank=1 + seed % 2)
    g = require_admissible(op)[1]
    V = op.block(2)
    if np.min(np.abs(np.linalg.eigvalsh(V) - E)) < 1e-3:
        return
    table = green_blocks(V, E, g, site=2)
    np.testing.assert_allclose(table.reassemble(g), np.linalg.inv(E * np.eye(V.shape[0]) - V), atol=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.floats(-3, 3))
def test_diagonal_derivatives_are_negative(seed, E):
    op = random_admissible(seed, N=3)
    g = require_admissible(op)[1]
    V = op.block(2)
    if np.min(np.abs(np.linalg.eigvalsh(V) - E)) < 1e-3:
        return
    d = green_blocks_derivative(V, E, g)
    for key in ("--", "++"):
        assert np.linalg.eigvalsh(0.5 * (d[key] + d[key].conj().T))[-1] <= 1e-10


def test_derivative_matches_finite_difference(golden):
    g = require_admissible(golden)[0]
    V, E, h = golden.block(1), 0.3, 1e-6
    d = green_blocks_derivative(V, E, g)["++"]
    fd = (green_blocks(V, E + h, g)["++"] - green_blocks(V, E - h, g)["++"]) / (2 * h)
    np.testing.assert_allclose(d, fd, atol=1e-6)


def test_energy_at_pole_raises(golden):
    g = require_admissible(golden)[0]
    with pytest.raises(EnergyAtPole):
        green_blocks(golden.block(1), 1.0, g)
