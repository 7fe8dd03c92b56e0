import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockjacobi import (
    PeriodicScalarModel,
    analytic_extension,
    apply,
    boundary_transfer_left,
    boundary_transfer_right,
    build_periodic_scalar,
    interior_transfer,
    iunitarity_defect,
    random_admissible,
    reconstruct_solution,
    require_admissible,
    transfer_derivative,
)
from blockjacobi.transfer import TransferChain, site_transfer

PHI = (1 + 5 ** 0.5) / 2


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.floats(-3, 3), st.floats(0.01, 1))
def test_iunitarity_at_conjugate_energies(seed, x, y):
    op = random_admissible(seed, N=4, rank=1 + seed % 2)
    g = require_admissible(op)
    for E in (x, complex(x, y)):
        for n in range(1, op.N + 1):
            T = site_transfer(op, g, n, E).matrix
            Tc = site_transfer(op, g, n, np.conj(E)).matrix
            assert iunitarity_defect(T, Tc) <= 1e-10 * (1 + np.linalg.norm(T, 2) ** 2)


def test_interior_transfer_rejects_boundary_sites(golden):
    g = require_admissible(golden)
    with pytest.raises(ValueError):
        interior_transfer(golden, g, 1, 0.3)


def test_boundary_transfers_are_the_end_sites(golden):
    g = require_admissible(golden)
    assert boundary_transfer_left(golden, g, 0.3).site == 1
    assert boundary_transfer_right(golden, g, 0.3).site == golden.N


def test_derivative_matches_finite_difference():
    op = random_admissible(3, N=4, rank=2)
    g = require_admissible(op)
    E, h = 0.37, 1e-6
    for n in range(1, op.N + 1):
        d = transfer_derivative(op, g, n, E)
        fd = (site_transfer(op, g, n, E + h).matrix - site_transfer(op, g, n, E - h).matrix) / (2 * h)
        assert np.linalg.norm(d - fd) <= 1e-5 * (1 + np.linalg.norm(d))


def test_analytic_extension_is_continuous():
    op = build_periodic_scalar(PeriodicScalarModel((0.4, -1.2, 0.3), 3))
    g = require_admissible(op)
    for E0 in np.linalg.eigvalsh(op.block(2)):
        ext = analytic_extension(op, g, 2, E0)
        assert ext.extended
        near = interior_transfer(op, g, 2, E0 + 1e-6).matrix
        assert np.linalg.norm(ext.matrix - near) < 1e-4


def test_chain_is_reused():
    op = random_admissible(1, N=3)
    g = require_admissible(op)
    assert TransferChain.of(op, g) is TransferChain.of(op, g)


def test_golden_eigenvector(golden):
    g = require_admissible(golden)
    sol = reconstruct_solution(golden, g, PHI, [1.0])
    assert sol.residual <= 1e-12 * sol.norm
    assert sol.eigencondition_defect <= 1e-12
    v = sol.vector / sol.vector[0]
    np.testing.assert_allclose(v, [1, PHI, PHI, 1], atol=1e-12)


def test_non_eigenvalue_has_a_defect(golden):
    g = require_admissible(golden)
    sol = reconstruct_solution(golden, g, 0.0, [1.0])
    assert sol.eigencondition_defect > 0.1


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_reconstruction_satisfies_all_but_the_last_site(seed):
    op = random_admissible(seed, N=4)
    g = require_admissible(op)
    sol = reconstruct_solution(op, g, 0.123, [1.0])
    Hpsi = apply(op, sol.psi)
    for n in range(op.N - 1):
        assert np.linalg.norm(Hpsi[n] - 0.123 * sol.psi[n]) <= 1e-9 * sol.norm
