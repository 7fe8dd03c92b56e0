import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockjacobi import (
    BlockJacobiOperator,
    DimensionCapExceeded,
    check_hypotheses,
    count_leq,
    crosscheck,
    dense_spectrum,
    random_admissible,
)
from blockjacobi.oracle import eigen_residual, probe_energies


def test_golden_spectrum(golden):
    spec = dense_spectrum(golden)
    phi = (1 + 5 ** 0.5) / 2
    np.testing.assert_allclose([v for v, _ in spec.clusters], [-phi, -1 / phi, 1 / phi, phi], atol=1e-14)
    assert count_leq(golden, 0.0) == 2
    assert spec.multiplicity(phi) == 1


def test_clusters_merge_degenerate_eigenvalues():
    op = BlockJacobiOperator((np.zeros((2, 2)), np.zeros((2, 2))), (np.zeros((2, 2)),))
    assert dense_spectrum(op).clusters == [(0.0, 4)]


def test_dimension_cap(golden):
    with pytest.raises(DimensionCapExceeded):
        dense_spectrum(golden, cap=3)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 3))
def test_random_instances_are_admissible(seed, rank):
    op = random_admissible(seed, N=4, rank=rank)
    _, report = check_hypotheses(op)
    assert report.ok and report.rank == rank


def test_random_admissible_checks_dims():
    with pytest.raises(ValueError):
        random_admissible(0, rank=2, dims=[2, 3, 2])
    op = random_admissible(0, rank=2, dims=[2, 4, 2])
    assert op.dims == (2, 4, 2)


def test_seeded_generation_is_reproducible():
    a, b = random_admissible(5, N=4), random_admissible(5, N=4)
    for x, y in zip(a.V + a.T, b.V + b.T):
        np.testing.assert_array_equal(x, y)


def test_probe_energies_inside_window(golden):
    e = probe_energies(golden, 10)
    b = golden.gershgorin_bound()
    assert len(e) == 10 and np.all(np.abs(e) < b + 1)


def test_eigen_residual_of_dense_vectors(golden):
    spec = dense_spectrum(golden)
    for lam, v in zip(spec.eigenvalues, spec.eigenvectors.T):
        assert eigen_residual(golden, lam, golden.split(v)) < 1e-13


def test_crosscheck_clean(golden):
    report = crosscheck(golden)
    assert report.ok, report.discrepancies
    assert report.checked == {"probes": 10, "eigenvalues": 4}


def test_crosscheck_reports_inadmissible():
    V = tuple(np.zeros((2, 2)) for _ in range(3))
    report = crosscheck(BlockJacobiOperator(V, (np.eye(2), np.eye(2))))
    assert not report.ok and report.discrepancies[0]["kind"] == "hypotheses failed"
