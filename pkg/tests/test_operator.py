import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockjacobi import BlockJacobiOperator, ValidationError, apply, assemble_dense, random_admissible, validate
from blockjacobi.operator import require_valid


def test_rejects_single_site():
    with pytest.raises(ValidationError):
        BlockJacobiOperator((np.eye(2),), ())


def test_rejects_wrong_hopping_count():
    with pytest.raises(ValidationError):
        BlockJacobiOperator((np.eye(2), np.eye(2)), ())


def test_validate_collects_shape_and_hermiticity_violations():
    V = (np.array([[0, 1], [0, 0]]), np.eye(3))
    T = (np.ones((3, 3)),)
    report = validate(BlockJacobiOperator(V, T))
    assert not report.ok
    assert len(report.violations) >= 2
    with pytest.raises(ValidationError):
        require_valid(BlockJacobiOperator(V, T))


def test_indexing_is_one_based():
    op = BlockJacobiOperator((np.eye(1), 2 * np.eye(2)), (np.ones((1, 2)),))
    assert op.block(2)[0, 0] == 2
    assert op.hopping(2).shape == (1, 2)
    with pytest.raises(IndexError):
        op.block(0)
    with pytest.raises(IndexError):
        op.hopping(1)


def test_dense_assembly_layout():
    T = np.array([[1.0, 2.0]])
    op = BlockJacobiOperator((np.zeros((1, 1)), np.zeros((2, 2))), (T,))
    H = assemble_dense(op)
    np.testing.assert_allclose(H[0, 1:], T[0])
    np.testing.assert_allclose(H[1:, 0], T[0])
    assert np.allclose(H, H.conj().T)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_apply_matches_dense(seed):
    op = random_admissible(seed, N=4, rank=1 + seed % 2)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(op.total_dim) + 1j * rng.standard_normal(op.total_dim)
    got = op.join(apply(op, op.split(x)))
    np.testing.assert_allclose(got, assemble_dense(op) @ x, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_gershgorin_bounds_the_norm(seed):
    op = random_admissible(seed, N=3)
    assert np.linalg.norm(assemble_dense(op), 2) <= op.gershgorin_bound() + 1e-12


def test_split_rejects_wrong_length():
    op = BlockJacobiOperator((np.eye(1), np.eye(1)), (np.ones((1, 1)),))
    with pytest.raises(ValidationError):
        op.split(np.zeros(3))
