"""Scalar periodic chains viewed as 1-periodic block Jacobi operators.

A scalar Jacobi chain with unit hoppings and an ``L``-periodic potential is
cut into ``K`` cells of length ``L``.  Each cell becomes one site with the
Dirichlet block ``V = tridiag(1, v, 1)`` and consecutive cells are joined by
the rank-one hopping with a single 1 in the lower-left corner.  The reduced
transfer across an interior cell then coincides with the scalar monodromy
over one period.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import require_admissible
from .errors import ValidationError
from .operator import BlockJacobiOperator
from .transfer import TransferChain


@dataclass(frozen=True)
class PeriodicScalarModel:
    potential: tuple
    periods: int

    def __post_init__(self):
        v = tuple(float(x) for x in np.ravel(self.potential))
        object.__setattr__(self, "potential", v)
        if len(v) < 2:
            raise ValidationError("period L must be at least 2 (in and out channels coincide for L = 1)")
        if int(self.periods) < 2:
            raise ValidationError("need at least two periods")
        object.__setattr__(self, "periods", int(self.periods))

    @property
    def L(self) -> int:
        return len(self.potential)

    @property
    def cell(self) -> np.ndarray:
        """Dirichlet block ``tridiag(1, v, 1)`` of one period."""
        L = self.L
        return np.diag(self.potential) + np.eye(L, k=1) + np.eye(L, k=-1)

    @property
    def hopping(self) -> np.ndarray:
        T = np.zeros((self.L, self.L))
        T[self.L - 1, 0] = 1.0
        return T

    def monodromy(self, E) -> np.ndarray:
        return monodromy(self.potential, E)


def build_periodic_scalar(model: PeriodicScalarModel) -> BlockJacobiOperator:
    """Block operator with ``K`` identical cells."""
    K = model.periods
    return BlockJacobiOperator(tuple(model.cell for _ in range(K)),
                               tuple(model.hopping for _ in range(K - 1)))


def scalar_chain(model: PeriodicScalarModel) -> np.ndarray:
    """The same operator as a plain ``KL x KL`` tridiagonal matrix."""
    v = np.tile(model.potential, model.periods)
    n = len(v)
    return np.diag(v) + np.eye(n, k=1) + np.eye(n, k=-1)


def monodromy(potential, E) -> np.ndarray:
    """``prod_l [[E - v_l, -1], [1, 0]]`` with the last factor leftmost."""
    M = np.eye(2, dtype=complex)
    for v in potential:
        M = np.array([[E - v, -1.0], [1.0, 0.0]], dtype=complex) @ M
    return M


def _interior_chain(model: PeriodicScalarModel) -> TransferChain:
    m = model if model.periods >= 3 else PeriodicScalarModel(model.potential, 3)
    op = build_periodic_scalar(m)
    return TransferChain(op, require_admissible(op))


def verify_monodromy_equality(model: PeriodicScalarModel, E, chain: TransferChain | None = None) -> float:
    """``||T^E - M^E||`` for the transfer across an interior cell.

    Cells are identical, so any interior cell works; a third period is added
    when the model has only two (no interior cell).  Near ``spec(V)`` the
    transfer is the circle mean of the analytic extension.
    """
    chain = chain if chain is not None else _interior_chain(model)
    T = chain.transfer(2, E)
    return float(np.linalg.norm(T - monodromy(model.potential, E), 2))


def monodromy_deviation_grid(model: PeriodicScalarModel, energies) -> np.ndarray:
    """Deviations ``||T^E - M^E||`` over a grid, sharing one chain."""
    chain = _interior_chain(model)
    return np.array([verify_monodromy_equality(model, E, chain) for E in energies])


def default_grid(model: PeriodicScalarModel, points: int = 50) -> np.ndarray:
    """``points`` energies across the cell spectrum, including every eigenvalue of ``V``."""
    lam = np.linalg.eigvalsh(model.cell)
    lo, hi = lam[0] - 2.5, lam[-1] + 2.5
    n_free = max(points - len(lam), 2)
    return np.sort(np.concatenate([np.linspace(lo, hi, n_free), lam]))
