"""Finite block Jacobi operators.

A block Jacobi operator of length ``N`` acts on ``H_1 + ... + H_N`` with
Hermitian diagonal blocks ``V_n`` and hoppings ``T_n : H_n -> H_{n-1}``::

    (H psi)_n = T_{n+1} psi_{n+1} + V_n psi_n + T_n^* psi_{n-1}

with the terms beyond the two ends dropped (Dirichlet truncation).
Sites are labelled ``1..N`` in the public API, exactly like the blocks,
while the underlying tuples are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

HERMITICITY_TOL = 1e-10


def _as_matrix(a, name):
    m = np.array(a, dtype=complex)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2:
        raise ValidationError(f"{name} must be a matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValidationError(f"{name} has non-finite entries")
    m.setflags(write=False)
    return m


@dataclass(frozen=True, eq=False)
class BlockJacobiOperator:
    """Chain of diagonal blocks ``V_1..V_N`` and hoppings ``T_2..T_N``.

    ``T[k]`` holds the hopping ``T_{k+2}``; use :meth:`hopping` for the
    1-based lookup.  Entries are stored as read-only complex arrays.
    """

    V: tuple
    T: tuple
    _norms: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        V = tuple(_as_matrix(v, f"V_{i + 1}") for i, v in enumerate(self.V))
        T = tuple(_as_matrix(t, f"T_{i + 2}") for i, t in enumerate(self.T))
        if len(V) < 2:
            raise ValidationError("a chain needs at least two sites")
        if len(T) != len(V) - 1:
            raise ValidationError(
                f"expected {len(V) - 1} hoppings for {len(V)} sites, got {len(T)}")
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "T", T)

    @property
    def N(self) -> int:
        return len(self.V)

    @property
    def dims(self) -> tuple:
        return tuple(v.shape[0] for v in self.V)

    @property
    def total_dim(self) -> int:
        return sum(self.dims)

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.dims)])

    def block(self, n: int) -> np.ndarray:
        """Diagonal block ``V_n`` (``n = 1..N``)."""
        if not 1 <= n <= self.N:
            raise IndexError(f"site {n} outside 1..{self.N}")
        return self.V[n - 1]

    def hopping(self, n: int) -> np.ndarray:
        """Hopping ``T_n : H_n -> H_{n-1}`` (``n = 2..N``)."""
        if not 2 <= n <= self.N:
            raise IndexError(f"hopping {n} outside 2..{self.N}")
        return self.T[n - 2]

    def gershgorin_bound(self) -> float:
        """Upper bound ``max ||V_n|| + 2 max ||T_n||`` on the operator norm."""
        if "bound" not in self._norms:
            v = max(np.linalg.norm(b, 2) for b in self.V)
            t = max((np.linalg.norm(b, 2) for b in self.T), default=0.0)
            self._norms["bound"] = float(v + 2.0 * t)
        return self._norms["bound"]

    def split(self, vector) -> list:
        """Cut a flat vector of length ``total_dim`` into site blocks."""
        vector = np.asarray(vector, dtype=complex)
        if vector.shape[0] != self.total_dim:
            raise ValidationError(
                f"vector of length {vector.shape[0]} does not match dimension {self.total_dim}")
        off = self.offsets
        return [vector[off[i]:off[i + 1]] for i in range(self.N)]

    def join(self, blocks) -> np.ndarray:
        return np.concatenate([np.asarray(b, dtype=complex) for b in blocks])


@dataclass
class ValidationReport:
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok


def validate(op: BlockJacobiOperator, hermiticity_tol: float = HERMITICITY_TOL) -> ValidationReport:
    """Check Hermiticity of every ``V_n`` and the shape chain of the hoppings.

    Violations are collected, never raised.
    """
    violations = []
    for n, v in enumerate(op.V, start=1):
        if v.shape[0] != v.shape[1]:
            violations.append(f"V_{n} is not square: shape {v.shape}")
            continue
        if v.shape[0] == 0:
            violations.append(f"V_{n} has zero dimension")
            continue
        scale = 1.0 + np.linalg.norm(v, 2)
        if np.linalg.norm(v - v.conj().T, 2) > hermiticity_tol * scale:
            violations.append(f"V_{n} not Hermitian")
    for n, t in enumerate(op.T, start=2):
        expected = (op.V[n - 2].shape[0], op.V[n - 1].shape[1])
        if t.shape != expected:
            violations.append(
                f"shape mismatch at n={n}: T_{n} has shape {t.shape}, expected {expected}")
    return ValidationReport(violations)


def require_valid(op: BlockJacobiOperator, hermiticity_tol: float = HERMITICITY_TOL):
    report = validate(op, hermiticity_tol)
    if not report.ok:
        raise ValidationError("; ".join(report.violations))
    return op


def assemble_dense(op: BlockJacobiOperator) -> np.ndarray:
    """Dense Hermitian matrix of ``H_N``."""
    off = op.offsets
    H = np.zeros((op.total_dim, op.total_dim), dtype=complex)
    for i, v in enumerate(op.V):
        H[off[i]:off[i + 1], off[i]:off[i + 1]] = v
    for i, t in enumerate(op.T):
        # T_{i+2} couples site i+1 (rows) to site i+2 (columns)
        H[off[i]:off[i + 1], off[i + 1]:off[i + 2]] = t
        H[off[i + 1]:off[i + 2], off[i]:off[i + 1]] = t.conj().T
    return H


def apply(op: BlockJacobiOperator, psi) -> list:
    """Three-term recurrence action ``(H psi)_n`` on a list of site blocks."""
    psi = [np.asarray(p, dtype=complex) for p in psi]
    if len(psi) != op.N or any(p.shape[0] != d for p, d in zip(psi, op.dims)):
        raise ValidationError("state blocks do not match the operator dimensions")
    out = []
    for n in range(1, op.N + 1):
        r = op.block(n) @ psi[n - 1]
        if n < op.N:
            r = r + op.hopping(n + 1) @ psi[n]
        if n > 1:
            r = r + op.hopping(n).conj().T @ psi[n - 2]
        out.append(r)
    return out
