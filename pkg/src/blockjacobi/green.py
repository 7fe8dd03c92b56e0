"""Graded resolvent blocks of the diagonal blocks ``V_n``.

The resolvent ``(E - V_n)^{-1}`` is evaluated from the eigen-expansion of
``V_n`` so the same spectral data also feeds the pole handling and the
projector checks.  Block ``G^{a,b}`` is ``p^a (E - V_n)^{-1} (p^b)^*`` for
channel labels ``a, b`` in ``"-0+"``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import EIGEN_CLUSTER_TOL, SiteGrading
from .errors import EnergyAtPole

LABELS = ("-", "0", "+")
POLE_GUARD = 1e-8


@dataclass(frozen=True)
class SpectralData:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    cluster_tol: float

    def clusters(self):
        """``(value, eigenvector block)`` for every cluster of close eigenvalues."""
        out = []
        lam = self.eigenvalues
        start = 0
        for k in range(1, len(lam) + 1):
            if k == len(lam) or lam[k] - lam[k - 1] > self.cluster_tol:
                out.append((float(np.mean(lam[start:k])), self.eigenvectors[:, start:k]))
                start = k
        return out

    @property
    def projectors(self) -> list:
        return [vecs @ vecs.conj().T for _, vecs in self.clusters()]

    def distance(self, E) -> float:
        return float(np.min(np.abs(E - self.eigenvalues)))


def spectral_data(V, cluster_tol: float | None = None) -> SpectralData:
    """Hermitian eigendecomposition of ``V`` with clustered spectral projectors."""
    V = np.asarray(V, dtype=complex)
    lam, U = np.linalg.eigh(0.5 * (V + V.conj().T))
    if cluster_tol is None:
        cluster_tol = EIGEN_CLUSTER_TOL * np.linalg.norm(V, 2)
    return SpectralData(lam, U, float(cluster_tol))


@dataclass(frozen=True)
class GreenBlockTable:
    """Graded blocks of ``(E - V_n)^{-1}``; ``table["-+"]`` is ``G^{-,+}``."""

    site: int
    energy: complex
    blocks: dict

    def __getitem__(self, key):
        return self.blocks[key]

    def reassemble(self, grading: SiteGrading) -> np.ndarray:
        return sum(grading.part(a).conj().T @ self.blocks[a + b] @ grading.part(b)
                   for a in LABELS for b in LABELS)


class SiteResolvent:
    """Cached eigen-expansion of one diagonal block in its channel grading.

    ``G^{a,b}(E) = Q_a diag(1/(E - lambda)) Q_b^*`` with ``Q_a = p^a U``.
    """

    def __init__(self, V, grading: SiteGrading, site: int = 0, pole_guard: float = POLE_GUARD):
        self.V = np.asarray(V, dtype=complex)
        self.grading = grading
        self.site = site
        self.spectral = spectral_data(self.V)
        self.norm = float(np.max(np.abs(self.spectral.eigenvalues))) if self.V.size else 0.0
        self.pole_guard = pole_guard * (1.0 + self.norm)
        U = self.spectral.eigenvectors
        self.Q = {a: grading.part(a) @ U for a in LABELS}

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.spectral.eigenvalues

    def distance(self, E) -> float:
        return self.spectral.distance(E)

    def _check(self, E):
        if self.distance(E) <= self.pole_guard:
            raise EnergyAtPole(
                f"E={E} within {self.pole_guard:.2e} of spec(V_{self.site})")

    def weighted(self, a: str, b: str, w: np.ndarray) -> np.ndarray:
        return (self.Q[a] * w) @ self.Q[b].conj().T

    def block(self, a: str, b: str, E) -> np.ndarray:
        self._check(E)
        return self.weighted(a, b, 1.0 / (E - self.eigenvalues))

    def table(self, E, labels=LABELS) -> GreenBlockTable:
        self._check(E)
        w = 1.0 / (E - self.eigenvalues)
        return GreenBlockTable(self.site, complex(E),
                               {a + b: self.weighted(a, b, w) for a in labels for b in labels})

    def derivative_table(self, E, labels=LABELS) -> GreenBlockTable:
        self._check(E)
        w = -1.0 / (E - self.eigenvalues) ** 2
        return GreenBlockTable(self.site, complex(E),
                               {a + b: self.weighted(a, b, w) for a in labels for b in labels})


def green_blocks(V, E, grading: SiteGrading, site: int = 0,
                 pole_guard: float = POLE_GUARD) -> GreenBlockTable:
    """Graded blocks ``p^a (E - V)^{-1} (p^b)^*``.

    Raises
    ------
    EnergyAtPole
        If ``E`` is within ``pole_guard * (1 + ||V||)`` of ``spec(V)``.
    """
    return SiteResolvent(V, grading, site, pole_guard).table(E)


def green_blocks_derivative(V, E, grading: SiteGrading, site: int = 0,
                            pole_guard: float = POLE_GUARD) -> GreenBlockTable:
    """Energy derivatives ``-p^a (E - V)^{-2} (p^b)^*`` of the graded blocks."""
    return SiteResolvent(V, grading, site, pole_guard).derivative_table(E)
