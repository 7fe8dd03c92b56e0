"""Dense ground truth and cross-checks for the oscillation pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import unitary_group

from .channels import check_hypotheses, check_hypothesis3, decompose
from .errors import DimensionCapExceeded, NumericalFailure
from .krein import count_eigenvalues, default_window, multiplicity_at, solutions_at
from .operator import BlockJacobiOperator, apply, assemble_dense, require_valid

DIMENSION_CAP = 2000
CLUSTER_TOL = 1e-9


@dataclass
class SpectrumReport:
    """Full eigendecomposition of the assembled operator.

    ``clusters`` lists ``(value, multiplicity)`` after merging eigenvalues
    closer than ``cluster_tol``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    clusters: list
    norm: float
    cluster_tol: float
    max_residual: float

    def count_leq(self, E) -> int:
        return int(np.sum(self.eigenvalues <= E + self.cluster_tol))

    def multiplicity(self, E) -> int:
        return int(np.sum(np.abs(self.eigenvalues - E) <= self.cluster_tol))


def _cluster(lam, tol):
    out = []
    start = 0
    for k in range(1, len(lam) + 1):
        if k == len(lam) or lam[k] - lam[k - 1] > tol:
            out.append((float(np.mean(lam[start:k])), k - start))
            start = k
    return out


def dense_spectrum(op: BlockJacobiOperator, cap: int = DIMENSION_CAP) -> SpectrumReport:
    """Hermitian eigendecomposition of ``assemble_dense(op)``.

    Raises
    ------
    DimensionCapExceeded
        If the total dimension exceeds ``cap``.
    """
    require_valid(op)
    if op.total_dim > cap:
        raise DimensionCapExceeded(f"total dimension {op.total_dim} exceeds cap {cap}")
    H = assemble_dense(op)
    lam, vecs = np.linalg.eigh(H)
    norm = float(np.max(np.abs(lam))) if len(lam) else 0.0
    tol = CLUSTER_TOL * max(norm, 1.0)
    res = np.linalg.norm(H @ vecs - vecs * lam, axis=0)
    return SpectrumReport(lam, vecs, _cluster(lam, tol), norm, tol,
                          float(np.max(res)) if len(res) else 0.0)


def count_leq(op: BlockJacobiOperator, E) -> int:
    """``#{lambda <= E}`` counting eigenvalues within ``1e-9 ||H||`` of ``E``."""
    return dense_spectrum(op).count_leq(E)


def probe_energies(op: BlockJacobiOperator, count: int = 10, rng=None) -> np.ndarray:
    """Sorted probe energies spread over the Gershgorin window."""
    rng = np.random.default_rng(0) if rng is None else rng
    lo, hi = default_window(op)
    return np.sort(rng.uniform(lo + 0.5, hi - 0.5, size=count))


@dataclass
class CrosscheckReport:
    discrepancies: list = field(default_factory=list)
    checked: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.discrepancies

    def to_dict(self) -> dict:
        return {"ok": self.ok, "discrepancies": self.discrepancies, "checked": self.checked}


def crosscheck(op: BlockJacobiOperator, gradings=None, energies=None,
               residual_tol: float = 1e-8, spectrum: SpectrumReport | None = None) -> CrosscheckReport:
    """Compare flow counts, multiplicities and rebuilt eigenvectors with the dense oracle.

    An empty ``discrepancies`` list means every check agreed.  When the
    hypotheses fail the pipeline is not run at all and a single
    ``"hypotheses failed"`` entry is reported.
    """
    report = CrosscheckReport()
    if gradings is None:
        gradings, hyp = check_hypotheses(op)
        if not hyp.ok:
            report.discrepancies.append({"kind": "hypotheses failed", "detail": hyp.failures()})
            return report
    spec = dense_spectrum(op) if spectrum is None else spectrum
    energies = probe_energies(op) if energies is None else np.asarray(energies, dtype=float)
    try:
        flow_counts = count_eigenvalues(op, gradings, energies)
    except NumericalFailure as exc:
        report.discrepancies.append({"kind": "flow failed", "detail": str(exc)})
        return report
    for E, c in zip(energies, flow_counts):
        expected = spec.count_leq(E)
        if c != expected:
            report.discrepancies.append(
                {"kind": "count", "energy": float(E), "flow": int(c), "oracle": expected})
    for value, mult in spec.clusters:
        got = multiplicity_at(op, gradings, value)
        if got != mult:
            report.discrepancies.append(
                {"kind": "multiplicity", "energy": value, "flow": got, "oracle": mult})
            continue
        sols = solutions_at(op, gradings, value)
        if len(sols) != mult:
            report.discrepancies.append(
                {"kind": "solutions", "energy": value, "found": len(sols), "oracle": mult})
        for s in sols:
            if s.residual > residual_tol * s.norm or s.eigencondition_defect > residual_tol:
                report.discrepancies.append(
                    {"kind": "eigenvector", "energy": value, "residual": s.residual,
                     "defect": s.eigencondition_defect})
    report.checked = {"probes": len(energies), "eigenvalues": len(spec.clusters)}
    return report


def eigen_residual(op: BlockJacobiOperator, E, psi_blocks) -> float:
    """``||(H - E) psi||`` via the three-term recurrence."""
    Hpsi = apply(op, psi_blocks)
    return float(np.sqrt(sum(np.linalg.norm(h - E * p) ** 2 for h, p in zip(Hpsi, psi_blocks))))


# random admissible instances ---------------------------------------------------


def _random_dims(rng, N, rank):
    dims = [rank * int(rng.integers(1, 4))]
    dims += [rank * int(rng.integers(2, 4)) for _ in range(N - 2)]
    dims.append(rank * int(rng.integers(1, 4)))
    return dims


def _check_dims(dims, rank):
    dims = [int(d) for d in dims]
    if len(dims) < 2:
        raise ValueError("need at least two sites")
    for i, d in enumerate(dims):
        need = rank if i in (0, len(dims) - 1) else 2 * rank
        if d < need or d % rank:
            raise ValueError(
                f"site {i + 1}: dimension {d} must be a multiple of {rank} and at least {need}")
    return dims


def _random_site_block(rng, d, rank, scale):
    # every eigenvalue repeated exactly `rank` times: a simple eigenvalue would
    # make p P_E p^* rank-deficient as soon as rank >= 2
    values = np.repeat(scale * rng.standard_normal(d // rank), rank)
    U = unitary_group.rvs(d, random_state=rng) if d > 1 else np.ones((1, 1))
    V = (U * values) @ U.conj().T
    return 0.5 * (V + V.conj().T)


def random_admissible(rng=None, N: int | None = None, rank: int = 1, dims=None,
                      scale: float = 1.0, max_tries: int = 100) -> BlockJacobiOperator:
    """Random operator satisfying all three hypotheses.

    Channel bases are orthonormal rows of Haar unitaries (in and out
    channels orthogonal by construction), reduced hoppings are complex
    Gaussian, and the diagonal blocks have every eigenvalue of multiplicity
    exactly ``rank`` in a random eigenbasis.  Instances failing the
    invertibility checks are redrawn.

    Parameters
    ----------
    rng : numpy Generator or int, optional
    N : int, optional
        Number of sites; ignored when ``dims`` is given.
    rank : int
        Common channel rank.
    dims : sequence of int, optional
        Site dimensions; multiples of ``rank``, at least ``2 rank`` inside.
    """
    rng = np.random.default_rng(rng)
    if dims is None:
        dims = _random_dims(rng, int(rng.integers(3, 7)) if N is None else N, rank)
    dims = _check_dims(dims, rank)
    N = len(dims)
    for _ in range(max_tries):
        frames = [unitary_group.rvs(d, random_state=rng) if d > 1 else np.ones((1, 1), dtype=complex)
                  for d in dims]
        p_minus = [f[:rank] for f in frames]
        p_plus = [f[rank:2 * rank] if 0 < i < N - 1 else f[:rank] for i, f in enumerate(frames)]
        V = [_random_site_block(rng, d, rank, scale) for d in dims]
        T = []
        for n in range(1, N):
            hat = (rng.standard_normal((rank, rank)) + 1j * rng.standard_normal((rank, rank))) / np.sqrt(2)
            T.append(p_plus[n - 1].conj().T @ hat @ p_minus[n])
        op = BlockJacobiOperator(tuple(V), tuple(T))
        gradings, report = decompose(op)
        if not (report.h1_ok and report.h2_ok and set(report.h2_ranks.values()) == {rank}):
            continue
        if all(rec.passes() for n, g in enumerate(gradings, start=1)
               for rec in check_hypothesis3(op.block(n), g, site=n)):
            return op
    raise RuntimeError(f"no admissible instance after {max_tries} draws")
