"""Channel grading of each fiber and the three coupling hypotheses.

Every fiber splits orthogonally as ``H_n = H_n^- + H_n^0 + H_n^+`` with
``H_n^- = Ran(T_n^*)`` (incoming channel) and ``H_n^+ = Ran(T_{n+1})``
(outgoing channel).  A grading stores coisometries ``p_minus``, ``p_zero``
and ``p_plus`` whose rows are orthonormal bases of the three pieces.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import HypothesisFailure, ValidationError
from .operator import BlockJacobiOperator

RANK_TOL = 1e-10
H1_TOL = 1e-10
INV_TOL = 1e-10
EIGEN_CLUSTER_TOL = 1e-9


def _fix_phases(rows: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude entry of every row real and positive."""
    rows = np.array(rows, dtype=complex)
    for r in rows:
        k = np.argmax(np.abs(r))
        if abs(r[k]) > 0:
            r *= np.conj(r[k]) / abs(r[k])
    return rows


def _numerical_rank(s: np.ndarray, rank_tol: float) -> int:
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rank_tol * s[0]))


def _complement(rows: np.ndarray, dim: int) -> np.ndarray:
    """Orthonormal rows spanning the orthogonal complement of ``rows``."""
    if rows.shape[0] == 0:
        return np.eye(dim, dtype=complex)
    # full SVD of the stacked rows; trailing right singular vectors span the complement
    _, s, wh = np.linalg.svd(rows, full_matrices=True)
    r = _numerical_rank(s, 1e-8)
    return _fix_phases(wh[r:])


@dataclass(frozen=True)
class SiteGrading:
    """Coisometries onto the incoming, middle and outgoing channels of a site."""

    p_minus: np.ndarray
    p_zero: np.ndarray
    p_plus: np.ndarray

    @property
    def dim(self) -> int:
        return self.p_zero.shape[1]

    @property
    def rank(self) -> int:
        return max(self.p_minus.shape[0], self.p_plus.shape[0])

    def part(self, label: str) -> np.ndarray:
        return {"-": self.p_minus, "0": self.p_zero, "+": self.p_plus}[label]

    def completeness_defect(self) -> float:
        P = sum(p.conj().T @ p for p in (self.p_minus, self.p_zero, self.p_plus))
        return float(np.linalg.norm(P - np.eye(self.dim), 2))

    def orthogonality_defect(self) -> float:
        parts = [self.p_minus, self.p_zero, self.p_plus]
        worst = 0.0
        for i, a in enumerate(parts):
            if a.shape[0]:
                worst = max(worst, np.linalg.norm(a @ a.conj().T - np.eye(a.shape[0]), 2))
            for b in parts[i + 1:]:
                if a.shape[0] and b.shape[0]:
                    worst = max(worst, np.linalg.norm(a @ b.conj().T, 2))
        return float(worst)

    def regauged(self, w_minus=None, w_plus=None) -> "SiteGrading":
        """Change the channel bases by unitaries acting on the channel index."""
        pm = self.p_minus if w_minus is None else w_minus @ self.p_minus
        pp = self.p_plus if w_plus is None else w_plus @ self.p_plus
        return SiteGrading(pm, self.p_zero, pp)


@dataclass
class H3Record:
    site: int
    energy: float
    multiplicity: int
    sigma_minus: float | None
    sigma_plus: float | None

    def passes(self, inv_tol: float = INV_TOL) -> bool:
        vals = [s for s in (self.sigma_minus, self.sigma_plus) if s is not None]
        return all(s > inv_tol for s in vals)


@dataclass
class HypothesisReport:
    """Per-site evidence for the three hypotheses.

    ``h1_defects[n]`` is ``||p_n^- (p_n^+)^*||`` for interior sites,
    ``h2_ranks[n]`` the numerical rank of ``T_n``.
    """

    h1_defects: dict = field(default_factory=dict)
    h2_ranks: dict = field(default_factory=dict)
    h3_records: list = field(default_factory=list)
    h1_tol: float = H1_TOL
    inv_tol: float = INV_TOL
    h3_checked: bool = False

    @property
    def h1_ok(self) -> bool:
        return all(d <= self.h1_tol for d in self.h1_defects.values())

    @property
    def h2_ok(self) -> bool:
        return len(set(self.h2_ranks.values())) <= 1 and all(r > 0 for r in self.h2_ranks.values())

    @property
    def h3_ok(self) -> bool:
        return self.h3_checked and all(r.passes(self.inv_tol) for r in self.h3_records)

    @property
    def ok(self) -> bool:
        return self.h1_ok and self.h2_ok and self.h3_ok

    @property
    def rank(self) -> int | None:
        ranks = set(self.h2_ranks.values())
        return ranks.pop() if len(ranks) == 1 else None

    def failures(self) -> list:
        out = []
        for n, d in sorted(self.h1_defects.items()):
            if d > self.h1_tol:
                out.append(f"H1 fails at n={n}: channel overlap {d:.3e}")
        if not self.h2_ok:
            out.append(f"H2 fails: hopping ranks {dict(sorted(self.h2_ranks.items()))}")
        if self.h3_checked:
            for r in self.h3_records:
                if not r.passes(self.inv_tol):
                    out.append(
                        f"H3 fails at n={r.site}, E={r.energy:.12g}: "
                        f"sigma_min(-)={r.sigma_minus}, sigma_min(+)={r.sigma_plus}")
        return out

    def to_dict(self) -> dict:
        return {
            "H1": {"ok": self.h1_ok, "tol": self.h1_tol,
                   "defects": {str(n): d for n, d in sorted(self.h1_defects.items())}},
            "H2": {"ok": self.h2_ok,
                   "ranks": {str(n): r for n, r in sorted(self.h2_ranks.items())}},
            "H3": {"ok": self.h3_ok, "checked": self.h3_checked, "tol": self.inv_tol,
                   "records": [
                       {"site": r.site, "energy": r.energy, "multiplicity": r.multiplicity,
                        "sigma_min_minus": r.sigma_minus, "sigma_min_plus": r.sigma_plus,
                        "ok": r.passes(self.inv_tol)}
                       for r in self.h3_records]},
            "ok": self.ok,
            "failures": self.failures(),
        }


def decompose(op: BlockJacobiOperator, rank_tol: float = RANK_TOL,
              h1_tol: float = H1_TOL):
    """Channel gradings of all sites together with the H1/H2 evidence.

    The incoming basis of site ``n`` is read off the right singular vectors
    of ``T_n``, the outgoing basis off the left singular vectors of
    ``T_{n+1}``, keeping singular values above ``rank_tol * sigma_max``.

    Returns
    -------
    gradings : list of SiteGrading
        One grading per site, in site order.
    report : HypothesisReport
        H1 overlaps and H2 ranks; H3 is left unchecked.

    Raises
    ------
    ValidationError
        If some hopping vanishes (no coupling channel).
    """
    report = HypothesisReport(h1_tol=h1_tol)
    minus = [np.zeros((0, d), dtype=complex) for d in op.dims]
    plus = [np.zeros((0, d), dtype=complex) for d in op.dims]
    for n in range(2, op.N + 1):
        u, s, wh = np.linalg.svd(op.hopping(n))
        r = _numerical_rank(s, rank_tol)
        if r == 0:
            raise ValidationError(f"T_{n} vanishes: no coupling channel between sites {n - 1} and {n}")
        report.h2_ranks[n] = r
        plus[n - 2] = _fix_phases(u[:, :r].conj().T)
        minus[n - 1] = _fix_phases(wh[:r])
    gradings = []
    for i in range(op.N):
        n = i + 1
        pm, pp = minus[i], plus[i]
        if pm.shape[0] and pp.shape[0]:
            report.h1_defects[n] = float(np.linalg.norm(pm @ pp.conj().T, 2))
        p0 = _complement(np.vstack([pm, pp]), op.dims[i])
        gradings.append(SiteGrading(pm, p0, pp))
    return gradings, report


def check_hypothesis3(V, grading: SiteGrading, inv_tol: float = INV_TOL,
                      site: int = 0, spectral=None) -> list:
    """Smallest singular values of ``p P_E p^*`` for every eigenvalue ``E`` of ``V``.

    Only the channels present at the site are checked (``p_plus`` at the
    left end, ``p_minus`` at the right end).
    """
    from .green import spectral_data

    sd = spectral if spectral is not None else spectral_data(V)
    records = []
    for value, vecs in sd.clusters():
        sig = {}
        for label, p in (("-", grading.p_minus), ("+", grading.p_plus)):
            if p.shape[0] == 0:
                sig[label] = None
                continue
            pv = p @ vecs
            compressed = pv @ pv.conj().T
            sig[label] = float(np.linalg.svd(compressed, compute_uv=False)[-1])
        records.append(H3Record(site, float(value), vecs.shape[1], sig["-"], sig["+"]))
    return records


def check_hypotheses(op: BlockJacobiOperator, rank_tol: float = RANK_TOL,
                     h1_tol: float = H1_TOL, inv_tol: float = INV_TOL):
    """Gradings plus a full H1-H3 report."""
    gradings, report = decompose(op, rank_tol=rank_tol, h1_tol=h1_tol)
    report.inv_tol = inv_tol
    if report.h2_ok:
        for n, g in enumerate(gradings, start=1):
            report.h3_records.extend(check_hypothesis3(op.block(n), g, inv_tol, site=n))
        report.h3_checked = True
    return gradings, report


def require_admissible(op: BlockJacobiOperator, **tols):
    """Gradings for ``op``; raises HypothesisFailure unless H1-H3 all hold."""
    gradings, report = check_hypotheses(op, **tols)
    if not report.ok:
        raise HypothesisFailure("hypotheses failed: " + "; ".join(report.failures()), report)
    return gradings


def reduced_hopping(T, grading_prev: SiteGrading, grading_cur: SiteGrading) -> np.ndarray:
    """``p_{n-1}^+ T_n (p_n^-)^*``, the hopping seen between channel bases."""
    That = grading_prev.p_plus @ np.asarray(T, dtype=complex) @ grading_cur.p_minus.conj().T
    if That.size == 0 or np.linalg.svd(That, compute_uv=False)[-1] <= RANK_TOL * max(
            1.0, np.linalg.norm(T, 2)):
        raise ValidationError("reduced hopping is singular: channel ranks were mis-detected")
    return That


def reduced_hoppings(op: BlockJacobiOperator, gradings) -> list:
    """Reduced hoppings ``[T^_2, ..., T^_N]``."""
    return [reduced_hopping(op.hopping(n), gradings[n - 2], gradings[n - 1])
            for n in range(2, op.N + 1)]


def regauge(gradings, rng) -> list:
    """Rotate every channel basis by an independent Haar-random unitary."""
    from scipy.stats import unitary_group

    out = []
    for g in gradings:
        wm = unitary_group.rvs(g.p_minus.shape[0], random_state=rng) if g.p_minus.shape[0] > 1 \
            else np.exp(2j * np.pi * rng.random()) * np.eye(g.p_minus.shape[0])
        wp = unitary_group.rvs(g.p_plus.shape[0], random_state=rng) if g.p_plus.shape[0] > 1 \
            else np.exp(2j * np.pi * rng.random()) * np.eye(g.p_plus.shape[0])
        out.append(g.regauged(np.atleast_2d(wm), np.atleast_2d(wp)))
    return out
