"""Reduced transfer matrices across sites with non-invertible hoppings.

The reduced state at site ``n`` is ``(T^_{n+1} psi^-_{n+1}, psi^+_n)``, a
vector of length ``2 L`` where ``L`` is the common channel rank.  The
interior transfer across site ``n`` factorises as ``A(E) B_n`` with::

    A = [[X^-1,          -X^-1 G--           ],
         [G++ X^-1,       G+- - G++ X^-1 G-- ]],    X = G-+
    B = diag(T^_n^-1, T^_n^*)

and the two boundary transfers are::

    left  = [[(G++_1)^-1, -1], [1, 0]]
    right = [[(G--_N)^-1 T^_N^-1, -T^_N^*], [T^_N^-1, 0]]

Near the spectrum of ``V_n`` the Green blocks blow up while the transfer
stays analytic; there it is evaluated as a Cauchy mean over a small circle.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .channels import INV_TOL, reduced_hoppings
from .errors import Hypothesis3Violated, IllConditionedEnergy, ValidationError
from .green import POLE_GUARD, SiteResolvent
from .operator import BlockJacobiOperator, apply

CIRCLE_POINTS = 8
CIRCLE_RADIUS = 1e-4


@dataclass(frozen=True)
class ReducedTransferMatrix:
    site: int
    energy: complex
    matrix: np.ndarray
    extended: bool = False

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)


def _inv(a):
    return np.linalg.inv(a)


def _sigma_min(a) -> float:
    return float(np.linalg.svd(a, compute_uv=False)[-1])


class TransferChain:
    """Per-site resolvents and reduced hoppings of one graded operator.

    All transfer evaluations go through :meth:`transfer`, which picks the
    direct formula away from ``spec(V_n)`` and the circle mean near it.
    """

    _cache: OrderedDict = OrderedDict()

    def __init__(self, op: BlockJacobiOperator, gradings, pole_guard: float = POLE_GUARD,
                 inv_tol: float = INV_TOL, circle_points: int = CIRCLE_POINTS,
                 circle_radius: float = CIRCLE_RADIUS):
        ranks = {g.p_plus.shape[0] for g in gradings[:-1]} | {g.p_minus.shape[0] for g in gradings[1:]}
        if len(ranks) != 1:
            raise ValidationError(f"channel ranks differ across sites: {sorted(ranks)}")
        self.op = op
        self.gradings = list(gradings)
        self.N = op.N
        self.rank = ranks.pop()
        self.pole_guard = pole_guard
        self.inv_tol = inv_tol
        self.circle_points = circle_points
        self.sites = [SiteResolvent(op.block(n), g, n, pole_guard)
                      for n, g in enumerate(self.gradings, start=1)]
        self.hops = reduced_hoppings(op, self.gradings)
        self.hops_inv = [_inv(h) for h in self.hops]
        self.radii = [max(circle_radius, 10 * pole_guard) * (1.0 + s.norm) for s in self.sites]

    @classmethod
    def of(cls, op, gradings, **kw) -> "TransferChain":
        """Chain for ``(op, gradings)``, reusing a recent instance when possible."""
        if isinstance(op, TransferChain):
            return op
        key = (id(op), tuple(id(g) for g in gradings), tuple(sorted(kw.items())))
        hit = cls._cache.get(key)
        if hit is not None and hit.op is op and all(a is b for a, b in zip(hit.gradings, gradings)):
            cls._cache.move_to_end(key)
            return hit
        chain = cls(op, gradings, **kw)
        cls._cache[key] = chain
        while len(cls._cache) > 16:
            cls._cache.popitem(last=False)
        return chain

    def hop(self, n: int) -> np.ndarray:
        return self.hops[n - 2]

    def hop_inv(self, n: int) -> np.ndarray:
        return self.hops_inv[n - 2]

    def near_spectrum(self, n: int, E) -> bool:
        return self.sites[n - 1].distance(E) <= 0.25 * self.radii[n - 1]

    # direct formulas -----------------------------------------------------

    def _guarded_inverse(self, n, G, E, what):
        dist = self.sites[n - 1].distance(E)
        s = _sigma_min(G)
        if s <= self.inv_tol / dist:
            raise IllConditionedEnergy(
                f"{what} at site {n} is singular at E={E} (sigma_min={s:.3e})",
                sigma_min=s, site=n, energy=E)
        return _inv(G)

    def direct(self, n: int, E, derivative: bool = False):
        """Transfer (and optionally its energy derivative) from the Green blocks."""
        s = self.sites[n - 1]
        L = self.rank
        eye = np.eye(L)
        zero = np.zeros((L, L))
        if n == 1:
            G = s.block("+", "+", E)
            Gi = self._guarded_inverse(n, G, E, "G++")
            M = np.block([[Gi, -eye], [eye, zero]])
            if not derivative:
                return M
            dG = s.derivative_table(E, "+")["++"]
            dM = np.block([[-Gi @ dG @ Gi, zero], [zero, zero]])
            return M, dM
        Th, Ti = self.hop(n), self.hop_inv(n)
        if n == self.N:
            G = s.block("-", "-", E)
            Gi = self._guarded_inverse(n, G, E, "G--")
            M = np.block([[Gi @ Ti, -Th.conj().T], [Ti, zero]])
            if not derivative:
                return M
            dG = s.derivative_table(E, "-")["--"]
            dM = np.block([[-Gi @ dG @ Gi @ Ti, zero], [zero, zero]])
            return M, dM
        g = s.table(E, ("-", "+"))
        X = g["-+"]
        Xi = self._guarded_inverse(n, X, E, "G-+")
        Gmm, Gpp, Gpm = g["--"], g["++"], g["+-"]
        XiGmm = Xi @ Gmm
        A = np.block([[Xi, -XiGmm], [Gpp @ Xi, Gpm - Gpp @ XiGmm]])
        B = np.block([[Ti, zero], [zero, Th.conj().T]])
        M = A @ B
        if not derivative:
            return M
        d = s.derivative_table(E, ("-", "+"))
        dXi = -Xi @ d["-+"] @ Xi
        dA11 = dXi
        dA12 = -dXi @ Gmm - Xi @ d["--"]
        dA21 = d["++"] @ Xi + Gpp @ dXi
        dA22 = d["+-"] - d["++"] @ XiGmm - Gpp @ dXi @ Gmm - Gpp @ Xi @ d["--"]
        dA = np.block([[dA11, dA12], [dA21, dA22]])
        return M, dA @ B

    # circle mean ------------------------------------------------------------

    def circle_radius(self, n: int, center) -> float:
        """Radius of the averaging circle, shrunk away from other eigenvalues."""
        r = self.radii[n - 1]
        dist = np.abs(self.sites[n - 1].eigenvalues - center)
        inner = dist[dist <= 0.25 * r]
        outer = dist[dist > 0.25 * r]
        d_in = float(inner.max()) if inner.size else 0.0
        if outer.size and outer.min() < 2 * r:
            r = 0.5 * float(outer.min())
            if r <= 2 * d_in:
                r = 0.5 * (d_in + float(outer.min()))
        return r

    def circle_points_for(self, center, r, m):
        phases = np.exp(2j * np.pi * (np.arange(m) + 0.5) / m)
        return center + r * phases

    def circle_mean(self, n: int, center, derivative: bool = False, m: int | None = None,
                    r: float | None = None):
        """Cauchy mean of the transfer over a circle around ``center``.

        The points are offset by half a step so none lies on the real axis.
        A non-negligible first Laurent coefficient reveals a genuine pole
        inside the circle and raises IllConditionedEnergy.
        """
        m = m or self.circle_points
        r = r if r is not None else self.circle_radius(n, center)
        zs = self.circle_points_for(center, r, m)
        vals = [self.direct(n, z, derivative) for z in zs]
        if derivative:
            Ms = np.array([v[0] for v in vals])
            dMs = np.array([v[1] for v in vals])
        else:
            Ms = np.array(vals)
        mean = Ms.mean(axis=0)
        residue = np.tensordot(zs - center, Ms, axes=(0, 0)) / m
        if np.linalg.norm(residue, 2) > 1e-6 * r * (1.0 + np.linalg.norm(mean, 2)):
            raise IllConditionedEnergy(
                f"transfer at site {n} has a pole within {r:.2e} of E={center}",
                site=n, energy=center)
        if derivative:
            return mean, dMs.mean(axis=0)
        return mean

    def check_h3_near(self, n: int, E):
        s = self.sites[n - 1]
        r = self.radii[n - 1]
        g = self.gradings[n - 1]
        for value, vecs in s.spectral.clusters():
            if abs(value - E) > 0.25 * r:
                continue
            for label, p in (("-", g.p_minus), ("+", g.p_plus)):
                if p.shape[0] == 0:
                    continue
                pv = p @ vecs
                sig = _sigma_min(pv @ pv.conj().T)
                if sig <= self.inv_tol:
                    raise Hypothesis3Violated(
                        f"p{label} P p{label}* singular at site {n}, E={value:.12g} "
                        f"(sigma_min={sig:.3e})")

    # dispatch ---------------------------------------------------------------

    def transfer(self, n: int, E, derivative: bool = False):
        if self.near_spectrum(n, E):
            self.check_h3_near(n, E)
            return self.circle_mean(n, E, derivative)
        return self.direct(n, E, derivative)


def _wrap(chain, n, E, M, extended=False):
    return ReducedTransferMatrix(n, complex(E), M, extended)


def interior_transfer(op, gradings, n: int, E, **kw) -> ReducedTransferMatrix:
    """Reduced transfer across an interior site ``n`` (``2 <= n <= N-1``).

    Parameters
    ----------
    op : BlockJacobiOperator
    gradings : list of SiteGrading
        Channel gradings, e.g. from :func:`channels.require_admissible`.
    n : int
        Site index.
    E : complex
        Energy; near ``spec(V_n)`` the removable singularity is filled in by
        the circle mean.

    Raises
    ------
    IllConditionedEnergy
        At a genuine pole, i.e. where ``G-+`` is singular away from ``spec(V_n)``.
    """
    chain = TransferChain.of(op, gradings, **kw)
    if not 2 <= n <= chain.N - 1:
        raise ValueError(f"interior sites are 2..{chain.N - 1}, got {n}")
    return _wrap(chain, n, E, chain.transfer(n, E), chain.near_spectrum(n, E))


def boundary_transfer_left(op, gradings, E, **kw) -> ReducedTransferMatrix:
    chain = TransferChain.of(op, gradings, **kw)
    return _wrap(chain, 1, E, chain.transfer(1, E), chain.near_spectrum(1, E))


def boundary_transfer_right(op, gradings, E, **kw) -> ReducedTransferMatrix:
    chain = TransferChain.of(op, gradings, **kw)
    n = chain.N
    return _wrap(chain, n, E, chain.transfer(n, E), chain.near_spectrum(n, E))


def site_transfer(op, gradings, n: int, E, **kw) -> ReducedTransferMatrix:
    """Transfer across any site ``1..N``, boundary or interior."""
    chain = TransferChain.of(op, gradings, **kw)
    return _wrap(chain, n, E, chain.transfer(n, E), chain.near_spectrum(n, E))


def analytic_extension(op, gradings, n: int, E0, m: int = CIRCLE_POINTS,
                       radius: float | None = None, **kw) -> ReducedTransferMatrix:
    """Value of the transfer at a removable singularity ``E0`` in ``spec(V_n)``.

    Computed as ``(1/m) sum_k T(E0 + r exp(2 pi i (k + 1/2) / m))``, which is
    exact up to ``O(r^m)`` for an analytic function.

    Raises
    ------
    Hypothesis3Violated
        If a compressed projector at ``E0`` is singular, so the pole is genuine.
    """
    chain = TransferChain.of(op, gradings, **kw)
    chain.check_h3_near(n, E0)
    M = chain.circle_mean(n, E0, m=m, r=radius)
    return _wrap(chain, n, E0, M, True)


def extension_limit_blocks(op, gradings, n: int, E0, m: int = CIRCLE_POINTS, **kw) -> dict:
    """Circle means of the factor entries ``X^-1``, ``X^-1 G--``, ``G++ X^-1`` at ``E0``."""
    chain = TransferChain.of(op, gradings, **kw)
    s = chain.sites[n - 1]
    r = chain.circle_radius(n, E0)
    out = {"inv": 0, "inv_gmm": 0, "gpp_inv": 0}
    zs = chain.circle_points_for(E0, r, m)
    for z in zs:
        g = s.table(z, ("-", "+"))
        Xi = _inv(g["-+"])
        out["inv"] = out["inv"] + Xi / m
        out["inv_gmm"] = out["inv_gmm"] + Xi @ g["--"] / m
        out["gpp_inv"] = out["gpp_inv"] + g["++"] @ Xi / m
    return out


def transfer_derivative(op, gradings, n: int, E, **kw) -> np.ndarray:
    """Energy derivative of the transfer across site ``n``."""
    chain = TransferChain.of(op, gradings, **kw)
    return chain.transfer(n, E, derivative=True)[1]


@dataclass
class SolutionBlocks:
    """A generalised eigenfunction rebuilt from reduced data.

    ``reduced[n]`` is the reduced state after site ``n`` (``n = 0..N-1``).
    """

    energy: complex
    psi_minus: list
    psi_zero: list
    psi_plus: list
    psi: list
    reduced: list
    residual: float
    eigencondition_defect: float

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate(self.psi)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))


def _middle_piece(chain, n, E, x, y_prev, psi_m, psi_p):
    """``psi^0_n`` from the Green blocks, or by least squares next to ``spec(V_n)``."""
    s = chain.sites[n - 1]
    g = chain.gradings[n - 1]
    if g.p_zero.shape[0] == 0:
        return np.zeros(0, dtype=complex)
    if s.distance(E) > 0.25 * chain.radii[n - 1]:
        out = np.zeros(g.p_zero.shape[0], dtype=complex)
        if n < chain.N:
            out = out + s.block("0", "+", E) @ x
        if n > 1:
            out = out + s.block("0", "-", E) @ (chain.hop(n).conj().T @ y_prev)
        return out
    rhs = np.zeros(g.dim, dtype=complex)
    if n < chain.N:
        rhs = rhs + g.p_plus.conj().T @ x
    if n > 1:
        rhs = rhs + g.p_minus.conj().T @ (chain.hop(n).conj().T @ y_prev)
    K = E * np.eye(g.dim) - s.V
    known = g.p_minus.conj().T @ psi_m + g.p_plus.conj().T @ psi_p
    sol, *_ = np.linalg.lstsq(K @ g.p_zero.conj().T, rhs - K @ known, rcond=None)
    return sol


def _eigencondition_defect(chain, E, last, scale):
    """Upper component of ``T_N`` applied to the last reduced state, relative to ``scale``.

    ``scale`` is the norm of the rebuilt state, so the defect reads as a
    backward error of the right boundary condition and does not blow up for
    eigenvectors that carry little weight at the right end.  The upper
    component is ``(G--_N)^-1 (psi^-_N - G--_N T^_N^* psi^+_{N-1})``; it is
    weighted by ``min(1, sigma_min(G--_N))`` so rounding is not amplified
    by ``(G--_N)^-1`` next to a pole, and at the pole itself the bracket is
    used directly.
    """
    N = chain.N
    s = chain.sites[N - 1]
    scale = max(scale, 1e-300)
    weight = 1.0
    if not chain.near_spectrum(N, E):
        weight = min(1.0, _sigma_min(s.block("-", "-", E)))
    try:
        out = chain.transfer(N, E) @ last
        return float(weight * np.linalg.norm(out[:chain.rank]) / scale)
    except IllConditionedEnergy:
        psi_m = chain.hop_inv(N) @ last[:chain.rank]
        other = s.block("-", "-", E) @ chain.hop(N).conj().T @ last[chain.rank:]
        return float(np.linalg.norm(psi_m - other) / scale)


def assemble_solution(chain: TransferChain, E, reduced) -> SolutionBlocks:
    """Full state from the reduced states ``reduced[0..N-1]``."""
    N, L = chain.N, chain.rank
    psi_m = [np.zeros(0, dtype=complex)] + [chain.hop_inv(n) @ reduced[n - 1][:L]
                                             for n in range(2, N + 1)]
    psi_p = [reduced[n][L:] for n in range(1, N)] + [np.zeros(0, dtype=complex)]
    psi_0, psi = [], []
    for n in range(1, N + 1):
        g = chain.gradings[n - 1]
        x = reduced[n][:L] if n < N else None
        y_prev = psi_p[n - 2] if n > 1 else None
        pm = psi_m[n - 1] if n > 1 else np.zeros(0, dtype=complex)
        pp = psi_p[n - 1] if n < N else np.zeros(0, dtype=complex)
        p0 = _middle_piece(chain, n, E, x, y_prev, pm, pp)
        psi_0.append(p0)
        psi.append(g.p_minus.conj().T @ pm + g.p_zero.conj().T @ p0 + g.p_plus.conj().T @ pp)
    Hpsi = apply(chain.op, psi)
    res = float(np.sqrt(sum(np.linalg.norm(h - E * p) ** 2 for h, p in zip(Hpsi, psi))))
    norm = float(np.sqrt(sum(np.linalg.norm(p) ** 2 for p in psi)))
    defect = _eigencondition_defect(chain, E, reduced[N - 1], norm)
    return SolutionBlocks(complex(E), psi_m, psi_0, psi_p, psi, list(reduced), res, defect)


def reconstruct_solution(op, gradings, E, psi_plus_1, **kw) -> SolutionBlocks:
    """Propagate the initial datum ``(psi^+_1, 0)`` and rebuild the full state.

    The result satisfies the left boundary condition and the recurrence at
    sites ``1..N-1``; it is an eigenvector exactly when the upper component
    of the last transfer image vanishes (``eigencondition_defect`` ~ 0).
    Where ``G++_1`` is singular the datum is used as the upper component of
    the first reduced state instead, since ``(G++_1)^-1`` does not exist.
    """
    chain = TransferChain.of(op, gradings, **kw)
    L = chain.rank
    state = np.concatenate([np.asarray(psi_plus_1, dtype=complex).reshape(L), np.zeros(L)])
    reduced = [state]
    for n in range(1, chain.N):
        try:
            state = chain.transfer(n, E) @ state
        except IllConditionedEnergy:
            if n != 1:
                raise
            # G++_1 singular: the plane T_1 (1, 0) is still the graph (c, G++_1 c);
            # the datum is taken as c, which keeps psi^+_1 = G++_1 c finite
            c = reduced[0][:L]
            state = np.concatenate([c, chain.sites[0].block("+", "+", E) @ c])
            reduced[0] = np.concatenate([state[L:], np.zeros(L, dtype=complex)])
        reduced.append(state)
    return assemble_solution(chain, E, reduced)
