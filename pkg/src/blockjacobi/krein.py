"""Krein-space geometry and eigenvalue counting by spectral flow.

Frames are ``2L x L`` matrices; a frame ``Phi`` is Lagrangian when
``Phi^* I Phi = 0`` for the skew form ``I = [[0, -1], [1, 0]]``.  The
stereographic projection sends the plane spanned by ``Phi`` to the unitary
``(top - i bot)(top + i bot)^-1``.  Propagating the Dirichlet plane
``(1, 0)`` through the reduced transfers and projecting gives the matrix
Pruefer phase ``U(E)``; ``dim Ker(H - E) = dim Ker(U(E) + 1)`` and the
eigenphases of ``U(E)`` turn counter-clockwise as ``E`` grows, so counting
their passages through ``-1`` counts eigenvalues.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import schur, solve_triangular

from ._parallel import ordered_map
from .errors import MalformedFrame, NonMonotoneCrossing
from .channels import SiteGrading
from .operator import BlockJacobiOperator
from .transfer import TransferChain, assemble_solution

TOL_ANGLE = 1e-6
PHASE_STEP_MAX = np.pi / 4
FRAME_TOL = 1e-8
LOCATE_TOL_ANGLE = 1e-13
ENERGY_TOL = 1e-12
SWITCH_WIDTH = 1e-7
SUB_FLOOR = 1e-13
VELOCITY_GAP_MAX = 1e-2
BACKWARD_TOL = 1e-9


@dataclass(frozen=True)
class KreinForm:
    rank: int

    @property
    def matrix(self) -> np.ndarray:
        return krein_form(self.rank)

    def defect(self, T, Tconj=None) -> float:
        return iunitarity_defect(T, T if Tconj is None else Tconj)


def krein_form(L: int) -> np.ndarray:
    """``[[0, -1], [1, 0]]`` in ``L x L`` blocks."""
    eye = np.eye(L)
    zero = np.zeros((L, L))
    return np.block([[zero, -eye], [eye, zero]])


def iunitarity_defect(T, Tconj) -> float:
    """``||Tconj^* I T - I||`` where ``Tconj`` is the transfer at the conjugate energy."""
    T = np.asarray(T)
    Tconj = np.asarray(Tconj)
    J = krein_form(T.shape[0] // 2)
    return float(np.linalg.norm(Tconj.conj().T @ J @ T - J, 2))


def isotropy_defect(phi) -> float:
    phi = np.asarray(phi)
    J = krein_form(phi.shape[0] // 2)
    return float(np.linalg.norm(phi.conj().T @ J @ phi, 2))


def _cayley_parts(phi):
    L = phi.shape[1]
    top, bot = phi[:L], phi[L:]
    s = 2 ** -0.5
    return s * (top - 1j * bot), s * (top + 1j * bot)


def stereographic(phi) -> np.ndarray:
    """Unitary image of the plane spanned by the frame ``phi``.

    Invariant under ``phi -> phi V`` for invertible ``V``.

    Raises
    ------
    MalformedFrame
        If ``top + i bot`` is singular (``phi`` is not a Lagrangian frame).
    """
    phi = np.asarray(phi, dtype=complex)
    a, b = _cayley_parts(phi)
    if np.linalg.cond(b) > 1e12:
        raise MalformedFrame("frame is not Lagrangian: stereographic denominator is singular")
    return np.linalg.solve(b.T, a.T).T


def eigenphases(U) -> np.ndarray:
    """Arguments in ``(-pi, pi]`` of the eigenvalues of a unitary, sorted."""
    ang = np.angle(np.linalg.eigvals(U))
    ang[ang <= -np.pi] += 2 * np.pi
    return np.sort(ang)


def intersection_dimension(phi, phi_prime, tol_angle: float = TOL_ANGLE) -> int:
    """Dimension of ``Ran(phi) & Ran(phi_prime)`` for two Lagrangian frames."""
    W = stereographic(phi_prime).conj().T @ stereographic(phi)
    return int(np.sum(np.abs(np.angle(np.linalg.eigvals(W))) <= tol_angle))


# frame propagation -------------------------------------------------------------


@dataclass
class Sweep:
    """Normalised frames ``frames[n]`` spanning the plane ``T_n ... T_1 (1, 0)``.

    ``R[n]`` is the triangular factor of the raw frame built at site ``n``
    and ``links[n]`` maps coefficients on ``frames[n]`` to those on
    ``frames[n - 1]`` describing the same solution.  ``forms[n]`` is
    ``Phi_n^* I dPhi_n/dE`` in the basis of ``frames[n]`` (only when the
    sweep was run with ``derivative=True``).
    """

    energy: complex
    frames: list
    R: list
    forms: list | None = None
    links: dict = field(default_factory=dict)

    def back(self, n: int, c):
        """Coefficients on ``frames[n - 1]`` of the state ``frames[n] c``."""
        return self.links[n] @ c

    @property
    def form(self):
        return None if self.forms is None else self.forms[-1]


def _null_space(K, k, keep):
    """``k``-dimensional null space of ``K``, most visible in the rows ``keep``.

    Directions beyond ``k`` (a state of ``V_n`` that no hopping sees) are
    dropped by keeping the combinations with the largest weight on ``keep``.
    """
    _, sv, vh = np.linalg.svd(K)
    rank = int(np.sum(sv > 1e-13 * max(sv[0], 1.0)))
    null = vh[rank:].conj().T
    if null.shape[1] > k:
        _, _, wh = np.linalg.svd(null[keep])
        null = null @ wh[:k].conj().T
    return null


def _site_step(chain, n, E, phi, form_prev):
    """Plane ``T_n Ran(phi)`` from the site equations, without inverting anything.

    With the full site vector ``psi``, incoming ``q = T^_n^* psi^+_{n-1}``
    and outgoing ``b = T^_{n+1} psi^-_{n+1}`` the site obeys
    ``(E - V_n) psi = p-^* q + p+^* b`` together with ``p- psi = psi^-_n``.
    Solving this as one null space needs neither ``(E - V_n)^-1`` nor
    ``(G-+)^-1``, so the plane passes through ``spec(V_n)`` and through
    genuine poles of the transfer alike.  At the right end ``b`` is the
    Dirichlet defect and enters through ``p-`` like ``q``; at the left end
    there is no incoming data.

    The form gains ``|psi|^2``, which is why the phases only turn forward.

    Returns the raw image frame, the map from its coefficients to those of
    ``phi`` and its form (``None`` without ``form_prev``).
    """
    L = chain.rank
    g = chain.gradings[n - 1]
    V = chain.op.block(n)
    dim = V.shape[0]
    A = E * np.eye(dim) - V
    pm = g.p_minus.conj().T
    pp = g.p_plus.conj().T
    if n == 1:
        K = np.hstack([A, -pp])
        null = _null_space(K, L, slice(dim, None))
        psi, b = null[:dim], null[dim:]
        raw = np.vstack([b, g.p_plus @ psi])
        c = np.eye(L)
    else:
        T = chain.hop(n)
        P = np.linalg.solve(T, phi[:L])
        Q = T.conj().T @ phi[L:]
        out = pm if n == chain.N else pp
        K = np.block([[A, -pm @ Q, -out],
                      [g.p_minus, -P, np.zeros((L, L))]])
        null = _null_space(K, L, slice(dim, None))
        psi, c, b = null[:dim], null[dim:dim + L], null[dim + L:]
        top = g.p_minus @ psi if n == chain.N else g.p_plus @ psi
        raw = np.vstack([b, top])
    form = None
    if form_prev is not None:
        form = psi.conj().T @ psi
        if n > 1:
            form = form + c.conj().T @ form_prev @ c
    return raw, c, form


def sweep(chain: TransferChain, E, derivative: bool = False) -> Sweep:
    """Propagate the Dirichlet frame ``(1, 0)`` across all sites at energy ``E``."""
    L = chain.rank
    eye = np.eye(L, dtype=complex)
    phi0 = np.vstack([eye, np.zeros((L, L), dtype=complex)])
    frames = [phi0]
    Rs = [eye]
    forms = [np.zeros((L, L), dtype=complex)] if derivative else None
    links = {}
    for n in range(1, chain.N + 1):
        raw, link, form = _site_step(chain, n, E, frames[-1], forms[-1] if derivative else None)
        q, r = np.linalg.qr(raw)
        ri = solve_triangular(r, eye)
        frames.append(q)
        Rs.append(r)
        links[n] = link @ ri
        if derivative:
            W = ri.conj().T @ form @ ri
            forms.append(0.5 * (W + W.conj().T))
    return Sweep(complex(E), frames, Rs, forms, links)


def propagate_frames(op, gradings, E, check: bool = True) -> list:
    """Frames ``Phi_0 .. Phi_N`` (orthonormalised) at a real energy ``E``.

    Raises
    ------
    MalformedFrame
        If ``check`` and a frame loses isotropy beyond ``1e-8``.
    """
    chain = TransferChain.of(op, gradings)
    frames = sweep(chain, E).frames
    if check:
        for n, phi in enumerate(frames):
            d = isotropy_defect(phi)
            if d > FRAME_TOL:
                raise MalformedFrame(f"frame {n} not Lagrangian at E={E}: defect {d:.3e}")
    return frames


def _unitary_from(phi, form=None):
    """Stereographic image of ``phi`` and, given ``Phi^* I dPhi``, its velocity."""
    a, b = _cayley_parts(phi)
    U = np.linalg.solve(b.T, a.T).T
    if form is None:
        return U, None
    bi = np.linalg.inv(b)
    W = bi.conj().T @ form @ bi
    return U, 0.5 * (W + W.conj().T)


def prufer_and_velocity(chain: TransferChain, E, derivative: bool = True):
    """Pruefer unitary ``U(E)`` and, optionally, the Hermitian velocity ``(1/i) U^* dU/dE``."""
    sw = sweep(chain, E, derivative)
    return _unitary_from(sw.frames[-1], sw.form)


def prufer(op, gradings, E) -> np.ndarray:
    """Matrix Pruefer phase at the right end of the chain."""
    return prufer_and_velocity(TransferChain.of(op, gradings), E, derivative=False)[0]


def monotonicity_certificate(op, gradings, E) -> float:
    """Smallest eigenvalue of ``(1/i) U^* dU/dE``; positive when the phases turn forward.

    ``Phi^* I dPhi`` is accumulated site by site as a sum of squared site
    norms and mapped to the Pruefer velocity through the Cayley parts of
    the final frame.
    """
    _, W = prufer_and_velocity(TransferChain.of(op, gradings), E, derivative=True)
    return float(np.linalg.eigvalsh(W)[0])


# two-sided frames ----------------------------------------------------------------


def reflected_chain(chain: TransferChain) -> TransferChain:
    """The chain read from right to left, with in and out channels swapped.

    Its reduced hoppings are the adjoints ``T^_n^*``, so a reduced state
    ``(T^ psi^-, psi^+)`` at an interface of the original chain reads
    ``(T^^* psi^+, psi^-)`` in the reflected one.
    """
    cached = getattr(chain, "_reflected", None)
    if cached is not None:
        return cached
    op = chain.op
    rop = BlockJacobiOperator(tuple(reversed(op.V)), tuple(t.conj().T for t in reversed(op.T)))
    rg = [SiteGrading(g.p_plus, g.p_zero, g.p_minus) for g in reversed(chain.gradings)]
    out = TransferChain(rop, rg, pole_guard=chain.pole_guard, inv_tol=chain.inv_tol,
                        circle_points=chain.circle_points)
    chain._reflected = out
    return out


@dataclass
class TwoSided:
    """Left frames (Dirichlet at site 1) and right frames (Dirichlet at site N) at one energy.

    Interface ``m`` sits between sites ``m`` and ``m + 1``; ``m = N`` is the
    right end, where the right frame is the plane ``(0, 1)``.
    """

    chain: TransferChain
    left: Sweep
    right: Sweep

    @property
    def N(self) -> int:
        return self.chain.N

    def right_frame(self, m: int):
        """Right frame at interface ``m < N`` in the original coordinates, with its form."""
        L = self.chain.rank
        k = self.N - m
        phi = self.right.frames[k]
        T = self.chain.hop(m + 1)
        frame = np.vstack([T @ phi[L:], np.linalg.solve(T.conj().T, phi[:L])])
        # the change of coordinates flips the sign of the skew form
        form = None if self.right.forms is None else -self.right.forms[k]
        return frame, form

    def relative(self, m: int):
        """``V_m = -U_R^* U_L`` and its velocity at interface ``m``.

        ``-1`` eigenvalues of ``V_m`` are the intersections of the two
        planes, i.e. the eigenvectors; ``V_N`` is the Pruefer unitary.
        """
        deriv = self.left.forms is not None
        UL, WL = _unitary_from(self.left.frames[m], self.left.forms[m] if deriv else None)
        if m == self.N:
            return UL, WL
        phi, form = self.right_frame(m)
        UR, WR = _unitary_from(phi, form)
        V = -UR.conj().T @ UL
        if not deriv:
            return V, None
        X = UL.conj().T @ UR
        W = WL - X @ WR @ X.conj().T
        return V, 0.5 * (W + W.conj().T)

    def intersection_matrix(self, m: int) -> np.ndarray:
        """Matrix whose null vectors ``(c_L, c_R)`` give ``Phi_L c_L = Phi_R c_R``."""
        if m == self.N:
            return self.left.frames[m][:self.chain.rank]
        phi, _ = self.right_frame(m)
        q, _ = np.linalg.qr(phi)
        return np.hstack([self.left.frames[m], -q])


def two_sided(chain: TransferChain, E, derivative: bool = False) -> TwoSided:
    return TwoSided(chain, sweep(chain, E, derivative), sweep(reflected_chain(chain), E, derivative))


def relative_unitaries(chain: TransferChain, E) -> dict:
    """``{m: (V_m, W_m)}`` for every interface ``m = 1 .. N``."""
    ts = two_sided(chain, E, derivative=True)
    return {m: ts.relative(m) for m in range(1, chain.N + 1)}


def _phases(U, W):
    T, Z = schur(U, output="complex")
    ph = np.angle(np.diag(T))
    ph[ph <= -np.pi] += 2 * np.pi
    vel = np.real(np.einsum("ij,ik,kj->j", Z.conj(), W, Z)) if W is not None else None
    return ph, vel


def _at_minus_one(ph, vel, tol_angle, energy_tol):
    gap = np.pi - np.abs(ph)
    # the linear estimate is only trusted for phases already close to -1
    fast = (gap <= VELOCITY_GAP_MAX) & (gap <= energy_tol * np.maximum(vel, 0.0))
    return (gap <= tol_angle) | fast


def _interface_counts(chain, E, tol_angle, energy_tol) -> dict:
    etol = energy_tol * (1.0 + chain.op.gershgorin_bound())
    counts = {}
    for m, (V, W) in relative_unitaries(chain, E).items():
        ph, vel = _phases(V, W)
        counts[m] = int(np.sum(_at_minus_one(ph, vel, tol_angle, etol)))
    return counts


def multiplicity_at(op, gradings, E, tol_angle: float = TOL_ANGLE,
                    energy_tol: float = ENERGY_TOL) -> int:
    """``dim Ker(U(E) + 1)``, i.e. the multiplicity of ``E`` as an eigenvalue.

    The kernel dimension is the same for the relative unitary at every
    interface; numerically an intersection can only be missed, never
    invented, so the largest count over the interfaces is returned.  An
    eigenvector with little weight at the right end turns the right-end
    phase over an energy window below rounding, which is why the interior
    interfaces are consulted at all.

    An eigenphase counts when it is within ``tol_angle`` of ``pi``, or when
    it would reach ``pi`` within ``energy_tol * (1 + ||H||)`` at its current
    velocity.
    """
    chain = TransferChain.of(op, gradings)
    return max(_interface_counts(chain, E, tol_angle, energy_tol).values())


# eigenvectors from frames --------------------------------------------------------


def _pull_back(sw: Sweep, c, upto: int) -> dict:
    """Reduced states ``frames[n] c_n`` for ``n = upto..1`` from ``c_upto``."""
    out = {upto: sw.frames[upto] @ c}
    for n in range(upto, 1, -1):
        c = sw.back(n, c)
        out[n - 1] = sw.frames[n - 1] @ c
    return out


def solutions_at(op, gradings, E, tol_angle: float = TOL_ANGLE) -> list:
    """Eigenvectors at ``E`` rebuilt from the reduced data, one per kernel direction.

    The interface where the left and right planes intersect most cleanly is
    chosen, the intersection vectors are pulled back through the stored
    triangular factors on both sides (only ever dividing by the growth of
    the frames) and the full state is assembled from the reduced states.
    """
    chain = TransferChain.of(op, gradings)
    k = multiplicity_at(op, gradings, E, tol_angle)
    if k == 0:
        return []
    ts = two_sided(chain, E)
    N, L = chain.N, chain.rank
    best = None
    for m in range(1, N + 1):
        _, sv, vh = np.linalg.svd(ts.intersection_matrix(m))
        score = sv[-k] / (sv[-k - 1] if len(sv) > k else 1.0)
        if best is None or score < best[0]:
            best = (score, m, vh[-k:].conj())
    _, m, null = best
    out = []
    for v in null:
        reduced = [None] * N
        if m == N:
            for n, x in _pull_back(ts.left, v, N).items():
                if n < N:
                    reduced[n] = x
        else:
            for n, x in _pull_back(ts.left, v[:L], m).items():
                reduced[n] = x
            phi, _ = ts.right_frame(m)
            _, r = np.linalg.qr(phi)
            # undo the normalisation of the right frame used in the intersection matrix
            cR = solve_triangular(r, v[L:])
            for k_r, y in _pull_back(ts.right, cR, N - m).items():
                n = N - k_r
                if n > m:
                    T = chain.hop(n + 1)
                    reduced[n] = np.concatenate([T @ y[L:], np.linalg.solve(T.conj().T, y[:L])])
        reduced[0] = np.concatenate([reduced[1][L:], np.zeros(L, dtype=complex)])
        sol = assemble_solution(chain, E, reduced)
        reduced = [x / sol.norm for x in reduced]
        out.append(assemble_solution(chain, E, reduced))
    return out


# spectral flow -----------------------------------------------------------------


@dataclass
class Crossing:
    """An eigenphase passing ``-1`` inside the grid step ``(lo, hi]``."""

    energy: float
    direction: int
    phase_index: int
    lo: float
    hi: float


@dataclass
class FlowResult:
    """Eigenphase trajectories of the Pruefer unitary over an energy window.

    ``phases[i]`` holds the sorted eigenphases in ``(-pi, pi]`` at
    ``energies[i]``; ``count`` is the number of eigenvalues in
    ``(e_lo, e_hi]``; ``counts`` gives the same for every checkpoint.
    ``unresolved`` lists grid steps whose crossings could not be brought
    into agreement with the inertia guard (normally empty).
    """

    e_lo: float
    e_hi: float
    energies: np.ndarray
    phases: np.ndarray
    crossings: list
    count: int
    counts: dict = field(default_factory=dict)
    tol_angle: float = TOL_ANGLE
    min_displacement: float = 0.0
    rank: int = 0
    unresolved: list = field(default_factory=list)

    def to_summary(self) -> dict:
        return {
            "e_lo": self.e_lo,
            "e_hi": self.e_hi,
            "count": self.count,
            "grid_points": int(len(self.energies)),
            "tol_angle": self.tol_angle,
            "crossings": [{"energy": c.energy, "direction": c.direction} for c in self.crossings],
            "unresolved": [list(u) for u in self.unresolved],
        }


def default_window(op) -> tuple:
    """``(-b - 1, b + 1)`` with ``b = max ||V_n|| + 2 max ||T_n||``."""
    b = op.gershgorin_bound()
    return -b - 1.0, b + 1.0


def inertia_count(op, E, rel_tol: float = 1e-13):
    """Number of eigenvalues of ``H`` below ``E`` from block Schur complements.

    Sylvester's law of inertia applied to the block LDL^* factorisation of
    ``H - E``.  Returns ``None`` when a pivot block is numerically singular.
    """
    scale = rel_tol * (1.0 + op.gershgorin_bound())
    neg = 0
    prev = None
    for n in range(1, op.N + 1):
        A = op.block(n) - E * np.eye(op.dims[n - 1])
        if prev is not None:
            lam, Q = prev
            QT = Q.conj().T @ op.hopping(n)
            A = A - QT.conj().T @ (QT / lam[:, None])
        lam, Q = np.linalg.eigh(0.5 * (A + A.conj().T))
        if np.min(np.abs(lam)) <= scale:
            return None
        neg += int(np.sum(lam < 0))
        prev = (lam, Q)
    return neg


@dataclass
class _Point:
    energy: float
    phases: np.ndarray
    velocities: np.ndarray
    inertia: int | None = None


def _evaluate(chain, E, interface=None) -> _Point:
    """Phases and velocities at ``E`` (right end, or interface ``m``)."""
    if interface is None or interface == chain.N:
        U, W = prufer_and_velocity(chain, E, derivative=True)
    else:
        U, W = two_sided(chain, E, True).relative(interface)
    ph, vel = _phases(U, W)
    order = np.argsort(ph)
    return _Point(float(E), ph[order], vel[order], inertia_count(chain.op, E))


def _wrap(x):
    return (x + np.pi) % (2 * np.pi) - np.pi


def _match(pa, pb):
    """Greedy assignment of phases by smallest angular displacement."""
    L = len(pa)
    d = _wrap(pb[None, :] - pa[:, None])
    perm = np.empty(L, dtype=int)
    used_a, used_b = set(), set()
    for idx in np.argsort(np.abs(d), axis=None):
        i, j = divmod(int(idx), L)
        if i in used_a or j in used_b:
            continue
        perm[i] = j
        used_a.add(i)
        used_b.add(j)
        if len(used_a) == L:
            break
    return perm, d[np.arange(L), perm]


def _needs_split(a: _Point, b: _Point, step_max):
    perm, disp = _match(a.phases, b.phases)
    h = b.energy - a.energy
    predicted = 0.5 * h * (a.velocities + b.velocities[perm])
    if np.max(np.abs(disp)) > step_max or np.max(np.abs(predicted)) > step_max:
        return True, perm, disp
    if np.max(np.abs(disp - predicted)) > step_max / 4:
        return True, perm, disp
    # phases only turn forward: a backward displacement hides an unresolved turn
    if np.min(disp) < -BACKWARD_TOL:
        return True, perm, disp
    return False, perm, disp


def _levels_between(lo, hi):
    """Number of odd multiples of pi in ``(lo, hi]``."""
    return int(np.floor((hi - np.pi) / (2 * np.pi)) - np.floor((lo - np.pi) / (2 * np.pi)))


def _step(theta, perm, disp, a: _Point, b: _Point, tol_angle):
    """Advance the unwrapped phases over one grid step and list its crossings."""
    h = b.energy - a.energy
    new_theta = np.empty(len(theta))
    found = []
    for j in range(len(theta)):
        start = theta[j]
        end = start + disp[j]
        new_theta[perm[j]] = end
        n_fwd = _levels_between(start + tol_angle, end + tol_angle)
        if n_fwd < 0:
            raise NonMonotoneCrossing(
                f"eigenphase crossed -1 backwards between E={a.energy:.15g} and E={b.energy:.15g}")
        for k in range(n_fwd):
            level = np.pi * (2 * np.floor((start + tol_angle - np.pi) / (2 * np.pi)) + 3 + 2 * k)
            frac = (level - start) / disp[j] if disp[j] != 0 else 1.0
            found.append(Crossing(float(a.energy + np.clip(frac, 0.0, 1.0) * h), 1, j,
                                  a.energy, b.energy))
    return new_theta, found


@dataclass
class _Walk:
    accepted: list
    crossings: list
    unresolved: list
    min_disp: float


def _walk(chain, points, interface, tol_angle, step_max, floor, switch=None) -> _Walk:
    """Follow the phases through ``points``, bisecting where they are not resolved.

    Steps wider than ``floor`` are bisected when the phase motion is too
    large or the crossings disagree with the inertia guard.  At the floor a
    still-disagreeing step is handed to ``switch`` (another interface); if
    that fails too the step is recorded as unresolved.
    """
    accepted = [points[0]]
    theta = points[0].phases.copy()
    crossings, unresolved = [], []
    min_disp = 0.0
    stack = list(reversed(points[1:]))
    while stack:
        b = stack[-1]
        a = accepted[-1]
        h = b.energy - a.energy
        split, perm, disp = _needs_split(a, b, step_max)
        if split and h > floor:
            stack.append(_evaluate(chain, a.energy + 0.5 * h, interface))
            continue
        if split:
            # below the floor phases are only known modulo 2 pi; they never turn backwards
            disp = np.where(disp < -BACKWARD_TOL, disp + 2 * np.pi, disp)
        new_theta, found = _step(theta, perm, disp, a, b, tol_angle)
        expected = None if a.inertia is None or b.inertia is None else b.inertia - a.inertia
        if expected is not None and len(found) != expected:
            if h > floor:
                stack.append(_evaluate(chain, a.energy + 0.5 * h, interface))
                continue
            other = switch(a, b, expected) if switch is not None else None
            if other is not None:
                found = other
            else:
                unresolved.append((a.energy, b.energy, len(found), expected))
        min_disp = min(min_disp, float(np.min(disp)))
        crossings.extend(found)
        theta = new_theta
        accepted.append(stack.pop())
    return _Walk(accepted, crossings, unresolved, min_disp)


def _switcher(chain, tol_angle, step_max, sub_floor):
    """Recount a step at the interior interface that resolves it, if any."""

    def switch(a: _Point, b: _Point, expected: int):
        c = 0.5 * (a.energy + b.energy)
        ts = two_sided(chain, c, True)
        speed = {m: float(np.max(np.linalg.eigvalsh(ts.relative(m)[1]))) for m in range(1, chain.N)}
        for m in sorted(speed, key=lambda m: -speed[m]):
            try:
                pts = [_evaluate(chain, e, m) for e in (a.energy, c, b.energy)]
                sub = _walk(chain, pts, m, tol_angle, step_max, sub_floor)
            except NonMonotoneCrossing:
                continue
            if not sub.unresolved and len(sub.crossings) == expected:
                return [Crossing(x.energy, x.direction, x.phase_index, a.energy, b.energy)
                        for x in sub.crossings]
        return None

    return switch


def spectral_flow(op, gradings, e_lo=None, e_hi=None, tol_angle: float = TOL_ANGLE,
                  phase_step_max: float = PHASE_STEP_MAX, initial_points: int | None = None,
                  checkpoints=()) -> FlowResult:
    """Count eigenvalues in ``(e_lo, e_hi]`` by eigenphase passages through ``-1``.

    The grid starts uniform and is bisected wherever an eigenphase moves by
    more than ``phase_step_max`` or disagrees with the trapezoidal estimate
    from the phase velocities.  A phase sitting within ``tol_angle`` of
    ``-1`` at ``e_hi`` is counted (eigenvalue at the closed end), one
    within ``tol_angle`` of ``-1`` at ``e_lo`` is not.

    An eigenvector with little weight at the right end turns its phase once
    around inside a window that no grid resolves, and that can be narrower
    than the rounding of ``E`` itself.  As a resolution guard each step is
    also compared with the change in the block Sylvester inertia of
    ``H - E``; a disagreeing step is bisected and, once narrow, recounted
    with the relative unitary at an interior interface, where the same
    eigenvector turns the phase over a much wider window.  Counts always
    come from phase crossings; steps that stay in disagreement are listed
    in ``FlowResult.unresolved``.

    Parameters
    ----------
    e_lo, e_hi : float, optional
        Window; defaults from :func:`default_window`.
    checkpoints : sequence of float
        Extra energies inside the window where the running count
        ``#(e_lo, c]`` is recorded in ``FlowResult.counts``.

    Raises
    ------
    NonMonotoneCrossing
        If some eigenphase passes ``-1`` backwards.
    """
    chain = TransferChain.of(op, gradings)
    lo_d, hi_d = default_window(op)
    e_lo = lo_d if e_lo is None else float(e_lo)
    e_hi = hi_d if e_hi is None else float(e_hi)
    if e_hi < e_lo:
        raise ValueError(f"empty window: e_lo={e_lo} > e_hi={e_hi}")
    checkpoints = sorted({float(c) for c in checkpoints if e_lo <= c <= e_hi})
    scale = 1.0 + op.gershgorin_bound()
    if initial_points is None:
        span = (e_hi - e_lo) / max(hi_d - lo_d, 1e-300)
        initial_points = int(np.clip(np.ceil(span * (4 * op.total_dim + 32)), 3, 4097))
    grid = np.union1d(np.linspace(e_lo, e_hi, initial_points), checkpoints)
    points = ordered_map(lambda E: _evaluate(chain, E), grid)
    if len(points) == 1:
        points = points * 2
    walk = _walk(chain, points, None, tol_angle, phase_step_max, SWITCH_WIDTH * scale,
                 _switcher(chain, tol_angle, phase_step_max, SUB_FLOOR * scale))
    crossings = walk.crossings
    his = np.array([c.hi for c in crossings])
    counts = {c: int(np.sum(his <= c)) for c in checkpoints}
    energies = np.array([p.energy for p in walk.accepted])
    phases = np.array([p.phases for p in walk.accepted])
    return FlowResult(e_lo, e_hi, energies, phases, crossings, len(crossings), counts,
                      tol_angle, walk.min_disp, chain.rank, walk.unresolved)


def count_eigenvalues(op, gradings, energies, e_lo=None, **kw) -> list:
    """Running counts ``#(e_lo, E]`` at each requested energy from a single sweep."""
    energies = [float(e) for e in energies]
    if not energies:
        return []
    lo = default_window(op)[0] if e_lo is None else e_lo
    res = spectral_flow(op, gradings, lo, max(energies), checkpoints=energies, **kw)
    return [res.counts[e] if e >= lo else 0 for e in energies]


def locate_eigenvalues(op, gradings, e_lo=None, e_hi=None, tol: float = 1e-8, **kw) -> list:
    """Eigenvalues in ``(e_lo, e_hi]`` as ``(energy, multiplicity)`` pairs.

    Each grid step of the flow that contains crossings is bisected on the
    local counting function until it is narrower than ``tol``.
    """
    res = spectral_flow(op, gradings, e_lo, e_hi, **kw)
    # a tight angle tolerance here: the counting tolerance would bias the
    # located energies by tol_angle / (phase velocity)
    local_kw = dict(kw, tol_angle=LOCATE_TOL_ANGLE)
    out = []

    def local(a, b):
        return spectral_flow(op, gradings, a, b, initial_points=3, **local_kw).count

    def refine(a, b, k):
        if k <= 0:
            return
        if b - a <= tol:
            out.append((0.5 * (a + b), k))
            return
        m = 0.5 * (a + b)
        left = local(a, m)
        refine(a, m, left)
        refine(m, b, k - left)

    steps = sorted({(c.lo, c.hi) for c in res.crossings})
    for a, b in steps:
        refine(a, b, local(a, b))
    merged = []
    for e, k in out:
        if merged and e - merged[-1][0] <= tol:
            prev, pk = merged.pop()
            merged.append(((prev * pk + e * k) / (pk + k), pk + k))
        else:
            merged.append((e, k))
    return merged
