"""Numerical verification of dynamical symmetries of collision maps.

An operator ``Xi`` with ``[H_S, Xi] = lam Xi`` whose commutators with the
interaction-picture Kraus operators annihilate the invariant state
``omega`` generates a mode ``Xi omega`` that the composite map multiplies
by ``exp(-i lam (tau + theta))``.  This module checks both conditions,
the resulting eigen-evolution, the long-time expansion of observables in
these modes, and the fast-collision (Lindblad) form of the conditions.
"""

from __future__ import annotations

import cmath
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .channels import (
    CompositeMap,
    KrausChannel,
    collision_channel,
    composite,
    interaction_picture,
    kraus_from_unitary,
    partial_trace_ancilla,
    stationary_state,
)
from .errors import (
    DegenerateEigenvalue,
    NonvanishingFirstMoment,
    StationaryStateMismatch,
    ZeroMode,
    ZeroOperator,
)
from .linalg import (
    anticommutator,
    as_matrix,
    commutator,
    expm_i,
    frobenius,
    hermitian_eig,
    hs_inner,
    null_space,
    vectorize,
)
from .models import CollisionSetup, SymmetryOperator

TOL_I = 1e-10
TOL_II = 1e-8
FIX_TOL = 1e-8
ZERO_MODE_TOL = 1e-14


class ConditionI(NamedTuple):
    lam: float
    residual: float
    lam_imag: float


def check_condition_i(h_sys, xi, tol: float = TOL_I) -> ConditionI:
    """Fit ``lam`` in ``[H, Xi] = lam Xi`` and return the relative residual.

    ``lam`` is the Hilbert-Schmidt projection of the commutator onto
    ``Xi``; its imaginary part is reported separately and vanishes for any
    genuine symmetry.
    """
    h_sys, xi = as_matrix(h_sys), as_matrix(xi)
    norm = frobenius(xi)
    if norm == 0.0:
        raise ZeroOperator("symmetry candidate is the zero operator")
    comm = commutator(h_sys, xi)
    lam = hs_inner(xi, comm) / norm**2
    residual = frobenius(comm - lam * xi) / norm
    return ConditionI(lam.real, residual, lam.imag)


def check_condition_ii(
    channel_i: KrausChannel,
    xi,
    omega_d,
    cmap: CompositeMap | None = None,
    fix_tol: float = FIX_TOL,
) -> float:
    """``max_k ||[K_k, Xi] omega||_F / (||Xi||_F ||omega||_F)`` for one ``tau``.

    When the composite map is supplied, ``omega_d`` is first checked to be
    invariant under it.
    """
    xi, omega_d = as_matrix(xi), as_matrix(omega_d)
    if cmap is not None:
        drift = frobenius(cmap.apply(omega_d) - omega_d)
        if drift > fix_tol:
            raise StationaryStateMismatch(f"||map(omega) - omega|| = {drift:.3e}")
    scale = frobenius(xi) * frobenius(omega_d)
    if scale == 0.0:
        raise ZeroOperator("symmetry candidate or state is zero")
    return max(frobenius(commutator(k, xi) @ omega_d) for k in channel_i.kraus) / scale


def verify_eigen_evolution(cmap: CompositeMap, xi, omega_d, lam: float) -> float:
    """Relative residual of ``map(Xi omega) = exp(-i lam (tau+theta)) Xi omega``."""
    mode = as_matrix(xi) @ as_matrix(omega_d)
    norm = frobenius(mode)
    if norm < ZERO_MODE_TOL:
        raise ZeroMode(f"||Xi omega|| = {norm:.3e}; the mode is absent")
    phase = cmath.exp(-1j * lam * (cmap.channel.tau + cmap.theta))
    return frobenius(cmap.apply(mode) - phase * mode) / norm


def measured_phase(cmap: CompositeMap, xi, omega_d) -> float:
    """Phase acquired by ``Xi omega`` over one application of the map."""
    mode = as_matrix(xi) @ as_matrix(omega_d)
    return cmath.phase(hs_inner(mode, cmap.apply(mode)) / hs_inner(mode, mode))


class CollisionPoint(NamedTuple):
    tau: float
    channel_i: KrausChannel
    cmap: CompositeMap
    omega_d: np.ndarray


def collision_points(
    setup: CollisionSetup,
    tau_grid: Sequence[float],
    theta: float = 0.0,
    **stationary_kw,
) -> list[CollisionPoint]:
    """Channel, composite map and invariant state at each sampled ``tau``."""
    eig = hermitian_eig(setup.h_sys)
    points = []
    for tau in tau_grid:
        channel = collision_channel(setup, tau)
        cmap = composite(channel, setup.h_sys, theta, eig=eig)
        omega = stationary_state(cmap, **stationary_kw)
        points.append(CollisionPoint(tau, interaction_picture(channel, setup.h_sys), cmap, omega))
    return points


@dataclass
class SymmetryReport:
    name: str
    lambda_expected: float
    lambda_fit: float
    lambda_imag: float
    residual_i: float
    residual_ii_max: float
    evolution_residual: float
    tau_grid: list = field(default_factory=list)
    passes_i: bool = False
    passes_ii: bool = False
    passes_evolution: bool = False

    @property
    def passes(self) -> bool:
        return self.passes_i and self.passes_ii and self.passes_evolution

    def to_dict(self) -> dict:
        out = asdict(self)
        out["passes"] = self.passes
        return out


def verify_symmetry(
    setup: CollisionSetup,
    sym: SymmetryOperator,
    points: Sequence[CollisionPoint],
    tol_i: float = TOL_I,
    tol_ii: float = TOL_II,
) -> SymmetryReport:
    ci = check_condition_i(setup.h_sys, sym.xi, tol_i)
    res_ii = max(check_condition_ii(p.channel_i, sym.xi, p.omega_d, p.cmap) for p in points)
    res_ev = max(verify_eigen_evolution(p.cmap, sym.xi, p.omega_d, ci.lam) for p in points)
    return SymmetryReport(
        name=sym.name,
        lambda_expected=sym.lambda_expected,
        lambda_fit=ci.lam,
        lambda_imag=ci.lam_imag,
        residual_i=ci.residual,
        residual_ii_max=res_ii,
        evolution_residual=res_ev,
        tau_grid=[p.tau for p in points],
        passes_i=ci.residual < tol_i and abs(ci.lam_imag) < tol_i,
        passes_ii=res_ii < tol_ii,
        passes_evolution=res_ev < tol_ii,
    )


# -- long-time expansion ----------------------------------------------------


@dataclass
class Mode:
    label: str
    operator: np.ndarray = field(repr=False)
    lam: float
    coefficient: complex = 0j
    literal_coefficient: complex = 0j


@dataclass
class AsymptoticModel:
    """Peripheral part of the dynamics: ``sum_k c_k exp(-i lam_k t) R_k``.

    ``modes[0]`` is the invariant state itself and ``r0`` its coefficient.
    ``literal_coefficient`` is the plain overlap ``Tr[R_k rho0]``, kept
    for comparison; it agrees with the biorthogonal coefficient only for
    orthonormal modes.
    """

    omega_d: np.ndarray = field(repr=False)
    modes: list
    r0: complex

    def state(self, t: float) -> np.ndarray:
        return sum(m.coefficient * cmath.exp(-1j * m.lam * t) * m.operator for m in self.modes)

    def predict(self, obs, t: float) -> float:
        return float(np.trace(as_matrix(obs) @ self.state(t)).real)

    def basis(self) -> np.ndarray:
        """Column matrix of vectorized mode operators."""
        return np.column_stack([vectorize(m.operator) for m in self.modes])


def _words(symmetries: Sequence[SymmetryOperator], lams: Sequence[float], max_len: int):
    d = symmetries[0].xi.shape[0]
    letters = []
    for sym, lam in zip(symmetries, lams):
        letters.append((sym.name, sym.xi, lam))
        letters.append((sym.name + "^+", sym.xi.conj().T, -lam))
    words = [("1", np.eye(d, dtype=np.complex128), 0.0)]
    frontier = [words[0]]
    for _ in range(max_len):
        nxt = []
        for name, op, lam in frontier:
            for lname, lop, llam in letters:
                nm = lname if name == "1" else f"{name}*{lname}"
                nxt.append((nm, op @ lop, lam + llam))
        words.extend(nxt)
        frontier = nxt
    return words


def _word_len(name: str) -> int:
    return 0 if name == "1" else name.count("*") + 1


def _mode_label(xname: str, yname: str) -> str:
    left = "" if xname == "1" else f"{xname} "
    right = "" if yname == "1" else f" ({yname})^+"
    return f"{left}omega{right}"


def peripheral_modes(
    cmap: CompositeMap,
    omega_d,
    symmetries: Sequence[SymmetryOperator],
    lams: Sequence[float] | None = None,
    max_word: int = 2,
    tol: float = TOL_II,
) -> list[Mode]:
    """Linearly independent modes ``X omega Y^+`` that the map only rotates.

    ``X`` and ``Y`` range over products of up to ``max_word`` symmetry
    operators and their adjoints; the frequency of ``X omega Y^+`` is
    ``lam_X - lam_Y``.  Candidates whose eigen-evolution residual exceeds
    ``tol`` are discarded.  The first mode is ``omega`` itself.
    """
    omega_d = as_matrix(omega_d)
    if lams is None:
        lams = [s.lambda_expected for s in symmetries]
    words = _words(symmetries, lams, max_word)
    period = cmap.channel.tau + cmap.theta
    d2 = omega_d.size
    q = np.zeros((d2, 0), dtype=np.complex128)
    modes: list[Mode] = []
    pairs = [(a, b) for a in words for b in words]
    # prefer short words, and left action over right action
    pairs.sort(key=lambda ab: (_word_len(ab[0][0]) + _word_len(ab[1][0]), _word_len(ab[1][0])))
    for (xname, x, xl), (yname, y, yl) in pairs:
        op = x @ omega_d @ y.conj().T
        v = vectorize(op)
        nv = np.linalg.norm(v)
        if nv < ZERO_MODE_TOL:
            continue
        r = v - q @ (q.conj().T @ v)
        r = r - q @ (q.conj().T @ r)
        if np.linalg.norm(r) < 1e-8 * nv:
            continue
        lam = xl - yl
        phase = cmath.exp(-1j * lam * period)
        if frobenius(cmap.apply(op) - phase * op) > tol * nv:
            continue
        q = np.column_stack([q, r / np.linalg.norm(r)])
        modes.append(Mode(_mode_label(xname, yname), op, lam))
    return modes


def _left_block(s_dag: np.ndarray, mu: complex, seed: np.ndarray, iters: int = 50) -> np.ndarray:
    """Left eigenvectors for eigenvalue ``mu`` by block inverse iteration."""
    n = s_dag.shape[0]
    shifted = s_dag - (np.conj(mu) * (1 + 1e-9)) * np.eye(n)
    x, _ = np.linalg.qr(seed)
    for _ in range(iters):
        x, _ = np.linalg.qr(np.linalg.solve(shifted, x))
        if np.linalg.norm(s_dag @ x - np.conj(mu) * x) < 1e-11:
            break
    return x


def build_asymptotic_model(
    cmap: CompositeMap,
    symmetries: Sequence[SymmetryOperator],
    rho0,
    omega_d=None,
    modes: Sequence[Mode] | None = None,
    group_tol: float = 1e-9,
) -> AsymptoticModel:
    """Project ``rho0`` onto the peripheral modes of a fixed-theta map.

    Modes are grouped by their eigenvalue ``exp(-i lam (tau + theta))``.
    For each group the left eigenvectors of the map are found by inverse
    iteration on the dual superoperator and biorthonormalized against the
    group, which fixes the coefficients uniquely.

    Raises:
        DegenerateEigenvalue: when an eigenvalue's eigenspace is larger than
            the span of the supplied modes, so coefficients are ill-defined.
    """
    rho0 = as_matrix(rho0)
    if omega_d is None:
        omega_d = stationary_state(cmap)
    if modes is None:
        modes = peripheral_modes(cmap, omega_d, symmetries)
    modes = [Mode(m.label, m.operator, m.lam) for m in modes]
    period = cmap.channel.tau + cmap.theta
    s = cmap.superoperator().matrix
    s_dag = s.conj().T
    n = s.shape[0]
    groups: list[tuple[complex, list[int]]] = []
    for i, m in enumerate(modes):
        mu = cmath.exp(-1j * m.lam * period)
        for g_mu, idx in groups:
            if abs(g_mu - mu) < group_tol:
                idx.append(i)
                break
        else:
            groups.append((mu, [i]))
    v0 = vectorize(rho0)
    for mu, idx in groups:
        right = np.column_stack([vectorize(modes[i].operator) for i in idx])
        eigspace = null_space(s - mu * np.eye(n)).shape[1]
        if eigspace != len(idx):
            raise DegenerateEigenvalue(
                f"eigenvalue {mu:.6f} has a {eigspace}-dim eigenspace but {len(idx)} supplied modes"
            )
        left = _left_block(s_dag, mu, right)
        overlap = left.conj().T @ right
        if np.linalg.cond(overlap) > 1e10:
            raise DegenerateEigenvalue(f"left/right overlap at eigenvalue {mu:.6f} is singular")
        coeffs = np.linalg.solve(overlap, left.conj().T @ v0)
        for i, c in zip(idx, coeffs):
            modes[i].coefficient = complex(c)
    for m in modes:
        m.literal_coefficient = hs_inner(m.operator.conj().T, rho0)
    r0 = modes[0].coefficient if modes and modes[0].label == "omega" else 0j
    return AsymptoticModel(omega_d, list(modes), r0)


# -- fast-collision limit ---------------------------------------------------


@dataclass
class LindbladOps:
    lindblad: list = field(repr=False)
    tau_used: float = 0.0

    def dissipator(self, rho: np.ndarray) -> np.ndarray:
        out = np.zeros_like(rho, dtype=np.complex128)
        for lk in self.lindblad:
            out += lk @ rho @ lk.conj().T - 0.5 * anticommutator(lk.conj().T @ lk, rho)
        return out


def first_moment(v_se, rho_env, d_sys: int) -> np.ndarray:
    """``Tr_E[V (1 (x) rho_E)]``."""
    d_env = as_matrix(rho_env).shape[0]
    return partial_trace_ancilla(as_matrix(v_se) @ np.kron(np.eye(d_sys), rho_env), d_sys, d_env)


def lindblad_limit(v_se, rho_env, tau: float, d_sys: int, tol: float = 1e-10) -> LindbladOps:
    """Lindblad operators ``sqrt(p_a / tau) <b|V|a>`` of the fast-collision limit.

    Operators that vanish identically are dropped.

    Raises:
        NonvanishingFirstMoment: if ``Tr_E[V rho_E]`` is not zero.
    """
    v_se, rho_env = as_matrix(v_se), as_matrix(rho_env)
    moment = frobenius(first_moment(v_se, rho_env, d_sys))
    if moment > tol * max(1.0, frobenius(v_se)):
        raise NonvanishingFirstMoment(f"||Tr_E[V rho_E]|| = {moment:.3e}")
    d_env = rho_env.shape[0]
    p, vecs = np.linalg.eigh(rho_env)
    v4 = v_se.reshape(d_sys, d_env, d_sys, d_env)
    ops = []
    for p_a, alpha in zip(p, vecs.T):
        if p_a <= 0:
            continue
        block = np.einsum("ibja,a->bij", v4, alpha)
        for b in range(d_env):
            lk = np.sqrt(p_a / tau) * block[b]
            if frobenius(lk) > 1e-14:
                ops.append(lk)
    return LindbladOps(ops, tau)


def short_time_residual(h_sys, h_env, v_se, rho_env, tau: float, rho) -> float:
    """Distance between one collision and its first-order Lindblad expansion.

    The collision runs for ``tau`` with interaction ``V / sqrt(tau)``.  With
    ``L = sqrt(p/tau) <b|V|a>`` the dissipative increment over one collision
    is ``tau**2 * D_L(rho)``.
    """
    h_sys, h_env, v_se, rho = map(as_matrix, (h_sys, h_env, v_se, rho))
    d_sys, d_env = h_sys.shape[0], h_env.shape[0]
    h_tot = np.kron(h_sys, np.eye(d_env)) + np.kron(np.eye(d_sys), h_env) + v_se / np.sqrt(tau)
    channel = kraus_from_unitary(expm_i(h_tot, tau), rho_env, d_sys, tau)
    lops = lindblad_limit(v_se, rho_env, tau, d_sys)
    expansion = rho - 1j * tau * commutator(h_sys, rho) + tau**2 * lops.dissipator(rho)
    return frobenius(channel.apply(rho) - expansion)


def short_time_slope(h_sys, h_env, v_se, rho_env, rho, taus: Sequence[float]) -> float:
    """Log-log slope of the short-time residual against ``tau``."""
    res = [short_time_residual(h_sys, h_env, v_se, rho_env, t, rho) for t in taus]
    return float(np.polyfit(np.log(taus), np.log(res), 1)[0])


@dataclass
class LindbladReport:
    residual_i: float
    lam: float
    first: list
    second: list

    @property
    def max_residual(self) -> float:
        return max([0.0, *self.first, *self.second])


def check_lindblad_conditions(lops: LindbladOps, h_sys, xi, omega_d) -> LindbladReport:
    """Residuals of the fast-collision conditions, per Lindblad operator.

    ``||[L_k, Xi] omega||`` and ``||[L_k^+, Xi] L_k omega||`` are reported
    separately; both must vanish.
    """
    xi, omega_d = as_matrix(xi), as_matrix(omega_d)
    ci = check_condition_i(h_sys, xi)
    first, second = [], []
    for lk in lops.lindblad:
        first.append(frobenius(commutator(lk, xi) @ omega_d))
        second.append(frobenius(commutator(lk.conj().T, xi) @ lk @ omega_d))
    return LindbladReport(ci.residual, ci.lam, first, second)
