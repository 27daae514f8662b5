"""Collision channels, superoperators and stationary states."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidAncillaState,
    InvalidState,
    NegativeDuration,
    NotConverged,
)
from .linalg import (
    as_matrix,
    devectorize,
    expm_i,
    fixed_point_null_space,
    frobenius,
    null_space,
    spectral_norm,
    vectorize,
)
from .models import CollisionSetup

STATE_TOL = 1e-10
FIX_TOL = 1e-8
# largest system dimension for which d^2 x d^2 superoperators are formed
MAX_SUPEROP_DIM = 64


@dataclass(frozen=True)
class KrausChannel:
    dim: int
    kraus: tuple = field(repr=False)
    tau: float = 0.0

    def __post_init__(self):
        for k in self.kraus:
            if k.shape != (self.dim, self.dim):
                raise DimensionMismatch(f"Kraus operator of shape {k.shape} in a dim-{self.dim} channel")

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return sum(k @ rho @ k.conj().T for k in self.kraus)

    def tp_residual(self) -> float:
        return frobenius(sum(k.conj().T @ k for k in self.kraus) - np.eye(self.dim))


@dataclass(frozen=True)
class Superoperator:
    dim: int
    matrix: np.ndarray = field(repr=False)

    def act(self, rho: np.ndarray) -> np.ndarray:
        return devectorize(self.matrix @ vectorize(rho))


@dataclass(frozen=True)
class CompositeMap:
    """Collision followed by free evolution for a duration ``theta``."""

    channel: KrausChannel
    theta: float
    u_free: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.channel.dim

    def apply(self, rho: np.ndarray) -> np.ndarray:
        out = self.channel.apply(rho)
        return self.u_free @ out @ self.u_free.conj().T

    def superoperator(self) -> Superoperator:
        u = self.u_free
        s = superoperator_matrix(self.channel).matrix
        return Superoperator(self.dim, np.kron(u.conj(), u) @ s)


class ChoiReport(NamedTuple):
    min_eig: float
    is_cp: bool


def validate_state(rho, tol: float = STATE_TOL) -> np.ndarray:
    """Check trace, Hermiticity and positivity of a density matrix.

    Raises:
        InvalidState: if any check fails beyond ``tol``.
    """
    rho = as_matrix(rho)
    if rho.shape[0] != rho.shape[1]:
        raise InvalidState(f"density matrix must be square, got {rho.shape}")
    tr = np.trace(rho)
    if abs(tr - 1.0) > tol:
        raise InvalidState(f"trace {tr} differs from 1")
    if frobenius(rho - rho.conj().T) > tol:
        raise InvalidState("density matrix is not Hermitian")
    lo = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]
    if lo < -tol:
        raise InvalidState(f"density matrix has negative eigenvalue {lo:.3e}")
    return rho


def partial_trace_ancilla(rho_joint: np.ndarray, d_sys: int, d_anc: int) -> np.ndarray:
    """Trace out the right tensor factor of a ``(d_sys*d_anc)``-dim operator."""
    return np.einsum("iaja->ij", rho_joint.reshape(d_sys, d_anc, d_sys, d_anc))


def joint_unitary(h_sys, h_anc, h_int, tau: float) -> np.ndarray:
    """``exp(-i tau (H_S (x) 1 + 1 (x) H_A + H_SA))``."""
    h_sys, h_anc, h_int = as_matrix(h_sys), as_matrix(h_anc), as_matrix(h_int)
    d_s, d_a = h_sys.shape[0], h_anc.shape[0]
    if h_int.shape != (d_s * d_a, d_s * d_a):
        raise DimensionMismatch(f"interaction of shape {h_int.shape} does not match {d_s}x{d_a}")
    h_tot = np.kron(h_sys, np.eye(d_a)) + np.kron(np.eye(d_s), h_anc) + h_int
    return expm_i(h_tot, tau)


def kraus_from_unitary(u, rho_anc, d_sys: int, tau: float = 0.0, p_cut: float = 0.0) -> KrausChannel:
    """Kraus operators ``sqrt(p_a) <b|U|a>`` of a collision.

    ``rho_anc = sum_a p_a |a><a|`` is diagonalized first; one operator is
    kept for each ``p_a > p_cut`` and each ancilla basis state ``b``.
    """
    u = as_matrix(u)
    rho_anc = as_matrix(rho_anc)
    d_anc = rho_anc.shape[0]
    if u.shape != (d_sys * d_anc, d_sys * d_anc):
        raise DimensionMismatch(f"unitary of shape {u.shape} does not match {d_sys}x{d_anc}")
    if abs(np.trace(rho_anc) - 1.0) > STATE_TOL:
        raise InvalidAncillaState(f"ancilla trace {np.trace(rho_anc)} differs from 1")
    if frobenius(rho_anc - rho_anc.conj().T) > STATE_TOL:
        raise InvalidAncillaState("ancilla state is not Hermitian")
    p, vecs = np.linalg.eigh(rho_anc)
    if p[0] < -STATE_TOL:
        raise InvalidAncillaState(f"ancilla state has negative eigenvalue {p[0]:.3e}")
    u4 = u.reshape(d_sys, d_anc, d_sys, d_anc)
    kraus = []
    for p_a, alpha in zip(p, vecs.T):
        if p_a <= p_cut:
            continue
        block = np.einsum("ibja,a->bij", u4, alpha)
        kraus.extend(np.sqrt(p_a) * block[b] for b in range(d_anc))
    return KrausChannel(d_sys, tuple(kraus), tau)


def collision_channel(setup: CollisionSetup, tau: float) -> KrausChannel:
    u = joint_unitary(setup.h_sys, setup.h_anc, setup.h_int(tau), tau)
    return kraus_from_unitary(u, setup.rho_anc, setup.d_sys, tau)


def interaction_picture(channel: KrausChannel, h_sys) -> KrausChannel:
    """Left-multiply every Kraus operator by ``U_S(tau)^dagger``."""
    u_dag = expm_i(h_sys, channel.tau).conj().T
    return KrausChannel(channel.dim, tuple(u_dag @ k for k in channel.kraus), channel.tau)


def apply(channel: KrausChannel, rho) -> np.ndarray:
    """Apply a channel to a validated density matrix and validate the result."""
    rho = validate_state(rho)
    return validate_state(channel.apply(rho))


def superoperator_matrix(channel: KrausChannel) -> Superoperator:
    """``sum_k conj(K_k) (x) K_k`` acting on column-stacked operators."""
    d = channel.dim
    s = np.zeros((d * d, d * d), dtype=np.complex128)
    for k in channel.kraus:
        s += np.kron(k.conj(), k)
    return Superoperator(d, s)


def dual_matrix(s: Superoperator) -> Superoperator:
    return Superoperator(s.dim, s.matrix.conj().T)


def composite(channel: KrausChannel, h_sys, theta: float, eig=None) -> CompositeMap:
    if theta < 0:
        raise NegativeDuration(f"theta must be >= 0, got {theta}")
    return CompositeMap(channel, float(theta), expm_i(h_sys, theta, eig=eig))


def choi_matrix(channel: KrausChannel | Superoperator) -> np.ndarray:
    """``sum_k vec(K_k) vec(K_k)^dagger``, also obtainable by reshuffling."""
    if isinstance(channel, KrausChannel):
        vs = [vectorize(k) for k in channel.kraus]
        return sum(np.outer(v, v.conj()) for v in vs)
    d = channel.dim
    s4 = channel.matrix.reshape(d, d, d, d)
    return s4.transpose(3, 1, 2, 0).reshape(d * d, d * d)


def choi_psd_check(channel: KrausChannel | Superoperator, tol: float = 1e-10) -> ChoiReport:
    if isinstance(channel, KrausChannel) and len(channel.kraus) < channel.dim**2:
        # C = V V^dagger shares its nonzero spectrum with the Gram matrix
        # V^dagger V; the remaining eigenvalues are exactly zero.
        v = np.stack([vectorize(k) for k in channel.kraus], axis=1)
        g = v.conj().T @ v
        lo = min(0.0, float(np.linalg.eigvalsh(0.5 * (g + g.conj().T))[0]))
        return ChoiReport(lo, lo >= -tol)
    c = choi_matrix(channel)
    lo = float(np.linalg.eigvalsh(0.5 * (c + c.conj().T))[0])
    return ChoiReport(lo, lo >= -tol)


def fixed_point_projector(s: Superoperator) -> np.ndarray:
    """Spectral projector onto the eigenvalue-1 eigenspace of ``s``.

    Built from right and left null spaces of ``S - 1``; peripheral
    eigenvalues of a CPTP map carry no Jordan blocks, so this equals the
    Cesaro limit of ``S^n``.
    """
    n = s.matrix.shape[0]
    right = null_space(s.matrix - np.eye(n))
    left = null_space(s.matrix.conj().T - np.eye(n))
    if right.shape[1] != left.shape[1]:
        raise NotConverged(np.inf, "left and right fixed spaces differ in dimension")
    return right @ np.linalg.solve(left.conj().T @ right, left.conj().T)


def stationary_state(
    cmap: CompositeMap,
    rho_seed=None,
    n_burn: int = 200,
    n_avg: int = 2000,
    fix_tol: float = FIX_TOL,
    polish: bool | None = None,
) -> np.ndarray:
    """Invariant state selected by a Cesaro average started from ``rho_seed``.

    Iterates ``n_burn`` times, then averages the next ``n_avg`` iterates.
    Oscillating peripheral components only average out as ``1/n_avg``, so
    for small systems the average is finished with the spectral projector
    onto the fixed space, which leaves the selected invariant state intact
    and removes the residue.  ``rho_seed`` defaults to the maximally mixed
    state.

    Raises:
        NotConverged: if ``||map(omega) - omega||_F`` exceeds ``fix_tol``.
    """
    d = cmap.dim
    rho = np.eye(d, dtype=np.complex128) / d if rho_seed is None else validate_state(rho_seed)
    for _ in range(n_burn):
        rho = cmap.apply(rho)
    acc = np.zeros_like(rho)
    for _ in range(n_avg):
        rho = cmap.apply(rho)
        acc += rho
    omega = acc / n_avg
    if polish is None:
        polish = d <= MAX_SUPEROP_DIM
    if polish:
        proj = fixed_point_projector(cmap.superoperator())
        omega = devectorize(proj @ vectorize(omega))
    omega = 0.5 * (omega + omega.conj().T)
    omega /= np.trace(omega).real
    residual = frobenius(cmap.apply(omega) - omega)
    if residual > fix_tol:
        raise NotConverged(residual)
    return omega


def fixed_point_dimension(cmap: CompositeMap) -> int:
    return len(fixed_point_null_space(cmap.superoperator().matrix))


def product_decay_norms(
    maps: Sequence[CompositeMap], projector: np.ndarray
) -> list[float]:
    """``||Q S_n Q ... Q S_1 Q||_2`` for ``n = 1..len(maps)``, ``Q = 1 - P``."""
    n = projector.shape[0]
    q = np.eye(n) - projector
    prod = q.copy()
    norms = []
    for m in maps:
        prod = q @ (m.superoperator().matrix @ prod)
        norms.append(spectral_norm(prod))
    return norms
