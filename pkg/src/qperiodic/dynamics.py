"""Stochastic collision trajectories with exponential waiting times.

A trajectory alternates a collision of duration ``tau`` with free system
evolution for a random time ``theta ~ Exp(gamma)``.  Observables are
recorded on the uniform grid ``t = m * dt_out``; grid points inside a
collision are obtained from the joint system-ancilla evolution followed by
a partial trace.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .channels import collision_channel, partial_trace_ancilla
from .errors import InvalidState, NonHermitianObservable, StateDriftError
from .linalg import as_matrix, hermitian_eig, hermiticity_residual
from .models import (
    CollisionSetup,
    CouplingParams,
    IsingParams,
    XxzParams,
    all_up_state,
    ising_setup,
    observable,
    xxz_setup,
)

DRIFT_TOL = 1e-8
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class TrajectoryConfig:
    """Parameters of one stochastic realization.

    ``initial_state`` is ``"random_pure"``, ``"all_up"`` or a density matrix.
    ``sampler`` replaces the exponential waiting-time law when given; it
    receives the generator and returns a non-negative duration.
    """

    model: XxzParams | IsingParams
    coupling: CouplingParams
    gamma: float = 0.5
    n_collisions: int = 400
    dt_out: float = 0.1
    seed: int = 1
    initial_state: object = "random_pure"
    observables: tuple = ("sx1", "sx2", "sx3", "sx4")
    sampler: Callable | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not self.dt_out > 0:
            raise ValueError(f"dt_out must be positive, got {self.dt_out}")
        if self.n_collisions < 1:
            raise ValueError(f"n_collisions must be >= 1, got {self.n_collisions}")
        object.__setattr__(self, "observables", tuple(self.observables))

    @property
    def tau(self) -> float:
        return self.coupling.tau


@dataclass
class TimeSeries:
    times: np.ndarray
    values: dict[str, np.ndarray]
    collision_times: list[tuple[float, float]] = field(default_factory=list)
    final_time: float = float("nan")

    def __len__(self) -> int:
        return len(self.times)


def mix_seed(seed: int, index: int) -> int:
    """Derive an independent 64-bit seed for trajectory ``index``.

    splitmix64 step: ``z = seed + (index + 1) * 0x9E3779B97F4A7C15`` followed
    by the standard xor-shift-multiply finalizer, all modulo ``2**64``.
    """
    z = (int(seed) + (int(index) + 1) * 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def sample_waiting_time(rng: np.random.Generator, gamma: float) -> float:
    """Inverse-CDF draw ``-ln(1 - u) / gamma`` with ``u`` uniform in [0, 1)."""
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    return -math.log1p(-rng.random()) / gamma


def random_pure_state(rng: np.random.Generator, d: int) -> np.ndarray:
    """Haar-random pure state ``|psi><psi|`` from complex Gaussian amplitudes."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    psi = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    psi /= np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def expectation(rho, obs) -> float:
    """``Re Tr[obs rho]`` for a Hermitian observable.

    Raises:
        NonHermitianObservable: if ``obs`` is not Hermitian.
        InvalidState: if the trace has an imaginary part above 1e-10.
    """
    rho, obs = as_matrix(rho), as_matrix(obs)
    if hermiticity_residual(obs) > 1e-10 * max(1.0, float(np.linalg.norm(obs))):
        raise NonHermitianObservable("observable is not Hermitian")
    val = np.sum(obs.T * rho)
    if abs(val.imag) > 1e-10:
        raise InvalidState(f"expectation value has imaginary part {val.imag:.3e}")
    return float(val.real)


def setup_for(cfg: TrajectoryConfig) -> CollisionSetup:
    if isinstance(cfg.model, IsingParams):
        return ising_setup(cfg.model, cfg.coupling.Gamma)
    return xxz_setup(cfg.model, cfg.coupling.Gamma)


class _Propagator:
    """Eigenbases and observables shared by all trajectories of one config.

    Expectation values in a window are evaluated in the eigenbasis of the
    generator as ``sum_ij O_ji rho_ij exp(-i s w_i) exp(i s w_j)``, so each
    grid point costs one ``d^2`` contraction and ``d`` exponentials.
    """

    def __init__(self, setup: CollisionSetup, tau: float, names: Sequence[str]):
        self.setup = setup
        self.tau = tau
        self.names = list(names)
        d = setup.d_sys
        d_a = setup.rho_anc.shape[0]
        self.d, self.d_a = d, d_a
        obs = [observable(n, setup.M) for n in self.names]
        for n, o in zip(self.names, obs):
            if hermiticity_residual(o) > 1e-10:
                raise NonHermitianObservable(f"observable {n!r} is not Hermitian")
        self.sys_eig = hermitian_eig(setup.h_sys)
        h_tot = (
            np.kron(setup.h_sys, np.eye(d_a))
            + np.kron(np.eye(d), setup.h_anc)
            + setup.h_int(tau)
        )
        self.joint_eig = hermitian_eig(h_tot)
        self.channel = collision_channel(setup, tau)
        self.sys_obs = self._rotate(obs, self.sys_eig.eigenvectors)
        self.joint_obs = self._rotate(
            [np.kron(o, np.eye(d_a)) for o in obs], self.joint_eig.eigenvectors
        )

    @staticmethod
    def _rotate(ops, v) -> list[np.ndarray]:
        # transposes of V^dag O V, ready for elementwise contraction with rho
        return [(v.conj().T @ o @ v).T for o in ops]

    def _sample(self, rho, eig, obs_t, s) -> np.ndarray:
        w, v = eig
        rho_e = v.conj().T @ rho @ v
        ph = np.exp(-1j * np.outer(s, w))
        out = np.empty((len(s), len(obs_t)), dtype=np.complex128)
        for k, o in enumerate(obs_t):
            out[:, k] = np.sum((ph @ (o * rho_e)) * ph.conj(), axis=1)
        return out

    def sample_free(self, rho, s) -> np.ndarray:
        return self._sample(rho, self.sys_eig, self.sys_obs, s)

    def sample_collision(self, rho, s) -> np.ndarray:
        joint = np.kron(rho, self.setup.rho_anc)
        return self._sample(joint, self.joint_eig, self.joint_obs, s)

    def free(self, rho, theta) -> np.ndarray:
        w, v = self.sys_eig
        u = (v * np.exp(-1j * theta * w)) @ v.conj().T
        return u @ rho @ u.conj().T

    def collide(self, rho) -> np.ndarray:
        return self.channel.apply(rho)

    def collide_joint(self, rho) -> np.ndarray:
        """Same as :meth:`collide`, through the joint unitary."""
        w, v = self.joint_eig
        u = (v * np.exp(-1j * self.tau * w)) @ v.conj().T
        joint = u @ np.kron(rho, self.setup.rho_anc) @ u.conj().T
        return partial_trace_ancilla(joint, self.d, self.d_a)


def _grid_slice(t0: float, t1: float, dt: float, closed: bool) -> np.ndarray:
    """Grid indices ``m`` with ``t0 <= m dt < t1`` (``<= t1`` if closed)."""
    eps = 1e-9
    lo = math.ceil(t0 / dt - eps)
    hi = math.floor(t1 / dt + eps) if closed else math.ceil(t1 / dt - eps) - 1
    return np.arange(lo, hi + 1) if hi >= lo else np.arange(0)


def _check_state(rho: np.ndarray, where: str) -> None:
    tr = np.trace(rho)
    if abs(tr - 1.0) > DRIFT_TOL:
        raise StateDriftError(f"trace {tr} drifted from 1 {where}")
    if hermiticity_residual(rho) > DRIFT_TOL:
        raise StateDriftError(f"state lost Hermiticity {where}")
    lo = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]
    if lo < -DRIFT_TOL:
        raise StateDriftError(f"state has negative eigenvalue {lo:.3e} {where}")


def _initial_state(cfg: TrajectoryConfig, rng, d: int, M: int) -> np.ndarray:
    init = cfg.initial_state
    if isinstance(init, str):
        if init == "random_pure":
            return random_pure_state(rng, d)
        if init == "all_up":
            return all_up_state(M)
        raise ValueError(f"unknown initial state {init!r}")
    rho = as_matrix(init)
    if rho.shape != (d, d):
        raise ValueError(f"initial state has shape {rho.shape}, expected {(d, d)}")
    _check_state(rho, "in the initial state")
    return rho


def _run(cfg: TrajectoryConfig, prop: _Propagator, seed: int) -> TimeSeries:
    rng = np.random.default_rng(seed)
    rho = _initial_state(cfg, rng, prop.d, prop.setup.M)
    draw = cfg.sampler or (lambda g: sample_waiting_time(g, cfg.gamma))
    dt, tau = cfg.dt_out, cfg.tau
    idx_chunks, val_chunks, windows = [], [], []
    t = 0.0
    for j in range(cfg.n_collisions):
        theta = float(draw(rng))
        if theta < 0:
            raise ValueError(f"waiting time must be non-negative, got {theta}")
        m = _grid_slice(t, t + tau, dt, closed=False)
        if m.size:
            idx_chunks.append(m)
            val_chunks.append(prop.sample_collision(rho, m * dt - t))
        windows.append((t, t + tau))
        rho = prop.collide(rho)
        _check_state(rho, f"after collision {j + 1}")
        t += tau
        last = j == cfg.n_collisions - 1
        m = _grid_slice(t, t + theta, dt, closed=last)
        if m.size:
            idx_chunks.append(m)
            val_chunks.append(prop.sample_free(rho, m * dt - t))
        rho = prop.free(rho, theta)
        t += theta
    _check_state(rho, "at the final time")
    idx = np.concatenate(idx_chunks) if idx_chunks else np.arange(0)
    vals = np.concatenate(val_chunks) if val_chunks else np.zeros((0, len(prop.names)))
    if np.any(np.abs(vals.imag) > 1e-8):
        raise InvalidState("observable expectation acquired an imaginary part")
    times = idx * dt
    values = {n: np.ascontiguousarray(vals[:, k].real) for k, n in enumerate(prop.names)}
    return TimeSeries(times, values, windows, t)


def run_trajectory(cfg: TrajectoryConfig, setup: CollisionSetup | None = None) -> TimeSeries:
    """Simulate one realization.

    The generator seeded with ``cfg.seed`` first draws the initial state (if
    random) and then one waiting time per collision.  ``setup`` overrides the
    setup derived from ``cfg.model`` and ``cfg.coupling``.

    Raises:
        StateDriftError: if the state leaves the set of density matrices by
            more than 1e-8 at a collision boundary.
    """
    prop = _Propagator(setup or setup_for(cfg), cfg.tau, cfg.observables)
    return _run(cfg, prop, cfg.seed)


def thread_count() -> int:
    raw = os.environ.get("QPERIODIC_THREADS", "0").strip() or "0"
    n = int(raw)
    if n < 0:
        raise ValueError(f"QPERIODIC_THREADS must be >= 0, got {n}")
    return n if n > 0 else (os.cpu_count() or 1)


def trajectory_seeds(seed: int, n_traj: int) -> list[int]:
    return [mix_seed(seed, k) for k in range(n_traj)]


def ensemble_average(
    cfg: TrajectoryConfig, n_traj: int, setup: CollisionSetup | None = None
) -> TimeSeries:
    """Pointwise mean over ``n_traj`` realizations seeded by :func:`mix_seed`.

    With ``n_traj == 1`` the single trajectory uses ``cfg.seed`` unchanged.
    The grid is truncated to the shortest realization; results do not depend
    on the thread count.
    """
    if n_traj < 1:
        raise ValueError(f"n_traj must be >= 1, got {n_traj}")
    prop = _Propagator(setup or setup_for(cfg), cfg.tau, cfg.observables)
    if n_traj == 1:
        return _run(cfg, prop, cfg.seed)
    seeds = trajectory_seeds(cfg.seed, n_traj)
    workers = min(thread_count(), n_traj)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(lambda s: _run(cfg, prop, s), seeds))
    else:
        runs = [_run(cfg, prop, s) for s in seeds]
    n = min(len(r) for r in runs)
    values = {}
    for name in prop.names:
        acc = np.zeros(n)
        for r in runs:
            acc += r.values[name][:n]
        values[name] = acc / n_traj
    shortest = min(runs, key=len)
    return TimeSeries(shortest.times[:n].copy(), values, [], min(r.final_time for r in runs))
