"""Spin models: XXZ ring, long-range Ising chain, ancilla couplings.

Conventions used throughout the package:

* tensor order is system (x) ancilla, and site 1 is the leftmost system factor;
* the computational state ``|0>`` is the ancilla ground state and satisfies
  ``sigma_z |0> = -|0>``.  The XXZ symmetry operators only acquire the
  eigenfrequencies ``-omega0`` and ``omega0 - 4 delta`` with this sign choice.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import EvenSiteCount, IndexOutOfRange, UnsupportedSize
from .linalg import kron_all

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_Y = np.array([[0, 1j], [-1j, 0]], dtype=np.complex128)
SIGMA_Z = np.array([[-1, 0], [0, 1]], dtype=np.complex128)
IDENTITY_2 = np.eye(2, dtype=np.complex128)
# |0><1|: removes an excitation
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=np.complex128)
SIGMA_PLUS = SIGMA_MINUS.T.copy()

_PAULI = {"x": SIGMA_X, "y": SIGMA_Y, "z": SIGMA_Z}


@dataclass(frozen=True)
class XxzParams:
    M: int = 4
    omega0: float = 1.0
    delta: float = 0.5

    def __post_init__(self):
        if self.M < 3:
            raise ValueError(f"XXZ ring needs M >= 3, got {self.M}")


@dataclass(frozen=True)
class IsingParams:
    M: int = 7
    B: float = 5.0
    J: float = 1.0
    alpha: float = 1.1

    def __post_init__(self):
        if self.M < 2:
            raise ValueError(f"Ising chain needs M >= 2, got {self.M}")
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    @property
    def central_site(self) -> int:
        return math.ceil(self.M / 2)


@dataclass(frozen=True)
class CouplingParams:
    Gamma: float
    tau: float

    def __post_init__(self):
        if self.Gamma < 0:
            raise ValueError(f"Gamma must be non-negative, got {self.Gamma}")
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")

    @property
    def g(self) -> float:
        return math.sqrt(self.Gamma / (4.0 * self.tau))


@dataclass(frozen=True)
class SymmetryOperator:
    xi: np.ndarray = field(repr=False)
    lambda_expected: float
    name: str = ""


def pauli_site(axis: str, k: int, M: int) -> np.ndarray:
    """Pauli matrix ``axis`` acting on site ``k`` (1-based) of ``M`` qubits."""
    if not 1 <= k <= M:
        raise IndexOutOfRange(f"site {k} outside 1..{M}")
    try:
        sigma = _PAULI[axis]
    except KeyError:
        raise ValueError(f"unknown Pauli axis {axis!r}") from None
    return kron_all(*(sigma if j == k else IDENTITY_2 for j in range(1, M + 1)))


def basis_ket(bits) -> np.ndarray:
    """Computational basis vector, e.g. ``basis_ket("0100")``."""
    bits = [int(b) for b in bits]
    v = np.zeros(2 ** len(bits), dtype=np.complex128)
    v[int("".join(map(str, bits)), 2)] = 1.0
    return v


def all_up_state(M: int) -> np.ndarray:
    """Projector onto the state with ``sigma_z = +1`` on every site."""
    v = basis_ket("1" * M)
    return np.outer(v, v.conj())


def build_xxz(p: XxzParams) -> np.ndarray:
    M = p.M
    sx = [pauli_site("x", j, M) for j in range(1, M + 1)]
    sy = [pauli_site("y", j, M) for j in range(1, M + 1)]
    sz = [pauli_site("z", j, M) for j in range(1, M + 1)]
    h = np.zeros((2**M, 2**M), dtype=np.complex128)
    for j in range(M):
        nxt = (j + 1) % M
        h += sx[j] @ sx[nxt] + sy[j] @ sy[nxt] + p.delta * sz[j] @ sz[nxt]
        h += 0.5 * p.omega0 * sz[j]
    return h


def build_ising(p: IsingParams) -> np.ndarray:
    M = p.M
    sx = [pauli_site("x", j, M) for j in range(1, M + 1)]
    h = np.zeros((2**M, 2**M), dtype=np.complex128)
    for i in range(1, M + 1):
        h += p.B * pauli_site("z", i, M)
    for i in range(M):
        for j in range(i + 1, M):
            h += p.J / abs(i - j) ** p.alpha * sx[i] @ sx[j]
    return h


def exchange_coupling(site: int, M: int) -> np.ndarray:
    """``sigma_x^(site) (x) sigma_x^(A) + sigma_y^(site) (x) sigma_y^(A)``."""
    return np.kron(pauli_site("x", site, M), SIGMA_X) + np.kron(pauli_site("y", site, M), SIGMA_Y)


def build_sa_xxz(M: int, c: CouplingParams) -> np.ndarray:
    return c.g * exchange_coupling(1, M)


def build_sa_ising(p: IsingParams, c: CouplingParams) -> np.ndarray:
    if p.M % 2 == 0:
        raise EvenSiteCount(f"central site undefined for even M={p.M}")
    field_term = p.B * np.kron(np.eye(2**p.M), SIGMA_Z)
    return field_term + c.g * exchange_coupling(p.central_site, p.M)


def xi_operators(p: XxzParams) -> list[SymmetryOperator]:
    """The two known dynamical symmetries of the lossy four-site XXZ ring.

    Both are returned unnormalized. ``Xi1`` acts as the identity on the
    coupled site 1 and has ``lambda = -omega0``; ``Xi2`` has
    ``lambda = omega0 - 4 delta``.
    """
    if p.M != 4:
        raise UnsupportedSize(f"symmetry operators are only known for M=4, got M={p.M}")
    psi1 = basis_ket("001") - basis_ket("100")
    phi1 = basis_ket("011") - basis_ket("110")
    xi1 = np.kron(IDENTITY_2, np.outer(psi1, phi1.conj()))
    psi2 = 0.5 * (basis_ket("0100") - basis_ket("0001"))
    phi2 = basis_ket("0000")
    xi2 = np.outer(psi2, phi2.conj())
    return [
        SymmetryOperator(xi1, -p.omega0, "Xi1"),
        SymmetryOperator(xi2, p.omega0 - 4.0 * p.delta, "Xi2"),
    ]


def imbalance_operator(M: int) -> np.ndarray:
    if M < 1:
        raise ValueError("M must be >= 1")
    out = np.zeros((2**M, 2**M), dtype=np.complex128)
    for j in range(1, M + 1):
        out += (1 if j % 2 else -1) * pauli_site("z", j, M)
    return out


def total_sz(M: int) -> np.ndarray:
    return sum(pauli_site("z", j, M) for j in range(1, M + 1))


def excitation_number(M: int) -> np.ndarray:
    """Number of sites in ``|1>``, i.e. ``sum_k (1 + sigma_z^(k)) / 2``."""
    return 0.5 * (M * np.eye(2**M) + total_sz(M))


def ancilla_ground() -> np.ndarray:
    return np.diag([1.0, 0.0]).astype(np.complex128)


_OBS_RE = re.compile(r"^s([xyz])(\d+)$")


def observable(name: str, M: int) -> np.ndarray:
    """Look up a named observable: ``sx1``, ``sz3``, ``imbalance``, ``sz_total``."""
    m = _OBS_RE.match(name)
    if m:
        return pauli_site(m.group(1), int(m.group(2)), M)
    if name == "imbalance":
        return imbalance_operator(M)
    if name == "sz_total":
        return total_sz(M)
    if name == "excitations":
        return excitation_number(M)
    raise ValueError(f"unknown observable {name!r}")


@dataclass(frozen=True)
class CollisionSetup:
    """Everything needed to build a collision channel at any duration.

    The interaction Hamiltonian is ``static_int + g(tau) * coupling`` with
    ``g(tau) = sqrt(Gamma / (4 tau))``.
    """

    h_sys: np.ndarray = field(repr=False)
    h_anc: np.ndarray = field(repr=False)
    coupling: np.ndarray = field(repr=False)
    static_int: np.ndarray = field(repr=False)
    rho_anc: np.ndarray = field(repr=False)
    Gamma: float = 1.0
    M: int = 4

    @property
    def d_sys(self) -> int:
        return self.h_sys.shape[0]

    def h_int(self, tau: float) -> np.ndarray:
        return self.static_int + CouplingParams(self.Gamma, tau).g * self.coupling


def xxz_setup(p: XxzParams, Gamma: float, h_anc: np.ndarray | None = None) -> CollisionSetup:
    """XXZ ring coupled on site 1 to ground-state ancillae.

    The ancilla free Hamiltonian defaults to zero.
    """
    d = 2**p.M
    return CollisionSetup(
        h_sys=build_xxz(p),
        h_anc=np.zeros((2, 2), dtype=np.complex128) if h_anc is None else np.asarray(h_anc, complex),
        coupling=exchange_coupling(1, p.M),
        static_int=np.zeros((2 * d, 2 * d), dtype=np.complex128),
        rho_anc=ancilla_ground(),
        Gamma=Gamma,
        M=p.M,
    )


def ising_setup(p: IsingParams, Gamma: float) -> CollisionSetup:
    """Long-range Ising chain coupled on its central site.

    The ancilla field ``B sigma_z^(A)`` is part of the interaction term, so
    the ancilla free Hamiltonian is zero.
    """
    if p.M % 2 == 0:
        raise EvenSiteCount(f"central site undefined for even M={p.M}")
    d = 2**p.M
    return CollisionSetup(
        h_sys=build_ising(p),
        h_anc=np.zeros((2, 2), dtype=np.complex128),
        coupling=exchange_coupling(p.central_site, p.M),
        static_int=p.B * np.kron(np.eye(d), SIGMA_Z),
        rho_anc=ancilla_ground(),
        Gamma=Gamma,
        M=p.M,
    )
