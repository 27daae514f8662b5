"""Dense complex linear algebra kernel.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``.
Operators are vectorized by column stacking, so that
``vectorize(a @ b @ c) == kron(c.T, a) @ vectorize(b)``.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import DimensionMismatch, NoConvergence, NotHermitian, NumericalRankAmbiguity

HERMITICITY_RTOL = 1e-10
RANK_TOL = 1e-9


class HermitianEigen(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise DimensionMismatch(f"expected a 2-d array, got shape {m.shape}")
    return m


def _require_square(a: np.ndarray, name: str = "matrix") -> int:
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {a.shape}")
    return a.shape[0]


def kron(a, b) -> np.ndarray:
    return np.kron(as_matrix(a), as_matrix(b))


def kron_all(*factors) -> np.ndarray:
    out = np.ones((1, 1), dtype=np.complex128)
    for f in factors:
        out = np.kron(out, as_matrix(f))
    return out


def dagger(a) -> np.ndarray:
    return as_matrix(a).conj().T


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def anticommutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b + b @ a


def frobenius(a) -> float:
    return float(np.linalg.norm(a))


def hermiticity_residual(h: np.ndarray) -> float:
    return frobenius(h - h.conj().T)


def hermitian_eig(h, tol: float | None = None) -> HermitianEigen:
    """Eigendecomposition of a Hermitian matrix.

    Eigenvalues are returned in ascending order with unitary eigenvector
    columns. ``tol`` bounds the anti-Hermitian part; by default it is
    ``1e-10 * ||h||_F``.

    Raises:
        NotHermitian: if ``||h - h^dagger||_F`` exceeds the tolerance.
        NoConvergence: if LAPACK fails or the reconstruction is inaccurate.
    """
    h = as_matrix(h)
    _require_square(h, "h")
    scale = frobenius(h)
    limit = HERMITICITY_RTOL * scale if tol is None else tol
    if hermiticity_residual(h) > limit:
        raise NotHermitian(f"anti-Hermitian part {hermiticity_residual(h):.3e} exceeds {limit:.3e}")
    try:
        w, v = np.linalg.eigh(0.5 * (h + h.conj().T))
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from exc
    recon = frobenius(h - (v * w) @ v.conj().T)
    if recon > max(1e-10 * scale, 1e-13):
        raise NoConvergence(f"eigen reconstruction residual {recon:.3e}")
    return HermitianEigen(w, v)


def expm_i(h, t: float, eig: HermitianEigen | None = None) -> np.ndarray:
    """Return ``exp(-i t h)`` for Hermitian ``h``.

    A precomputed decomposition may be passed to avoid refactoring ``h``.
    """
    w, v = eig if eig is not None else hermitian_eig(h)
    return (v * np.exp(-1j * t * w)) @ v.conj().T


def hs_inner(a, b) -> complex:
    """Hilbert-Schmidt product ``Tr(a^dagger b)``."""
    a, b = as_matrix(a), as_matrix(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes {a.shape} and {b.shape} differ")
    return complex(np.vdot(a, b))


def vectorize(a) -> np.ndarray:
    a = as_matrix(a)
    _require_square(a)
    return a.reshape(-1, order="F")


def devectorize(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.complex128).reshape(-1)
    d = int(round(np.sqrt(v.size)))
    if d * d != v.size:
        raise DimensionMismatch(f"length {v.size} is not a perfect square")
    return v.reshape((d, d), order="F")


def apply_matrix_triple(o1, o2, o3) -> np.ndarray:
    """Compute ``o1 @ o2 @ o3`` through its superoperator form."""
    o1, o2, o3 = as_matrix(o1), as_matrix(o2), as_matrix(o3)
    if not (o1.shape == o2.shape == o3.shape) or o1.shape[0] != o1.shape[1]:
        raise DimensionMismatch("apply_matrix_triple needs three square matrices of equal size")
    return devectorize(np.kron(o3.T, o1) @ vectorize(o2))


def spectral_norm(m) -> float:
    """Largest singular value, as ``sqrt(max eig(m^dagger m))``."""
    m = as_matrix(m)
    top = np.linalg.eigvalsh(m.conj().T @ m)[-1]
    return float(np.sqrt(max(top, 0.0)))


def null_space(a, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal basis (columns) of the numerical null space of ``a``.

    Singular values at or below ``rank_tol * sigma_max / 10`` count as zero,
    values above ``rank_tol * sigma_max`` as nonzero.

    Raises:
        NumericalRankAmbiguity: if a singular value falls between the two.
    """
    a = as_matrix(a)
    _, s, vh = np.linalg.svd(a)
    top = s[0] if s.size else 0.0
    if top == 0.0:
        return np.eye(a.shape[1], dtype=np.complex128)
    hi = rank_tol * top
    lo = hi / 10.0
    ambiguous = s[(s > lo) & (s <= hi)]
    if ambiguous.size:
        raise NumericalRankAmbiguity(
            f"singular values {ambiguous} lie in the ambiguous band ({lo:.2e}, {hi:.2e}]"
        )
    s_full = np.zeros(a.shape[1])
    s_full[: s.size] = s
    return vh.conj().T[:, s_full <= lo]


def fixed_point_null_space(s, rank_tol: float = RANK_TOL) -> list[np.ndarray]:
    """Basis of operators fixed by the superoperator matrix ``s``."""
    s = as_matrix(s)
    n = _require_square(s, "superoperator")
    basis = null_space(s - np.eye(n), rank_tol)
    if basis.shape[1] == 0:
        raise NumericalRankAmbiguity("superoperator has no eigenvalue 1; is it trace preserving?")
    return [devectorize(basis[:, k]) for k in range(basis.shape[1])]
