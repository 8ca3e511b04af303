"""Dense complex linear algebra shared by the rest of the package.

All functions take and return plain ``numpy.ndarray`` objects (complex128 for
operators). Tolerances are absolute and applied to eigenvalues.
"""

from __future__ import annotations

import numpy as np

HERM_TOL = 1e-10
PSD_TOL = 1e-10


class DimensionError(ValueError):
    """Operands have incompatible shapes."""


class NotHermitianError(ValueError):
    """Input deviates from Hermiticity by more than the tolerance."""


class NotPSDError(ValueError):
    """Input has an eigenvalue below ``-tol``."""


def as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2:
        raise DimensionError(f"expected a 2-d array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def _check_square(a: np.ndarray) -> None:
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"matrix is not square: {a.shape}")


def hermiticity_error(m) -> float:
    a = as_matrix(m)
    _check_square(a)
    return float(np.max(np.abs(a - a.conj().T), initial=0.0))


def is_hermitian(m, tol: float = HERM_TOL) -> bool:
    return hermiticity_error(m) <= tol


def hermitize(m) -> np.ndarray:
    a = as_matrix(m)
    return 0.5 * (a + a.conj().T)


def _checked_hermitian(m, tol: float = HERM_TOL) -> np.ndarray:
    a = as_matrix(m)
    _check_square(a)
    err = hermiticity_error(a)
    if err > tol:
        raise NotHermitianError(f"matrix is not Hermitian (deviation {err:.3e})")
    return 0.5 * (a + a.conj().T)


def _fix_phases(vecs: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Rotate every column so its first non-negligible entry is real positive."""
    out = vecs.copy()
    for k in range(out.shape[1]):
        col = out[:, k]
        idx = np.flatnonzero(np.abs(col) > tol)
        if idx.size:
            z = col[idx[0]]
            out[:, k] = col * (abs(z) / z)
    return out


def eigh(m, tol: float = HERM_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix.

    Returns ascending real eigenvalues and a unitary whose columns are the
    eigenvectors, each with its first nonzero component real and positive.
    """
    a = _checked_hermitian(m, tol)
    w, v = np.linalg.eigh(a)
    return w, _fix_phases(v)


def eigvalsh(m, tol: float = HERM_TOL) -> np.ndarray:
    return np.linalg.eigvalsh(_checked_hermitian(m, tol))


def min_eig(m, tol: float = HERM_TOL) -> float:
    return float(eigvalsh(m, tol)[0])


def is_psd(m, tol: float = PSD_TOL) -> bool:
    """True iff the smallest eigenvalue of ``m`` is at least ``-tol``."""
    return min_eig(m) >= -tol


def operator_norm(m) -> float:
    """Largest singular value."""
    a = as_matrix(m)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def trace_norm(m) -> float:
    a = as_matrix(m)
    return float(np.sum(np.linalg.svd(a, compute_uv=False)))


def kron(a, b) -> np.ndarray:
    return np.kron(as_matrix(a), as_matrix(b))


def partial_trace(m, dims: tuple[int, int], subsystem: str = "first") -> np.ndarray:
    """Trace out one factor of a bipartite operator on ``dims[0] * dims[1]``.

    ``subsystem`` names the factor being traced out: ``"first"`` or
    ``"second"``.
    """
    a = as_matrix(m)
    da, db = dims
    if a.shape != (da * db, da * db):
        raise DimensionError(f"shape {a.shape} does not match dims {dims}")
    t = a.reshape(da, db, da, db)
    if subsystem == "first":
        return np.einsum("ijik->jk", t)
    if subsystem == "second":
        return np.einsum("ijkj->ik", t)
    raise ValueError(f"subsystem must be 'first' or 'second', got {subsystem!r}")


def commutator(a, b) -> np.ndarray:
    a = as_matrix(a)
    b = as_matrix(b)
    _check_square(a)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    return a @ b - b @ a


def sqrt_psd(m, tol: float = PSD_TOL) -> np.ndarray:
    """Positive square root; eigenvalues in ``[-tol, 0)`` are clamped to zero."""
    w, v = np.linalg.eigh(_checked_hermitian(m))
    if w[0] < -tol:
        raise NotPSDError(f"matrix is not PSD (min eigenvalue {w[0]:.3e})")
    w = np.clip(w, 0.0, None)
    r = (v * np.sqrt(w)) @ v.conj().T
    return 0.5 * (r + r.conj().T)


def psd_part(m) -> np.ndarray:
    """Projection onto the PSD cone in Frobenius norm."""
    w, v = np.linalg.eigh(hermitize(m))
    return (v * np.clip(w, 0.0, None)) @ v.conj().T


def rank(m, rtol: float = 1e-9) -> int:
    s = np.linalg.svd(as_matrix(m), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def hermitian_basis(d: int) -> np.ndarray:
    """Orthonormal Hermitian operator basis of shape ``(d*d, d, d)``.

    Element 0 is ``1/sqrt(d)``; the rest are generalized Gell-Mann matrices
    (symmetric, antisymmetric, then diagonal) scaled to unit Hilbert-Schmidt
    norm.
    """
    if d < 1:
        raise ValueError("dimension must be at least 1")
    out = np.zeros((d * d, d, d), dtype=np.complex128)
    out[0] = np.eye(d) / np.sqrt(d)
    k = 1
    s = 1.0 / np.sqrt(2.0)
    for j in range(d):
        for l in range(j + 1, d):
            out[k, j, l] = out[k, l, j] = s
            k += 1
    for j in range(d):
        for l in range(j + 1, d):
            out[k, j, l] = -1j * s
            out[k, l, j] = 1j * s
            k += 1
    for j in range(1, d):
        diag = np.zeros(d)
        diag[:j] = 1.0
        diag[j] = -j
        out[k] = np.diag(diag / np.sqrt(j * (j + 1)))
        k += 1
    return out


def elementary_hermitian_basis(d: int) -> np.ndarray:
    """Sparse orthonormal Hermitian basis: diagonal units, then the real and
    imaginary off-diagonal pairs. Used for SDP variable coordinates."""
    out = np.zeros((d * d, d, d), dtype=np.complex128)
    k = 0
    for j in range(d):
        out[k, j, j] = 1.0
        k += 1
    s = 1.0 / np.sqrt(2.0)
    for j in range(d):
        for l in range(j + 1, d):
            out[k, j, l] = out[k, l, j] = s
            out[k + 1, j, l] = -1j * s
            out[k + 1, l, j] = 1j * s
            k += 2
    return out


def coordinates(m, basis: np.ndarray) -> np.ndarray:
    """Real coordinates ``tr(E_i m)`` of a Hermitian matrix in an orthonormal
    Hermitian basis."""
    a = as_matrix(m)
    return np.real(np.einsum("kij,ji->k", basis, a))


def from_coordinates(c, basis: np.ndarray) -> np.ndarray:
    return np.tensordot(np.asarray(c, dtype=float), basis, axes=1)


def hs_inner(a, b) -> complex:
    return complex(np.vdot(as_matrix(a), as_matrix(b)))
