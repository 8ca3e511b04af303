"""Hot kernels of the interior-point solver.

Each kernel has a numba-compiled version and a pure-numpy version with the
same signature. The numba path is used when numba imports and the
environment variable ``QDISTURB_NO_NUMBA`` is unset or ``0``; ``use_numba``
switches at runtime (the benchmark does this).
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False

_disabled = os.environ.get("QDISTURB_NO_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")
USE_NUMBA = HAVE_NUMBA and not _disabled


def use_numba(flag: bool) -> bool:
    """Select the kernel backend; returns the previous setting."""
    global USE_NUMBA
    prev = USE_NUMBA
    USE_NUMBA = bool(flag) and HAVE_NUMBA
    return prev


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


# -- Schur complement -------------------------------------------------------
#
# For one LMI block with sparse constraint matrices F_l (stored as CSR-by-
# variable triplets), accumulate M[i, j] += Re tr(F_i S^-1 F_j C) into the
# global matrix. ``bvars[l]`` is the global variable index of local l.


def _scatter(M, bvars, blk):
    lo, hi = bvars[0], bvars[-1] + 1
    if hi - lo == bvars.shape[0]:
        M[lo:hi, lo:hi] += blk
    else:
        M[np.ix_(bvars, bvars)] += blk


def _schur_block_numpy(M, bvars, ptr, rows, cols, vals, sinv, cmat):
    nb = bvars.shape[0]
    n = sinv.shape[0]
    dense = np.zeros((nb, n, n), dtype=np.complex128)
    local = np.repeat(np.arange(nb), np.diff(ptr))
    np.add.at(dense, (local, rows, cols), vals)
    g = cmat @ dense @ sinv
    # tr(F_k G_l) = sum_pq F_k[p, q] G_l[q, p]; real part by one real product
    f = dense.reshape(nb, -1)
    gt = g.transpose(0, 2, 1).reshape(nb, -1)
    blk = np.hstack([f.real, -f.imag]) @ np.hstack([gt.real, gt.imag]).T
    blk = 0.5 * (blk + blk.T)
    _scatter(M, bvars, blk)


if HAVE_NUMBA:

    @numba.njit(cache=True)
    def _schur_local_numba(bvars, ptr, rows, cols, vals, sinv, cmat):
        nb = bvars.shape[0]
        n = sinv.shape[0]
        # G_l = C F_l S^-1, built from the sparse entries of F_l
        g = np.zeros((nb, n, n), dtype=np.complex128)
        for l in range(nb):
            for a in range(ptr[l], ptr[l + 1]):
                r = rows[a]
                c = cols[a]
                v = vals[a]
                for q in range(n):
                    cq = cmat[q, r] * v
                    if cq == 0.0:
                        continue
                    for p in range(n):
                        g[l, q, p] += cq * sinv[c, p]
        blk = np.zeros((nb, nb))
        for l in range(nb):
            for k in range(l, nb):
                acc = 0.0
                for b in range(ptr[k], ptr[k + 1]):
                    acc += (vals[b] * g[l, cols[b], rows[b]]).real
                blk[l, k] = acc
                blk[k, l] = acc
        return blk

    def _schur_block_numba(M, bvars, ptr, rows, cols, vals, sinv, cmat):
        _scatter(M, bvars, _schur_local_numba(bvars, ptr, rows, cols, vals, sinv, cmat))

else:  # pragma: no cover
    _schur_block_numba = None

# Above this fill fraction of the stacked F_l the dense BLAS path is faster
# than the sparse loop, whichever backend is selected.
DENSE_FILL = 0.05


def schur_block(M, bvars, ptr, rows, cols, vals, sinv, cmat) -> None:
    n = sinv.shape[0]
    fill = vals.shape[0] / max(1, bvars.shape[0] * n * n)
    if USE_NUMBA and fill < DENSE_FILL:
        _schur_block_numba(M, bvars, ptr, rows, cols, vals, sinv, cmat)
    else:
        _schur_block_numpy(M, bvars, ptr, rows, cols, vals, sinv, cmat)


# -- sparse affine maps -----------------------------------------------------


def _assemble_numpy(n, var, rows, cols, vals, c):
    out = np.zeros((n, n), dtype=np.complex128)
    np.add.at(out, (rows, cols), vals * c[var])
    return out


def _adjoint_numpy(nvars, var, rows, cols, vals, x):
    w = np.real(vals * x[cols, rows])
    return np.bincount(var, weights=w, minlength=nvars)


if HAVE_NUMBA:

    @numba.njit(cache=True)
    def _assemble_numba(n, var, rows, cols, vals, c):
        out = np.zeros((n, n), dtype=np.complex128)
        for a in range(var.shape[0]):
            out[rows[a], cols[a]] += vals[a] * c[var[a]]
        return out

    @numba.njit(cache=True)
    def _adjoint_numba(nvars, var, rows, cols, vals, x):
        out = np.zeros(nvars)
        for a in range(var.shape[0]):
            out[var[a]] += (vals[a] * x[cols[a], rows[a]]).real
        return out

else:  # pragma: no cover
    _assemble_numba = _adjoint_numba = None


def assemble(n, var, rows, cols, vals, c) -> np.ndarray:
    """``sum_l c[l] F_l`` for one block of triplets."""
    c = np.ascontiguousarray(c, dtype=np.float64)
    if USE_NUMBA:
        return _assemble_numba(n, var, rows, cols, vals, c)
    return _assemble_numpy(n, var, rows, cols, vals, c)


def adjoint(nvars, var, rows, cols, vals, x) -> np.ndarray:
    """``[Re tr(F_l X)]_l`` for one block of triplets."""
    x = np.ascontiguousarray(x, dtype=np.complex128)
    if USE_NUMBA:
        return _adjoint_numba(nvars, var, rows, cols, vals, x)
    return _adjoint_numpy(nvars, var, rows, cols, vals, x)
