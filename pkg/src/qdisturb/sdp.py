"""Dense primal-dual interior-point solver for block LMI problems.

Primal (variables ``c`` in R^n)::

    minimize    v . c
    subject to  sum_l c_l F_l^(b) - F_0^(b)  >= 0      for every block b
                a_k . c = b_k                           (optional)

Dual::

    maximize    sum_b tr(F_0^(b) C_b) + b . y
    subject to  sum_b tr(F_l^(b) C_b) + (A^T y)_l = v_l,   C_b >= 0

Blocks are complex Hermitian and handled natively. The search direction is
the HKM (H..K..M) direction with a Mehrotra predictor-corrector step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse

from . import _accel
from . import linalg as la

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
MAX_ITER = "max-iterations"


class MalformedProblem(ValueError):
    pass


@dataclass
class Block:
    """One LMI block ``sum_l c_l F_l - F_0 >= 0``.

    The ``F_l`` are stored as triplets ``(var, row, col, val)`` sorted by
    variable; ``bvars``/``ptr`` index the variables that touch the block.
    """

    size: int
    f0: np.ndarray
    var: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    bvars: np.ndarray = field(init=False)
    ptr: np.ndarray = field(init=False)

    def __post_init__(self):
        order = np.argsort(self.var, kind="stable")
        self.var = np.ascontiguousarray(self.var[order], dtype=np.int64)
        self.rows = np.ascontiguousarray(self.rows[order], dtype=np.int64)
        self.cols = np.ascontiguousarray(self.cols[order], dtype=np.int64)
        self.vals = np.ascontiguousarray(self.vals[order], dtype=np.complex128)
        self.f0 = np.ascontiguousarray(la.as_matrix(self.f0))
        self.bvars, starts = np.unique(self.var, return_index=True)
        self.ptr = np.append(starts, self.var.size).astype(np.int64)

    @classmethod
    def from_dense(cls, f0, fs: dict[int, np.ndarray], tol: float = 0.0) -> "Block":
        """Build from ``F_0`` and a mapping ``variable index -> F_l``."""
        f0 = la.as_matrix(f0)
        var, rows, cols, vals = [], [], [], []
        for l, f in fs.items():
            f = la.as_matrix(f)
            r, c = np.nonzero(np.abs(f) > tol)
            var.append(np.full(r.size, l))
            rows.append(r)
            cols.append(c)
            vals.append(f[r, c])
        cat = (lambda xs, dt: np.concatenate(xs).astype(dt) if xs else np.zeros(0, dt))
        return cls(
            f0.shape[0],
            f0,
            cat(var, np.int64),
            cat(rows, np.int64),
            cat(cols, np.int64),
            cat(vals, np.complex128),
        )

    def matrix(self, c) -> np.ndarray:
        """``sum_l c_l F_l`` (without ``F_0``)."""
        return _accel.assemble(self.size, self.var, self.rows, self.cols, self.vals, c)

    def adjoint(self, nvars: int, x) -> np.ndarray:
        return _accel.adjoint(nvars, self.var, self.rows, self.cols, self.vals, x)

    def dense(self, l: int) -> np.ndarray:
        """Dense ``F_l`` (``F_0`` for ``l == 0`` is *not* this; see ``f0``)."""
        out = np.zeros((self.size, self.size), dtype=np.complex128)
        m = self.var == l
        np.add.at(out, (self.rows[m], self.cols[m]), self.vals[m])
        return out


@dataclass
class SdpProblem:
    v: np.ndarray
    blocks: list[Block]
    eq_a: np.ndarray | None = None
    eq_b: np.ndarray | None = None

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=float).ravel()
        if self.v.size < 1:
            raise MalformedProblem("problem needs at least one variable")
        if not self.blocks:
            raise MalformedProblem("problem needs at least one LMI block")
        n = self.v.size
        for i, b in enumerate(self.blocks):
            if b.f0.shape != (b.size, b.size):
                raise MalformedProblem(f"block {i}: F_0 has shape {b.f0.shape}, expected size {b.size}")
            if la.hermiticity_error(b.f0) > 1e-10:
                raise MalformedProblem(f"block {i}: F_0 is not Hermitian")
            if b.var.size and (b.var.min() < 0 or b.var.max() >= n):
                raise MalformedProblem(f"block {i}: variable index out of range")
            if b.rows.size and (max(b.rows.max(), b.cols.max()) >= b.size or min(b.rows.min(), b.cols.min()) < 0):
                raise MalformedProblem(f"block {i}: entry index out of range")
            if b.var.size:
                # Hermiticity of each F_l, checked through the triplets
                shape = (n * b.size, b.size)
                f = scipy.sparse.csr_matrix((b.vals, (b.var * b.size + b.rows, b.cols)), shape=shape)
                ft = scipy.sparse.csr_matrix((b.vals.conj(), (b.var * b.size + b.cols, b.rows)), shape=shape)
                diff = (f - ft).tocoo()
                if diff.nnz and np.abs(diff.data).max() > 1e-10:
                    raise MalformedProblem(f"block {i}: a constraint matrix is not Hermitian")
        if (self.eq_a is None) != (self.eq_b is None):
            raise MalformedProblem("equality constraints need both matrix and right-hand side")
        if self.eq_a is not None:
            self.eq_a = np.atleast_2d(np.asarray(self.eq_a, dtype=float))
            self.eq_b = np.asarray(self.eq_b, dtype=float).ravel()
            if self.eq_a.shape != (self.eq_b.size, n):
                raise MalformedProblem(f"equality matrix has shape {self.eq_a.shape}, expected ({self.eq_b.size}, {n})")
            if self.eq_b.size == 0:
                self.eq_a = self.eq_b = None

    @classmethod
    def from_dense(cls, v, blocks, eq_a=None, eq_b=None) -> "SdpProblem":
        """``blocks`` is a list of ``[F_0, F_1, ..., F_n]`` dense matrix lists."""
        built = []
        for mats in blocks:
            built.append(Block.from_dense(mats[0], {l: m for l, m in enumerate(mats[1:])}))
        return cls(np.asarray(v, dtype=float), built, eq_a, eq_b)

    @property
    def n(self) -> int:
        return self.v.size

    @property
    def n_eq(self) -> int:
        return 0 if self.eq_a is None else self.eq_b.size

    def slack(self, c) -> list[np.ndarray]:
        return [b.matrix(c) - b.f0 for b in self.blocks]

    def adjoint(self, cs) -> np.ndarray:
        out = np.zeros(self.n)
        for b, x in zip(self.blocks, cs):
            out += b.adjoint(self.n, x)
        return out


@dataclass
class SdpSolution:
    status: str
    c: np.ndarray
    primal_objective: float
    dual_blocks: list[np.ndarray]
    y: np.ndarray
    dual_objective: float
    gap: float
    primal_residual: float
    dual_residual: float
    iterations: int
    slack_blocks: list[np.ndarray] = field(default_factory=list, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


@dataclass
class Options:
    gap_tol: float = 1e-8
    feas_tol: float = 1e-8
    max_iter: int = 200
    verbose: bool = False


REFINE_STEPS = 2


def _reduce_equalities(a, b, tol=1e-11):
    """Drop linearly dependent equality rows; returns (A', b', U_r, consistent)."""
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return None, None, None, bool(np.allclose(b, 0))
    r = int(np.sum(s > tol * s[0]))
    ur = u[:, :r]
    a2 = s[:r, None] * vt[:r]
    b2 = ur.T @ b
    resid = b - ur @ b2
    consistent = np.linalg.norm(resid) <= 1e-9 * max(1.0, np.linalg.norm(b))
    return a2, b2, ur, consistent


def _chol_inv(s):
    """Cholesky factor and inverse of a Hermitian PD matrix."""
    lo = np.linalg.cholesky(s)
    li = scipy.linalg.solve_triangular(lo, np.eye(s.shape[0]), lower=True)
    inv = li.conj().T @ li
    return lo, 0.5 * (inv + inv.conj().T)


def _max_step(lo, ds):
    """Largest alpha with L L^H + alpha dS >= 0 (inf if unrestricted)."""
    t = scipy.linalg.solve_triangular(lo, ds, lower=True)
    t = scipy.linalg.solve_triangular(lo, t.conj().T, lower=True).conj().T
    w = np.linalg.eigvalsh(0.5 * (t + t.conj().T))
    lo_eig = w[0]
    return math.inf if lo_eig >= 0 else -1.0 / lo_eig


def _herm(m):
    return 0.5 * (m + m.conj().T)


def solve(p: SdpProblem, opts: Options | None = None, **kw) -> SdpSolution:
    """Solve ``p``. Non-optimal outcomes are reported through ``status``."""
    opts = opts or Options(**kw)
    n = p.n
    blocks = p.blocks
    sizes = [b.size for b in blocks]
    ntot = sum(sizes)

    ea = eb = ur = None
    if p.eq_a is not None:
        ea, eb, ur, consistent = _reduce_equalities(p.eq_a, p.eq_b)
        if not consistent:
            return _failed(p, INFEASIBLE, 0)
    m = 0 if ea is None else ea.shape[0]

    # starting point, scaled from the data norms
    f0n = max([np.linalg.norm(b.f0) for b in blocks] + [1.0])
    fnorm = np.zeros(n)
    for b in blocks:
        fnorm += np.bincount(b.var, weights=np.abs(b.vals) ** 2, minlength=n)
    fnorm = np.sqrt(fnorm)
    nmax = max(sizes)
    eta = max(10.0, math.sqrt(nmax), f0n, float(fnorm.max(initial=0.0)))
    xi = max(10.0, math.sqrt(nmax), nmax * float(np.max((1 + np.abs(p.v)) / (1 + fnorm))))
    c = np.zeros(n)
    y = np.zeros(m)
    S = [eta * np.eye(k, dtype=np.complex128) for k in sizes]
    C = [xi * np.eye(k, dtype=np.complex128) for k in sizes]

    # Gram matrix tr(F_l F_k): used to pull each dual direction back onto
    # the dual equality space, which the Schur solve loses near optimum
    gram = np.zeros((n, n))
    for b in blocks:
        if b.var.size:
            eye = np.eye(b.size, dtype=np.complex128)
            _accel.schur_block(gram, b.bvars, b.ptr, b.rows, b.cols, b.vals, eye, eye)
    gram_ok = bool(np.all(np.diag(gram) > 0))
    if gram_ok:
        try:
            gram_cho = scipy.linalg.cho_factor(gram, lower=True)
        except np.linalg.LinAlgError:
            gram_ok = False

    vnorm = 1.0 + np.linalg.norm(p.v)
    bnorm = 1.0 + (np.linalg.norm(eb) if m else 0.0)
    status = MAX_ITER
    it = 0
    for it in range(1, opts.max_iter + 1):
        fc = [b.matrix(c) - b.f0 for b in blocks]
        rp = [fcb - sb for fcb, sb in zip(fc, S)]
        rd = p.v - p.adjoint(C) - (ea.T @ y if m else 0.0)
        req = eb - ea @ c if m else np.zeros(0)
        pobj = float(p.v @ c)
        dobj = float(sum(np.real(np.vdot(b.f0, cb)) for b, cb in zip(blocks, C)) + (eb @ y if m else 0.0))
        pinf = max(
            max(max(0.0, -np.linalg.eigvalsh(_herm(f))[0]) for f in fc),
            float(np.linalg.norm(req, np.inf)) if m else 0.0,
        )
        dinf = float(np.linalg.norm(rd, np.inf))
        gap = pobj - dobj
        if opts.verbose:
            print(f"{it:3d} p={pobj:+.9e} d={dobj:+.9e} gap={gap:.2e} pinf={pinf:.2e} dinf={dinf:.2e}")
        if abs(gap) <= opts.gap_tol * max(1.0, abs(pobj)) and pinf <= opts.feas_tol and dinf <= opts.feas_tol:
            status = OPTIMAL
            break
        st = _detect_infeasibility(p, c, C, y, ea, eb, fc, opts)
        if st is not None:
            status = st
            break

        mu = sum(np.real(np.vdot(sb, cb)) for sb, cb in zip(S, C)) / ntot
        factors = []
        try:
            for sb in S:
                factors.append(_chol_inv(sb))
        except np.linalg.LinAlgError:
            break
        sinv = [f[1] for f in factors]

        # Schur complement
        M = np.zeros((n, n))
        for b, si, cb in zip(blocks, sinv, C):
            if b.var.size:
                _accel.schur_block(M, b.bvars, b.ptr, b.rows, b.cols, b.vals, np.ascontiguousarray(si), np.ascontiguousarray(cb))
        try:
            kkt = _KKT(M, ea)
        except np.linalg.LinAlgError:
            break

        def direction(sigma_mu, corr):
            # dC = T_k - S^-1 dS C with T_k collecting everything but dc
            rhs_mats = []
            for k in range(len(blocks)):
                t = sigma_mu * sinv[k] - C[k]
                if corr is not None:
                    t = t - sinv[k] @ corr[0][k] @ corr[1][k]
                rhs_mats.append(t)
            g = p.adjoint([_herm(t - sinv[k] @ rp[k] @ C[k]) for k, t in enumerate(rhs_mats)]) - rd
            dc, dy = kkt.solve(g, req)

            def complete(dc):
                ds = [b.matrix(dc) + rpk for b, rpk in zip(blocks, rp)]
                dC = [_herm(t - sinv[k] @ ds[k] @ C[k]) for k, t in enumerate(rhs_mats)]
                return ds, dC

            ds, dC = complete(dc)

            def error(dc, dy, dC):
                err_d = rd - p.adjoint(dC) - (ea.T @ dy if m else 0.0)
                err_p = req - ea @ dc if m else req
                return err_d, err_p, max(np.abs(err_d).max(initial=0.0), np.abs(err_p).max(initial=0.0))

            # iterative refinement against the exact operator, not M; a
            # correction is kept only if it shrinks the residual
            err_d, err_p, e0 = error(dc, dy, dC)
            for _ in range(REFINE_STEPS):
                if e0 <= 1e-15 * (1 + np.abs(g).max()):
                    break
                ec, ey = kkt.solve(-err_d, err_p)
                dc2, dy2 = dc + ec, dy + ey
                ds2, dC2 = complete(dc2)
                err_d2, err_p2, e1 = error(dc2, dy2, dC2)
                if not e1 < 0.5 * e0:
                    break
                dc, dy, ds, dC = dc2, dy2, ds2, dC2
                err_d, err_p, e0 = err_d2, err_p2, e1
            if gram_ok:
                z = scipy.linalg.cho_solve(gram_cho, err_d)
                dC = [_herm(d + b.matrix(z)) for d, b in zip(dC, blocks)]
            return dc, dy, ds, dC

        def steps(ds, dC):
            ap = min([_max_step(f[0], d) for f, d in zip(factors, ds)] + [math.inf])
            ad = math.inf
            for cb, d in zip(C, dC):
                try:
                    lc = np.linalg.cholesky(cb)
                except np.linalg.LinAlgError:
                    return 0.0, 0.0
                ad = min(ad, _max_step(lc, d))
            return ap, ad

        try:
            dc, dy, ds, dC = direction(0.0, None)
            ap, ad = steps(ds, dC)
            ap1, ad1 = min(1.0, ap), min(1.0, ad)
            mu_aff = sum(
                np.real(np.vdot(sb + ap1 * d1, cb + ad1 * d2))
                for sb, d1, cb, d2 in zip(S, ds, C, dC)
            ) / ntot
            sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0
            dc, dy, ds, dC = direction(sigma * mu, (ds, dC))
            ap, ad = steps(ds, dC)
        except (np.linalg.LinAlgError, ValueError):
            break
        gamma = 0.9 + 0.09 * min(min(1.0, ap), min(1.0, ad))
        ap = min(1.0, gamma * ap)
        ad = min(1.0, gamma * ad)
        c = c + ap * dc
        S = [_herm(sb + ap * d) for sb, d in zip(S, ds)]
        C = [_herm(cb + ad * d) for cb, d in zip(C, dC)]
        if m:
            y = y + ad * dy

    fc = [b.matrix(c) - b.f0 for b in blocks]
    return _finish(p, status, c, C, y, ea, eb, ur, fc, it)


class _KKT:
    """Solves ``[[M, -A^T], [A, 0]] [dc; dy] = [g; r]``."""

    def __init__(self, M, a):
        self.a = a
        self.M = M
        try:
            self.cho = scipy.linalg.cho_factor(M, lower=True)
            if a is not None:
                mia = scipy.linalg.cho_solve(self.cho, a.T)
                self.schur = scipy.linalg.cho_factor(a @ mia, lower=True)
                self.mia = mia
            self.mode = "chol"
        except np.linalg.LinAlgError:
            k = M.shape[0]
            if a is None:
                self.full = scipy.linalg.lu_factor(M + 1e-14 * np.trace(M) / k * np.eye(k))
            else:
                mm = a.shape[0]
                big = np.block([[M, -a.T], [a, np.zeros((mm, mm))]])
                self.full = scipy.linalg.lu_factor(big)
            self.mode = "lu"

    def solve(self, g, r):
        a = self.a
        if self.mode == "chol":
            mg = scipy.linalg.cho_solve(self.cho, g)
            if a is None:
                return mg, np.zeros(0)
            dy = scipy.linalg.cho_solve(self.schur, r - a @ mg)
            return mg + self.mia @ dy, dy
        if a is None:
            return scipy.linalg.lu_solve(self.full, g), np.zeros(0)
        sol = scipy.linalg.lu_solve(self.full, np.concatenate([g, r]))
        k = g.size
        return sol[:k], sol[k:]


def _detect_infeasibility(p, c, C, y, ea, eb, fc, opts):
    tol = 1e-8
    # dual ray: sum tr(F_l C) + A^T y ~ 0 with positive dual objective
    h = float(sum(np.real(np.vdot(b.f0, cb)) for b, cb in zip(p.blocks, C)) + (eb @ y if ea is not None else 0.0))
    if h > 0:
        r = p.adjoint(C) + (ea.T @ y if ea is not None else 0.0)
        scale = h
        if np.linalg.norm(r) <= tol * scale and scale > 1e6 * (1 + np.linalg.norm(p.v)):
            return INFEASIBLE
    # primal ray: v.c < 0 with sum c F >= 0 and A c ~ 0
    vc = float(p.v @ c)
    if vc < 0:
        scale = -vc
        hom = min(np.linalg.eigvalsh(_herm(b.matrix(c)))[0] for b in p.blocks)
        eqr = np.linalg.norm(ea @ c) if ea is not None else 0.0
        big = scale > 1e6 * (1 + max(np.linalg.norm(b.f0) for b in p.blocks))
        if big and hom >= -tol * scale and eqr <= tol * scale:
            return UNBOUNDED
    return None


def _finish(p, status, c, C, y, ea, eb, ur, fc, it):
    y_orig = ur @ y if ur is not None and y.size else np.zeros(p.n_eq)
    pobj = float(p.v @ c)
    dobj = float(sum(np.real(np.vdot(b.f0, cb)) for b, cb in zip(p.blocks, C)))
    if p.eq_a is not None:
        dobj += float(p.eq_b @ y_orig)
    res = residuals(p, c, C, y_orig)
    return SdpSolution(
        status=status,
        c=c,
        primal_objective=pobj,
        dual_blocks=C,
        y=y_orig,
        dual_objective=dobj,
        gap=pobj - dobj,
        primal_residual=res.primal,
        dual_residual=res.dual,
        iterations=it,
        slack_blocks=fc,
    )


def _failed(p, status, it):
    z = [np.zeros((b.size, b.size), dtype=np.complex128) for b in p.blocks]
    return SdpSolution(status, np.zeros(p.n), math.nan, z, np.zeros(p.n_eq), math.nan, math.nan, math.inf, math.inf, it)


@dataclass
class Residuals:
    """Constraint violations recomputed from scratch.

    ``lmi`` holds per-block ``max(0, -lambda_min(sum c F - F_0))``,
    ``dual_psd`` per-block ``max(0, -lambda_min(C_b))``.
    """

    lmi: list[float]
    equality: float
    dual_psd: list[float]
    dual_equality: float
    gap: float

    @property
    def primal(self) -> float:
        return max(self.lmi + [self.equality])

    @property
    def dual(self) -> float:
        return max(self.dual_psd + [self.dual_equality])


def residuals(p: SdpProblem, c, C, y) -> Residuals:
    lmi, dpsd = [], []
    dual_lhs = np.zeros(p.n)
    dobj = 0.0
    for b, cb in zip(p.blocks, C):
        # dense accumulation path, independent of the solver kernels
        s = -b.f0.copy()
        np.add.at(s, (b.rows, b.cols), b.vals * c[b.var])
        lmi.append(max(0.0, -float(np.linalg.eigvalsh(_herm(s))[0])))
        dpsd.append(max(0.0, -float(np.linalg.eigvalsh(_herm(cb))[0])))
        dual_lhs += np.bincount(b.var, weights=np.real(b.vals * cb[b.cols, b.rows]), minlength=p.n)
        dobj += float(np.real(np.trace(b.f0 @ cb)))
    eq = 0.0
    if p.eq_a is not None:
        eq = float(np.max(np.abs(p.eq_a @ c - p.eq_b)))
        dual_lhs += p.eq_a.T @ y
        dobj += float(p.eq_b @ y)
    deq = float(np.max(np.abs(dual_lhs - p.v)))
    return Residuals(lmi, eq, dpsd, deq, float(p.v @ c) - dobj)


def verify(p: SdpProblem, s: SdpSolution) -> Residuals:
    """Recompute all residuals of a primal/dual pair."""
    return residuals(p, np.asarray(s.c, dtype=float), s.dual_blocks, np.asarray(s.y, dtype=float))
