"""Disturbance measure D_A(B), its dual certificate, and related decisions.

The primal program has one Hermitian variable per outcome of ``A``: the
Choi matrix ``J_x = sum_jk |j><k| (x) I_x*(|j><k|)`` of the Heisenberg map,
so that ``I_x*(Y) = Tr_1[(Y^T (x) 1) J_x]``::

    minimize    lam
    subject to  J_x >= 0,  Tr_1 J_x = A_x                      for all x
                -lam 1 <= B_y - sum_x Tr_1[(B_y^T (x) 1) J_x] <= lam 1   for all y

Its dual is the certificate program over Hermitian ``H_x``, ``K_y``::

    maximize    sum_x tr(H_x A_x) - sum_y tr(K_y B_y)
    subject to  H_x (x) 1 <= sum_y K_y (x) B_y^T,   sum_y ||K_y||_1 <= 1
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import linalg as la
from . import sdp
from .observables import JointObservable, Observable, is_rank_one

DECISION_TOL = 1e-6
FEAS_TOL = 1e-8


class SolverFailure(RuntimeError):
    def __init__(self, status: str, detail: str = ""):
        super().__init__(f"solver status {status!r} {detail}".strip())
        self.status = status


class CertificateError(ValueError):
    """A dual certificate violates constraint ``(d)`` or ``(e)``."""

    def __init__(self, constraint: str, message: str, violation: float):
        super().__init__(f"constraint {constraint} violated: {message}")
        self.constraint = constraint
        self.violation = violation


@dataclass
class Certificate:
    h: list[np.ndarray]
    k: list[np.ndarray]
    bound: float


@dataclass
class DisturbanceReport:
    value: float
    choi: list[np.ndarray]
    certificate: Certificate
    non_disturbing: bool
    status: str
    gap: float
    residuals: dict = field(default_factory=dict)
    iterations: int = 0

    @property
    def dual_value(self) -> float:
        return self.certificate.bound


@dataclass
class JointMeasurabilityReport:
    feasible: bool
    margin: float
    joint: JointObservable | None
    status: str
    marginal_residual: float = math.nan


def _check_pair(a: Observable, b: Observable) -> None:
    if a.dim != b.dim:
        raise la.DimensionError(f"dimension mismatch: {a.dim} vs {b.dim}")


def _block(size, f0, var0, mats, tol=1e-15):
    """Block whose variable ``var0 + i`` carries the dense matrix ``mats[i]``."""
    mats = np.asarray(mats, dtype=np.complex128)
    idx, r, c = np.nonzero(np.abs(mats) > tol)
    return sdp.Block(size, f0, idx + var0, r, c, mats[idx, r, c])


def _concat_blocks(size, f0, parts):
    """Merge several ``(var0, mats)`` parts into one block."""
    var, rows, cols, vals = [], [], [], []
    for var0, mats in parts:
        mats = np.asarray(mats, dtype=np.complex128)
        if mats.ndim == 2:
            mats = mats[None]
        idx, r, c = np.nonzero(np.abs(mats) > 1e-15)
        var.append(idx + var0)
        rows.append(r)
        cols.append(c)
        vals.append(mats[idx, r, c])
    return sdp.Block(size, f0, np.concatenate(var), np.concatenate(rows), np.concatenate(cols), np.concatenate(vals))


def heisenberg_apply(j: np.ndarray, y: np.ndarray) -> np.ndarray:
    """``Tr_1[(Y^T (x) 1) J]`` for a Choi matrix of a Heisenberg map."""
    d = y.shape[0]
    r = j.shape[0] // d
    return np.einsum("jl,jalb->ab", y, j.reshape(d, r, d, r))


def _heisenberg_images(basis_big: np.ndarray, y: np.ndarray) -> np.ndarray:
    d = y.shape[0]
    r = basis_big.shape[1] // d
    g = basis_big.reshape(-1, d, r, d, r)
    return np.einsum("jl,kjalb->kab", y, g)


def _unit_traces(basis_big: np.ndarray, basis_small: np.ndarray, d: int) -> np.ndarray:
    """Rows ``k``, columns ``l``: ``tr(E_k Tr_1 G_l)``."""
    r = basis_small.shape[1]
    g = basis_big.reshape(-1, d, r, d, r)
    tr1 = np.einsum("ljajb->lab", g)
    return np.real(np.einsum("kba,lab->kl", basis_small, tr1))


def _support(e: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Isometry (columns) onto the range of a PSD effect."""
    w, v = np.linalg.eigh(e)
    return v[:, w > tol * max(1.0, w[-1])]


@dataclass
class _Layout:
    d: int
    supports: list[np.ndarray]
    offsets: list[int]
    ny: int

    @property
    def nx(self):
        return len(self.supports)

    def rank(self, x):
        return self.supports[x].shape[1]

    def jslice(self, x):
        n = (self.d * self.rank(x)) ** 2
        return slice(self.offsets[x], self.offsets[x] + n)


def disturbance_problem(a: Observable, b: Observable):
    """Assemble the primal program; returns ``(problem, layout)``.

    ``J_x`` is parametrized on ``C^d (x) supp(A_x)``, where every feasible
    Choi matrix lives; this keeps the program strictly feasible when some
    effects are singular.
    """
    _check_pair(a, b)
    d = a.dim
    supports = [_support(e) for e in a.effects]
    offsets, pos = [], 1
    for v_x in supports:
        offsets.append(pos)
        pos += (d * v_x.shape[1]) ** 2
    lay = _Layout(d, supports, offsets, len(b))
    n = pos
    v = np.zeros(n)
    v[0] = 1.0
    blocks = []
    eq_rows, eq_rhs = [], []
    images = {y: [] for y in range(len(b))}
    for x, v_x in enumerate(supports):
        r = v_x.shape[1]
        if r == 0:
            continue
        big = la.elementary_hermitian_basis(d * r)
        small = la.elementary_hermitian_basis(r)
        blocks.append(_block(d * r, np.zeros((d * r, d * r)), offsets[x], big))
        ut = _unit_traces(big, small, d)
        rows = np.zeros((r * r, n))
        rows[:, lay.jslice(x)] = ut
        eq_rows.append(rows)
        eq_rhs.append(la.coordinates(v_x.conj().T @ a.effects[x] @ v_x, small))
        for y, by in enumerate(b.effects):
            img = _heisenberg_images(big, by)
            images[y].append((offsets[x], np.einsum("ia,kab,jb->kij", v_x, img, v_x.conj())))
    eye = np.eye(d)
    for y, by in enumerate(b.effects):
        for sign in (1.0, -1.0):
            parts = [(0, eye)] + [(off, sign * img) for off, img in images[y]]
            blocks.append(_concat_blocks(d, sign * by, parts))
    prob = sdp.SdpProblem(v, blocks, np.vstack(eq_rows), np.concatenate(eq_rhs))
    return prob, lay


def _lift_choi(jt: np.ndarray, v_x: np.ndarray, d: int) -> np.ndarray:
    w = np.kron(np.eye(d), v_x)
    return la.hermitize(w @ jt @ w.conj().T)


def _extract_certificate(sol, lay, a, b) -> Certificate:
    d = lay.d
    nonzero = [x for x in range(lay.nx) if lay.rank(x)]
    nblk = len(nonzero)
    k = []
    for yy in range(lay.ny):
        zp = sol.dual_blocks[nblk + 2 * yy]
        zm = sol.dual_blocks[nblk + 2 * yy + 1]
        k.append(la.hermitize(zm - zp))
    h_support = []
    pos = 0
    for x in range(lay.nx):
        r = lay.rank(x)
        ht = la.from_coordinates(sol.y[pos:pos + r * r], la.elementary_hermitian_basis(r)) if r else np.zeros((0, 0))
        pos += r * r
        h_support.append(ht)
    return lift_certificate(a, b, lay.supports, h_support, k)


def lift_certificate(a: Observable, b: Observable, supports, h_support, k) -> Certificate:
    """Turn support-restricted ``H_x`` into full operators.

    On ``ker A_x`` the operator is set to ``-c``. The repair shift needed
    for constraint (d) decays like ``1/c``; ``c`` is capped at ``1e6`` times
    the data scale, beyond which eigenvalue rounding exceeds the gain.
    """
    d = a.dim
    k = [la.hermitize(m) for m in k]
    s = sum(la.trace_norm(m) for m in k)
    if s > 1e-300:
        k = [m / s for m in k]
        h_support = [m / s for m in h_support]
    rhs = sum(np.kron(ky, by.T) for ky, by in zip(k, b.effects))
    scale = 1.0 + la.operator_norm(rhs)
    h = []
    for x, (v_x, ht) in enumerate(zip(supports, h_support)):
        on_support = v_x @ ht @ v_x.conj().T if v_x.shape[1] else np.zeros((d, d))
        ker = np.eye(d) - v_x @ v_x.conj().T
        tra = float(np.real(np.trace(a.effects[x])))
        c = scale + la.operator_norm(on_support)
        c_max = 1e6 * c
        best = None
        while True:
            hx = on_support - c * ker
            shift = max(0.0, -float(np.linalg.eigvalsh(la.hermitize(rhs - np.kron(hx, np.eye(d))))[0]))
            cost = shift * tra
            if best is None or cost < best[0]:
                best = (cost, hx)
            if cost < 1e-11 or v_x.shape[1] == d or c >= c_max:
                break
            c *= 10.0
        h.append(best[1])
    return repair_certificate(a, b, h, k, normalize=False)


def repair_certificate(a: Observable, b: Observable, h, k, normalize: bool = True) -> Certificate:
    """Normalize ``sum ||K_y||_1`` to one and shift each ``H_x`` down until
    ``H_x (x) 1 <= sum_y K_y (x) B_y^T`` holds exactly."""
    d = a.dim
    h = [la.hermitize(m) for m in h]
    k = [la.hermitize(m) for m in k]
    s = sum(la.trace_norm(m) for m in k)
    if normalize and s > 1e-300:
        h = [m / s for m in h]
        k = [m / s for m in k]
    rhs = sum(np.kron(ky, by.T) for ky, by in zip(k, b.effects))
    eye = np.eye(d)
    fixed = []
    for hx in h:
        w = np.linalg.eigvalsh(la.hermitize(rhs - np.kron(hx, eye)))
        shift = max(0.0, -w[0])
        if shift > 0:
            shift = shift * (1 + 1e-9) + 1e-15
        fixed.append(hx - shift * eye)
    bound = certificate_value(a, b, fixed, k)
    return Certificate(fixed, k, bound)


def certificate_value(a: Observable, b: Observable, h, k) -> float:
    return float(
        sum(np.real(np.trace(hx @ ax)) for hx, ax in zip(h, a.effects))
        - sum(np.real(np.trace(ky @ by)) for ky, by in zip(k, b.effects))
    )


def verify_dual_certificate(a: Observable, b: Observable, h, k, feas_tol: float = FEAS_TOL) -> float:
    """Check constraints (d) and (e); return the certified lower bound on
    ``D_A(B)``. Raises :class:`CertificateError` naming the violated
    constraint."""
    _check_pair(a, b)
    if len(h) != len(a) or len(k) != len(b):
        raise ValueError(f"expected {len(a)} H and {len(b)} K operators, got {len(h)} and {len(k)}")
    d = a.dim
    h = [la.as_matrix(m) for m in h]
    k = [la.as_matrix(m) for m in k]
    for name, ms in (("H", h), ("K", k)):
        for i, m in enumerate(ms):
            if m.shape != (d, d):
                raise la.DimensionError(f"{name}[{i}] has shape {m.shape}")
            if la.hermiticity_error(m) > 1e-10:
                raise CertificateError("(d)", f"{name}[{i}] is not Hermitian", la.hermiticity_error(m))
    tn = sum(la.trace_norm(m) for m in k)
    if tn > 1 + feas_tol:
        raise CertificateError("(e)", f"sum of trace norms of K is {tn:.12g} > 1", tn - 1)
    rhs = sum(np.kron(ky, by.T) for ky, by in zip(k, b.effects))
    eye = np.eye(d)
    for x, hx in enumerate(h):
        w = la.min_eig(rhs - np.kron(hx, eye), tol=1e-9)
        if w < -feas_tol:
            raise CertificateError("(d)", f"H[{x}] (x) 1 - sum_y K_y (x) B_y^T has eigenvalue {-w:.3e} > 0", -w)
    return certificate_value(a, b, h, k)


@dataclass
class PrimalCheck:
    upper_bound: float
    min_eigenvalue: float
    marginal_residual: float

    def feasible(self, tol: float = 1e-7) -> bool:
        return self.min_eigenvalue >= -tol and self.marginal_residual <= tol


def check_primal(a: Observable, b: Observable, choi) -> PrimalCheck:
    """Disturbance achieved by Heisenberg Choi matrices ``choi``, with their
    feasibility residuals."""
    _check_pair(a, b)
    d = a.dim
    choi = [la.hermitize(j) for j in choi]
    if len(choi) != len(a):
        raise ValueError(f"expected {len(a)} Choi matrices, got {len(choi)}")
    mins = min(float(np.linalg.eigvalsh(j)[0]) for j in choi)
    marg = max(la.operator_norm(la.partial_trace(j, (d, d), "first") - ax) for j, ax in zip(choi, a.effects))
    lam = max(
        la.operator_norm(by - sum(heisenberg_apply(j, by) for j in choi)) for by in b.effects
    )
    return PrimalCheck(lam, mins, marg)


def disturbance_measure(
    a: Observable,
    b: Observable,
    decision_tol: float = DECISION_TOL,
    gap_tol: float = 1e-8,
    feas_tol: float = FEAS_TOL,
    max_iter: int = 200,
    raise_on_failure: bool = True,
) -> DisturbanceReport:
    """Smallest uniform disturbance ``D_A(B)`` over all instruments for ``A``."""
    prob, lay = disturbance_problem(a, b)
    sol = sdp.solve(prob, sdp.Options(gap_tol=gap_tol, feas_tol=feas_tol, max_iter=max_iter))
    if sol.status != sdp.OPTIMAL and raise_on_failure:
        raise SolverFailure(sol.status, f"after {sol.iterations} iterations")
    d = lay.d
    choi = []
    for x in range(lay.nx):
        r = lay.rank(x)
        if r == 0:
            choi.append(np.zeros((d * d, d * d), dtype=np.complex128))
            continue
        jt = la.from_coordinates(sol.c[lay.jslice(x)], la.elementary_hermitian_basis(d * r))
        choi.append(_lift_choi(jt, lay.supports[x], d))
    cert = _extract_certificate(sol, lay, a, b)
    value = min(1.0, max(0.0, sol.primal_objective))
    res = sdp.verify(prob, sol)
    return DisturbanceReport(
        value=value,
        choi=choi,
        certificate=cert,
        non_disturbing=value <= decision_tol,
        status=sol.status,
        gap=value - cert.bound,
        residuals={
            "primal": res.primal,
            "dual": res.dual,
            "solver_gap": sol.gap,
        },
        iterations=sol.iterations,
    )


def decide_non_disturbance(a: Observable, b: Observable, decision_tol: float = DECISION_TOL) -> bool:
    return disturbance_measure(a, b, decision_tol=decision_tol).non_disturbing


def first_kind_measure(a: Observable, **kw) -> DisturbanceReport:
    return disturbance_measure(a, a, **kw)


def sequential_joint_from_choi(a: Observable, b: Observable, choi) -> JointObservable:
    """``G[x][y] = I_x*(B_y)`` from Heisenberg Choi matrices."""
    return JointObservable(
        tuple(tuple(la.hermitize(heisenberg_apply(j, by)) for by in b.effects) for j in choi),
        a.outcomes,
        b.outcomes,
    )


def joint_measurability(
    a: Observable, b: Observable, feas_tol: float = FEAS_TOL, gap_tol: float = 1e-8, max_iter: int = 200
) -> JointMeasurabilityReport:
    """Max-margin joint-observable search: maximize ``t`` with
    ``G[x][y] >= t 1`` and both marginal constraints."""
    _check_pair(a, b)
    d = a.dim
    nx, ny = len(a), len(b)
    basis = la.elementary_hermitian_basis(d)
    nv = d * d
    n = 1 + nx * ny * nv
    t_idx = n - 1

    def off(x, y):
        return (x * ny + y) * nv

    v = np.zeros(n)
    v[t_idx] = -1.0
    blocks = [_block(d, np.zeros((d, d)), off(x, y), basis) for x in range(nx) for y in range(ny)]
    tr_basis = np.real(np.einsum("kii->k", basis))
    rows, rhs = [], []
    for x in range(nx):
        co = la.coordinates(a.effects[x], basis)
        for kk in range(nv):
            r = np.zeros(n)
            for y in range(ny):
                r[off(x, y) + kk] = 1.0
            r[t_idx] = ny * tr_basis[kk]
            rows.append(r)
            rhs.append(co[kk])
    for y in range(ny):
        co = la.coordinates(b.effects[y], basis)
        for kk in range(nv):
            r = np.zeros(n)
            for x in range(nx):
                r[off(x, y) + kk] = 1.0
            r[t_idx] = nx * tr_basis[kk]
            rows.append(r)
            rhs.append(co[kk])
    prob = sdp.SdpProblem(v, blocks, np.array(rows), np.array(rhs))
    sol = sdp.solve(prob, sdp.Options(gap_tol=gap_tol, feas_tol=feas_tol, max_iter=max_iter))
    if sol.status != sdp.OPTIMAL:
        raise SolverFailure(sol.status)
    t = float(sol.c[t_idx])
    eye = np.eye(d)
    g = tuple(
        tuple(la.hermitize(la.from_coordinates(sol.c[off(x, y):off(x, y) + nv], basis) + t * eye) for y in range(ny))
        for x in range(nx)
    )
    feasible = t >= -feas_tol
    joint = JointObservable(g, a.outcomes, b.outcomes) if feasible else None
    resid = joint.marginal_residual(a, b) if joint is not None else math.nan
    return JointMeasurabilityReport(feasible, t, joint, sol.status, resid)


def rank1_disturbance(a: Observable, b: Observable, gap_tol: float = 1e-8, feas_tol: float = FEAS_TOL) -> float:
    """``D_A(B)`` for rank-1 ``A`` by optimizing over prepared states only:
    every instrument for such ``A`` is ``I_x(rho) = tr(rho A_x) xi_x``."""
    if not is_rank_one(a):
        raise ValueError("rank1_disturbance requires a rank-1 observable A")
    _check_pair(a, b)
    d = a.dim
    nx = len(a)
    basis = la.elementary_hermitian_basis(d)
    nv = d * d
    n = 1 + nx * nv
    v = np.zeros(n)
    v[0] = 1.0
    blocks = [_block(d, np.zeros((d, d)), 1 + x * nv, basis) for x in range(nx)]
    eye = np.eye(d)
    for by in b.effects:
        cb = la.coordinates(by, basis)  # tr(E_k B_y)
        for sign in (1.0, -1.0):
            parts = [(0, eye)]
            for x, ax in enumerate(a.effects):
                parts.append((1 + x * nv, sign * cb[:, None, None] * ax[None]))
            blocks.append(_concat_blocks(d, sign * by, parts))
    tr_basis = np.real(np.einsum("kii->k", basis))
    eq_a = np.zeros((nx, n))
    for x in range(nx):
        eq_a[x, 1 + x * nv:1 + (x + 1) * nv] = tr_basis
    prob = sdp.SdpProblem(v, blocks, eq_a, np.ones(nx))
    sol = sdp.solve(prob, sdp.Options(gap_tol=gap_tol, feas_tol=feas_tol))
    if sol.status != sdp.OPTIMAL:
        raise SolverFailure(sol.status)
    return min(1.0, max(0.0, sol.primal_objective))


def disturbance_measure_coordinates(a: Observable, b: Observable, gap_tol: float = 1e-8) -> float:
    """``D_A(B)`` in operator-basis coordinates ``T^x[j, i] = tr(E_j I_x*(E_i))``.

    Same optimum as :func:`disturbance_measure`, built from a different
    encoding (Gell-Mann basis, Choi matrix in the opposite tensor order);
    kept for cross-validation.
    """
    _check_pair(a, b)
    d = a.dim
    e = la.hermitian_basis(d)
    nb = d * d
    nx = len(a)
    n = 1 + nx * nb * nb

    def var(x, j, i):
        return 1 + x * nb * nb + j * nb + i

    v = np.zeros(n)
    v[0] = 1.0
    blocks = []
    eT = np.array([m.T for m in e])
    prod = np.einsum("jab,icd->jiacbd", e, eT).reshape(nb, nb, d * d, d * d)
    for x in range(nx):
        mats = prod.reshape(nb * nb, d * d, d * d)
        blocks.append(_block(d * d, np.zeros((d * d, d * d)), var(x, 0, 0), mats))
    eye = np.eye(d)
    for by in b.effects:
        cb = la.coordinates(by, e)  # tr(E_i B_y)
        # Ic*(B_y) = sum_{x,j,i} T^x[j, i] tr(E_i B_y) E_j
        mats = np.einsum("i,jab->jiab", cb, e).reshape(nb * nb, d, d)
        for sign in (1.0, -1.0):
            parts = [(0, eye)] + [(var(x, 0, 0), sign * mats) for x in range(nx)]
            blocks.append(_concat_blocks(d, sign * by, parts))
    # I_x*(E_0) = A_x / sqrt(d)
    rows, rhs = [], []
    for x, ax in enumerate(a.effects):
        co = la.coordinates(ax, e) / np.sqrt(d)
        for j in range(nb):
            r = np.zeros(n)
            r[var(x, j, 0)] = 1.0
            rows.append(r)
            rhs.append(co[j])
    prob = sdp.SdpProblem(v, blocks, np.array(rows), np.array(rhs))
    sol = sdp.solve(prob, sdp.Options(gap_tol=gap_tol))
    if sol.status != sdp.OPTIMAL:
        raise SolverFailure(sol.status)
    return min(1.0, max(0.0, sol.primal_objective))
