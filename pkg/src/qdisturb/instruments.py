"""Instruments in Kraus form, their channels, and fixed-point analysis.

Kraus operators are stored in the Schrödinger picture::

    I_x(rho) = sum_a K[x][a] rho K[x][a]^H,    I_x*(X) = sum_a K^H X K

Documents written in the Heisenberg form ``I_x*(.) = sum K . K^H`` must be
adjointed before they are handed to :class:`Instrument` (see ``io``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import linalg as la
from . import sdp
from .observables import NORM_TOL, JointObservable, Observable

FIX_TOL = 1e-8
FULL_RANK_TOL = 1e-7


@dataclass(frozen=True)
class Instrument:
    kraus: tuple[tuple[np.ndarray, ...], ...]
    outcomes: tuple[str, ...] = ()

    def __post_init__(self):
        ks = tuple(tuple(la.as_matrix(k) for k in group) for group in self.kraus)
        if not ks or any(not g for g in ks):
            raise ValueError("every outcome needs at least one Kraus operator")
        d = ks[0][0].shape[0]
        for g in ks:
            for k in g:
                if k.shape != (d, d):
                    raise la.DimensionError("Kraus operators must be square of a common dimension")
                k.setflags(write=False)
        labels = tuple(str(o) for o in self.outcomes) or tuple(str(i + 1) for i in range(len(ks)))
        if len(labels) != len(ks):
            raise ValueError("one outcome label is needed per Kraus group")
        object.__setattr__(self, "kraus", ks)
        object.__setattr__(self, "outcomes", labels)

    @property
    def dim(self) -> int:
        return self.kraus[0][0].shape[0]

    def __len__(self) -> int:
        return len(self.kraus)

    def apply(self, x: int, rho) -> np.ndarray:
        rho = la.as_matrix(rho)
        return sum(k @ rho @ k.conj().T for k in self.kraus[x])

    def apply_dual(self, x: int, X) -> np.ndarray:
        X = la.as_matrix(X)
        return sum(k.conj().T @ X @ k for k in self.kraus[x])

    def effect(self, x: int) -> np.ndarray:
        return la.hermitize(sum(k.conj().T @ k for k in self.kraus[x]))

    def heisenberg_choi(self, x: int) -> np.ndarray:
        """``sum_jk |j><k| (x) I_x*(|j><k|)``; its first partial trace is ``A_x``."""
        d = self.dim
        out = np.zeros((d * d, d * d), dtype=np.complex128)
        for k in self.kraus[x]:
            # I_x*(|j><k|) = K^H |j><k| K  ->  vec form via outer products of rows
            v = k.conj().T  # columns v[:, j] = K^H |j>
            for j in range(d):
                for l in range(d):
                    out[j * d:(j + 1) * d, l * d:(l + 1) * d] += np.outer(v[:, j], v[:, l].conj())
        return out

    def adjoint(self) -> "Instrument":
        return Instrument(tuple(tuple(k.conj().T for k in g) for g in self.kraus), self.outcomes)


@dataclass
class InstrumentDiagnostics:
    ok: bool
    trace_preservation_residual: float
    messages: list[str] = field(default_factory=list)


def validate_instrument(inst: Instrument, tol: float = NORM_TOL) -> InstrumentDiagnostics:
    total = sum(inst.effect(x) for x in range(len(inst)))
    resid = la.operator_norm(total - np.eye(inst.dim))
    msgs = []
    if resid > tol:
        msgs.append(f"sum of K^H K deviates from identity by {resid:.3e}")
    return InstrumentDiagnostics(not msgs, resid, msgs)


def induced_observable(inst: Instrument) -> Observable:
    return Observable(tuple(inst.effect(x) for x in range(len(inst))), inst.outcomes)


def luders(a: Observable) -> Instrument:
    return Instrument(tuple((la.sqrt_psd(e),) for e in a.effects), a.outcomes)


def _is_state(rho, tol=NORM_TOL) -> bool:
    return la.is_hermitian(rho, 1e-10) and la.is_psd(rho, tol) and abs(np.trace(rho) - 1) <= tol


def trash_and_prepare(a: Observable, states, tol: float = 1e-12) -> Instrument:
    """Instrument ``I_x(rho) = tr(rho A_x) xi_x``.

    Kraus operators ``sqrt(l_i m_j) |v_i><w_j|`` over the nonzero spectra of
    ``xi_x`` (``l_i, v_i``) and ``A_x`` (``m_j, w_j``).
    """
    states = [la.as_matrix(s) for s in states]
    if len(states) != len(a):
        raise ValueError(f"need {len(a)} states, got {len(states)}")
    groups = []
    for e, xi in zip(a.effects, states):
        if xi.shape != e.shape or not _is_state(xi):
            raise ValueError("prepared states must be density matrices of matching dimension")
        lx, vx = np.linalg.eigh(la.hermitize(xi))
        le, we = np.linalg.eigh(e)
        ks = []
        for i in np.flatnonzero(lx > tol):
            for j in np.flatnonzero(le > tol):
                ks.append(np.sqrt(lx[i] * le[j]) * np.outer(vx[:, i], we[:, j].conj()))
        if not ks:
            ks.append(np.zeros_like(e))
        groups.append(tuple(ks))
    return Instrument(tuple(groups), a.outcomes)


def encode_outcomes(g: JointObservable, basis=None, tol: float = 1e-12) -> Instrument:
    """Instrument ``I_x(rho) = sum_y tr(rho G[x][y]) |e_y><e_y|``.

    ``basis`` is a ``d x d`` array whose columns are the orthonormal vectors
    ``e_y``; the standard basis when omitted. Requires ``|Omega_B| <= d``.
    """
    d = g.dim
    nrow, ncol = g.shape
    if ncol > d:
        raise ValueError(f"cannot encode {ncol} outcomes into dimension {d}")
    basis = np.eye(d, dtype=np.complex128) if basis is None else la.as_matrix(basis)
    if basis.shape[0] != d or basis.shape[1] < ncol:
        raise la.DimensionError("basis must have d rows and at least one column per outcome")
    groups = []
    for x in range(nrow):
        ks = []
        for y in range(ncol):
            w, vecs = np.linalg.eigh(g.effects[x][y])
            for j in np.flatnonzero(w > tol):
                ks.append(np.sqrt(w[j]) * np.outer(basis[:, y], vecs[:, j].conj()))
        if not ks:
            ks.append(np.zeros((d, d), dtype=np.complex128))
        groups.append(tuple(ks))
    return Instrument(tuple(groups), g.row_outcomes)


@dataclass(frozen=True)
class Channel:
    """CPTP map with cached Choi and transfer matrices.

    ``choi`` is ``sum_jk |j><k| (x) Phi(|j><k|)``; ``transfer[i, j] =
    tr(E_i Phi(E_j))`` in :func:`linalg.hermitian_basis` coordinates.
    """

    kraus: tuple[np.ndarray, ...]

    @property
    def dim(self) -> int:
        return self.kraus[0].shape[0]

    def apply(self, rho) -> np.ndarray:
        rho = la.as_matrix(rho)
        return sum(k @ rho @ k.conj().T for k in self.kraus)

    def apply_dual(self, X) -> np.ndarray:
        X = la.as_matrix(X)
        return sum(k.conj().T @ X @ k for k in self.kraus)

    @cached_property
    def choi(self) -> np.ndarray:
        d = self.dim
        out = np.zeros((d * d, d * d), dtype=np.complex128)
        for k in self.kraus:
            # column j of K is K|j>
            for j in range(d):
                for l in range(d):
                    out[j * d:(j + 1) * d, l * d:(l + 1) * d] += np.outer(k[:, j], k[:, l].conj())
        return out

    @cached_property
    def basis(self) -> np.ndarray:
        return la.hermitian_basis(self.dim)

    @cached_property
    def transfer(self) -> np.ndarray:
        e = self.basis
        images = np.array([self.apply(ej) for ej in e])
        return np.real(np.einsum("iab,jba->ij", e, images))

    @property
    def dual_transfer(self) -> np.ndarray:
        return self.transfer.T

    def apply_choi(self, rho) -> np.ndarray:
        """Same as :meth:`apply`, through the Choi matrix."""
        d = self.dim
        return la.partial_trace(np.kron(la.as_matrix(rho).T, np.eye(d)) @ self.choi, (d, d), "first")


def total_channel(inst: Instrument) -> Channel:
    return Channel(tuple(k for g in inst.kraus for k in g))


def identity_channel(d: int) -> Channel:
    return Channel((np.eye(d, dtype=np.complex128),))


def dual_apply(ch: Channel, X) -> np.ndarray:
    X = la.as_matrix(X)
    if X.shape != (ch.dim, ch.dim):
        raise la.DimensionError(f"operator shape {X.shape} does not match channel dimension {ch.dim}")
    return la.hermitize(ch.apply_dual(X))


def disturbance_of(inst: Instrument, b: Observable) -> float:
    """``max_y ||B_y - Ic*(B_y)||`` for the given instrument."""
    if b.dim != inst.dim:
        raise la.DimensionError("instrument and observable dimensions differ")
    ch = total_channel(inst)
    return max(la.operator_norm(by - dual_apply(ch, by)) for by in b.effects)


def sequential_joint(inst: Instrument, b: Observable) -> JointObservable:
    """``G[x][y] = I_x*(B_y)``."""
    return JointObservable(
        tuple(tuple(inst.apply_dual(x, by) for by in b.effects) for x in range(len(inst))),
        inst.outcomes,
        b.outcomes,
    )


def is_first_kind(inst: Instrument, tol: float = 1e-9) -> bool:
    return disturbance_of(inst, induced_observable(inst)) <= tol


def repeatability_residual(inst: Instrument) -> float:
    a = induced_observable(inst)
    worst = 0.0
    for x in range(len(inst)):
        for y in range(len(inst)):
            if x != y:
                worst = max(worst, la.operator_norm(inst.apply_dual(x, a.effects[y])))
    return worst


def is_repeatable(inst: Instrument, tol: float = 1e-9) -> bool:
    return repeatability_residual(inst) <= tol


@dataclass(frozen=True)
class FixedPointSpace:
    """Hilbert-Schmidt orthonormal Hermitian basis of a fixed-point space."""

    basis: tuple[np.ndarray, ...]

    @property
    def dim(self) -> int:
        return len(self.basis)

    def project(self, X) -> np.ndarray:
        X = la.as_matrix(X)
        return sum((np.vdot(f, X) * f for f in self.basis), np.zeros_like(X))

    def residual(self, X) -> float:
        """Frobenius distance from ``X`` to the space."""
        X = la.as_matrix(X)
        return float(np.linalg.norm(X - self.project(X)))

    def contains(self, X, tol: float = 1e-7) -> bool:
        return self.residual(X) <= tol


def _null_space(t: np.ndarray, tol: float) -> np.ndarray:
    k = t.shape[0]
    u, s, vt = np.linalg.svd(t - np.eye(k))
    return vt[s <= tol].T


def _to_hermitian(vecs: np.ndarray, basis: np.ndarray) -> tuple[np.ndarray, ...]:
    return tuple(la.hermitize(np.tensordot(vecs[:, i], basis, axes=1)) for i in range(vecs.shape[1]))


def fixed_point_space(ch: Channel, tol: float = FIX_TOL) -> FixedPointSpace:
    """Fixed points of the dual channel ``Ic*`` (Heisenberg picture)."""
    vecs = _null_space(ch.dual_transfer, tol)
    return FixedPointSpace(_to_hermitian(vecs, ch.basis))


def fixed_state_space(ch: Channel, tol: float = FIX_TOL) -> FixedPointSpace:
    """Fixed points of ``Ic`` (Schrödinger picture)."""
    vecs = _null_space(ch.transfer, tol)
    return FixedPointSpace(_to_hermitian(vecs, ch.basis))


def fixed_dim_by_eigenvalues(ch: Channel, tol: float = FIX_TOL) -> int:
    """Number of transfer-matrix eigenvalues with ``|lambda - 1| <= tol``.

    Independent of the SVD route used by :func:`fixed_point_space`.
    """
    w = np.linalg.eigvals(ch.transfer)
    return int(np.sum(np.abs(w - 1) <= max(tol, 1e-6)))


def full_rank_fixed_state(ch: Channel, tol: float = FULL_RANK_TOL):
    """A fixed state of ``Ic`` with smallest eigenvalue above ``tol``, or None.

    Maximizes the smallest eigenvalue over fixed states with a small SDP.
    """
    space = fixed_state_space(ch)
    d = ch.dim
    k = space.dim
    if k == 0:
        return None
    fs = {i: f for i, f in enumerate(space.basis)}
    fs[k] = -np.eye(d)
    block = sdp.Block.from_dense(np.zeros((d, d)), fs)
    v = np.zeros(k + 1)
    v[k] = -1.0
    eq_a = np.array([[np.real(np.trace(f)) for f in space.basis] + [0.0]])
    prob = sdp.SdpProblem(v, [block], eq_a, np.array([1.0]))
    sol = sdp.solve(prob)
    if sol.status != sdp.OPTIMAL:
        return None
    rho = la.hermitize(sum(ci * f for ci, f in zip(sol.c[:k], space.basis)))
    rho = rho / np.real(np.trace(rho))
    if la.min_eig(rho) <= tol:
        return None
    if np.linalg.norm(ch.apply(rho) - rho) > 1e-7:
        return None
    return rho
