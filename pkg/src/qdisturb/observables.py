"""Finite-outcome POVMs, joint observables and their structural predicates."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg as la

NORM_TOL = 1e-9
COMMUTE_TOL = 1e-9
RANK_RTOL = 1e-9


@dataclass(frozen=True)
class Observable:
    """A discrete POVM: one Hermitian effect per outcome label.

    Construction does not check positivity or normalization; use
    :func:`validate` for that. Outcome labels are opaque strings.
    """

    effects: tuple[np.ndarray, ...]
    outcomes: tuple[str, ...] = ()

    def __post_init__(self):
        effs = tuple(la.hermitize(e) for e in self.effects)
        if not effs:
            raise ValueError("an observable needs at least one outcome")
        d = effs[0].shape[0]
        for e in effs:
            if e.shape != (d, d):
                raise la.DimensionError("effects have inconsistent shapes")
        for e in effs:
            e.setflags(write=False)
        labels = tuple(str(o) for o in self.outcomes) or tuple(
            str(i + 1) for i in range(len(effs))
        )
        if len(labels) != len(effs):
            raise ValueError("one outcome label is needed per effect")
        if len(set(labels)) != len(labels):
            raise ValueError("outcome labels must be distinct")
        object.__setattr__(self, "effects", effs)
        object.__setattr__(self, "outcomes", labels)

    @property
    def dim(self) -> int:
        return self.effects[0].shape[0]

    def __len__(self) -> int:
        return len(self.effects)

    def __getitem__(self, i: int) -> np.ndarray:
        return self.effects[i]

    def index(self, label: str) -> int:
        return self.outcomes.index(label)

    def probabilities(self, rho) -> np.ndarray:
        rho = la.as_matrix(rho)
        return np.array([np.real(np.trace(rho @ e)) for e in self.effects])


@dataclass(frozen=True)
class JointObservable:
    """Effects ``G[x][y]`` on the product of two outcome sets."""

    effects: tuple[tuple[np.ndarray, ...], ...]
    row_outcomes: tuple[str, ...] = ()
    col_outcomes: tuple[str, ...] = ()

    def __post_init__(self):
        rows = tuple(tuple(la.hermitize(g) for g in row) for row in self.effects)
        if not rows or not rows[0]:
            raise ValueError("empty joint observable")
        ncol = len(rows[0])
        if any(len(r) != ncol for r in rows):
            raise ValueError("ragged joint observable")
        object.__setattr__(self, "effects", rows)
        object.__setattr__(
            self,
            "row_outcomes",
            tuple(self.row_outcomes) or tuple(str(i + 1) for i in range(len(rows))),
        )
        object.__setattr__(
            self,
            "col_outcomes",
            tuple(self.col_outcomes) or tuple(str(i + 1) for i in range(ncol)),
        )

    @property
    def dim(self) -> int:
        return self.effects[0][0].shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.effects), len(self.effects[0])

    def row_marginal(self) -> Observable:
        return Observable(tuple(sum(row) for row in self.effects), self.row_outcomes)

    def col_marginal(self) -> Observable:
        cols = zip(*self.effects)
        return Observable(tuple(sum(c) for c in cols), self.col_outcomes)

    def min_eigenvalue(self) -> float:
        return min(la.min_eig(g) for row in self.effects for g in row)

    def marginal_residual(self, a: Observable, b: Observable) -> float:
        ra = max(
            la.operator_norm(m - e)
            for m, e in zip(self.row_marginal().effects, a.effects)
        )
        rb = max(
            la.operator_norm(m - e)
            for m, e in zip(self.col_marginal().effects, b.effects)
        )
        return max(ra, rb)

    def is_valid(self, tol: float = NORM_TOL) -> bool:
        total = sum(g for row in self.effects for g in row)
        return (
            self.min_eigenvalue() >= -tol
            and la.operator_norm(total - np.eye(self.dim)) <= tol
        )


@dataclass
class Diagnostics:
    """Result of :func:`validate`. ``ok`` is the overall verdict."""

    ok: bool
    min_eigenvalues: list[float]
    max_eigenvalues: list[float]
    normalization_residual: float
    messages: list[str] = field(default_factory=list)


def validate(obs: Observable, tol: float = NORM_TOL) -> Diagnostics:
    """Check positivity, ``E <= 1`` and normalization. Never raises on
    mathematically invalid input."""
    mins, maxs, msgs = [], [], []
    for label, e in zip(obs.outcomes, obs.effects):
        w = np.linalg.eigvalsh(e)
        mins.append(float(w[0]))
        maxs.append(float(w[-1]))
        if w[0] < -tol:
            msgs.append(f"effect {label!r} is not positive (min eigenvalue {w[0]:.3e})")
        if w[-1] > 1 + tol:
            msgs.append(f"effect {label!r} exceeds identity (max eigenvalue {w[-1]:.6g})")
    resid = la.operator_norm(sum(obs.effects) - np.eye(obs.dim))
    if resid > tol:
        msgs.append(f"effects do not sum to identity (residual {resid:.3e})")
    return Diagnostics(not msgs, mins, maxs, resid, msgs)


def _same_dim(a: Observable, b: Observable) -> None:
    if a.dim != b.dim:
        raise la.DimensionError(f"dimension mismatch: {a.dim} vs {b.dim}")


def max_commutator_norm(a: Observable, b: Observable) -> float:
    _same_dim(a, b)
    return max(
        la.operator_norm(la.commutator(ax, by)) for ax in a.effects for by in b.effects
    )


def commutes(a: Observable, b: Observable, tol: float = COMMUTE_TOL) -> tuple[bool, float]:
    """Return ``(commute, max_x,y ||[A_x, B_y]||)``."""
    m = max_commutator_norm(a, b)
    return m <= tol, m


def is_commutative(a: Observable, tol: float = COMMUTE_TOL) -> bool:
    return commutes(a, a, tol)[0]


def span_dim(obs: Observable, rtol: float = RANK_RTOL) -> int:
    """Dimension of the linear span of the effects (Hilbert-Schmidt Gram rank)."""
    vecs = np.array([e.ravel() for e in obs.effects])
    gram = vecs.conj() @ vecs.T
    s = np.linalg.svd(gram, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def is_informationally_complete(obs: Observable) -> bool:
    return span_dim(obs) == obs.dim**2


def is_sharp(obs: Observable, tol: float = NORM_TOL) -> bool:
    return all(la.operator_norm(e @ e - e) <= tol for e in obs.effects)


def is_rank_one(obs: Observable, tol: float = NORM_TOL) -> bool:
    for e in obs.effects:
        w = np.linalg.eigvalsh(e)
        if w[-1] <= tol or (len(w) > 1 and w[-2] > tol):
            return False
    return True


def has_unit_eigenvalues(obs: Observable, tol: float = NORM_TOL) -> bool:
    return all(np.linalg.eigvalsh(e)[-1] >= 1 - tol for e in obs.effects)


def coarse_grain_pair(a: Observable, mu: float) -> Observable:
    """Two-outcome mixing ``A^mu_1 = mu A_1 + (1-mu) A_2`` and its complement."""
    if len(a) != 2:
        raise ValueError(f"coarse_grain_pair needs two outcomes, got {len(a)}")
    if not 0.5 < mu <= 1.0:
        raise ValueError(f"mu must lie in (1/2, 1], got {mu}")
    a1, a2 = a.effects
    return Observable((mu * a1 + (1 - mu) * a2, (1 - mu) * a1 + mu * a2), a.outcomes)


def smear(p: Observable, m, tol: float = NORM_TOL) -> Observable:
    """Classical post-processing ``B_y = sum_y' M[y, y'] P_y'``.

    ``m`` has one column per outcome of ``p``; every column must be a
    probability vector.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[1] != len(p):
        raise ValueError(f"stochastic matrix must have {len(p)} columns, got shape {m.shape}")
    if np.any(m < -tol) or np.any(np.abs(m.sum(axis=0) - 1) > tol):
        raise ValueError("matrix is not column-stochastic")
    effects = tuple(np.tensordot(row, np.array(p.effects), axes=1) for row in m)
    return Observable(effects)


def product_joint(a: Observable, b: Observable, tol: float = 1e-9) -> JointObservable:
    """``G[x][y] = A_x B_y`` for commuting observables."""
    ok, m = commutes(a, b, tol)
    if not ok:
        raise ValueError(f"observables do not commute (max commutator norm {m:.3e})")
    return JointObservable(
        tuple(tuple(ax @ by for by in b.effects) for ax in a.effects),
        a.outcomes,
        b.outcomes,
    )


class ConstructionInfeasible(ValueError):
    """A closed-form construction produced a non-positive effect."""


def two_outcome_joint(a: Observable, b: Observable, mu: float, tol: float = 1e-12) -> JointObservable:
    """Closed-form joint observable of ``A^mu`` and ``B^mu`` for two-outcome
    ``A``, ``B`` and ``1/2 < mu <= 2/3``.

    Raises :class:`ConstructionInfeasible` if the last effect is not PSD,
    which happens for larger ``mu`` unless ``A_1 + B_1`` is small enough.
    """
    if len(a) != 2 or len(b) != 2:
        raise ValueError("two_outcome_joint needs two-outcome observables")
    _same_dim(a, b)
    if not 0.5 < mu <= 1.0:
        raise ValueError(f"mu must lie in (1/2, 1], got {mu}")
    one = np.eye(a.dim)
    a1, b1 = a.effects[0], b.effects[0]
    g = (
        ((1 - mu) * one, (2 * mu - 1) * a1),
        ((2 * mu - 1) * b1, mu * one - (2 * mu - 1) * (a1 + b1)),
    )
    lo = la.min_eig(g[1][1])
    if lo < -tol:
        raise ConstructionInfeasible(
            f"G[2][2] has eigenvalue {lo:.3e} < 0 at mu={mu}"
        )
    return JointObservable(g, a.outcomes, b.outcomes)
