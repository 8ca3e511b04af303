"""Random observables, states and instruments for tests and benchmarks."""

from __future__ import annotations

import numpy as np

from . import linalg as la
from .instruments import Instrument
from .observables import Observable


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def ginibre(d: int, k: int | None = None, seed=None) -> np.ndarray:
    rng = _rng(seed)
    k = d if k is None else k
    return rng.normal(size=(d, k)) + 1j * rng.normal(size=(d, k))


def hermitian(d: int, seed=None) -> np.ndarray:
    g = ginibre(d, seed=seed)
    return 0.5 * (g + g.conj().T)


def unitary(d: int, seed=None) -> np.ndarray:
    q, r = np.linalg.qr(ginibre(d, seed=seed))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def density_matrix(d: int, rank: int | None = None, seed=None) -> np.ndarray:
    g = ginibre(d, rank, seed=seed)
    rho = g @ g.conj().T
    return rho / np.real(np.trace(rho))


def pure_state(d: int, seed=None) -> np.ndarray:
    v = ginibre(d, 1, seed=seed)[:, 0]
    v /= np.linalg.norm(v)
    return np.outer(v, v.conj())


def _normalize(gs) -> list[np.ndarray]:
    s = sum(gs)
    si = np.linalg.inv(la.sqrt_psd(s))
    return [la.hermitize(si @ g @ si) for g in gs]


def povm(d: int, n: int, rank: int | None = None, seed=None) -> Observable:
    """Random ``n``-outcome POVM; effects have the given rank (full by default)."""
    if rank is not None and rank * n < d:
        raise ValueError("effects of this rank cannot sum to the identity")
    rng = _rng(seed)
    gs = []
    for _ in range(n):
        g = ginibre(d, rank, seed=rng)
        gs.append(g @ g.conj().T)
    return Observable(tuple(_normalize(gs)))


def rank_one_povm(d: int, n: int, seed=None) -> Observable:
    if n < d:
        raise ValueError("a rank-1 POVM needs at least d outcomes")
    return povm(d, n, rank=1, seed=seed)


def sharp(d: int, n: int, seed=None) -> Observable:
    """Random projective measurement with ``n <= d`` nonzero projections."""
    rng = _rng(seed)
    u = unitary(d, seed=rng)
    cuts = np.sort(rng.choice(np.arange(1, d), size=n - 1, replace=False)) if n > 1 else np.array([], int)
    bounds = np.concatenate([[0], cuts, [d]])
    effs = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        v = u[:, lo:hi]
        effs.append(v @ v.conj().T)
    return Observable(tuple(effs))


def commuting_pair(d: int, na: int, nb: int, seed=None) -> tuple[Observable, Observable]:
    """Two random observables diagonal in a common random basis."""
    rng = _rng(seed)
    u = unitary(d, seed=rng)

    def diag_povm(n):
        w = rng.random((n, d)) + 0.05
        w /= w.sum(axis=0)
        return Observable(tuple(u @ np.diag(row) @ u.conj().T for row in w))

    return diag_povm(na), diag_povm(nb)


def instrument(d: int, n: int, kraus_per_outcome: int = 2, seed=None) -> Instrument:
    """Random instrument: Kraus operators ``K S^-1/2`` normalized jointly."""
    rng = _rng(seed)
    ks = [[ginibre(d, seed=rng) for _ in range(kraus_per_outcome)] for _ in range(n)]
    s = sum(k.conj().T @ k for g in ks for k in g)
    si = np.linalg.inv(la.sqrt_psd(s))
    return Instrument(tuple(tuple(k @ si for k in g) for g in ks))


def block_instrument(dims: list[int], n: int, seed=None) -> Instrument:
    """Random instrument whose Kraus operators are block diagonal for the
    decomposition ``C^d = sum_k C^dims[k]``; its dual channel fixes every
    block projection."""
    rng = _rng(seed)
    d = sum(dims)
    groups = [[] for _ in range(n)]
    off = 0
    for m in dims:
        inst = instrument(m, n, 2, seed=rng)
        for x in range(n):
            for k in inst.kraus[x]:
                big = np.zeros((d, d), dtype=np.complex128)
                big[off:off + m, off:off + m] = k
                groups[x].append(big)
        off += m
    return Instrument(tuple(tuple(g) for g in groups))
