"""Concrete observables and instruments used in tests, docs and the CLI demo.

Kraus matrices from the 3x3 examples are printed in the Heisenberg form
``I_x*(.) = sum K . K^H``; :func:`example_instrument` stores their adjoints
so that :class:`~qdisturb.instruments.Instrument` gets Schrödinger Kraus
operators.
"""

from __future__ import annotations

import numpy as np

from .instruments import Instrument
from .observables import Observable

SX = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SY = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SZ = np.array([[1, 0], [0, -1]], dtype=np.complex128)
R2 = np.sqrt(2.0)
R10 = np.sqrt(10.0)


def bloch_projector(n) -> np.ndarray:
    n = np.asarray(n, dtype=float)
    return 0.5 * (np.eye(2) + n[0] * SX + n[1] * SY + n[2] * SZ)


def qubit_sharp(theta: float, phi: float = 0.0) -> Observable:
    """Two-outcome sharp qubit observable along the Bloch direction
    ``(sin t cos p, sin t sin p, cos t)``."""
    n = (np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta))
    p = bloch_projector(n)
    return Observable((p, np.eye(2) - p))


def qubit_z() -> Observable:
    return qubit_sharp(0.0)


def qubit_x() -> Observable:
    return qubit_sharp(np.pi / 2)


def tetrahedral_povm() -> Observable:
    """Four rank-1 effects ``|psi_k><psi_k| / 2`` at the tetrahedron vertices."""
    verts = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]]) / np.sqrt(3.0)
    return Observable(tuple(0.5 * bloch_projector(v) for v in verts))


def example_A() -> Observable:
    a1 = np.array([[2, 0, -R2], [0, 4, 0], [-R2, 0, 3]]) / 4
    a2 = np.array([[2, 0, R2], [0, 0, 0], [R2, 0, 1]]) / 4
    return Observable((a1, a2))


def example_B() -> Observable:
    b1 = np.diag([2.0, 0.0, 1.0]) / 2
    b2 = np.diag([0.0, 2.0, 1.0]) / 2
    return Observable((b1, b2))


def example_kraus_heisenberg() -> list[np.ndarray]:
    """``K_1 .. K_5`` exactly as printed (Heisenberg convention)."""
    k1 = np.array([[R2, 0, 0], [0, 0, 0], [-1, 0, 0]]) / 2
    k2 = np.array([[0, 0, 0], [0, -R10, 0], [0, 2 * R10, 0]]) / 10
    k3 = np.array([[0, 0, 0], [0, R2, 0], [0, 0, 0]]) / 2
    k4 = np.array([[0, 0, 0], [0, 4 * R10, 0], [0, 2 * R10, 0]]) / 20
    k5 = np.array([[R2, 0, 0], [0, 0, 0], [1, 0, 0]]) / 2
    return [k.astype(np.complex128) for k in (k1, k2, k3, k4, k5)]


def example_instrument() -> Instrument:
    """Two-outcome instrument ``{K_1..K_4 | K_5}`` implementing
    :func:`example_A` without disturbing :func:`example_B`."""
    ks = [k.conj().T for k in example_kraus_heisenberg()]
    return Instrument((tuple(ks[:4]), (ks[4],)))


def five_outcome_instrument() -> Instrument:
    """``I_x*(.) = K_x . K_x^H`` for ``x = 1..5``."""
    return Instrument(tuple((k.conj().T,) for k in example_kraus_heisenberg()))


def five_outcome_A() -> Observable:
    """Effects ``A_x = K_x K_x^H``."""
    return Observable(tuple(k @ k.conj().T for k in example_kraus_heisenberg()))


def five_outcome_A_printed() -> Observable:
    """The same effects, entered from their printed matrices."""
    return Observable(
        (
            np.array([[2, 0, -R2], [0, 0, 0], [-R2, 0, 1]]) / 4,
            np.array([[0, 0, 0], [0, 1, -2], [0, -2, 4]]) / 10,
            np.array([[0, 0, 0], [0, 1, 0], [0, 0, 0]]) / 2,
            np.array([[0, 0, 0], [0, 4, 2], [0, 2, 1]]) / 10,
            np.array([[2, 0, R2], [0, 0, 0], [R2, 0, 1]]) / 4,
        )
    )


def unit_eigenvalue_observable(d: int = 5, angle: float = np.pi / 4) -> Observable:
    """Three-outcome noncommutative observable whose effects all have
    eigenvalue 1, on ``C^3 (+) C^(d-3)`` with ``d >= 5``.

    ``A_1 = P_1 + R_1/2``, ``A_2 = P_2 + R_2/2``, ``A_3 = P_3 + 1 - R_1/2 - R_2/2``
    with rank-1 projections ``R_1, R_2`` at relative angle ``angle``.
    """
    if d < 5:
        raise ValueError("the construction needs d >= 5")
    p = [np.zeros((d, d)) for _ in range(3)]
    for i in range(3):
        p[i][i, i] = 1.0
    u = np.zeros(d)
    w = np.zeros(d)
    u[3] = 1.0
    w[3], w[4] = np.cos(angle), np.sin(angle)
    r1, r2 = np.outer(u, u), np.outer(w, w)
    rest = np.diag([0.0] * 3 + [1.0] * (d - 3))
    return Observable((p[0] + r1 / 2, p[1] + r2 / 2, p[2] + rest - r1 / 2 - r2 / 2))


def unit_eigenvectors(obs: Observable, tol: float = 1e-9) -> list[np.ndarray]:
    """A unit eigenvector at eigenvalue 1 for every effect."""
    out = []
    for e in obs.effects:
        w, v = np.linalg.eigh(e)
        if w[-1] < 1 - tol:
            raise ValueError("effect has no eigenvalue 1")
        out.append(v[:, -1])
    return out


def fixture_documents() -> dict:
    """Shipped example files, keyed by file name.

    The 3x3 instruments are tagged ``heisenberg`` so the stored Kraus
    matrices are the printed ones.
    """
    from .cli import Document
    from .instruments import luders, trash_and_prepare
    from .observables import coarse_grain_pair

    d3 = Document(3)
    d3.observables.update(A=example_A(), B=example_B(), A5=five_outcome_A())
    d3.instruments.update(I=example_instrument(), I5=five_outcome_instrument())
    d3.conventions.update(I="heisenberg", I5="heisenberg")

    d2 = Document(2)
    z, x = qubit_z(), qubit_x()
    d2.observables.update(
        Z=z, X=x, Z06=coarse_grain_pair(z, 0.6), X06=coarse_grain_pair(x, 0.6), T=tetrahedral_povm()
    )
    d2.instruments.update(LZ=luders(z))
    d2.conventions.update(LZ="schrodinger")

    d5 = Document(5)
    a = unit_eigenvalue_observable()
    states = [np.outer(u, u.conj()) for u in unit_eigenvectors(a)]
    d5.observables.update(A=a)
    d5.instruments.update(R=trash_and_prepare(a, states))
    d5.conventions.update(R="schrodinger")

    return {"examples_3x3.json": d3, "qubit.json": d2, "unit_eigenvalue_d5.json": d5}


if __name__ == "__main__":
    import sys
    from pathlib import Path

    from .cli import dump

    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent / "data"
    for name, doc in fixture_documents().items():
        dump(doc, out / name, digits=17)
        print(out / name)
