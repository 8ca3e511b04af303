import numpy as np
import pytest
from hypothesis import given, strategies as st

from qdisturb import linalg as la
from qdisturb import rand
from qdisturb.fixtures import R2, example_A


def test_non_square_rejected():
    with pytest.raises(la.DimensionError):
        la.as_matrix(np.zeros((2, 3, 1)))
    with pytest.raises(la.DimensionError):
        la.eigh(np.zeros((2, 3)))


def test_eigh_rejects_non_hermitian():
    with pytest.raises(la.NotHermitianError):
        la.eigh(np.array([[0, 1], [0, 0]]))


def test_eigh_example_effect():
    # A_1 of the 3x3 example has spectrum {1/4, 1, 1}
    w, v = la.eigh(example_A().effects[0])
    assert np.allclose(w, [0.25, 1, 1], atol=1e-14)
    assert np.allclose(v.conj().T @ v, np.eye(3), atol=1e-14)


def test_eigh_phase_convention(rng):
    m = rand.hermitian(4, seed=rng)
    _, v = la.eigh(m)
    for k in range(4):
        first = v[np.flatnonzero(np.abs(v[:, k]) > 1e-12)[0], k]
        assert abs(first.imag) < 1e-14 and first.real > 0


@given(st.integers(2, 5), st.integers(0, 10_000))
def test_eigh_reconstructs(d, seed):
    m = rand.hermitian(d, seed=seed)
    w, v = la.eigh(m)
    assert np.allclose(v @ np.diag(w) @ v.conj().T, m, atol=1e-12)
    assert np.all(np.diff(w) >= 0)


def test_norms_of_pauli():
    sx = np.array([[0, 1], [1, 0]])
    assert la.operator_norm(sx) == pytest.approx(1.0)
    assert la.trace_norm(sx) == pytest.approx(2.0)


def test_is_psd():
    assert la.is_psd(np.diag([1.0, 0.0]))
    assert not la.is_psd(np.diag([1.0, -1e-6]))
    assert la.is_psd(np.diag([1.0, -1e-12]))


def test_partial_trace_of_product(rng):
    a, b = rand.density_matrix(2, seed=rng), rand.density_matrix(3, seed=rng)
    ab = np.kron(a, b)
    assert np.allclose(la.partial_trace(ab, (2, 3), "first"), b)
    assert np.allclose(la.partial_trace(ab, (2, 3), "second"), a)


def test_partial_trace_bad_subsystem():
    with pytest.raises(ValueError):
        la.partial_trace(np.eye(4), (2, 2), "third")


def test_sqrt_psd_clamps_tiny_negatives():
    m = np.diag([4.0, -1e-13])
    assert np.allclose(la.sqrt_psd(m), np.diag([2.0, 0.0]))
    with pytest.raises(la.NotPSDError):
        la.sqrt_psd(np.diag([1.0, -0.1]))


@pytest.mark.parametrize("d", [2, 3, 4])
@pytest.mark.parametrize("basis_fn", [la.hermitian_basis, la.elementary_hermitian_basis])
def test_bases_orthonormal_and_complete(d, basis_fn, rng):
    e = basis_fn(d)
    assert e.shape == (d * d, d, d)
    gram = np.einsum("iab,jba->ij", e, e)
    assert np.allclose(gram, np.eye(d * d), atol=1e-14)
    for m in e:
        assert la.is_hermitian(m)
    h = rand.hermitian(d, seed=rng)
    c = la.coordinates(h, e)
    assert np.allclose(la.from_coordinates(c, e), h, atol=1e-13)


def test_gell_mann_first_element_is_identity():
    e = la.hermitian_basis(3)
    assert np.allclose(e[0], np.eye(3) / np.sqrt(3))
    assert np.allclose([np.trace(m) for m in e[1:]], 0)


def test_coordinates_of_example_effect():
    # expanding and resumming an effect with irrational entries is exact to rounding
    a1 = example_A().effects[0]
    e = la.hermitian_basis(3)
    assert np.abs(la.from_coordinates(la.coordinates(a1, e), e) - a1).max() < 1e-15
    assert a1[0, 2] == pytest.approx(-R2 / 4)


def test_commutator_and_rank():
    sx, sz = np.array([[0, 1], [1, 0]]), np.diag([1, -1])
    assert la.operator_norm(la.commutator(sx, sz)) == pytest.approx(2.0)
    assert la.rank(np.diag([1.0, 1e-12, 0.5])) == 2
