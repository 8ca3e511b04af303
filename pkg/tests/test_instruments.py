import numpy as np
import pytest
from hypothesis import given, strategies as st

from qdisturb import instruments as ins
from qdisturb import linalg as la
from qdisturb import observables as ob
from qdisturb import rand
from qdisturb.disturbance import heisenberg_apply
from qdisturb.fixtures import (
    example_A,
    example_B,
    example_instrument,
    example_kraus_heisenberg,
    five_outcome_A,
    five_outcome_A_printed,
    five_outcome_instrument,
    qubit_x,
    qubit_z,
    tetrahedral_povm,
    unit_eigenvalue_observable,
    unit_eigenvectors,
)


def test_instrument_shapes_checked():
    with pytest.raises(Exception):
        ins.Instrument(((np.eye(2),), (np.eye(3),)))
    with pytest.raises(ValueError):
        ins.Instrument(((),))


def test_example_instrument_implements_A():
    a = ins.induced_observable(example_instrument())
    assert np.abs(np.array(a.effects) - np.array(example_A().effects)).max() < 1e-12
    assert ins.validate_instrument(example_instrument()).ok


def test_example_instrument_leaves_B():
    ch = ins.total_channel(example_instrument())
    for by in example_B().effects:
        assert np.abs(ins.dual_apply(ch, by) - by).max() < 1e-12


def test_five_outcome_effects_match_printed():
    got = np.array(five_outcome_A().effects)
    assert np.abs(got - np.array(five_outcome_A_printed().effects)).max() < 1e-15
    assert np.abs(np.array(ins.induced_observable(five_outcome_instrument()).effects) - got).max() < 1e-15


def test_heisenberg_fixture_is_not_schrodinger():
    # read the wrong way round the printed Kraus operators are not an instrument
    wrong = ins.Instrument(tuple((k,) for k in example_kraus_heisenberg()))
    assert not ins.validate_instrument(wrong).ok


@given(st.integers(2, 4), st.integers(1, 3), st.integers(0, 10_000))
def test_choi_conventions_agree(d, n, seed):
    rng = np.random.default_rng(seed)
    inst = rand.instrument(d, n, seed=rng)
    y = rand.hermitian(d, seed=rng)
    rho = rand.density_matrix(d, seed=rng)
    for x in range(n):
        j = inst.heisenberg_choi(x)
        assert np.allclose(la.partial_trace(j, (d, d), "first"), inst.effect(x), atol=1e-12)
        assert np.allclose(heisenberg_apply(j, y), inst.apply_dual(x, y), atol=1e-12)
        # duality tr(I_x(rho) Y) = tr(rho I_x*(Y))
        lhs = np.trace(inst.apply(x, rho) @ y)
        rhs = np.trace(rho @ inst.apply_dual(x, y))
        assert lhs == pytest.approx(rhs, abs=1e-12)
    ch = ins.total_channel(inst)
    assert np.allclose(ch.apply_choi(rho), ch.apply(rho), atol=1e-12)


@given(st.integers(2, 4), st.integers(0, 10_000))
def test_dual_transfer_is_transpose(d, seed):
    rng = np.random.default_rng(seed)
    ch = ins.total_channel(rand.instrument(d, 2, seed=rng))
    e = ch.basis
    dual = np.real(np.array([[np.trace(ei @ ch.apply_dual(ej)) for ej in e] for ei in e]))
    assert np.allclose(dual, ch.dual_transfer, atol=1e-12)


def test_luders_of_commuting_pair_does_not_disturb(rng):
    a, b = rand.commuting_pair(3, 3, 2, seed=rng)
    assert ins.disturbance_of(ins.luders(a), b) < 1e-12
    assert ins.disturbance_of(ins.luders(qubit_z()), qubit_x()) == pytest.approx(0.5, abs=1e-12)


def test_trash_and_prepare_dual_map(rng):
    a = rand.povm(3, 3, seed=rng)
    states = [rand.density_matrix(3, seed=rng) for _ in range(3)]
    inst = ins.trash_and_prepare(a, states)
    y = rand.hermitian(3, seed=rng)
    for x in range(3):
        expect = np.trace(states[x] @ y) * a.effects[x]
        assert np.allclose(inst.apply_dual(x, y), expect, atol=1e-12)
    with pytest.raises(ValueError):
        ins.trash_and_prepare(a, states[:2])


def test_encode_outcomes_realizes_joint():
    a, b = rand.commuting_pair(3, 2, 3, seed=5)
    g = ob.product_joint(a, b)
    inst = ins.encode_outcomes(g)
    assert ins.validate_instrument(inst).ok
    # the post-measurement state carries y in the basis, so measuring it gives G
    e = [np.diag(np.eye(3)[y]) for y in range(3)]
    enc = ob.Observable(tuple(e))
    seq = ins.sequential_joint(inst, enc)
    for x in range(2):
        for y in range(3):
            assert np.allclose(seq.effects[x][y], g.effects[x][y], atol=1e-12)
    with pytest.raises(ValueError):
        ins.encode_outcomes(ob.product_joint(rand.commuting_pair(2, 2, 3, seed=1)[0], rand.commuting_pair(2, 2, 3, seed=1)[1]))


def test_luders_of_sharp_is_repeatable_and_first_kind():
    inst = ins.luders(rand.sharp(4, 3, seed=2))
    assert ins.is_repeatable(inst)
    assert ins.is_first_kind(inst)
    assert not ins.is_repeatable(ins.luders(tetrahedral_povm()))


def test_unit_eigenvalue_construction_repeatable():
    a = unit_eigenvalue_observable()
    assert not ob.is_commutative(a)
    states = [np.outer(u, u.conj()) for u in unit_eigenvectors(a)]
    inst = ins.trash_and_prepare(a, states)
    assert ins.is_repeatable(inst)
    assert ins.is_first_kind(inst)


def _unit_instrument(d, angle):
    a = unit_eigenvalue_observable(d, angle)
    return ins.trash_and_prepare(a, [np.outer(u, u.conj()) for u in unit_eigenvectors(a)])


def repeatable_instruments(seed, d):
    """Lüders instruments of sharp observables, and for d >= 5 trash and
    prepare instruments on eigenvalue-1 vectors of a noncommutative A."""
    rng = np.random.default_rng(seed)
    yield ins.luders(rand.sharp(d, int(rng.integers(1, d + 1)), seed=rng))
    if d >= 5:
        yield _unit_instrument(d, rng.uniform(0.1, 1.4))


@given(st.integers(2, 6), st.integers(0, 10_000))
def test_repeatable_instruments_have_few_outcomes(d, seed):
    for inst in repeatable_instruments(seed, d):
        assert ins.is_repeatable(inst)
        a = ins.induced_observable(inst)
        assert len(a) <= d
        if len(a) == d:
            assert ob.is_sharp(a)
        if len(a) >= d - 1:
            assert ob.is_commutative(a, tol=1e-7)


def test_fixed_points_of_example_instrument():
    ch = ins.total_channel(example_instrument())
    space = ins.fixed_point_space(ch)
    assert space.dim >= 2
    for by in example_B().effects:
        assert space.residual(by) <= 1e-7
    assert space.contains(np.eye(3))


def test_fixed_points_of_block_instrument():
    inst = rand.block_instrument([2, 1, 1], 2, seed=3)
    ch = ins.total_channel(inst)
    heis = ins.fixed_point_space(ch)
    assert heis.dim == 3
    for p in (np.diag([1, 1, 0, 0]), np.diag([0, 0, 1, 0])):
        assert heis.contains(p)
    assert ins.fixed_state_space(ch).dim == 3
    assert ins.fixed_dim_by_eigenvalues(ch) == 3


def test_identity_channel_fixes_everything():
    ch = ins.identity_channel(3)
    assert ins.fixed_point_space(ch).dim == 9
    rho = ins.full_rank_fixed_state(ch)
    assert rho is not None and la.min_eig(rho) > 0.3


def test_full_rank_fixed_state_absent_for_projection_onto_state():
    # replace every input by |0><0|: the only fixed state is rank one
    k = [np.outer([1, 0, 0], row) for row in np.eye(3)]
    ch = ins.Channel(tuple(np.array(m, dtype=complex) for m in k))
    assert ins.fixed_state_space(ch).dim == 1
    assert ins.full_rank_fixed_state(ch) is None


def test_dual_apply_dimension_check():
    with pytest.raises(la.DimensionError):
        ins.dual_apply(ins.identity_channel(2), np.eye(3))
