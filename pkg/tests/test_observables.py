import numpy as np
import pytest
from hypothesis import given, strategies as st

from qdisturb import observables as ob
from qdisturb import rand
from qdisturb.fixtures import example_A, example_B, five_outcome_A, qubit_sharp, unit_eigenvalue_observable, qubit_x, qubit_z, tetrahedral_povm


def test_labels_default_and_lookup():
    z = qubit_z()
    assert z.outcomes == ("1", "2")
    assert z.index("2") == 1
    assert np.allclose(z.probabilities(np.diag([1, 0])), [1, 0])


def test_rejects_mismatched_shapes():
    with pytest.raises(Exception):
        ob.Observable((np.eye(2), np.eye(3)))


def test_rejects_duplicate_labels():
    with pytest.raises(ValueError):
        ob.Observable((np.eye(2) / 2, np.eye(2) / 2), ("a", "a"))


def test_validate_never_raises_and_explains():
    bad = ob.Observable((np.diag([1.2, 0.0]), np.diag([0.0, 0.5])))
    diag = ob.validate(bad)
    assert not diag.ok
    assert any("exceeds identity" in m for m in diag.messages)
    assert any("sum to identity" in m for m in diag.messages)
    neg = ob.Observable((np.diag([1.5, 1.0]), np.diag([-0.5, 0.0])))
    assert any("not positive" in m for m in ob.validate(neg).messages)


@pytest.mark.parametrize("obs", [qubit_z(), tetrahedral_povm(), example_A(), example_B(), five_outcome_A()])
def test_fixtures_are_valid(obs):
    assert ob.validate(obs).ok


def test_example_pair_does_not_commute():
    ok, margin = ob.commutes(example_A(), example_B())
    assert not ok
    # [A_1, B_1] has norm sqrt(2)/8
    assert margin == pytest.approx(np.sqrt(2) / 8, abs=1e-12)


@pytest.mark.parametrize("theta", [0.3, np.pi / 4, 1.2, np.pi / 2])
def test_qubit_commutator_norm(theta):
    # ||[P_z, P_n]|| = sin(theta) / 2 for sharp qubit projections
    m = ob.max_commutator_norm(qubit_z(), qubit_sharp(theta))
    assert m == pytest.approx(np.sin(theta) / 2, abs=1e-12)


def test_span_dim():
    assert ob.span_dim(five_outcome_A()) == 5
    assert ob.span_dim(tetrahedral_povm()) == 4
    assert ob.is_informationally_complete(tetrahedral_povm())
    assert ob.span_dim(qubit_z()) == 2


def test_sharp_and_rank_one():
    assert ob.is_sharp(qubit_z())
    assert not ob.is_sharp(tetrahedral_povm())
    assert ob.is_rank_one(tetrahedral_povm())
    assert not ob.is_rank_one(example_A())
    assert not ob.has_unit_eigenvalues(example_A())
    assert ob.has_unit_eigenvalues(unit_eigenvalue_observable())


def test_coarse_grain_pair_domain():
    with pytest.raises(ValueError):
        ob.coarse_grain_pair(qubit_z(), 0.5)
    with pytest.raises(ValueError):
        ob.coarse_grain_pair(tetrahedral_povm(), 0.7)


@given(st.floats(0.51, 1.0), st.floats(0.51, 1.0), st.floats(0.1, 3.0))
def test_smeared_commutator_identity(mu, nu, theta):
    a, b = qubit_z(), qubit_sharp(theta)
    am, bn = ob.coarse_grain_pair(a, mu), ob.coarse_grain_pair(b, nu)
    lhs = np.linalg.norm(am.effects[0] @ bn.effects[0] - bn.effects[0] @ am.effects[0], 2)
    rhs = (2 * mu - 1) * (2 * nu - 1) * ob.max_commutator_norm(a, b)
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_smear_requires_stochastic():
    with pytest.raises(ValueError):
        ob.smear(qubit_z(), np.array([[0.5, 0.5], [0.4, 0.5]]))
    s = ob.smear(qubit_z(), np.array([[0.9, 0.2], [0.1, 0.8]]))
    assert ob.validate(s).ok


def test_product_joint_requires_commuting():
    a, b = rand.commuting_pair(3, 2, 3, seed=1)
    g = ob.product_joint(a, b)
    assert g.is_valid()
    assert g.marginal_residual(a, b) < 1e-12
    with pytest.raises(ValueError):
        ob.product_joint(qubit_z(), qubit_x())


def test_two_outcome_joint_marginals():
    z, x = qubit_z(), qubit_x()
    mu = 0.6
    g = ob.two_outcome_joint(z, x, mu)
    assert g.is_valid()
    assert g.marginal_residual(ob.coarse_grain_pair(z, mu), ob.coarse_grain_pair(x, mu)) < 1e-12


def test_two_outcome_joint_infeasible_for_sharp():
    with pytest.raises(ob.ConstructionInfeasible):
        ob.two_outcome_joint(qubit_z(), qubit_x(), 1.0)


@given(st.integers(2, 4), st.integers(2, 4), st.integers(0, 10_000))
def test_random_povms_valid(d, n, seed):
    assert ob.validate(rand.povm(d, n, seed=seed)).ok
    assert ob.is_sharp(rand.sharp(d, min(n, d), seed=seed))
