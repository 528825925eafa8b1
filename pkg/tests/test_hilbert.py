import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from doublenoon.hilbert import (
    Operator,
    SpaceMismatchError,
    StateVector,
    basis_state,
    build_space,
    commutator,
    identity,
    mode_annihilation,
    mode_number,
    qutrit_projector,
    qutrit_transition,
)
from doublenoon.solver.protocol import protocol_space, side_spaces

cav_dims = st.integers(min_value=2, max_value=6)


def side(d):
    return build_space([("qutrit-L", 3), ("cav1", d), ("cav2", d)])


def test_dimensions():
    assert side_spaces(5)["left"].total_dim == 75
    assert protocol_space(6).total_dim == 11664


@pytest.mark.parametrize(
    "bad",
    [
        [],
        [("qutrit-L", 2)],
        [("cav1", 1)],
        [("cav1", 3), ("cav1", 3)],
        [("cavX", 3)],
    ],
)
def test_invalid_spaces(bad):
    with pytest.raises(ValueError):
        build_space(bad)


@given(cav_dims, st.data())
def test_index_roundtrip(d, data):
    sp_ = side(d)
    i = data.draw(st.integers(0, sp_.total_dim - 1))
    assert sp_.index(sp_.occupations(i)) == i


@given(cav_dims)
def test_ladder_elements(d):
    sp_ = side(d)
    a = mode_annihilation(sp_, "cav1")
    for n in range(1, d):
        assert a.element((0, n - 1, 0), (0, n, 0)) == pytest.approx(np.sqrt(n))
    n_op = mode_number(sp_, "cav1")
    assert np.allclose((a.dag() @ a).toarray(), n_op.toarray())
    # [a, a^dag] = 1 below the truncation edge
    c = commutator(a, a.dag()).toarray().diagonal().real
    levels = sp_.level_table[:, 1]
    assert np.allclose(c[levels < d - 1], 1.0)
    assert np.allclose(c[levels == d - 1], -(d - 1))


def test_qutrit_transition_direction():
    sp_ = side(2)
    up = qutrit_transition(sp_, "qutrit-L", "g", "e")
    g = basis_state(sp_, {"qutrit-L": "g"})
    e = basis_state(sp_, {"qutrit-L": "e"})
    assert abs(e.overlap(g.apply(up)) - 1) < 1e-15
    total = sum(qutrit_projector(sp_, "qutrit-L", x) for x in "gef")
    assert np.allclose(total.toarray(), identity(sp_).toarray())


@given(cav_dims)
def test_embedding_is_local(d):
    sp_ = side(d)
    a1 = mode_annihilation(sp_, "cav1")
    a2 = mode_annihilation(sp_, "cav2")
    s = qutrit_transition(sp_, "qutrit-L", "e", "f")
    assert commutator(a1, a2).nnz == 0
    assert commutator(a1, s).nnz == 0
    assert commutator(a2.dag(), s).nnz == 0


def test_space_mismatch():
    with pytest.raises(SpaceMismatchError):
        mode_annihilation(side(3), "cav1") + mode_annihilation(side(4), "cav1")


def test_drop_tolerance():
    sp_ = side(2)
    op = Operator(sp_, 1e-15 * identity(sp_).matrix)
    assert op.nnz == 0


@given(cav_dims, st.integers(0, 2**32 - 1))
def test_serialization_roundtrip(d, seed):
    sp_ = side(d)
    rng = np.random.default_rng(seed)
    psi = StateVector(sp_, rng.standard_normal(sp_.total_dim) + 1j * rng.standard_normal(sp_.total_dim))
    back = StateVector.from_bytes(psi.to_bytes())
    assert back.space == sp_ and np.array_equal(back.data, psi.data)
    text = StateVector.from_text(psi.to_text())
    assert text.space == sp_ and np.array_equal(text.data, psi.data)


def test_density_helpers():
    sp_ = side(2)
    psi = (basis_state(sp_, {"qutrit-L": "g"}) + basis_state(sp_, {"cav1": 1})).normalized()
    rho = psi.to_density()
    assert rho.trace() == pytest.approx(1.0)
    assert rho.hermiticity_error() == 0.0
    assert rho.min_eigenvalue() > -1e-15
    assert rho.expect(mode_number(sp_, "cav1")) == pytest.approx(0.5)
