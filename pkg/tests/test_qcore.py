import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holosim.errors import BasisMismatchError, UnknownLevelError
from holosim.qcore import (
    SIGMA_MINUS,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    SPIN_BASIS,
    LevelBasis,
    QOperator,
    QState,
    adjoint,
    apply,
    basis_state,
    compose,
    project_gate,
    superposition,
)

B3 = LevelBasis(("g1", "g2", "e"))


def rand_state(basis, seed):
    rng = np.random.default_rng(seed)
    amps = rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
    return QState(basis, amps)


def rand_op(basis, seed):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(basis.dim, basis.dim)) + 1j * rng.normal(size=(basis.dim, basis.dim))
    return QOperator(basis, m)


class TestLevelBasis:
    def test_duplicate_labels_rejected(self):
        with pytest.raises(ValueError):
            LevelBasis(("a", "a"))

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            LevelBasis(())

    def test_index_and_contains(self):
        assert B3.index("g2") == 1
        assert "e" in B3
        assert "nope" not in B3

    def test_unknown_label(self):
        with pytest.raises(UnknownLevelError):
            B3.index("q")


class TestStates:
    def test_basis_state_is_unit(self):
        s = basis_state(B3, "g1")
        assert s.norm2() == 1.0
        assert s.population("g1") == 1.0
        assert s.population("e") == 0.0

    def test_superposition_weights(self):
        s = superposition(B3, {"g1": 1.0, "e": 1j})
        assert s.norm2() == pytest.approx(2.0)
        assert s.amplitudes[2] == 1j

    def test_normalized(self):
        s = superposition(B3, {"g1": 3.0, "g2": 4.0})
        n = s.normalized()
        assert n.norm2() == pytest.approx(1.0, abs=1e-15)

    def test_zero_state_normalize_raises(self):
        s = QState(B3, np.zeros(3))
        with pytest.raises(ValueError):
            s.normalized()

    def test_overlap_conjugates_left(self):
        a = superposition(B3, {"g1": 1j})
        b = basis_state(B3, "g1")
        assert a.overlap(b) == pytest.approx(-1j)

    def test_overlap_basis_mismatch(self):
        with pytest.raises(BasisMismatchError):
            basis_state(B3, "g1").overlap(basis_state(SPIN_BASIS, "up"))


class TestOperators:
    def test_from_label_pairs(self):
        op = QOperator.from_label_pairs(B3, {("e", "g2"): 2.0})
        assert op.matrix[2, 1] == 2.0
        assert np.count_nonzero(op.matrix) == 1

    def test_adjoint_involution(self):
        op = rand_op(B3, 1)
        assert np.array_equal(adjoint(adjoint(op)).matrix, op.matrix)

    def test_adjoint_transition_pair(self):
        up = QOperator.from_label_pairs(B3, {("e", "g2"): 1.0})
        down = QOperator.from_label_pairs(B3, {("g2", "e"): 1.0})
        assert np.array_equal(adjoint(up).matrix, down.matrix)

    def test_adjoint_conjugates_scalars(self):
        op = QOperator(B3, 1j * np.eye(3))
        assert np.array_equal(adjoint(op).matrix, -1j * np.eye(3))

    def test_hermitian_check(self):
        assert SIGMA_Y.is_hermitian()
        assert not QOperator(SPIN_BASIS, np.array([[0, 1], [0, 0]], dtype=complex)).is_hermitian()

    def test_apply_transition(self):
        raise_op = QOperator.from_label_pairs(B3, {("e", "g2"): 1.0})
        out = apply(raise_op, basis_state(B3, "g2"))
        assert out.population("e") == pytest.approx(1.0)
        dead = apply(raise_op, basis_state(B3, "g1"))
        assert dead.norm2() == 0.0

    def test_apply_linearity(self):
        op = rand_op(B3, 2)
        s1, s2 = rand_state(B3, 3), rand_state(B3, 4)
        combo = QState(B3, 0.7 * s1.amplitudes - 1.3j * s2.amplitudes)
        lhs = apply(op, combo).amplitudes
        rhs = 0.7 * apply(op, s1).amplitudes - 1.3j * apply(op, s2).amplitudes
        assert np.allclose(lhs, rhs, atol=1e-12)

    def test_compose_order(self):
        # compose(a, b) applies b first
        to_e = QOperator.from_label_pairs(B3, {("e", "g1"): 1.0})
        e_phase = QOperator.from_label_pairs(B3, {("e", "e"): 1j})
        both = compose(e_phase, to_e)
        out = apply(both, basis_state(B3, "g1"))
        assert out.amplitudes[2] == pytest.approx(1j)

    def test_expectation_real_for_hermitian(self):
        s = rand_state(SPIN_BASIS, 5).normalized()
        val = SIGMA_Z.expectation(s)
        assert abs(val.imag) < 1e-14

    def test_basis_mismatch(self):
        with pytest.raises(BasisMismatchError):
            apply(rand_op(B3, 6), basis_state(SPIN_BASIS, "up"))


class TestProjectGate:
    def test_identity_block(self):
        op = QOperator(B3, np.eye(3))
        block = project_gate(op, ("g1", "g2"))
        assert np.array_equal(block, np.eye(2))

    def test_picks_rows_and_columns(self):
        m = np.arange(9, dtype=complex).reshape(3, 3)
        block = project_gate(QOperator(B3, m), ("g2", "e"))
        assert np.array_equal(block, np.array([[4, 5], [7, 8]]))

    def test_unknown_label(self):
        with pytest.raises(UnknownLevelError):
            project_gate(QOperator(B3, np.eye(3)), ("g1", "zz"))


class TestPauli:
    def test_squares_are_identity(self):
        for op in (SIGMA_X, SIGMA_Y, SIGMA_Z):
            assert np.allclose(compose(op, op).matrix, np.eye(2))

    def test_commutator(self):
        lhs = compose(SIGMA_X, SIGMA_Y).matrix - compose(SIGMA_Y, SIGMA_X).matrix
        assert np.allclose(lhs, 2j * SIGMA_Z.matrix)

    def test_lowering_maps_up_to_down(self):
        out = apply(SIGMA_MINUS, basis_state(SPIN_BASIS, "up"))
        assert out.population("down") == pytest.approx(1.0)
        assert apply(SIGMA_MINUS, basis_state(SPIN_BASIS, "down")).norm2() == 0.0


finite = st.floats(min_value=-5, max_value=5, allow_nan=False)


@settings(max_examples=40, deadline=None)
@given(st.lists(finite, min_size=6, max_size=6), st.lists(finite, min_size=18, max_size=18))
def test_quadratic_form_nonnegative(amp_parts, op_parts):
    amps = np.array(amp_parts[:3]) + 1j * np.array(amp_parts[3:])
    m = np.array(op_parts[:9]).reshape(3, 3) + 1j * np.array(op_parts[9:]).reshape(3, 3)
    state = QState(B3, amps)
    op = QOperator(B3, m)
    pushed = apply(op, state)
    val = compose(adjoint(op), op).expectation(state)
    assert val.real == pytest.approx(pushed.norm2(), abs=1e-9)
    assert val.real >= -1e-12


@settings(max_examples=40, deadline=None)
@given(st.lists(finite, min_size=18, max_size=18))
def test_adjoint_reverses_products(parts):
    a = np.array(parts[:9]).reshape(3, 3) + 1j * np.array(parts[9:]).reshape(3, 3)
    op = QOperator(B3, a)
    other = rand_op(B3, 11)
    lhs = adjoint(compose(op, other)).matrix
    rhs = compose(adjoint(other), adjoint(op)).matrix
    assert np.allclose(lhs, rhs, atol=1e-10)
