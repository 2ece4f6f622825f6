"""Dense complex state/operator primitives on small labeled level bases.

Everything here is plain numpy under the hood; dimensions stay at or below 8,
so no sparse or structured storage is used anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import BasisMismatchError, UnknownLevelError

ATOL = 1e-12


@dataclass(frozen=True)
class LevelBasis:
    """Ordered set of level labels defining a Hilbert space."""

    labels: tuple[str, ...]

    def __post_init__(self):
        labels = tuple(self.labels)
        object.__setattr__(self, "labels", labels)
        if len(labels) == 0:
            raise ValueError("basis needs at least one level")
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate level labels: {labels}")

    @property
    def dim(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise UnknownLevelError(f"level '{label}' not in basis {self.labels}") from None

    def __contains__(self, label: str) -> bool:
        return label in self.labels


def _frozen_array(values, shape_check=None) -> np.ndarray:
    arr = np.array(values, dtype=complex, order="C")
    if shape_check is not None and arr.shape != shape_check:
        raise ValueError(f"expected shape {shape_check}, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError("non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class QState:
    """Possibly sub-normalized pure state; the squared norm carries survival probability."""

    basis: LevelBasis
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = _frozen_array(self.amplitudes, (self.basis.dim,))
        object.__setattr__(self, "amplitudes", arr)

    def norm2(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def normalized(self) -> "QState":
        # Heavily decayed states (norm ~ 1e-14 after long lossy evolution) must
        # still normalize; only a true underflow-to-zero norm is unrecoverable.
        n = np.sqrt(self.norm2())
        if n < 1e-150:
            raise ValueError("cannot normalize a zero state")
        return QState(self.basis, self.amplitudes / n)

    def overlap(self, other: "QState") -> complex:
        _same_basis(self.basis, other.basis)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def population(self, label: str) -> float:
        return float(abs(self.amplitudes[self.basis.index(label)]) ** 2)


@dataclass(frozen=True)
class QOperator:
    """Dense operator on a labeled basis."""

    basis: LevelBasis
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        d = self.basis.dim
        arr = _frozen_array(self.matrix, (d, d))
        object.__setattr__(self, "matrix", arr)

    @classmethod
    def from_label_pairs(cls, basis: LevelBasis, entries: Mapping[tuple[str, str], complex]) -> "QOperator":
        m = np.zeros((basis.dim, basis.dim), dtype=complex)
        for (row, col), val in entries.items():
            m[basis.index(row), basis.index(col)] = val
        return cls(basis, m)

    def is_hermitian(self, tol: float = ATOL) -> bool:
        return bool(np.max(np.abs(self.matrix - self.matrix.conj().T)) <= tol)

    def expectation(self, state: QState) -> complex:
        _same_basis(self.basis, state.basis)
        return complex(np.vdot(state.amplitudes, self.matrix @ state.amplitudes))


def _same_basis(a: LevelBasis, b: LevelBasis):
    if a.labels != b.labels:
        raise BasisMismatchError(f"basis mismatch: {a.labels} vs {b.labels}")


def basis_state(basis: LevelBasis, label: str) -> QState:
    amp = np.zeros(basis.dim, dtype=complex)
    amp[basis.index(label)] = 1.0
    return QState(basis, amp)


def superposition(basis: LevelBasis, weights: Mapping[str, complex]) -> QState:
    amp = np.zeros(basis.dim, dtype=complex)
    for label, w in weights.items():
        amp[basis.index(label)] = w
    return QState(basis, amp)


def adjoint(op: QOperator) -> QOperator:
    return QOperator(op.basis, op.matrix.conj().T)


def apply(op: QOperator, state: QState) -> QState:
    _same_basis(op.basis, state.basis)
    return QState(state.basis, op.matrix @ state.amplitudes)


def compose(a: QOperator, b: QOperator) -> QOperator:
    """Operator product a @ b (b acts first)."""
    _same_basis(a.basis, b.basis)
    return QOperator(a.basis, a.matrix @ b.matrix)


def project_gate(op: QOperator, comp_labels: Iterable[str]) -> np.ndarray:
    """Restrict an operator to the computational sub-block, ordered as given."""
    idx = [op.basis.index(l) for l in comp_labels]
    return op.matrix[np.ix_(idx, idx)].copy()


# Spin-1/2 basis and Pauli operators. The first label is the upper level so the
# matrices take their textbook form.
SPIN_BASIS = LevelBasis(("up", "down"))
SIGMA_X = QOperator(SPIN_BASIS, np.array([[0, 1], [1, 0]], dtype=complex))
SIGMA_Y = QOperator(SPIN_BASIS, np.array([[0, -1j], [1j, 0]], dtype=complex))
SIGMA_Z = QOperator(SPIN_BASIS, np.array([[1, 0], [0, -1]], dtype=complex))
SIGMA_MINUS = QOperator(SPIN_BASIS, np.array([[0, 0], [1, 0]], dtype=complex))
