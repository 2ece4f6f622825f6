"""Drive Hamiltonians, decay channels, parameter loops, and dark states.

Conventions shared by every model:

- ``theta`` is the cone/mixing angle, ``phi`` the loop angle that winds by
  2*pi per revolution; ``omega`` is the drive amplitude and ``gamma`` the
  winding rate of ``phi``.
- Dark states are returned in a gauge that is single-valued over a full
  ``phi`` revolution, so discrete transport around a closed loop needs no
  endpoint phase fix.
- Angle arguments accept scalars or arrays and broadcast; matrix-valued
  results gain the angle shape as leading axes.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import AdiabaticityError, BasisMismatchError, UnsupportedModelError
from .qcore import SPIN_BASIS, LevelBasis, QOperator, QState

TWO_PI = 2.0 * np.pi


class ModelId(enum.Enum):
    NMR_SPIN_HALF = "nmr_spin_half"
    LAMBDA_FIRST = "lambda_first"
    LAMBDA_REFOCUS = "lambda_refocus"
    TRIPOD_FIRST = "tripod_first"
    TRIPOD_NAIVE_REFOCUS = "tripod_naive_refocus"
    SUPERPOSED_DUAL = "superposed_dual"


OPTICAL_BASIS = LevelBasis(("g1", "g2", "g3", "e", "sink"))

# The superposed scheme keeps its two sub-loops on separate excited levels.
# Merging them onto one shared excited level leaves a third zero-energy
# superposition of the two bright directions, and the loop transport couples
# the computational dark pair into it at O(1); separate excited levels close
# that channel while the summed couplings reproduce the single-level form.
DUAL_BASIS = LevelBasis(("g1", "g2", "g3", "g4", "e1", "e2", "sink"))

MODEL_BASES: dict[ModelId, LevelBasis] = {
    ModelId.NMR_SPIN_HALF: SPIN_BASIS,
    ModelId.LAMBDA_FIRST: OPTICAL_BASIS,
    ModelId.LAMBDA_REFOCUS: OPTICAL_BASIS,
    ModelId.TRIPOD_FIRST: OPTICAL_BASIS,
    ModelId.TRIPOD_NAIVE_REFOCUS: OPTICAL_BASIS,
    ModelId.SUPERPOSED_DUAL: DUAL_BASIS,
}

# Qubit ordering: first label is |0>, second is |1>.
COMPUTATIONAL_LABELS: dict[ModelId, tuple[str, str]] = {
    ModelId.NMR_SPIN_HALF: ("down", "up"),
    ModelId.LAMBDA_FIRST: ("g1", "g2"),
    ModelId.LAMBDA_REFOCUS: ("g1", "g2"),
    ModelId.TRIPOD_FIRST: ("g1", "g2"),
    ModelId.TRIPOD_NAIVE_REFOCUS: ("g1", "g2"),
    ModelId.SUPERPOSED_DUAL: ("g1", "g2"),
}


def computational_labels(model: ModelId) -> tuple[str, str]:
    return COMPUTATIONAL_LABELS[model]


# ---------------------------------------------------------------------------
# Hamiltonians


def fill_hamiltonian(model: ModelId, omega: float, theta, phi) -> np.ndarray:
    """Hermitian drive matrix for broadcastable angles, shape (..., d, d)."""
    th, ph = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(phi, dtype=float))
    d = MODEL_BASES[model].dim
    h = np.zeros(th.shape + (d, d), dtype=complex)
    s = omega * np.sin(th)
    c = omega * np.cos(th)
    if model is ModelId.NMR_SPIN_HALF:
        h[..., 0, 0] = 0.5 * c
        h[..., 1, 1] = -0.5 * c
        h[..., 0, 1] = 0.5 * s * np.exp(-1j * ph)
        h[..., 1, 0] = np.conj(h[..., 0, 1])
    elif model in (ModelId.LAMBDA_FIRST, ModelId.LAMBDA_REFOCUS):
        driven = 1 if model is ModelId.LAMBDA_FIRST else 0
        h[..., driven, 3] = s
        h[..., 2, 3] = c * np.exp(1j * ph)
        _mirror(h, ((driven, 3), (2, 3)))
    elif model in (ModelId.TRIPOD_FIRST, ModelId.TRIPOD_NAIVE_REFOCUS):
        a, b = (0, 1) if model is ModelId.TRIPOD_FIRST else (1, 0)
        h[..., a, 3] = s * np.cos(ph)
        h[..., b, 3] = s * np.sin(ph)
        h[..., 2, 3] = c
        _mirror(h, ((a, 3), (b, 3), (2, 3)))
    elif model is ModelId.SUPERPOSED_DUAL:
        h[..., 0, 4] = s * np.cos(ph)
        h[..., 1, 4] = s * np.sin(ph)
        h[..., 2, 4] = c
        h[..., 0, 5] = -s * np.sin(ph)
        h[..., 1, 5] = s * np.cos(ph)
        h[..., 3, 5] = c
        _mirror(h, ((0, 4), (1, 4), (2, 4), (0, 5), (1, 5), (3, 5)))
    else:
        raise UnsupportedModelError(str(model))
    return h


def _mirror(h: np.ndarray, entries) -> None:
    for i, j in entries:
        h[..., j, i] = np.conj(h[..., i, j])


def _as_operator(model: ModelId, omega: float, theta: float, phi: float) -> QOperator:
    return QOperator(MODEL_BASES[model], fill_hamiltonian(model, omega, float(theta), float(phi)))


def nmr_hamiltonian(omega: float, theta: float, phase: float) -> QOperator:
    """Spin-1/2 drive of fixed magnitude omega/2 pointing along (theta, phase)."""
    if omega <= 0:
        raise ValueError("omega must be positive")
    return _as_operator(ModelId.NMR_SPIN_HALF, omega, theta, phase)


def lambda_hamiltonian(variant: str, omega: float, theta: float, phi: float) -> QOperator:
    """Three-level drive: one ground level and g3 couple to the excited level.

    variant "first" drives g2; "refocus" drives g1 instead.
    """
    model = _pick(variant, {"first": ModelId.LAMBDA_FIRST, "refocus": ModelId.LAMBDA_REFOCUS})
    return _as_operator(model, omega, theta, phi)


def tripod_hamiltonian(variant: str, omega: float, theta: float, phi: float) -> QOperator:
    """Four-level drive: g1, g2, g3 all couple to the excited level.

    variant "naive_refocus" exchanges the cos(phi)/sin(phi) couplings of g1, g2.
    """
    model = _pick(
        variant,
        {"first": ModelId.TRIPOD_FIRST, "naive_refocus": ModelId.TRIPOD_NAIVE_REFOCUS},
    )
    return _as_operator(model, omega, theta, phi)


def superposed_hamiltonian(omega: float, theta: float, phi: float) -> QOperator:
    """Two counter-rotating drives run at once, each with its own excited level."""
    return _as_operator(ModelId.SUPERPOSED_DUAL, omega, theta, phi)


def _pick(variant: str, table: dict[str, ModelId]) -> ModelId:
    try:
        return table[variant]
    except KeyError:
        raise UnsupportedModelError(f"variant '{variant}' not in {sorted(table)}") from None


# ---------------------------------------------------------------------------
# Decay channels


@dataclass(frozen=True)
class JumpChannel:
    """One decay channel; the full jump operator is sqrt(rate) * op."""

    rate: float
    op: QOperator
    sink_label: str | None = None

    def matrix(self) -> np.ndarray:
        return np.sqrt(self.rate) * self.op.matrix

    def rate_matrix(self) -> np.ndarray:
        m = self.matrix()
        return m.conj().T @ m


def jump_set(model: ModelId, kappa: float) -> list[JumpChannel]:
    """Decay channels of a model at total rate kappa per decaying level."""
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    basis = MODEL_BASES[model]

    def lower(upper: str, target: str) -> QOperator:
        return QOperator.from_label_pairs(basis, {(target, upper): 1.0})

    if model is ModelId.NMR_SPIN_HALF:
        return [JumpChannel(kappa, lower("up", "down"))]
    if model is ModelId.SUPERPOSED_DUAL:
        return [
            JumpChannel(kappa, lower("g3", "sink"), "sink"),
            JumpChannel(kappa, lower("g4", "sink"), "sink"),
        ]
    return [JumpChannel(kappa, lower("g3", "sink"), "sink")]


def total_damping(channels: Sequence[JumpChannel], basis: LevelBasis) -> np.ndarray:
    """Sum of rate matrices; the anti-Hermitian drift is -i/2 times this."""
    k = np.zeros((basis.dim, basis.dim), dtype=complex)
    for ch in channels:
        if ch.op.basis.labels != basis.labels:
            raise BasisMismatchError("channel basis differs from model basis")
        k += ch.rate_matrix()
    return k


def effective_hamiltonian(h: QOperator, channels: Sequence[JumpChannel]) -> QOperator:
    """Non-Hermitian drift of the no-jump evolution: H - (i/2) sum G+G."""
    return QOperator(h.basis, h.matrix - 0.5j * total_damping(channels, h.basis))


# ---------------------------------------------------------------------------
# Dark states

_DARK_DIM = {
    ModelId.LAMBDA_FIRST: 1,
    ModelId.LAMBDA_REFOCUS: 1,
    ModelId.TRIPOD_FIRST: 2,
    ModelId.TRIPOD_NAIVE_REFOCUS: 2,
    ModelId.SUPERPOSED_DUAL: 2,
}


def dark_dim(model: ModelId) -> int:
    try:
        return _DARK_DIM[model]
    except KeyError:
        raise UnsupportedModelError(f"{model} has no dark subspace") from None


def dark_frame(model: ModelId, theta, phi) -> np.ndarray:
    """Orthonormal dark-state columns, shape (..., dim, dark_dim).

    The columns are annihilated by the drive at the same angles and reduce to
    bare computational levels at theta=0, phi=0.
    """
    k = dark_dim(model)
    th, ph = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(phi, dtype=float))
    d = MODEL_BASES[model].dim
    out = np.zeros(th.shape + (d, k), dtype=complex)
    s, c = np.sin(th), np.cos(th)
    if model is ModelId.LAMBDA_FIRST:
        out[..., 1, 0] = c
        out[..., 2, 0] = -s * np.exp(1j * ph)
    elif model is ModelId.LAMBDA_REFOCUS:
        out[..., 0, 0] = c
        out[..., 2, 0] = -s * np.exp(1j * ph)
    elif model is ModelId.TRIPOD_FIRST:
        out[..., 0, 0] = c * np.cos(ph)
        out[..., 1, 0] = c * np.sin(ph)
        out[..., 2, 0] = -s
        out[..., 0, 1] = -np.sin(ph)
        out[..., 1, 1] = np.cos(ph)
    elif model is ModelId.TRIPOD_NAIVE_REFOCUS:
        out[..., 0, 0] = c * np.sin(ph)
        out[..., 1, 0] = c * np.cos(ph)
        out[..., 2, 0] = -s
        out[..., 0, 1] = np.cos(ph)
        out[..., 1, 1] = -np.sin(ph)
    elif model is ModelId.SUPERPOSED_DUAL:
        out[..., 0, 0] = c * np.cos(ph)
        out[..., 1, 0] = c * np.sin(ph)
        out[..., 2, 0] = -s
        out[..., 0, 1] = -c * np.sin(ph)
        out[..., 1, 1] = c * np.cos(ph)
        out[..., 3, 1] = -s
    return out


def dark_states(model: ModelId, theta: float, phi: float) -> list[QState]:
    basis = MODEL_BASES[model]
    frame = dark_frame(model, float(theta), float(phi))
    return [QState(basis, frame[:, i]) for i in range(frame.shape[-1])]


# ---------------------------------------------------------------------------
# Parameter schedules


@dataclass(frozen=True)
class ParamSchedule:
    """Time profiles of the loop angles plus bookkeeping.

    theta_of_t and phi_of_t are vectorized over time arrays. segments lists
    (kind, duration) pairs in traversal order, kinds drawn from
    ramp_in | loop | ramp_out.
    """

    omega: float
    gamma: float
    theta_of_t: Callable[[np.ndarray], np.ndarray]
    phi_of_t: Callable[[np.ndarray], np.ndarray]
    direction: str
    segments: tuple[tuple[str, float], ...]
    total_time: float

    def reversed(self) -> "ParamSchedule":
        """Same path traversed backwards: angles evaluated at total_time - t."""
        t_total = self.total_time
        th, ph = self.theta_of_t, self.phi_of_t
        flipped = "reversed" if self.direction == "forward" else "forward"
        return ParamSchedule(
            self.omega,
            self.gamma,
            lambda t: th(t_total - np.asarray(t, dtype=float)),
            lambda t: ph(t_total - np.asarray(t, dtype=float)),
            flipped,
            self.segments[::-1],
            t_total,
        )


def schedule_for_loop(
    model: ModelId,
    theta0: float,
    gamma: float,
    omega: float,
    direction: str = "forward",
    ramp_fraction: float = 0.25,
    allow_nonadiabatic: bool = False,
) -> ParamSchedule:
    """One closed loop: smooth theta ramp up, a full phi revolution, ramp down.

    Ramps hold phi fixed at a revolution endpoint and take
    ramp_fraction * (2*pi/gamma) each; theta follows a sin^2 ease so the run
    starts and ends on bare levels with zero angle velocity.
    """
    if model not in MODEL_BASES:
        raise UnsupportedModelError(str(model))
    if direction not in ("forward", "reversed"):
        raise ValueError(f"direction must be forward or reversed, got {direction!r}")
    if not 0.0 <= theta0 <= np.pi / 2 + 1e-12:
        raise ValueError("theta0 must lie in [0, pi/2]")
    if gamma <= 0 or omega <= 0:
        raise ValueError("omega and gamma must be positive")
    if ramp_fraction < 0:
        raise ValueError("ramp_fraction must be non-negative")
    if omega <= 10.0 * gamma and not allow_nonadiabatic:
        raise AdiabaticityError(
            f"omega={omega:g} is not large against gamma={gamma:g}; "
            "pass allow_nonadiabatic to run anyway"
        )

    t_loop = TWO_PI / gamma
    tau = ramp_fraction * t_loop
    total = t_loop + 2.0 * tau

    def theta_of_t(t):
        t = np.asarray(t, dtype=float)
        if tau == 0.0:
            return np.full(t.shape, float(theta0))
        up = np.sin(0.5 * np.pi * np.clip(t / tau, 0.0, 1.0)) ** 2
        down = np.sin(0.5 * np.pi * np.clip((total - t) / tau, 0.0, 1.0)) ** 2
        return theta0 * np.minimum(up, down)

    def phi_of_t(t):
        t = np.asarray(t, dtype=float)
        return gamma * np.clip(t - tau, 0.0, t_loop)

    if tau > 0:
        segments = (("ramp_in", tau), ("loop", t_loop), ("ramp_out", tau))
    else:
        segments = (("loop", t_loop),)
    forward = ParamSchedule(omega, gamma, theta_of_t, phi_of_t, "forward", segments, total)
    return forward if direction == "forward" else forward.reversed()


def bind_hamiltonian(model: ModelId, schedule: ParamSchedule) -> Callable[[np.ndarray], np.ndarray]:
    """Time-domain view of the drive: t (broadcastable) -> H(t)."""

    def h_of_t(t):
        t = np.asarray(t, dtype=float)
        return fill_hamiltonian(model, schedule.omega, schedule.theta_of_t(t), schedule.phi_of_t(t))

    return h_of_t
