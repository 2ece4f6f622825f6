"""Propagation engines on a shared fixed-step grid.

Three engines consume the same stage description (a model, a parameter
schedule, decay channels, a step size):

- conditional no-decay propagation of state columns,
- density-matrix integration with the full decay terms,
- stochastic unravelling by quantum jumps.

All three use classic fixed-step RK4 with the drift evaluated at step
endpoints and midpoints, so halving dt shrinks discretization error by
roughly sixteen. Drift matrices are built in bounded blocks to keep memory
flat on long stages. Ensembles are reduced in fixed-size chunks in index
order, which makes results bitwise reproducible for any worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import ConfigError, NormGrowthError, NumericalError
from .models import (
    MODEL_BASES,
    JumpChannel,
    ModelId,
    ParamSchedule,
    bind_hamiltonian,
    jump_set,
    total_damping,
)
from .qcore import LevelBasis, QOperator, QState

ENSEMBLE_CHUNK = 1024   # fixed chunk so the reduction order never depends on workers
DRIFT_BLOCK = 4096      # steps of drift matrices materialized at a time
NORM_RISE_TOL = 1e-9    # tolerated per-step squared-norm increase (round-off only)
DT_DEFAULT_FACTOR = 0.01
DT_BOUND_FACTOR = 0.02
THREADS_ENV = "HOLONOMY_THREADS"


def worker_count(default: int = 1) -> int:
    raw = os.environ.get(THREADS_ENV, "")
    try:
        return max(1, int(raw))
    except ValueError:
        return default


@dataclass(eq=False)
class LoopSpec:
    """One propagation stage: drive schedule, decay channels, step size.

    pulses holds (time, operator) pairs applied atomically between steps;
    pulse times must sit on the step grid.
    """

    model: ModelId
    schedule: ParamSchedule
    channels: tuple[JumpChannel, ...]
    dt: float
    pulses: tuple[tuple[float, QOperator], ...] = ()
    _aux: dict = field(default_factory=dict, init=False, repr=False)

    @classmethod
    def for_model(
        cls,
        model: ModelId,
        schedule: ParamSchedule,
        kappa: float,
        dt: float | None = None,
        dt_scale: float = 1.0,
        allow_coarse: bool = False,
        pulses: Sequence[tuple[float, QOperator]] = (),
    ) -> "LoopSpec":
        fastest = max(schedule.omega, schedule.gamma)
        if fastest <= 0.0:
            if dt is None:
                raise ConfigError("dt", "schedule has no rate scale; dt must be given")
            base = np.inf
        else:
            base = 1.0 / fastest
        step = (dt if dt is not None else DT_DEFAULT_FACTOR * base) * dt_scale
        if step > DT_BOUND_FACTOR * base * (1.0 + 1e-12) and not allow_coarse:
            raise ConfigError(
                "dt", f"step {step:.3g} exceeds the stability bound {DT_BOUND_FACTOR * base:.3g}"
            )
        return cls(model, schedule, tuple(jump_set(model, kappa)), step, tuple(pulses))

    @property
    def basis(self) -> LevelBasis:
        return MODEL_BASES[self.model]

    @property
    def total_time(self) -> float:
        return self.schedule.total_time

    def grid(self) -> tuple[int, float]:
        n = max(1, int(np.ceil(self.total_time / self.dt - 1e-9)))
        return n, self.total_time / n

    def drift_of_t(self, t) -> np.ndarray:
        """No-decay drift A(t) = -i H(t) - K/2 for broadcastable t."""
        aux = self._helpers()
        return -1j * aux["h_of_t"](t) - 0.5 * aux["damping"]

    def _helpers(self) -> dict:
        if not self._aux:
            self._aux["h_of_t"] = bind_hamiltonian(self.model, self.schedule)
            self._aux["damping"] = total_damping(self.channels, self.basis)
            self._aux["pulse_map"] = self._build_pulse_map()
        return self._aux

    def _pulse_map(self) -> dict[int, np.ndarray]:
        return self._helpers()["pulse_map"]

    def _build_pulse_map(self) -> dict[int, np.ndarray]:
        n, h = self.grid()
        out: dict[int, np.ndarray] = {}
        for t, op in self.pulses:
            if op.basis.labels != self.basis.labels:
                raise ConfigError("pulses", "pulse operator basis differs from the model basis")
            if not -1e-12 <= t <= self.total_time * (1.0 + 1e-12):
                raise ConfigError("pulses", f"pulse time {t:g} outside [0, {self.total_time:g}]")
            idx = int(round(t / h))
            if abs(t - idx * h) > 1e-9 * max(self.total_time, 1.0):
                raise ConfigError("pulses", f"pulse time {t:g} is not on the step grid")
            out[idx] = op.matrix @ out[idx] if idx in out else op.matrix.copy()
        return out

    def _iter_blocks(self) -> Iterator[tuple[int, int, np.ndarray, np.ndarray, float]]:
        """Yield (start, stop, node drifts, midpoint drifts, h) in step blocks.

        Node drifts carry one extra trailing entry (the stop node), so block
        boundaries recompute one shared node instead of holding global arrays.
        """
        n, h = self.grid()
        for start in range(0, n, DRIFT_BLOCK):
            stop = min(start + DRIFT_BLOCK, n)
            nodes = np.arange(start, stop + 1) * h
            mids = (np.arange(start, stop) + 0.5) * h
            yield start, stop, self.drift_of_t(nodes), self.drift_of_t(mids), h


def _col_norms(y: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->j", y.conj(), y).real


def _rk4_step(a0: np.ndarray, am: np.ndarray, a1: np.ndarray, h: float, y: np.ndarray) -> np.ndarray:
    k1 = a0 @ y
    k2 = am @ (y + (0.5 * h) * k1)
    k3 = am @ (y + (0.5 * h) * k2)
    k4 = a1 @ (y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)


def propagate_columns(
    spec: LoopSpec,
    y0: np.ndarray,
    observer: Callable[[int, float, np.ndarray], None] | None = None,
) -> tuple[np.ndarray, float]:
    """Propagate state columns under the no-decay drift.

    Returns (final columns, worst squared-norm rise seen in one step). The
    observer, if given, sees the live array after every step; it must copy
    what it keeps.
    """
    pulse_at = spec._pulse_map()
    y = np.array(y0, dtype=complex)
    if y.ndim == 1:
        y = y[:, None]
    if 0 in pulse_at:
        y = pulse_at[0] @ y
    norms = _col_norms(y)
    worst_rise = 0.0
    for start, stop, a_nodes, a_mids, h in spec._iter_blocks():
        for i in range(stop - start):
            y = _rk4_step(a_nodes[i], a_mids[i], a_nodes[i + 1], h, y)
            step = start + i + 1
            if step in pulse_at:
                y = pulse_at[step] @ y
            new = _col_norms(y)
            if not np.all(np.isfinite(new)):
                raise NumericalError(f"state norm became non-finite at step {step}")
            rise = float(np.max(new - norms))
            if rise > worst_rise:
                worst_rise = rise
            if rise > NORM_RISE_TOL:
                raise NormGrowthError(
                    f"squared norm rose by {rise:.3e} in one step (step {step}, dt={h:.3g})"
                )
            norms = new
            if observer is not None:
                observer(step, step * h, y)
    return y, worst_rise


@dataclass(frozen=True)
class NoJumpResult:
    """Conditional propagation outcome for a single initial state."""

    raw_final: QState
    survival: float
    normalized_final: QState
    max_norm_rise: float


def integrate_nojump(
    spec: LoopSpec,
    psi0: QState,
    observer: Callable[[int, float, np.ndarray], None] | None = None,
    dump=None,
) -> NoJumpResult:
    """No-decay propagation of one state; survival is the final squared norm.

    dump, if given, is a text stream receiving one CSV row per step with the
    time, the real and imaginary parts of every amplitude, and the running
    squared norm.
    """
    if psi0.basis.labels != spec.basis.labels:
        raise ConfigError("psi0", "initial state basis differs from the model basis")

    writer = None
    if dump is not None:
        header = ["t"]
        for lab in spec.basis.labels:
            header += [f"re_{lab}", f"im_{lab}"]
        header.append("survival")
        dump.write(",".join(header) + "\n")

        def writer(step: int, t: float, y: np.ndarray) -> None:
            col = y[:, 0]
            cells = [f"{t:.9g}"]
            for z in col:
                cells += [f"{z.real:.12g}", f"{z.imag:.12g}"]
            cells.append(f"{float(np.vdot(col, col).real):.12g}")
            dump.write(",".join(cells) + "\n")

        writer(0, 0.0, psi0.amplitudes[:, None])

    if observer is None and writer is None:
        cb = None
    else:

        def cb(step: int, t: float, y: np.ndarray) -> None:
            if observer is not None:
                observer(step, t, y)
            if writer is not None:
                writer(step, t, y)

    y, worst = propagate_columns(spec, psi0.amplitudes, observer=cb)
    raw = QState(spec.basis, y[:, 0])
    survival = float(raw.norm2())
    if survival <= 0.0:
        raise NumericalError("state fully decayed; no conditional final state")
    return NoJumpResult(raw, survival, raw.normalized(), worst)


@dataclass(frozen=True)
class MasterResult:
    rho_final: QOperator
    trace_drift: float
    min_eigenvalue: float


def integrate_master(
    spec: LoopSpec,
    rho0: QOperator,
    observer: Callable[[int, float, np.ndarray], None] | None = None,
) -> MasterResult:
    """Density-matrix propagation with decay feeding the jump destinations.

    The state is re-Hermitized after every step; trace_drift reports the
    largest deviation of the trace from its initial value.
    """
    if rho0.basis.labels != spec.basis.labels:
        raise ConfigError("rho0", "density matrix basis differs from the model basis")
    pulse_at = spec._pulse_map()
    jumps = [ch.matrix() for ch in spec.channels]
    jdags = [m.conj().T for m in jumps]

    def rhs(a: np.ndarray, r: np.ndarray) -> np.ndarray:
        out = a @ r + r @ a.conj().T
        for m, md in zip(jumps, jdags):
            out += m @ r @ md
        return out

    rho = np.array(rho0.matrix, dtype=complex)
    if 0 in pulse_at:
        u = pulse_at[0]
        rho = u @ rho @ u.conj().T
    tr0 = float(rho.trace().real)
    drift = 0.0
    for start, stop, a_nodes, a_mids, h in spec._iter_blocks():
        for i in range(stop - start):
            k1 = rhs(a_nodes[i], rho)
            k2 = rhs(a_mids[i], rho + (0.5 * h) * k1)
            k3 = rhs(a_mids[i], rho + (0.5 * h) * k2)
            k4 = rhs(a_nodes[i + 1], rho + h * k3)
            rho = rho + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
            rho = 0.5 * (rho + rho.conj().T)
            step = start + i + 1
            if step in pulse_at:
                u = pulse_at[step]
                rho = u @ rho @ u.conj().T
            tr = float(rho.trace().real)
            if not np.isfinite(tr):
                raise NumericalError(f"trace became non-finite at step {step}")
            drift = max(drift, abs(tr - tr0))
            if observer is not None:
                observer(step, step * h, rho)
    floor = float(np.linalg.eigvalsh(rho).min())
    return MasterResult(QOperator(spec.basis, rho), drift, floor)


# ---------------------------------------------------------------------------
# Quantum-jump unravelling


@dataclass(frozen=True)
class TrajectoryRecord:
    """One sampled trajectory: jump events and the normalized final state.

    weight is the probability of the realized jump pattern: the product of
    the survival thresholds consumed at each jump, the channel branching
    fractions, and the final no-jump survival.
    """

    seed: int
    index: int
    events: tuple[tuple[float, int], ...]
    final_state: QState
    weight: float


@dataclass(frozen=True)
class EnsembleResult:
    mean: QOperator
    stderr: float
    n_trajectories: int
    records: tuple[TrajectoryRecord, ...]


def _partial_step(spec: LoopSpec, y: np.ndarray, t_start: float, width: float) -> np.ndarray:
    if width <= 0.0:
        return y.copy()
    ts = np.array([t_start, t_start + 0.5 * width, t_start + width])
    a = spec.drift_of_t(ts)
    return _rk4_step(a[0], a[1], a[2], width, y)


def _resolve_step_jumps(
    spec: LoopSpec,
    y_pre: np.ndarray,
    t0: float,
    h: float,
    thresh: float,
    rng: np.random.Generator,
    jump_mats: Sequence[np.ndarray],
    events: list,
    log_factors: list,
) -> tuple[np.ndarray, float]:
    """Walk one grid step on which the survival threshold was crossed.

    Locates each crossing by bisection on a re-propagated partial step,
    applies a channel drawn by its instantaneous weight, renormalizes, and
    continues to the end of the step. Returns (state at step end, threshold).
    """
    t_off = 0.0
    y_cur = y_pre
    bis_tol = 1e-10 * spec.total_time
    while True:
        y_end = _partial_step(spec, y_cur, t0 + t_off, h - t_off)
        f_end = float(_col_norms(y_end)[0]) - thresh
        if f_end > 0.0:
            return y_end, thresh
        # Illinois false position on f(t) = norm2(t) - thresh, f(lo) > 0 >= f(hi)
        lo, hi = t_off, h
        f_lo = float(_col_norms(y_cur)[0]) - thresh
        f_hi = f_end
        side = 0
        while hi - lo > bis_tol:
            if f_hi != f_lo:
                t = (lo * f_hi - hi * f_lo) / (f_hi - f_lo)
            else:
                t = 0.5 * (lo + hi)
            if not lo < t < hi:
                t = 0.5 * (lo + hi)
            f_t = float(_col_norms(_partial_step(spec, y_cur, t0 + t_off, t - t_off))[0]) - thresh
            if f_t > 0.0:
                lo, f_lo = t, f_t
                if side == 1:
                    f_hi *= 0.5
                side = 1
            else:
                hi, f_hi = t, f_t
                if side == -1:
                    f_lo *= 0.5
                side = -1
        y_at = _partial_step(spec, y_cur, t0 + t_off, hi - t_off)
        weights = np.array([float(_col_norms(m @ y_at)[0]) for m in jump_mats])
        total = float(weights.sum())
        if total <= 0.0:
            raise NumericalError("threshold crossing with no open decay channel")
        u = rng.random()
        channel = int(np.searchsorted(np.cumsum(weights) / total, u, side="right"))
        channel = min(channel, len(jump_mats) - 1)
        log_factors.append(np.log(thresh) + np.log(weights[channel] / total))
        events.append((t0 + hi, channel))
        y_cur = (jump_mats[channel] @ y_at) / np.sqrt(weights[channel])
        thresh = rng.random()
        t_off = hi


def _run_chunk(
    spec: LoopSpec,
    psi0_amp: np.ndarray,
    seed: int,
    lo: int,
    hi: int,
    keep_records: bool,
) -> tuple[np.ndarray, np.ndarray, list[TrajectoryRecord]]:
    pulse_at = spec._pulse_map()
    m = hi - lo
    jump_mats = [ch.matrix() for ch in spec.channels if ch.rate > 0.0]

    rngs = [
        np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(idx,))))
        for idx in range(lo, hi)
    ]
    thresh = np.array([rng.random() for rng in rngs])
    y = np.tile(psi0_amp[:, None].astype(complex), (1, m))
    if 0 in pulse_at:
        y = pulse_at[0] @ y
    events: list[list] = [[] for _ in range(m)]
    log_factors: list[list] = [[] for _ in range(m)]

    for start, stop, a_nodes, a_mids, h in spec._iter_blocks():
        for i in range(stop - start):
            y_pre = y  # _rk4_step allocates; the pre-step columns stay intact
            y = _rk4_step(a_nodes[i], a_mids[i], a_nodes[i + 1], h, y)
            norms = _col_norms(y)
            if not np.all(np.isfinite(norms)):
                raise NumericalError(f"trajectory norm became non-finite at step {start + i + 1}")
            for j in np.flatnonzero(norms <= thresh):
                if not jump_mats:
                    raise NumericalError("threshold crossing with no open decay channel")
                y_j, new_thresh = _resolve_step_jumps(
                    spec,
                    y_pre[:, j : j + 1],
                    (start + i) * h,
                    h,
                    float(thresh[j]),
                    rngs[j],
                    jump_mats,
                    events[j],
                    log_factors[j],
                )
                y[:, j] = y_j[:, 0]
                thresh[j] = new_thresh
            step = start + i + 1
            if step in pulse_at:
                y = pulse_at[step] @ y

    finals = _col_norms(y)
    if np.any(finals <= 0.0):
        raise NumericalError("a trajectory fully decayed")
    y_norm = y / np.sqrt(finals)
    s1 = np.einsum("ik,jk->ij", y_norm, y_norm.conj())
    mags = y_norm.real**2 + y_norm.imag**2
    s2 = np.einsum("ik,jk->ij", mags, mags)
    records: list[TrajectoryRecord] = []
    if keep_records:
        for j in range(m):
            weight = float(np.exp(sum(log_factors[j])) * finals[j])
            records.append(
                TrajectoryRecord(
                    seed=seed,
                    index=lo + j,
                    events=tuple(events[j]),
                    final_state=QState(spec.basis, y_norm[:, j]),
                    weight=weight,
                )
            )
    return s1, s2, records


def sample_trajectory(spec: LoopSpec, psi0: QState, seed: int, index: int = 0) -> TrajectoryRecord:
    """Run the single trajectory a given ensemble slot would produce."""
    _check_unit_state(spec, psi0)
    _, _, records = _run_chunk(spec, psi0.amplitudes, seed, index, index + 1, keep_records=True)
    return records[0]


def run_ensemble(
    spec: LoopSpec,
    psi0: QState,
    n: int,
    seed: int,
    workers: int | None = None,
    keep_records: bool = False,
) -> EnsembleResult:
    """Average the projectors of n sampled trajectories.

    Chunks are reduced in index order, so the result is identical for any
    worker count. stderr is the aggregate standard error of the averaged
    matrix entries, collapsed to one scalar.
    """
    if n < 1:
        raise ValueError("need at least one trajectory")
    _check_unit_state(spec, psi0)
    if workers is None:
        workers = worker_count()
    bounds = [(lo, min(lo + ENSEMBLE_CHUNK, n)) for lo in range(0, n, ENSEMBLE_CHUNK)]

    def run(b: tuple[int, int]):
        return _run_chunk(spec, psi0.amplitudes, seed, b[0], b[1], keep_records)

    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, bounds))
    else:
        parts = [run(b) for b in bounds]

    d = spec.basis.dim
    s1 = np.zeros((d, d), dtype=complex)
    s2 = np.zeros((d, d))
    records: list[TrajectoryRecord] = []
    for p1, p2, recs in parts:
        s1 += p1
        s2 += p2
        records.extend(recs)
    mean = s1 / n
    var = s2 / n - (mean.real**2 + mean.imag**2)
    var = np.clip(var, 0.0, None)
    if n > 1:
        var *= n / (n - 1.0)
    stderr = float(np.sqrt(var.sum() / n))
    return EnsembleResult(QOperator(spec.basis, mean), stderr, n, tuple(records))


def average_trajectories(spec: LoopSpec, psi0: QState, n: int, seed: int) -> tuple[QOperator, float]:
    res = run_ensemble(spec, psi0, n, seed)
    return res.mean, res.stderr


def _check_unit_state(spec: LoopSpec, psi0: QState) -> None:
    if psi0.basis.labels != spec.basis.labels:
        raise ConfigError("psi0", "initial state basis differs from the model basis")
    if abs(psi0.norm2() - 1.0) > 1e-6:
        raise ValueError("trajectory sampling needs a unit-norm initial state")
