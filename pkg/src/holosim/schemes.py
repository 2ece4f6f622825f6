"""Composite control protocols built from closed-loop stages.

A scheme is one or more loop stages stitched together in time. Echoed
variants traverse the loop, optionally flip the computational pair, then
traverse the reversed loop; whether the second pass cancels phases or
doubles them depends on the model, which is the point being probed. The
final amplitudes of one stage feed the next without renormalization, so
composite survival and homogeneity come out of a single conditional
evolution.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .dynamics import LoopSpec, NoJumpResult, integrate_nojump
from .errors import ConfigError, LeakageError, UnsupportedModelError
from .holonomy import (
    GateReport,
    extract_gate,
    holonomy_angle,
    wilson_holonomy,
)
from .models import ModelId, ParamSchedule, schedule_for_loop
from .qcore import SIGMA_X, SIGMA_Y, QState

SINGLE_LOOP_MODELS = (ModelId.NMR_SPIN_HALF, ModelId.LAMBDA_FIRST, ModelId.TRIPOD_FIRST)
PULSE_OPS = {"x": SIGMA_X, "y": SIGMA_Y}
OUT_OF_REGIME_KAPPA_RATIO = 0.5

SWEEP_COLUMNS = (
    "scheme",
    "model",
    "kappa",
    "gamma",
    "omega",
    "theta0",
    "survival",
    "fidelity",
    "homogeneity_defect",
    "unitarity_defect",
    "leakage",
    "phi_g_oracle",
)


class Scheme(Enum):
    SINGLE = "single"
    NMR_DOUBLE = "nmr_double"
    LAMBDA_DOUBLE = "lambda_double"
    TRIPOD_NAIVE_DOUBLE = "tripod_naive_double"
    SUPERPOSED = "superposed"


SCHEME_BASE_MODEL = {
    Scheme.NMR_DOUBLE: ModelId.NMR_SPIN_HALF,
    Scheme.LAMBDA_DOUBLE: ModelId.LAMBDA_FIRST,
    Scheme.TRIPOD_NAIVE_DOUBLE: ModelId.TRIPOD_FIRST,
    Scheme.SUPERPOSED: ModelId.SUPERPOSED_DUAL,
}


@dataclass(frozen=True)
class SchemeSpec:
    """Parameters of one protocol run. Rates share the drive's units."""

    scheme: Scheme
    omega: float = 1.0
    gamma: float = 0.005
    kappa: float = 0.0
    theta0: float = np.pi / 4
    ramp_fraction: float = 0.25
    dt: float | None = None
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.scheme, Scheme):
            raise ConfigError("scheme", f"unknown scheme {self.scheme!r}")
        if self.omega <= 0.0:
            raise ConfigError("omega", "drive rate must be positive")
        if self.gamma <= 0.0:
            raise ConfigError("gamma", "loop rate must be positive")
        if self.kappa < 0.0:
            raise ConfigError("kappa", "decay rate must be non-negative")
        if self.kappa >= self.omega:
            raise ConfigError("kappa", "decay must stay below the drive rate")
        if not 0.0 <= self.theta0 <= np.pi / 2:
            raise ConfigError("theta0", "loop opening angle must lie in [0, pi/2]")
        if self.ramp_fraction < 0.0:
            raise ConfigError("ramp_fraction", "ramp fraction must be non-negative")
        if self.dt is not None and self.dt <= 0.0:
            raise ConfigError("dt", "step size must be positive")


@dataclass(frozen=True)
class EchoPairResult:
    """Both individually extracted loop gates plus their stitched composite."""

    composite: GateReport
    forward: GateReport
    reversed_: GateReport
    commutator_norm: float


def _stage(
    model: ModelId,
    spec: SchemeSpec,
    schedule: ParamSchedule,
    dt_scale: float,
    pulses=(),
) -> LoopSpec:
    return LoopSpec.for_model(
        model,
        schedule,
        spec.kappa,
        dt=spec.dt,
        dt_scale=dt_scale,
        allow_coarse=dt_scale > 1.0,
        pulses=pulses,
    )


def _chain(stages: Sequence[LoopSpec]) -> Callable[[QState], NoJumpResult]:
    """Feed each stage's raw final state to the next, keeping norms as-is."""

    def build(psi0: QState) -> NoJumpResult:
        state = psi0
        worst_rise = 0.0
        res = None
        for st in stages:
            res = integrate_nojump(st, state)
            worst_rise = max(worst_rise, res.max_norm_rise)
            state = res.raw_final
        assert res is not None
        return NoJumpResult(
            raw_final=res.raw_final,
            survival=float(res.raw_final.norm2()),
            normalized_final=res.normalized_final,
            max_norm_rise=worst_rise,
        )

    return build


def scheme_stages(
    spec: SchemeSpec,
    model: ModelId | None = None,
    pulse_axis: str = "x",
    dt_scale: float = 1.0,
) -> list[LoopSpec]:
    """Stage list of a scheme, in traversal order.

    Single-loop schemes need the model spelled out; echoed schemes derive
    both stages themselves. Pulses sit at the end of their stage.
    """
    if spec.scheme is Scheme.SINGLE:
        if model is None:
            raise ConfigError("model", "single-loop runs need a model")
        if model not in SINGLE_LOOP_MODELS:
            raise UnsupportedModelError(
                f"{model.value} is not a single-loop model; pick one of "
                f"{[m.value for m in SINGLE_LOOP_MODELS]}"
            )
        sch = schedule_for_loop(
            model, spec.theta0, spec.gamma, spec.omega, ramp_fraction=spec.ramp_fraction
        )
        return [_stage(model, spec, sch, dt_scale)]

    base_model = SCHEME_BASE_MODEL[spec.scheme]
    if model is not None and model is not base_model:
        raise ConfigError("model", f"{spec.scheme.value} runs on {base_model.value}")
    sch_f = schedule_for_loop(
        base_model, spec.theta0, spec.gamma, spec.omega, ramp_fraction=spec.ramp_fraction
    )
    if spec.scheme is Scheme.SUPERPOSED:
        return [_stage(base_model, spec, sch_f, dt_scale)]
    sch_r = sch_f.reversed()
    if spec.scheme is Scheme.NMR_DOUBLE:
        if pulse_axis not in PULSE_OPS:
            raise ConfigError("pulse_axis", f"pulse axis must be one of {sorted(PULSE_OPS)}")
        op = PULSE_OPS[pulse_axis]
        return [
            _stage(base_model, spec, sch_f, dt_scale, pulses=((sch_f.total_time, op),)),
            _stage(base_model, spec, sch_r, dt_scale, pulses=((sch_r.total_time, op),)),
        ]
    if spec.scheme is Scheme.LAMBDA_DOUBLE:
        return [
            _stage(ModelId.LAMBDA_FIRST, spec, sch_f, dt_scale),
            _stage(ModelId.LAMBDA_REFOCUS, spec, sch_f.reversed(), dt_scale),
        ]
    return [
        _stage(ModelId.TRIPOD_FIRST, spec, sch_f, dt_scale),
        _stage(ModelId.TRIPOD_NAIVE_REFOCUS, spec, sch_r, dt_scale),
    ]


def run_single_loop(
    spec: SchemeSpec, model: ModelId, dt_scale: float = 1.0
) -> GateReport:
    """One forward loop of a first-pass model."""
    single = replace(spec, scheme=Scheme.SINGLE) if spec.scheme is not Scheme.SINGLE else spec
    stages = scheme_stages(single, model=model, dt_scale=dt_scale)
    return extract_gate(model, _chain(stages))


def run_double_loop_nmr(
    spec: SchemeSpec, pulse_axis: str = "x", dt_scale: float = 1.0
) -> GateReport:
    """Loop, hard pi pulse, reversed loop, hard pi pulse.

    The pulses swap the branches so dynamical phases cancel between passes
    while the opposite-orientation loop doubles the geometric part.
    """
    spec = replace(spec, scheme=Scheme.NMR_DOUBLE) if spec.scheme is not Scheme.NMR_DOUBLE else spec
    stages = scheme_stages(spec, pulse_axis=pulse_axis, dt_scale=dt_scale)
    return extract_gate(ModelId.NMR_SPIN_HALF, _chain(stages))


def run_double_loop_lambda(spec: SchemeSpec, dt_scale: float = 1.0) -> GateReport:
    """Forward loop, then the drive-swapped variant over the reversed path.

    No pulse is applied; the second stage couples the previously idle level
    so both computational states spend one pass each in the lossy role.
    """
    if spec.scheme is not Scheme.LAMBDA_DOUBLE:
        spec = replace(spec, scheme=Scheme.LAMBDA_DOUBLE)
    stages = scheme_stages(spec, dt_scale=dt_scale)
    return extract_gate(ModelId.LAMBDA_FIRST, _chain(stages))


def run_naive_refocus_tripod(spec: SchemeSpec, dt_scale: float = 1.0) -> EchoPairResult:
    """Frame-pair loop followed by the coupling-swapped reversed loop.

    The two loop gates are extracted individually; the commutator of their
    normalized forms measures how far the echo is from actually undoing the
    first pass.
    """
    if spec.scheme is not Scheme.TRIPOD_NAIVE_DOUBLE:
        spec = replace(spec, scheme=Scheme.TRIPOD_NAIVE_DOUBLE)
    st_f, st_r = scheme_stages(spec, dt_scale=dt_scale)
    forward = extract_gate(ModelId.TRIPOD_FIRST, _chain([st_f]))
    reversed_ = extract_gate(ModelId.TRIPOD_NAIVE_REFOCUS, _chain([st_r]))
    composite = extract_gate(ModelId.TRIPOD_FIRST, _chain([st_f, st_r]))
    a, b = forward.normalized_gate, reversed_.normalized_gate
    commutator_norm = float(np.linalg.norm(a @ b - b @ a))
    return EchoPairResult(
        composite=composite,
        forward=forward,
        reversed_=reversed_,
        commutator_norm=commutator_norm,
    )


def run_superposed_loop(spec: SchemeSpec, dt_scale: float = 1.0) -> GateReport:
    """Single loop of the doubly-lifted frame pair; no echo stage needed."""
    if spec.scheme is not Scheme.SUPERPOSED:
        spec = replace(spec, scheme=Scheme.SUPERPOSED)
    stages = scheme_stages(spec, dt_scale=dt_scale)
    return extract_gate(ModelId.SUPERPOSED_DUAL, _chain(stages))


def run_scheme(
    spec: SchemeSpec,
    model: ModelId | None = None,
    pulse_axis: str = "x",
    dt_scale: float = 1.0,
) -> GateReport | EchoPairResult:
    """Dispatch a spec to its runner; SINGLE requires an explicit model."""
    if spec.scheme is not Scheme.NMR_DOUBLE and pulse_axis != "x":
        raise ConfigError("pulse_axis", "only the pulsed echo takes a pulse axis")
    if spec.scheme is Scheme.SINGLE:
        if model is None:
            raise ConfigError("model", "single-loop runs need a model")
        return run_single_loop(spec, model, dt_scale=dt_scale)
    expected = SCHEME_BASE_MODEL[spec.scheme]
    if model is not None and model is not expected:
        raise ConfigError("model", f"{spec.scheme.value} runs on {expected.value}")
    if spec.scheme is Scheme.NMR_DOUBLE:
        return run_double_loop_nmr(spec, pulse_axis=pulse_axis, dt_scale=dt_scale)
    if spec.scheme is Scheme.LAMBDA_DOUBLE:
        return run_double_loop_lambda(spec, dt_scale=dt_scale)
    if spec.scheme is Scheme.TRIPOD_NAIVE_DOUBLE:
        return run_naive_refocus_tripod(spec, dt_scale=dt_scale)
    return run_superposed_loop(spec, dt_scale=dt_scale)


# ---------------------------------------------------------------------------
# scaling sweeps


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    stderr: float
    n_points: int


@dataclass(frozen=True)
class SweepRow:
    scheme: str
    model: str
    kappa: float
    gamma: float
    omega: float
    theta0: float
    survival: float
    fidelity: float
    homogeneity_defect: float
    unitarity_defect: float
    leakage: float
    phi_g_oracle: float
    out_of_regime: bool = field(compare=False)

    def csv_values(self) -> list:
        return [getattr(self, c) for c in SWEEP_COLUMNS]


@dataclass(frozen=True)
class SweepResult:
    scheme: Scheme
    model: ModelId
    rows: tuple[SweepRow, ...]
    residual_errors: tuple[float, ...]
    slopes: dict[str, FitResult]


def fit_loglog(xs: Sequence[float], ys: Sequence[float]) -> FitResult:
    """Least-squares slope of log(y) against log(x)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size < 2:
        raise ValueError("need at least two points for a slope")
    if np.any(xs <= 0.0) or np.any(ys <= 0.0):
        raise ValueError("log-log fit needs positive data")
    lx, ly = np.log(xs), np.log(ys)
    if xs.size == 2:
        # an exact line through two points leaves no residual to size an error
        slope = (ly[1] - ly[0]) / (lx[1] - lx[0])
        return FitResult(
            slope=float(slope),
            intercept=float(ly[0] - slope * lx[0]),
            stderr=float("nan"),
            n_points=2,
        )
    (slope, intercept), cov = np.polyfit(lx, ly, 1, cov=True)
    return FitResult(
        slope=float(slope),
        intercept=float(intercept),
        stderr=float(np.sqrt(max(cov[0, 0], 0.0))),
        n_points=int(xs.size),
    )


def _unitarity_defect(gate: np.ndarray) -> float:
    smax = float(np.linalg.svd(gate, compute_uv=False)[0])
    return float(np.linalg.norm(gate.conj().T @ gate / smax**2 - np.eye(2)))


def _fidelity(report: GateReport, ideal: np.ndarray) -> float:
    return float(np.abs(np.trace(ideal.conj().T @ report.normalized_gate)) / 2.0)


def _sweep_ideal_and_oracle(
    base: SchemeSpec, scheme: Scheme, model: ModelId
) -> tuple[np.ndarray, float]:
    """Unitary target and reference loop angle for one sweep's fixed path."""
    if model is ModelId.NMR_SPIN_HALF:
        phi = 2.0 * np.pi * (1.0 - np.cos(base.theta0))
        if scheme is Scheme.SINGLE:
            # branch ordering puts the +branch on the first computational label
            total = (1.0 + 2.0 * base.ramp_fraction) * 2.0 * np.pi / base.gamma
            half = 0.5 * base.omega * total + 0.5 * phi
            return np.diag([np.exp(-1j * half), np.exp(1j * half)]), phi
        return np.diag([np.exp(-1j * phi), np.exp(1j * phi)]), phi
    sch = schedule_for_loop(
        model, base.theta0, base.gamma, base.omega, ramp_fraction=base.ramp_fraction
    )
    hol = wilson_holonomy(model, sch)
    if scheme is Scheme.LAMBDA_DOUBLE:
        w = hol.matrix[0, 0]
        return np.diag([1.0, w * w]), float(np.angle(w))
    if scheme is Scheme.TRIPOD_NAIVE_DOUBLE:
        hol_r = wilson_holonomy(ModelId.TRIPOD_NAIVE_REFOCUS, sch.reversed())
        # the swapped-coupling frame meets the bare levels in exchanged order
        swap = np.array([[0.0, 1.0], [1.0, 0.0]])
        return swap @ hol_r.matrix @ swap @ hol.matrix, holonomy_angle(hol)
    if hol.dim == 1:
        return np.diag([1.0, hol.matrix[0, 0]]), float(np.angle(hol.matrix[0, 0]))
    return hol.matrix, holonomy_angle(hol)


def scaling_sweep(
    base: SchemeSpec,
    kappas: Sequence[float],
    model: ModelId | None = None,
    dt_scale: float = 1.0,
) -> SweepResult:
    """Rerun one protocol over a decay-rate grid and fit its scaling laws.

    Rows with kappa above half the drive rate are kept in the table but
    flagged and excluded from the fits, as are lossless rows (recorded for
    reference, never fitted on a log axis). A row whose evolution leaks
    beyond the adiabatic bound is recorded with NaN gate metrics and
    flagged rather than aborting the sweep. residual_errors holds the
    Frobenius distance of each normalized gate from the lossless one.
    """
    kappas = [float(k) for k in kappas]
    if not kappas:
        raise ConfigError("kappas", "sweep grid is empty")
    if any(k < 0 for k in kappas):
        raise ConfigError("kappas", "decay rates must be non-negative")
    resolved_model = model or SCHEME_BASE_MODEL.get(base.scheme)
    if resolved_model is None:
        raise ConfigError("model", "single-loop sweeps need a model")

    ideal, oracle = _sweep_ideal_and_oracle(base, base.scheme, resolved_model)
    baseline = _sweep_report(replace(base, kappa=0.0), resolved_model, dt_scale)
    rows: list[SweepRow] = []
    residuals: list[float] = []
    for kap in kappas:
        shared = dict(
            scheme=base.scheme.value,
            model=resolved_model.value,
            kappa=kap,
            gamma=base.gamma,
            omega=base.omega,
            theta0=base.theta0,
            phi_g_oracle=oracle,
        )
        try:
            rep = _sweep_report(replace(base, kappa=kap), resolved_model, dt_scale)
        except LeakageError as err:
            residuals.append(float("nan"))
            rows.append(
                SweepRow(
                    survival=float("nan"),
                    fidelity=float("nan"),
                    homogeneity_defect=float("nan"),
                    unitarity_defect=float("nan"),
                    leakage=err.leakage,
                    out_of_regime=True,
                    **shared,
                )
            )
            continue
        residuals.append(float(np.linalg.norm(rep.normalized_gate - baseline.normalized_gate)))
        rows.append(
            SweepRow(
                survival=rep.survival,
                fidelity=_fidelity(rep, ideal),
                homogeneity_defect=rep.homogeneity,
                unitarity_defect=_unitarity_defect(rep.gate),
                leakage=rep.leakage,
                out_of_regime=kap > OUT_OF_REGIME_KAPPA_RATIO * base.omega,
                **shared,
            )
        )

    slopes: dict[str, FitResult] = {}
    usable = [(r, res) for r, res in zip(rows, residuals) if r.kappa > 0.0 and not r.out_of_regime]
    if len(usable) >= 2:
        ks = [r.kappa for r, _ in usable]
        defects = [r.homogeneity_defect for r, _ in usable]
        if all(d > 0 for d in defects):
            slopes["homogeneity_defect"] = fit_loglog(ks, defects)
        res_vals = [res for _, res in usable]
        if all(v > 0 for v in res_vals):
            slopes["residual_error"] = fit_loglog(ks, res_vals)
    return SweepResult(
        scheme=base.scheme,
        model=resolved_model,
        rows=tuple(rows),
        residual_errors=tuple(residuals),
        slopes=slopes,
    )


def _sweep_report(spec: SchemeSpec, model: ModelId, dt_scale: float) -> GateReport:
    out = run_scheme(spec, model=model if spec.scheme is Scheme.SINGLE else None, dt_scale=dt_scale)
    return out.composite if isinstance(out, EchoPairResult) else out


def write_sweep_csv(result: SweepResult, stream: io.TextIOBase) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for row in result.rows:
        writer.writerow(row.csv_values())
