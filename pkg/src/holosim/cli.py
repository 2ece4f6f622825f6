"""Command line front end: run one protocol, verify the build, sweep decay rates.

Exit codes: 0 success, 1 failed verification checks, 2 configuration
errors (the message names the offending field), 3 numerical failures
during an otherwise valid run. Reports are written atomically and are
deterministic apart from their timestamp. The HOLONOMY_THREADS
environment variable caps ensemble worker threads.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import ConfigError, HolosimError
from .figures import render_run_figure, render_sweep_figure
from .holonomy import GateReport
from .models import ModelId, computational_labels
from .qcore import basis_state
from .schemes import (
    SCHEME_BASE_MODEL,
    EchoPairResult,
    Scheme,
    SchemeSpec,
    run_scheme,
    scaling_sweep,
    scheme_stages,
    write_sweep_csv,
)
from .verify import format_report, results_payload, run_verify

EXIT_OK = 0
EXIT_CHECKS_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

_COMMON_KEYS = frozenset(
    {"scheme", "model", "omega", "gamma", "kappa", "theta0", "ramp_fraction",
     "pulse_axis", "dt_scale"}
)


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _write_text(text: str, path: Path) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _write_json(payload: dict, path: Path) -> None:
    _write_text(json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n", path)


def _load_config(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError("config", f"cannot read {path}: {err}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError("config", f"{path} is not valid JSON: {err}") from None
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be a JSON object")
    return data


def _number(data: dict, key: str, default: float) -> float:
    value = data.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(key, "must be a number")
    return float(value)


def _parse_protocol(data: dict, extra_keys: frozenset = frozenset()):
    allowed = _COMMON_KEYS | extra_keys
    for key in data:
        if key not in allowed:
            raise ConfigError(key, f"unknown config key; allowed: {sorted(allowed)}")

    raw_scheme = data.get("scheme")
    if not isinstance(raw_scheme, str):
        raise ConfigError("scheme", "required, one of "
                          f"{[s.value for s in Scheme]}")
    try:
        scheme = Scheme(raw_scheme)
    except ValueError:
        raise ConfigError(
            "scheme", f"unknown scheme {raw_scheme!r}; choose from "
            f"{[s.value for s in Scheme]}"
        ) from None

    model = None
    if "model" in data:
        raw_model = data["model"]
        if not isinstance(raw_model, str):
            raise ConfigError("model", "must be a model name string")
        try:
            model = ModelId(raw_model)
        except ValueError:
            raise ConfigError(
                "model", f"unknown model {raw_model!r}; choose from "
                f"{[m.value for m in ModelId]}"
            ) from None

    pulse_axis = data.get("pulse_axis", "x")
    if not isinstance(pulse_axis, str):
        raise ConfigError("pulse_axis", "must be a string")

    dt_scale = _number(data, "dt_scale", 1.0)
    if dt_scale <= 0:
        raise ConfigError("dt_scale", "must be positive")

    spec = SchemeSpec(
        scheme,
        omega=_number(data, "omega", 1.0),
        gamma=_number(data, "gamma", 0.005),
        kappa=_number(data, "kappa", 0.0),
        theta0=_number(data, "theta0", np.pi / 4),
        ramp_fraction=_number(data, "ramp_fraction", 0.25),
    )
    return spec, model, pulse_axis, dt_scale


def _complex_matrix(matrix) -> list:
    return [
        [[float(z.real), float(z.imag)] for z in row]
        for row in np.asarray(matrix, dtype=complex)
    ]


def _gate_payload(rep: GateReport) -> dict:
    return {
        "gate": _complex_matrix(rep.gate),
        "normalized_gate": _complex_matrix(rep.normalized_gate),
        "global_factor": [float(rep.global_factor.real), float(rep.global_factor.imag)],
        "survival": float(rep.survival),
        "leakage": float(rep.leakage),
        "amplitude_imbalance": float(rep.homogeneity),
    }


def _cmd_run(args) -> int:
    data = _load_config(args.config)
    spec, model, pulse_axis, dt_scale = _parse_protocol(data)
    out = Path(args.out)

    result = run_scheme(spec, model=model, pulse_axis=pulse_axis, dt_scale=dt_scale)

    payload: dict = {
        "command": "run",
        "generated_at": _timestamp(),
        "config": data,
        "scheme": spec.scheme.value,
    }
    display_model = model or SCHEME_BASE_MODEL.get(spec.scheme)
    if display_model is not None:
        payload["model"] = display_model.value

    if isinstance(result, EchoPairResult):
        payload["composite"] = _gate_payload(result.composite)
        payload["forward"] = _gate_payload(result.forward)
        payload["reversed"] = _gate_payload(result.reversed_)
        payload["commutator_norm"] = float(result.commutator_norm)
        headline = result.composite
    else:
        payload.update(_gate_payload(result))
        headline = result

    stages = scheme_stages(spec, model=model, pulse_axis=pulse_axis, dt_scale=dt_scale)
    psi0 = basis_state(stages[0].basis, computational_labels(display_model)[0])
    title = f"{spec.scheme.value} on {display_model.value}"
    fig_path = out / "dynamics.png"
    render_run_figure(stages, psi0, title, fig_path)
    payload["figures"] = {"dynamics": fig_path.name}

    report_path = out / "report.json"
    _write_json(payload, report_path)

    print(
        f"{title}: survival {headline.survival:.6e}, "
        f"amplitude imbalance {headline.homogeneity:.4e}, "
        f"leakage {headline.leakage:.3e}"
    )
    if isinstance(result, EchoPairResult):
        print(f"loop-gate commutator norm {result.commutator_norm:.4f}")
    print(f"wrote {report_path} and {fig_path}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    if args.dt_scale <= 0:
        raise ConfigError("dt_scale", "must be positive")
    results = run_verify(args.filter, args.dt_scale)
    if not results:
        raise ConfigError("filter", f"no check id contains {args.filter!r}")
    print(format_report(results))

    payload = results_payload(results)
    payload.update(
        {
            "command": "verify",
            "generated_at": _timestamp(),
            "dt_scale": args.dt_scale,
            "filter": args.filter,
        }
    )
    report_path = Path(args.out) / "report.json"
    _write_json(payload, report_path)
    print(f"wrote {report_path}")
    return EXIT_OK if payload["passed"] else EXIT_CHECKS_FAILED


def _cmd_sweep(args) -> int:
    data = _load_config(args.config)
    raw_kappas = data.get("kappas")
    if not isinstance(raw_kappas, list) or not all(
        isinstance(k, (int, float)) and not isinstance(k, bool) for k in raw_kappas
    ):
        raise ConfigError("kappas", "required, a list of decay rates")
    spec, model, _, dt_scale = _parse_protocol(
        {k: v for k, v in data.items() if k != "kappas"}
    )
    out = Path(args.out)

    result = scaling_sweep(spec, [float(k) for k in raw_kappas], model=model,
                           dt_scale=dt_scale)

    buf = io.StringIO()
    write_sweep_csv(result, buf)
    csv_path = out / "sweep.csv"
    _write_text(buf.getvalue(), csv_path)

    fig_path = out / "scaling.png"
    render_sweep_figure(result, fig_path)

    fit_payload = {
        "command": "sweep",
        "generated_at": _timestamp(),
        "config": data,
        "scheme": result.scheme.value,
        "model": result.model.value,
        "rows": len(result.rows),
        "flagged_kappas": [r.kappa for r in result.rows if r.out_of_regime],
        "slopes": {
            key: {
                "slope": fit.slope,
                "intercept": fit.intercept,
                "stderr": fit.stderr if np.isfinite(fit.stderr) else None,
                "n_points": fit.n_points,
            }
            for key, fit in result.slopes.items()
        },
        "files": {"csv": csv_path.name, "figure": fig_path.name},
    }
    fit_path = out / "fit.json"
    _write_json(fit_payload, fit_path)

    for row in result.rows:
        mark = "  [flagged]" if row.out_of_regime else ""
        print(
            f"kappa={row.kappa:g}: imbalance {row.homogeneity_defect:.4e}, "
            f"leakage {row.leakage:.3e}{mark}"
        )
    for key, fit in result.slopes.items():
        print(f"{key} slope {fit.slope:.4f} +- {fit.stderr:.4f} ({fit.n_points} points)")
    print(f"wrote {csv_path}, {fit_path} and {fig_path}")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="holosim",
        description="Holonomic-gate protocols on driven lossy multilevel systems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser(
        "run", help="run one protocol from a JSON config; write report.json and dynamics.png"
    )
    p_run.add_argument("config", help="path to a JSON protocol config")
    p_run.add_argument("--out", default=".", help="output directory (default: .)")
    p_run.set_defaults(func=_cmd_run)

    p_ver = sub.add_parser(
        "verify", help="run the release checks; write report.json; exit 1 on failure"
    )
    p_ver.add_argument("--filter", default=None, help="only checks whose id contains this")
    p_ver.add_argument(
        "--dt-scale", type=float, default=1.0, dest="dt_scale",
        help="multiply every integrator step (convergence probe)",
    )
    p_ver.add_argument("--out", default=".", help="output directory (default: .)")
    p_ver.set_defaults(func=_cmd_verify)

    p_sweep = sub.add_parser(
        "sweep", help="sweep decay rates; write sweep.csv, fit.json and scaling.png"
    )
    p_sweep.add_argument("config", help="path to a JSON sweep config with a kappas list")
    p_sweep.add_argument("--out", default=".", help="output directory (default: .)")
    p_sweep.set_defaults(func=_cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        return args.func(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except HolosimError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
