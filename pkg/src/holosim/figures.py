"""File-output figure rendering for runs and sweeps.

Uses matplotlib's object API directly with the Agg canvas, so rendering
works headless and never touches a global figure state.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .dynamics import LoopSpec, integrate_nojump
from .qcore import QState
from .schemes import SweepResult


def trace_populations(
    stages: Sequence[LoopSpec], psi0: QState, sample_target: int = 1500
) -> tuple[np.ndarray, np.ndarray]:
    """Level populations of one conditional evolution, subsampled in time.

    Stages are chained without renormalization, so the series shows the
    raw survival envelope. Returns (times, populations) with one column
    per basis level.
    """
    times: list[float] = []
    pops: list[np.ndarray] = []
    state = psi0
    offset = 0.0
    for spec in stages:
        n, _ = spec.grid()
        stride = max(1, n // max(1, sample_target // len(stages)))

        def observe(step: int, t: float, y: np.ndarray, _off=offset, _s=stride, _n=n):
            if step % _s == 0 or step == _n:
                times.append(_off + t)
                pops.append(np.abs(y[:, 0]) ** 2)

        res = integrate_nojump(spec, state, observer=observe)
        state = res.raw_final
        offset += spec.total_time
    return np.asarray(times), np.vstack(pops)


def render_run_figure(
    stages: Sequence[LoopSpec], psi0: QState, title: str, path: Path
) -> None:
    """Population time series of a conditional run, saved as an image."""
    times, pops = trace_populations(stages, psi0)
    labels = stages[0].basis.labels

    fig = Figure(figsize=(8.0, 4.5), dpi=120)
    FigureCanvasAgg(fig)
    ax = fig.add_subplot(111)
    for i, label in enumerate(labels):
        if pops[:, i].max() > 1e-12:
            ax.plot(times, pops[:, i], label=label, linewidth=1.2)
    ax.plot(times, pops.sum(axis=1), "k--", linewidth=1.0, label="total")
    for boundary in np.cumsum([s.total_time for s in stages[:-1]]):
        ax.axvline(boundary, color="0.7", linewidth=0.8, zorder=0)
    ax.set_xlabel("time")
    ax.set_ylabel("conditional population")
    ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path)


def render_sweep_figure(result: SweepResult, path: Path) -> None:
    """Log-log view of the sweep metrics with their fitted slopes."""
    fig = Figure(figsize=(8.0, 4.5), dpi=120)
    FigureCanvasAgg(fig)
    ax = fig.add_subplot(111)

    series = []
    for row, resid in zip(result.rows, result.residual_errors):
        if row.out_of_regime or row.kappa <= 0.0:
            continue
        series.append((row.kappa, row.homogeneity_defect, resid))
    if series:
        kaps, defects, resids = (np.asarray(v, dtype=float) for v in zip(*series))
        ax.loglog(kaps, defects, "o", label="amplitude imbalance")
        ax.loglog(kaps, resids, "s", label="gate residual vs lossless")
        for key, style in (("homogeneity_defect", "-"), ("residual_error", "--")):
            fit = result.slopes.get(key)
            if fit is not None and not math.isnan(fit.slope):
                xs = np.array([kaps.min(), kaps.max()])
                ys = np.exp(fit.intercept) * xs**fit.slope
                ax.loglog(xs, ys, style, color="0.4", linewidth=1.0,
                          label=f"slope {fit.slope:.2f}")
    flagged = sum(r.out_of_regime for r in result.rows)
    if flagged:
        ax.set_title(
            f"{result.scheme.value} on {result.model.value} "
            f"({flagged} flagged row{'s' if flagged != 1 else ''} excluded)"
        )
    else:
        ax.set_title(f"{result.scheme.value} on {result.model.value}")
    ax.set_xlabel("decay rate")
    ax.set_ylabel("metric")
    ax.grid(True, which="both", linewidth=0.3, alpha=0.5)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
