"""Gate extraction, transport oracle, and closed-form phase checks."""

import numpy as np
import pytest

from holosim.dynamics import LoopSpec, NoJumpResult, integrate_nojump
from holosim.errors import (
    DegeneracyCrossingError,
    LeakageError,
    UnsupportedModelError,
)
from holosim.holonomy import (
    GateReport,
    PhaseReport,
    accumulated_branch_phase,
    analytic_phases,
    complex_berry_phase,
    complex_dynamical_phase,
    extract_gate,
    gate_distortion,
    holonomy_angle,
    nmr_branch_phase_report,
    om_bar,
    wilson_holonomy,
)
from holosim.models import (
    MODEL_BASES,
    ModelId,
    ParamSchedule,
    schedule_for_loop,
)
from holosim.qcore import QState, basis_state


def lambda_gate(kappa_over_gamma: float, gamma: float = 0.05, theta0: float = np.pi / 4):
    sch = schedule_for_loop(ModelId.LAMBDA_FIRST, theta0, gamma, 1.0)
    spec = LoopSpec.for_model(ModelId.LAMBDA_FIRST, sch, kappa_over_gamma * gamma)
    return extract_gate(ModelId.LAMBDA_FIRST, lambda p: integrate_nojump(spec, p)), spec


@pytest.fixture(scope="module")
def lambda_lossless():
    return lambda_gate(0.0)


@pytest.fixture(scope="module")
def lambda_damped():
    return lambda_gate(0.5)


# ---------------------------------------------------------------------------
# closed forms


def test_dynamical_phase_frozen_value():
    p = complex_dynamical_phase(1.0, 0.2, np.pi / 2, 100.0, "+")
    assert p == pytest.approx(49.749372 - 5.0j, abs=1e-5)


def test_dynamical_phase_theta_zero_reduces_to_detuned_level():
    for sgn, branch in ((1.0, "+"), (-1.0, "-")):
        p = complex_dynamical_phase(1.0, 0.2, 0.0, 10.0, branch)
        assert p == pytest.approx(sgn * 0.5 * (1.0 - 0.1j) * 10.0 - 0.5j, abs=1e-12)


def test_berry_phase_frozen_values():
    g = complex_berry_phase(1.0, 0.2, np.pi / 2, "+")
    assert g == pytest.approx(np.pi * (1.0 + 0.1j / np.sqrt(0.99)), abs=1e-12)
    assert complex_berry_phase(1.0, 0.0, np.pi / 3, "+") == pytest.approx(np.pi / 2, abs=1e-12)
    assert complex_berry_phase(1.0, 0.0, np.pi / 3, "-") == pytest.approx(-np.pi / 2, abs=1e-12)


def test_lossless_limit_is_real():
    for th in (0.0, 0.4, np.pi / 3, np.pi / 2):
        assert om_bar(1.0, 0.0, th) == pytest.approx(1.0, abs=1e-14)
        assert abs(complex_berry_phase(1.0, 0.0, th, "+").imag) < 1e-14


def test_branch_symmetry():
    # opposite branches: dynamical parts sum to the uniform decay, geometric to zero
    for kap in (0.0, 0.1, 0.7):
        d = complex_dynamical_phase(1.0, kap, 0.9, 20.0, "+") + complex_dynamical_phase(
            1.0, kap, 0.9, 20.0, "-"
        )
        assert d == pytest.approx(-0.5j * kap * 20.0, abs=1e-12)
        g = complex_berry_phase(1.0, kap, 0.9, "+") + complex_berry_phase(1.0, kap, 0.9, "-")
        assert abs(g) < 1e-12


@pytest.mark.parametrize("theta", [0.3, np.pi / 2])
def test_branch_continuity_in_decay_rate(theta):
    kappas = np.linspace(0.0, 1.0, 1000)
    dyn = np.array([complex_dynamical_phase(1.0, k, theta, 1.0, "+") for k in kappas])
    geo = np.array([complex_berry_phase(1.0, k, theta, "+") for k in kappas])
    for vals in (dyn, geo):
        steps = np.abs(np.diff(vals))
        # a branch flip would show as one O(1) jump towering over the rest
        assert steps.max() < 50.0 * np.median(steps) + 1e-9
    assert dyn[0] == pytest.approx(0.5, abs=1e-12)


def test_branch_argument_is_validated():
    with pytest.raises(ValueError, match="branch"):
        complex_dynamical_phase(1.0, 0.0, 0.3, 1.0, "up")
    with pytest.raises(ValueError, match="omega"):
        om_bar(0.0, 0.1, 0.3)
    with pytest.raises(ValueError, match="kappa"):
        om_bar(1.0, -0.1, 0.3)


def test_phase_report_total_is_sum():
    rep = nmr_branch_phase_report(1.0, 0.1, 0.5, 10.0, "+")
    assert rep.total == pytest.approx(rep.dynamical + rep.geometric, abs=1e-12)
    with pytest.raises(ValueError, match="total"):
        PhaseReport(dynamical=1.0, geometric=2.0, convention="x", total=4.0)


def test_decay_settings_have_nonpositive_imaginary_totals():
    total_time = 2 * np.pi / 0.005
    for kap in (0.01, 0.1):
        for th in (np.pi / 4, np.pi / 2):
            rep = nmr_branch_phase_report(1.0, kap, th, total_time, "+")
            assert rep.total.imag <= 1e-12


# ---------------------------------------------------------------------------
# reference coefficients


def test_reference_phases_lambda():
    rep = analytic_phases(ModelId.LAMBDA_FIRST, np.pi / 2, 1.0, 1.0)
    assert rep.convention == "paper_reference"
    assert rep.geometric == pytest.approx(4.0 * np.pi, abs=1e-12)
    assert rep.dynamical == pytest.approx(-1j * np.pi, abs=1e-12)


def test_reference_phases_tripod_lossless():
    rep = analytic_phases(ModelId.TRIPOD_FIRST, np.pi / 3, 0.0, 1.0)
    assert rep.geometric == pytest.approx(np.pi, abs=1e-12)
    assert rep.dynamical == 0.0


def test_reference_phases_reject_two_level_model():
    with pytest.raises(UnsupportedModelError):
        analytic_phases(ModelId.NMR_SPIN_HALF, 0.3, 0.0, 1.0)


# ---------------------------------------------------------------------------
# transport oracle


def test_wilson_scalar_loop_angle():
    sch = schedule_for_loop(ModelId.LAMBDA_FIRST, np.pi / 4, 0.01, 1.0)
    hol = wilson_holonomy(ModelId.LAMBDA_FIRST, sch, steps=4000)
    assert hol.dim == 1
    assert hol.path_steps == 4000
    # solid angle of this loop wraps to -pi at theta0=pi/4
    assert holonomy_angle(hol) == pytest.approx(-np.pi, abs=1e-6)


def test_wilson_matrix_is_unitary():
    sch = schedule_for_loop(ModelId.SUPERPOSED_DUAL, np.pi / 3, 0.05, 1.0)
    hol = wilson_holonomy(ModelId.SUPERPOSED_DUAL, sch, steps=2000)
    dev = np.max(np.abs(hol.matrix.conj().T @ hol.matrix - np.eye(2)))
    assert dev < 1e-10


def test_wilson_step_doubling_converges():
    sch = schedule_for_loop(ModelId.TRIPOD_FIRST, np.pi / 4, 0.05, 1.0)
    coarse = wilson_holonomy(ModelId.TRIPOD_FIRST, sch, steps=2000).matrix
    fine = wilson_holonomy(ModelId.TRIPOD_FIRST, sch, steps=4000).matrix
    assert np.max(np.abs(fine - coarse)) < 1e-4


def test_wilson_rotation_angles_track_the_connection():
    # per revolution the two-frame rotation equals the connection component
    for th0, model, expect in [
        (np.pi / 3, ModelId.SUPERPOSED_DUAL, 2 * np.pi * np.cos(np.pi / 3) ** 2),
        (np.pi / 4, ModelId.TRIPOD_FIRST, 2 * np.pi * np.cos(np.pi / 4) - 2 * np.pi),
    ]:
        sch = schedule_for_loop(model, th0, 0.05, 1.0)
        ang = holonomy_angle(wilson_holonomy(model, sch, steps=4000))
        assert ang == pytest.approx(expect, abs=1e-4)


def test_wilson_rejects_coarse_paths():
    sch = schedule_for_loop(ModelId.LAMBDA_FIRST, 0.3, 0.05, 1.0)
    with pytest.raises(ValueError, match="steps"):
        wilson_holonomy(ModelId.LAMBDA_FIRST, sch, steps=50)


def test_wilson_rejects_two_level_model():
    sch = schedule_for_loop(ModelId.NMR_SPIN_HALF, 0.3, 0.05, 1.0)
    with pytest.raises(UnsupportedModelError):
        wilson_holonomy(ModelId.NMR_SPIN_HALF, sch)


def test_wilson_flags_frame_discontinuity():
    # a pi jump in phi at theta0=pi/4 makes consecutive dark frames orthogonal
    def phi_of_t(t):
        return np.where(np.asarray(t, dtype=float) < 0.5, 0.0, np.pi)

    sch = ParamSchedule(
        omega=1.0,
        gamma=1.0,
        theta_of_t=lambda t: np.full_like(np.asarray(t, dtype=float), np.pi / 4),
        phi_of_t=phi_of_t,
        direction="forward",
        segments=(("loop", 1.0),),
        total_time=1.0,
    )
    with pytest.raises(DegeneracyCrossingError):
        wilson_holonomy(ModelId.LAMBDA_FIRST, sch, steps=200)


# ---------------------------------------------------------------------------
# gate extraction


def test_trivial_loop_gives_identity():
    sch = schedule_for_loop(ModelId.LAMBDA_FIRST, 0.0, 0.05, 1.0)
    spec = LoopSpec.for_model(ModelId.LAMBDA_FIRST, sch, 0.1 * 0.05)
    rep = extract_gate(ModelId.LAMBDA_FIRST, lambda p: integrate_nojump(spec, p))
    assert np.allclose(rep.gate, np.eye(2), atol=1e-9)
    assert rep.survival == pytest.approx(1.0, abs=1e-9)


def test_lossless_gate_matches_transport_oracle():
    gamma = 0.01
    rep, spec = lambda_gate(0.0, gamma=gamma, theta0=np.pi / 4)
    hol = wilson_holonomy(ModelId.LAMBDA_FIRST, spec.schedule, steps=4000)
    assert rep.gate[0, 0] == pytest.approx(1.0, abs=1e-6)
    assert abs(rep.gate[1, 1] - hol.matrix[0, 0]) < 1e-3
    assert rep.leakage < 1e-3
    assert rep.homogeneity < 1e-3


def test_columns_are_linear(lambda_damped):
    rep, spec = lambda_damped
    basis = MODEL_BASES[ModelId.LAMBDA_FIRST]
    a, b = 0.6, 0.8j
    mixed = QState(basis, a * basis_state(basis, "g1").amplitudes + b * basis_state(basis, "g2").amplitudes)
    res = integrate_nojump(spec, mixed)
    comp_idx = [basis.index("g1"), basis.index("g2")]
    got = res.raw_final.amplitudes[comp_idx]
    want = rep.gate @ np.array([a, b])
    assert np.max(np.abs(got - want)) < 1e-9


def test_normalized_gate_has_unit_largest_singular_value(lambda_lossless, lambda_damped):
    for rep, _ in (lambda_lossless, lambda_damped):
        smax = np.linalg.svd(rep.normalized_gate, compute_uv=False)[0]
        assert smax == pytest.approx(1.0, abs=1e-12)


def test_global_factor_of_diagonal_gate_is_first_entry(lambda_damped):
    rep, _ = lambda_damped
    assert rep.global_factor == rep.gate[0, 0]


def test_global_factor_polar_route_on_frame_pair():
    sch = schedule_for_loop(ModelId.TRIPOD_FIRST, np.pi / 3, 0.05, 1.0)
    spec = LoopSpec.for_model(ModelId.TRIPOD_FIRST, sch, 0.0)
    rep = extract_gate(ModelId.TRIPOD_FIRST, lambda p: integrate_nojump(spec, p))
    # lossless frame-pair gate is unitary up to O(gamma/omega) corrections
    assert abs(rep.global_factor) == pytest.approx(1.0, abs=5e-3)
    assert np.allclose(rep.normalized_gate, -np.eye(2), atol=5e-2)


def test_survival_tracks_decay(lambda_damped):
    rep, _ = lambda_damped
    assert 0.0 < rep.survival < 1.0
    # only the g2 column decays, so mean survival stays above one half
    assert rep.survival > 0.5


def test_leakage_above_threshold_raises():
    basis = MODEL_BASES[ModelId.LAMBDA_FIRST]

    def leaky_build(psi0: QState) -> NoJumpResult:
        amps = np.zeros(basis.dim, dtype=complex)
        amps[basis.index("e")] = 0.5
        amps[basis.index("g1")] = np.sqrt(1 - 0.25)
        bad = QState(basis, amps)
        return NoJumpResult(raw_final=bad, survival=1.0, normalized_final=bad, max_norm_rise=0.0)

    with pytest.raises(LeakageError):
        extract_gate(ModelId.LAMBDA_FIRST, leaky_build)


def test_sink_population_is_not_leakage():
    basis = MODEL_BASES[ModelId.LAMBDA_FIRST]

    def decayed_build(psi0: QState) -> NoJumpResult:
        amps = np.zeros(basis.dim, dtype=complex)
        amps[basis.index("sink")] = 0.9
        amps[basis.index("g1")] = np.sqrt(1 - 0.81)
        out = QState(basis, amps)
        return NoJumpResult(raw_final=out, survival=1.0, normalized_final=out, max_norm_rise=0.0)

    rep = extract_gate(ModelId.LAMBDA_FIRST, decayed_build)
    assert rep.leakage == 0.0


# ---------------------------------------------------------------------------
# distortion metrics


def test_distortion_against_loop_only_decay_exponent(lambda_damped):
    rep, _ = lambda_damped
    ref = analytic_phases(ModelId.LAMBDA_FIRST, np.pi / 4, 0.5 * 0.05, 0.05)
    # ramps add decay on top of the loop-only exponent, so this is loose
    expected = 1.0 - np.exp(ref.dynamical.imag)
    assert rep.homogeneity == pytest.approx(expected, rel=0.15)


def test_distortion_metrics_fields(lambda_damped):
    rep, _ = lambda_damped
    ideal = np.diag([1.0, rep.normalized_gate[1, 1] / abs(rep.normalized_gate[1, 1])])
    m = gate_distortion(rep, ideal)
    assert m.homogeneity_defect == rep.homogeneity
    assert 0.0 <= m.fidelity <= 1.0 + 1e-12
    assert m.unitarity_defect > 0.1  # strongly damped gate is far from unitary


def test_distortion_rejects_non_unitary_ideal(lambda_damped):
    rep, _ = lambda_damped
    with pytest.raises(ValueError, match="unitary"):
        gate_distortion(rep, np.diag([1.0, 0.5]))


# ---------------------------------------------------------------------------
# accumulated branch phase


def test_accumulated_phase_matches_closed_form():
    omega, gamma, kappa, theta = 1.0, 0.01, 0.01, np.pi / 4
    measured, res = accumulated_branch_phase(omega, kappa, theta, gamma, "+")
    rep = nmr_branch_phase_report(omega, kappa, theta, 2 * np.pi / gamma, "+")
    tol = 5.0 * (gamma / omega) + 5.0 * (kappa / omega) ** 2
    assert abs(measured - rep.total) < tol
    assert res.max_norm_rise < 1e-9
