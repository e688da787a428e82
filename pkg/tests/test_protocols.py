import math

import numpy as np
import pytest

from kerrbin.bincode import error_state, logical_basis, logical_state, phase_optimized_fidelity
from kerrbin.drives import SQRT6, KerrParams
from kerrbin.hilbert import fidelity_pure
from kerrbin.propagate import LossChannel, piecewise_evolve
from kerrbin.protocols import (
    REFERENCE_CALIBRATION,
    STEPS,
    RecoveryCalibration,
    calibrate_step,
    calibration_input,
    crossover_time,
    effective_population,
    least_squares_slope,
    logical_phase_from_theta,
    phase_adjust_duration,
    qec_experiment,
    qec_sweep,
    rabi_period,
    rabi_scan,
    recovery_schedule,
    recovery_stage,
    stage_duration,
    step_target,
    x_pi_duration,
    z_rotation,
)

HALF = 1 / math.sqrt(2)
# weak drives keep every stage in the resonant regime (amplitude << chi)
WEAK = RecoveryCalibration(0.05, 0.05, 0.05)


@pytest.fixture(scope="module")
def weak_calibration(kp):
    out = piecewise_evolve(recovery_schedule(kp, WEAK, 16), error_state(HALF, HALF, 16).dm(), None)
    _, theta = phase_optimized_fidelity(out, logical_state(HALF, HALF, 16), kp)
    return RecoveryCalibration(0.05, 0.05, 0.05, logical_phase_from_theta(theta, kp, 16))


def test_stage_durations_match_constraints():
    lam32, p1, lam12 = 0.2875, 0.3675, 0.5
    assert stage_duration("s32", lam32) == pytest.approx(math.pi / (2 * math.sqrt(3) * lam32))
    assert math.pi / stage_duration("s32", lam32) == pytest.approx(0.99593, abs=1e-5)
    assert math.pi / stage_duration("s204", p1) == pytest.approx(1.47)
    assert math.pi / stage_duration("s12", lam12) == pytest.approx(1.41421, abs=1e-5)
    with pytest.raises(ValueError):
        stage_duration("s32", 0.0)


def test_recovery_schedule_layout(kp):
    sched = recovery_schedule(kp, RecoveryCalibration(0.2875, 0.3675, 0.5, 1.0))
    assert [s.generator for s in sched.stages] == ["coherent_32", "two_tone", "coherent_12", "static_phase"]
    assert sched.stages[1].params.is_matched()
    assert sched.stages[3].duration == pytest.approx((2 * math.pi - 1.0) / (4 * kp.chi))
    assert phase_adjust_duration(kp, 0.0) == 0.0


def test_calibration_roundtrip():
    cal = RecoveryCalibration(0.2875, SQRT6 * 0.15, 0.5, 7.0)
    assert cal.phase_theta == pytest.approx(7.0 - 2 * math.pi)
    again = RecoveryCalibration.from_dict(cal.to_dict())
    assert again == cal
    assert cal.p2 == pytest.approx(0.15)
    with pytest.raises(ValueError):
        RecoveryCalibration(0.0, 0.1, 0.1)


def test_step_targets():
    lb = logical_basis(16)
    assert step_target("s12").overlap(logical_state(HALF, HALF, 16)) == pytest.approx(1.0)
    t = step_target("s204")
    assert abs(t.overlap(lb.zero_l)) ** 2 == pytest.approx(0.5)
    assert abs(t.overlap(lb.one_e)) ** 2 == pytest.approx(0.5)


def test_recovery_end_to_end_noiseless(kp, weak_calibration):
    out = piecewise_evolve(recovery_schedule(kp, weak_calibration, 16), error_state(HALF, HALF, 16).dm(), None)
    # with the phase stage applied, the plain overlap is already the optimum
    assert fidelity_pure(logical_state(HALF, HALF, 16), out) >= 0.999


@pytest.mark.parametrize("step,peak", [("s32", 0.99), ("s204", 0.99), ("s12", 0.98)])
def test_single_pi_stage_noiseless(kp, step, peak):
    from kerrbin.protocols import _pi_pulse_endpoints
    from kerrbin.propagate import evolve_pure

    start, goal = _pi_pulse_endpoints(step, 16)
    stage = recovery_stage(step, REFERENCE_CALIBRATION.amplitude(step), kp)
    psi = evolve_pure(stage.hamiltonian(kp, 16), start, stage.duration)
    assert abs(goal.overlap(psi)) ** 2 >= peak


@pytest.mark.parametrize("step", STEPS)
def test_scaling_covariance_at_weak_drive(kp, step):
    from kerrbin.protocols import _pi_pulse_endpoints
    from kerrbin.propagate import evolve_pure

    start, goal = _pi_pulse_endpoints(step, 16)
    pops = []
    for amp in (0.02, 0.04):
        stage = recovery_stage(step, amp, kp)
        psi = evolve_pure(stage.hamiltonian(kp, 16), start, stage.duration)
        pops.append(abs(goal.overlap(psi)) ** 2)
    assert abs(pops[0] - pops[1]) < 1e-3


def test_lossless_recovery_independent_of_t_error(kp, weak_calibration):
    # exact only while the decay's e^{-gamma t} reweighting of |3> vs |1> is negligible
    for t in (5.0, 20.0):
        r = qec_experiment(t, kp, LossChannel(0.001), weak_calibration, 16, recovery_loss=None)
        assert r.fidelity_with_qec >= 0.999


def test_qec_zero_and_lossless(kp):
    rows = qec_sweep([0.0], kp, LossChannel(0.001), REFERENCE_CALIBRATION, 16)
    assert rows[0].status == "no_support"
    assert rows[0].fidelity_without_qec == pytest.approx(1.0)
    assert math.isnan(rows[0].fidelity_with_qec)
    rows = qec_sweep([10.0, 50.0], kp, LossChannel(0.0), REFERENCE_CALIBRATION, 16)
    assert all(r.status == "no_support" and r.fidelity_without_qec == pytest.approx(1.0) for r in rows)


def test_f_ini_strictly_decreasing(kp):
    rows = qec_sweep([5.0, 10.0, 40.0], kp, LossChannel(0.001), REFERENCE_CALIBRATION, 16)
    f = [r.fidelity_without_qec for r in rows]
    assert f[0] > f[1] > f[2]
    assert f[0] < 1


def test_calibrate_single_point(kp):
    rho = calibration_input(kp, LossChannel(0.001), None, cutoff=16)
    sweep = calibrate_step("s32", rho, step_target("s32", cutoff=16), [0.3], kp, LossChannel(0.001))
    assert sweep.argmax == 0.3
    assert 0.98 < sweep.best <= 1
    with pytest.raises(ValueError):
        calibrate_step("s32", rho, step_target("s32", cutoff=16), [], kp, None)
    with pytest.raises(ValueError):
        calibrate_step("s32", rho, step_target("s32", cutoff=16), [0.3, 0.2], kp, None)


def test_calibration_input_after_decay(kp):
    rho = calibration_input(kp, LossChannel(0.001), 50.0, cutoff=16)
    assert fidelity_pure(error_state(HALF, HALF, 16), rho) > 0.99


def test_rabi_zero_and_small_drive(kp):
    (zero,) = rabi_scan(kp, [0.0], duration=10.0, samples=50)
    assert np.all(zero.population == 0)
    (tr,) = rabi_scan(kp, [0.01], samples=500)
    assert tr.max_deviation < 5e-3
    assert tr.times[-1] == pytest.approx(rabi_period(0.01))
    with pytest.raises(ValueError):
        rabi_scan(kp, [])


def test_effective_population_period():
    p2 = 0.02
    t = x_pi_duration(p2)
    assert effective_population(p2, [t])[0] == pytest.approx(1.0)
    assert rabi_period(p2) == pytest.approx(2 * t)


def test_z_rotation(kp):
    plus = logical_state(HALF, HALF, 16)
    minus = logical_state(HALF, -HALF, 16)
    assert fidelity_pure(plus, z_rotation(kp, 0.0, plus)) == pytest.approx(1.0)
    assert fidelity_pure(minus, z_rotation(kp, math.pi, plus)) >= 1 - 1e-10
    assert fidelity_pure(plus, z_rotation(kp, math.pi, plus)) < 1e-12
    assert fidelity_pure(plus, z_rotation(kp, 2 * math.pi, plus)) >= 1 - 1e-10
    i_state = logical_state(HALF, 1j * HALF, 16)
    assert fidelity_pure(i_state, z_rotation(kp, math.pi / 2, plus)) >= 1 - 1e-10
    assert fidelity_pure(plus, z_rotation(kp, math.pi / 2, plus)) == pytest.approx(0.5)


def test_slope_and_crossover():
    t = np.array([0.0, 1.0, 2.0, 3.0])
    assert least_squares_slope(t, 2 * t + 1) == pytest.approx(2.0)
    assert least_squares_slope([1.0], [2.0]) != least_squares_slope([1.0], [2.0])  # nan
    assert crossover_time(t, [1, 0.9, 0.8, 0.7], [0.85, 0.85, 0.85, 0.85]) == pytest.approx(1.5)
    assert crossover_time(t, [1, 1, 1, 1], [0, 0, 0, 0]) is None
