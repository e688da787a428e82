"""Acceptance criteria at their stated tolerances.

Each test records one PASS/FAIL line, collected in the "acceptance criteria"
section of the terminal summary.
"""

import math

import numpy as np
import pytest

from conftest import record_acceptance
from kerrbin.bincode import logical_state
from kerrbin.config import load_config
from kerrbin.drives import h_static
from kerrbin.hilbert import FockOperator, basis, fidelity_pure
from kerrbin.propagate import DEFAULT_INTEGRATOR, LossChannel, evolve_gksl, gksl_oracle, piecewise_evolve
from kerrbin.protocols import (
    STEPS,
    calibrate_chain,
    calibration_input,
    chain_at,
    default_t_error_grid,
    least_squares_slope,
    max_x_population,
    pi_pulse_peak,
    qec_sweep,
    rabi_scan,
    recovery_schedule,
    z_rotation,
)

pytestmark = pytest.mark.slow

HALF = 1 / math.sqrt(2)
REF_AMPLITUDES = (0.2875, 0.3675, 0.500)
REF_FIDELITIES = (0.99333, 0.99120, 0.98420)
SENSITIVITY_T = (10.0, 50.0, 100.0)


@pytest.fixture(scope="module")
def cfg():
    return load_config()


def _chain(cfg, t_error):
    rho = calibration_input(cfg.kerr, cfg.loss, t_error, cutoff=cfg.cutoff)
    return calibrate_chain(rho, {s: cfg.grid(s) for s in STEPS}, cfg.kerr, cfg.loss)


@pytest.fixture(scope="module")
def calibration_run(cfg):
    return _chain(cfg, None)


@pytest.fixture(scope="module")
def sensitivity_runs(cfg):
    return {t: _chain(cfg, t) for t in SENSITIVITY_T}


def test_1_matched_rabi_maximum(kp):
    want = {1.0: 0.99999, 0.8: 0.98780, 1.2: 0.99180}
    got = {s: max_x_population(kp, 0.01, s, cutoff=16) for s in want}
    ok = all(abs(got[s] - want[s]) <= 0.002 for s in want)
    detail = ", ".join(f"x{s}: {got[s]:.5f} (ref {want[s]})" for s in want)
    assert record_acceptance(1, "matched Rabi maximum", ok, detail)


def test_2_effective_model_agreement(kp):
    (trace,) = rabi_scan(kp, [0.001], samples=2000, cutoff=16)
    ok = trace.max_deviation < 1e-3
    assert record_acceptance(2, "effective two-level model", ok, f"max deviation {trace.max_deviation:.3e} < 1e-3")


def test_3_pi_pulse_formulas(kp):
    rows = []
    ok = True
    for step in STEPS:
        t_num, t_ana, peak = pi_pulse_peak(step, 0.01, kp, cutoff=16)
        rel = abs(t_num - t_ana) / t_ana
        ok &= rel < 0.02
        rows.append(f"{step} t={t_num:.4f} vs {t_ana:.4f} ({rel:.2e})")
    assert record_acceptance(3, "pi-pulse durations", ok, "; ".join(rows))


def test_4_calibration_optima(calibration_run):
    amps, fids = calibration_run.amplitudes, calibration_run.step_fidelities
    amp_ok = all(abs(a - r) <= 0.15 * r for a, r in zip(amps, REF_AMPLITUDES))
    fid_ok = all(abs(f - r) <= 0.01 for f, r in zip(fids, REF_FIDELITIES))
    detail = "amplitudes " + ", ".join(f"{a:.4f}" for a in amps) + "; fidelities " + ", ".join(
        f"{f:.5f}" for f in fids)
    assert record_acceptance(4, "calibration optima", amp_ok and fid_ok, detail)


@pytest.mark.xfail(strict=True, reason="flat, multimodal sweeps: near-degenerate peaks swap under t_error")
def test_4_calibration_sensitivity(calibration_run, sensitivity_runs):
    base = np.array(calibration_run.amplitudes)
    base_f = np.array(calibration_run.step_fidelities)
    drift = {t: float(np.max(np.abs(np.array(r.amplitudes) - base) / base)) for t, r in sensitivity_runs.items()}
    f_drift = max(float(np.max(np.abs(np.array(r.step_fidelities) - base_f))) for r in sensitivity_runs.values())
    worst = max(drift.values())
    detail = ("max argmax drift " + ", ".join(f"t={t:g}: {d:.1%}" for t, d in drift.items())
              + f" (limit 5%); peak fidelities move by at most {f_drift:.1e}")
    assert record_acceptance("4b", "calibration stability over t_error", worst < 0.05, detail)


def test_5_qec_benefit(cfg, calibration_run):
    t = default_t_error_grid()
    rows = qec_sweep(t, cfg.kerr, cfg.loss, calibration_run.calibration, cfg.cutoff)
    f_ini = np.array([r.fidelity_without_qec for r in rows])
    f_fin = np.array([r.fidelity_with_qec for r in rows])
    s_ini, s_fin = least_squares_slope(t, f_ini), least_squares_slope(t, f_fin)
    ok = abs(s_fin) < abs(s_ini) and f_fin[-1] > f_ini[-1] and f_fin[0] < f_ini[0]
    detail = (f"slopes {s_fin:.3e} vs {s_ini:.3e}; t=400: {f_fin[-1]:.4f} > {f_ini[-1]:.4f}; "
              f"t=5: {f_fin[0]:.4f} < {f_ini[0]:.4f}")
    assert record_acceptance(5, "QEC benefit shape", ok, detail)


def test_6_z_rotation_exact(kp):
    plus = logical_state(HALF, HALF, 16)
    f = fidelity_pure(logical_state(HALF, -HALF, 16), z_rotation(kp, math.pi, plus))
    assert record_acceptance(6, "Z rotation by pi", f >= 1 - 1e-10, f"1 - F = {1 - f:.2e}")


def test_7_oracle_equivalence(kp):
    n, loss = 8, LossChannel(0.001)
    rho0 = logical_state(HALF, HALF, n).dm()
    worst = 0.0
    for h in (FockOperator(np.zeros((n, n))), h_static(kp, n)):
        for t in (1.0, 10.0, 100.0):
            got = evolve_gksl(h, rho0, loss, t)
            worst = max(worst, float(np.max(np.abs(got.entries - gksl_oracle(h, loss, t)(rho0).entries))))
    assert record_acceptance(7, "oracle equivalence", worst < 1e-8, f"max element error {worst:.2e} < 1e-8")


def _state_gates(rho):
    m = rho.entries
    return (abs(np.trace(m).real - 1) < 1e-8 and np.max(np.abs(m - m.conj().T)) < 1e-10
            and np.linalg.eigvalsh(m).min() > -1e-8)


def test_8_invariants(cfg, calibration_run):
    loss = cfg.loss
    cal = calibration_run.calibration
    # state gates on a full lossy recovery
    rho = calibration_input(cfg.kerr, loss, 100.0, cutoff=16)
    gates_ok = _state_gates(rho) and _state_gates(piecewise_evolve(recovery_schedule(cfg.kerr, cal, 16), rho, loss))
    # cutoff convergence of the calibrated chain
    f16 = chain_at(cal, calibration_input(cfg.kerr, loss, None, cutoff=16), cfg.kerr, loss)
    f24 = chain_at(cal, calibration_input(cfg.kerr, loss, None, cutoff=24), cfg.kerr, loss)
    conv = float(np.max(np.abs(np.subtract(f16, f24))))
    # tolerance halving
    h = h_static(cfg.kerr, 16)
    r0 = logical_state(HALF, HALF, 16).dm()
    halving = float(np.max(np.abs(evolve_gksl(h, r0, loss, 50.0).entries
                                  - evolve_gksl(h, r0, loss, 50.0, DEFAULT_INTEGRATOR.halved()).entries)))
    # single-level decay
    decay = max(abs(evolve_gksl(None, basis(1, 16).dm(), loss, t).entries[1, 1].real - math.exp(-cfg.gamma * t))
                for t in (10.0, 100.0, 400.0))
    ok = gates_ok and conv < 1e-6 and halving < 1e-6 and decay < 1e-9
    detail = (f"state gates {'ok' if gates_ok else 'violated'}; n=16 vs 24 change {conv:.1e}; "
              f"tolerance halving {halving:.1e}; decay error {decay:.1e}")
    assert record_acceptance(8, "invariant suite", ok, detail)
