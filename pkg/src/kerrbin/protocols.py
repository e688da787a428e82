"""The experiments: logical X/Z rotations, recovery, calibration sweeps, QEC runs.

Recovery maps the error words back to the code in four stages:

    s32   coherent drive, |3> -> |2>           t = pi / (2 sqrt(3) lambda_32)
    s204  two-tone parametric, |2> -> |0_L>    t = pi / (4 p1),  p1 = sqrt(6) p2
    s12   coherent drive, |1> -> |2>           t = pi / (2 sqrt(2) lambda_12)
    phase static Kerr evolution cancelling the accumulated logical phase
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np
from scipy.signal import find_peaks

from .bincode import (
    error_state,
    logical_basis,
    logical_state,
    phase_generator,
    phase_optimized_fidelity,
    project_parity,
)
from .drives import (
    SQRT6,
    CoherentParams,
    DriveStage,
    KerrParams,
    Schedule,
    TwoToneParams,
    h_static,
    two_tone_hamiltonian,
)
from .errors import KerrbinError, NoSupportError
from .hilbert import DensityMatrix, StateVector, as_cutoff, basis, fidelity_pure
from .parallel import pmap
from .propagate import (
    DEFAULT_INTEGRATOR,
    LossChannel,
    evolve_gksl,
    evolve_pure,
    piecewise_evolve,
    trajectory_pure,
)

log = logging.getLogger(__name__)

STEPS = ("s32", "s204", "s12")
STEP_PARAMETER = {"s32": "lambda_32", "s204": "p1", "s12": "lambda_12"}
_HALF = 1 / math.sqrt(2)


# --------------------------------------------------------------------------
# stage construction


def stage_duration(step, amplitude) -> float:
    """pi-pulse duration from the Rabi-frequency constraint of each stage."""
    if not amplitude > 0:
        raise ValueError(f"{step}: drive amplitude must be positive, got {amplitude}")
    if step == "s32":
        return math.pi / (2 * math.sqrt(3) * amplitude)
    if step == "s204":
        return math.pi / (4 * amplitude)
    if step == "s12":
        return math.pi / (2 * math.sqrt(2) * amplitude)
    raise ValueError(f"unknown recovery step {step!r}")


def recovery_stage(step, amplitude, kp: KerrParams, duration=None) -> DriveStage:
    """Single recovery stage; for ``s204`` the amplitude is p1 (p2 = p1/sqrt(6))."""
    if duration is None:
        duration = stage_duration(step, amplitude)
    if step == "s32":
        return DriveStage("coherent_32", duration, CoherentParams(amplitude, +1))
    if step == "s204":
        return DriveStage("two_tone", duration, TwoToneParams.from_p1(amplitude, kp))
    if step == "s12":
        return DriveStage("coherent_12", duration, CoherentParams(amplitude, -1))
    raise ValueError(f"unknown recovery step {step!r}")


def step_target(step, alpha=_HALF, beta=_HALF, cutoff=None) -> StateVector:
    """Ideal state after each recovery step, up to the phases U_theta absorbs."""
    c = as_cutoff(cutoff)
    lb = logical_basis(c)
    if step == "s32":
        upper, lower = basis(2, c), lb.one_e
    elif step == "s204":
        upper, lower = lb.zero_l, lb.one_e
    elif step == "s12":
        upper, lower = lb.zero_l, lb.one_l
    else:
        raise ValueError(f"unknown recovery step {step!r}")
    return StateVector(alpha * upper.amplitudes + beta * lower.amplitudes)


def _pi_pulse_endpoints(step, cutoff):
    c = as_cutoff(cutoff)
    lb = logical_basis(c)
    return {
        "s32": (lb.zero_e, basis(2, c)),
        "s204": (basis(2, c), lb.zero_l),
        "s12": (lb.one_e, basis(2, c)),
    }[step]


# --------------------------------------------------------------------------
# logical rotations


def x_pi_duration(p2, p1_scale=1.0) -> float:
    """Duration of a logical pi rotation: Rabi angular frequency 4 p1 = 4 sqrt(6) p2."""
    return math.pi / (4 * p1_scale * SQRT6 * p2)


def x_rotation_schedule(kp: KerrParams, p2, duration, cutoff=None, p1_scale=1.0) -> Schedule:
    if not p2 > 0:
        raise ValueError("p2 must be positive")
    tp = TwoToneParams.matched(p2, kp, p1_scale)
    return Schedule((DriveStage("two_tone", duration, tp),), kp, cutoff)


def logical_phase_rate(kp: KerrParams) -> float:
    """Angular rate at which static evolution advances |1_L> relative to |0_L>."""
    rate = kp.level_energy(0) - kp.level_energy(2)
    if not rate > 0:
        raise ValueError("static Hamiltonian does not advance the |1_L> phase (need 4 chi + 2 Delta < 0)")
    return rate


def z_rotation(kp: KerrParams, phi, state, loss=None, policy=DEFAULT_INTEGRATOR):
    """alpha|0_L> + beta|1_L>  ->  alpha|0_L> + exp(i phi) beta|1_L> (up to global phase)."""
    t = phi / logical_phase_rate(kp)
    h = h_static(kp, state.cutoff)
    if isinstance(state, StateVector) and loss is None:
        return evolve_pure(h, state, t, policy, label="z_rotation")
    return evolve_gksl(h, state, loss, t, policy, label="z_rotation")


# --------------------------------------------------------------------------
# recovery


@dataclass(frozen=True)
class RecoveryCalibration:
    lambda_32: float
    p1: float
    lambda_12: float
    phase_theta: float = 0.0

    def __post_init__(self):
        for name in ("lambda_32", "p1", "lambda_12"):
            if not getattr(self, name) > 0:
                raise ValueError(f"calibration {name} must be positive")
        object.__setattr__(self, "phase_theta", float(self.phase_theta) % (2 * math.pi))

    @property
    def p2(self):
        return self.p1 / SQRT6

    def amplitude(self, step):
        return {"s32": self.lambda_32, "s204": self.p1, "s12": self.lambda_12}[step]

    def to_dict(self):
        return {
            "lambda_32": self.lambda_32,
            "p1": self.p1,
            "p2": self.p2,
            "lambda_12": self.lambda_12,
            "phase_theta": self.phase_theta,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["lambda_32"]), float(d["p1"]), float(d["lambda_12"]), float(d.get("phase_theta", 0.0)))


#: calibrated amplitudes at chi = 6, gamma = 0.001 (pure error-word input)
REFERENCE_CALIBRATION = RecoveryCalibration(0.2875, SQRT6 * 0.15, 0.5)


def phase_adjust_duration(kp: KerrParams, phase_theta) -> float:
    """Static evolution time that cancels an accumulated logical phase ``phase_theta``."""
    return ((2 * math.pi - phase_theta) % (2 * math.pi)) / logical_phase_rate(kp)


def recovery_schedule(kp: KerrParams, cal: RecoveryCalibration, cutoff=None) -> Schedule:
    stages = [recovery_stage(step, cal.amplitude(step), kp) for step in STEPS]
    stages.append(DriveStage("static_phase", phase_adjust_duration(kp, cal.phase_theta)))
    return Schedule(tuple(stages), kp, cutoff)


def logical_phase_from_theta(theta, kp: KerrParams | None = None, cutoff=None) -> float:
    """Relative |1_L> phase implied by the phase-search argmax ``theta``."""
    g = phase_generator(as_cutoff(cutoff), kp)
    return float(((g[0] - g[2]) * theta) % (2 * math.pi))


# --------------------------------------------------------------------------
# calibration


@dataclass(eq=False)
class SweepResult:
    """Sampled (amplitude -> fidelity) curve with its located optimum."""

    step: str
    parameter: str
    values: np.ndarray
    fidelities: np.ndarray
    thetas: np.ndarray
    best_state: DensityMatrix | None = None
    errors: list = field(default_factory=list)

    @property
    def argmax_index(self):
        return int(np.nanargmax(self.fidelities))

    @property
    def argmax(self):
        return float(self.values[self.argmax_index])

    @property
    def best(self):
        return float(self.fidelities[self.argmax_index])

    @property
    def best_theta(self):
        return float(self.thetas[self.argmax_index])

    def columns(self):
        cols = {self.parameter: self.values}
        if self.step == "s204":
            cols["p2"] = self.values / SQRT6
        cols["fidelity"] = self.fidelities
        cols["theta"] = self.thetas
        return cols


def _validate_grid(grid):
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or g.size == 0:
        raise ValueError("amplitude grid must be a nonempty list")
    if np.any(np.diff(g) <= 0):
        raise ValueError("amplitude grid must be strictly increasing")
    if np.any(g <= 0):
        raise ValueError("amplitude grid must be positive")
    return g


def _run_step_point(amplitude, step, rho, target, kp, loss, policy):
    stage = recovery_stage(step, amplitude, kp)
    h = stage.hamiltonian(kp, rho.cutoff)
    out = evolve_gksl(h, rho, loss, stage.duration, policy, label=f"{step} at {STEP_PARAMETER[step]}={amplitude:.6g}")
    fid, theta = phase_optimized_fidelity(out, target, kp)
    return fid, theta, out


def calibrate_step(step, input_state, target, amplitude_grid, kp: KerrParams, loss: LossChannel | None,
                   policy=DEFAULT_INTEGRATOR, threads=1, keep_best=True) -> SweepResult:
    """Run one recovery stage per grid amplitude and score it with the phase-optimized fidelity."""
    grid = _validate_grid(amplitude_grid)
    if isinstance(input_state, StateVector):
        input_state = input_state.dm()
    fn = partial(_run_step_point, step=step, rho=input_state, target=target, kp=kp, loss=loss, policy=policy)
    results = pmap(fn, grid, threads)
    fids = np.array([r[0] for r in results])
    thetas = np.array([r[1] for r in results])
    sweep = SweepResult(step, STEP_PARAMETER[step], grid, fids, thetas)
    if keep_best:
        sweep.best_state = results[sweep.argmax_index][2]
    return sweep


@dataclass(eq=False)
class CalibrationRun:
    sweeps: dict
    calibration: RecoveryCalibration
    final_fidelity: float
    input_t_error: float | None = None

    @property
    def step_fidelities(self):
        return tuple(self.sweeps[s].best for s in STEPS)

    @property
    def amplitudes(self):
        return tuple(self.sweeps[s].argmax for s in STEPS)

    def summary(self):
        return {
            "input_t_error": self.input_t_error,
            "calibration": self.calibration.to_dict(),
            "step_fidelities": dict(zip(("F1", "F2", "F3"), self.step_fidelities)),
            "final_fidelity": self.final_fidelity,
        }


def calibration_input(kp: KerrParams, loss: LossChannel | None, t_error=None, alpha=_HALF, beta=_HALF,
                      cutoff=None, policy=DEFAULT_INTEGRATOR) -> DensityMatrix:
    """State the calibration starts from.

    ``t_error=None`` gives the pure error word alpha|3> + beta|1>; otherwise the
    logical state decays for ``t_error`` and is projected onto odd parity.
    """
    c = as_cutoff(cutoff)
    if t_error is None:
        return error_state(alpha, beta, c).dm()
    rho = evolve_gksl(None, logical_state(alpha, beta, c).dm(), loss, t_error, policy, label="decay")
    return project_parity(rho, "odd")[0]


def calibrate_chain(input_state, grids, kp: KerrParams, loss: LossChannel | None, alpha=_HALF, beta=_HALF,
                    policy=DEFAULT_INTEGRATOR, threads=1, input_t_error=None) -> CalibrationRun:
    """Stepwise calibration: each step starts from the best output of the previous one."""
    c = input_state.cutoff
    rho = input_state.dm() if isinstance(input_state, StateVector) else input_state
    sweeps = {}
    for step in STEPS:
        sweep = calibrate_step(step, rho, step_target(step, alpha, beta, c), grids[step], kp, loss, policy, threads)
        sweeps[step] = sweep
        rho = sweep.best_state
        log.info("%s: best %s=%.6g, fidelity %.6f", step, sweep.parameter, sweep.argmax, sweep.best)
    final, theta = phase_optimized_fidelity(rho, logical_state(alpha, beta, c), kp)
    cal = RecoveryCalibration(
        sweeps["s32"].argmax, sweeps["s204"].argmax, sweeps["s12"].argmax,
        logical_phase_from_theta(theta, kp, c),
    )
    return CalibrationRun(sweeps, cal, final, input_t_error)


def chain_at(cal: RecoveryCalibration, input_state, kp, loss, alpha=_HALF, beta=_HALF, policy=DEFAULT_INTEGRATOR):
    """Step fidelities (F1, F2, F3) of a fixed calibration; used for convergence gates."""
    c = input_state.cutoff
    rho = input_state
    fids = []
    for step in STEPS:
        fid, _, rho = _run_step_point(cal.amplitude(step), step, rho, step_target(step, alpha, beta, c), kp, loss, policy)
        fids.append(fid)
    return tuple(fids)


# --------------------------------------------------------------------------
# pi-pulse checks


def pi_pulse_peak(step, amplitude, kp: KerrParams, cutoff=None, policy=DEFAULT_INTEGRATOR, samples=3001):
    """Locate the first maximum of the target population at gamma = 0.

    Returns (t_numeric, t_analytic, peak_population).
    """
    c = as_cutoff(cutoff)
    start, goal = _pi_pulse_endpoints(step, c)
    stage = recovery_stage(step, amplitude, kp)
    h = stage.hamiltonian(kp, c)
    t_pi = stage.duration
    traj = trajectory_pure(h, start, 1.5 * t_pi, samples, policy, label=f"{step} pi pulse")
    pop = traj.population(goal)
    # counter-rotating ripple adds tiny local maxima; only a prominent peak counts
    peaks, _ = find_peaks(pop, height=0.5, prominence=0.25)
    if peaks.size == 0:
        raise KerrbinError(f"{step}: no population maximum within 1.5 pi-pulse durations")
    t_peak, p_peak = _parabolic_peak(traj.times, pop, int(peaks[0]))
    return t_peak, t_pi, p_peak


def _parabolic_peak(times, values, k):
    """Vertex of the parabola through samples k-1, k, k+1 (uniform spacing)."""
    if k <= 0 or k >= len(values) - 1:
        return float(times[k]), float(values[k])
    y0, y1, y2 = values[k - 1 : k + 2]
    denom = y0 - 2 * y1 + y2
    shift = 0.5 * (y0 - y2) / denom if denom < 0 else 0.0
    return float(times[k] + shift * (times[k + 1] - times[k])), float(y1 - 0.25 * (y0 - y2) * shift)


def logical_population_at(h, start, goal, t, policy=DEFAULT_INTEGRATOR):
    psi = evolve_pure(h, start, t, policy)
    return float(abs(goal.overlap(psi)) ** 2)


# --------------------------------------------------------------------------
# Rabi oscillations


def effective_population(p2, times):
    """|1_L> population of the resonant two-level model, sin^2(sqrt(24) p2 t)."""
    return np.sin(math.sqrt(24.0) * p2 * np.asarray(times)) ** 2


def rabi_period(p2, p1_scale=1.0) -> float:
    """Period of the |1_L> population oscillation, pi / (2 p1)."""
    return math.pi / (2 * p1_scale * SQRT6 * p2)


@dataclass(eq=False)
class RabiTrace:
    p2: float
    p1: float
    times: np.ndarray
    population: np.ndarray
    effective: np.ndarray

    @property
    def max_population(self):
        return float(np.max(self.population))

    @property
    def max_deviation(self):
        return float(np.max(np.abs(self.population - self.effective)))


def _rabi_point(p2, kp, cutoff, samples, periods, duration, p1_scale, policy):
    c = as_cutoff(cutoff)
    tp = TwoToneParams.matched(p2, kp, p1_scale)
    psi0 = logical_basis(c).zero_l
    if p2 == 0:
        t_end = duration if duration is not None else 1.0
        times = np.linspace(0, t_end, samples)
        return RabiTrace(0.0, 0.0, times, np.zeros(samples), np.zeros(samples))
    t_end = duration if duration is not None else periods * rabi_period(p2, p1_scale)
    traj = trajectory_pure(two_tone_hamiltonian(kp, tp, c), psi0, t_end, samples, policy, label=f"rabi p2={p2:g}")
    pop = traj.population(logical_basis(c).one_l)
    return RabiTrace(p2, tp.p1, traj.times, pop, effective_population(p2, traj.times))


def rabi_scan(kp: KerrParams, p2_values, duration=None, samples=2000, periods=1.0, p1_scale=1.0,
              cutoff=None, policy=DEFAULT_INTEGRATOR, threads=1):
    """|1_L> population under the two-tone drive from |0_L>, one trace per p2."""
    p2_values = list(p2_values)
    if not p2_values:
        raise ValueError("p2_values must be nonempty")
    if any(p < 0 for p in p2_values):
        raise ValueError("p2 values must be non-negative")
    fn = partial(_rabi_point, kp=kp, cutoff=as_cutoff(cutoff), samples=samples, periods=periods,
                 duration=duration, p1_scale=p1_scale, policy=policy)
    return pmap(fn, p2_values, threads)


def max_x_population(kp, p2, p1_scale=1.0, cutoff=None, policy=DEFAULT_INTEGRATOR, samples=4001):
    """Maximum |1_L> population from |0_L> over one nominal Rabi period.

    The sampled maximum is refined by a parabolic fit through its neighbours.
    """
    c = as_cutoff(cutoff)
    tp = TwoToneParams.matched(p2, kp, p1_scale)
    h = two_tone_hamiltonian(kp, tp, c)
    lb = logical_basis(c)
    traj = trajectory_pure(h, lb.zero_l, rabi_period(p2), samples, policy, label=f"x rotation p2={p2:g}")
    pop = traj.population(lb.one_l)
    k = int(np.argmax(pop))
    return max(_parabolic_peak(traj.times, pop, k)[1], float(pop[k]))


# --------------------------------------------------------------------------
# QEC experiment


@dataclass(frozen=True)
class QecExperimentResult:
    t_error: float
    fidelity_without_qec: float
    fidelity_with_qec: float
    parity_odd_probability: float
    status: str = "ok"


def qec_experiment(t_error, kp: KerrParams, loss: LossChannel, cal: RecoveryCalibration, cutoff=None,
                   alpha=_HALF, beta=_HALF, policy=DEFAULT_INTEGRATOR, recovery_loss="same") -> QecExperimentResult:
    """Decay, ideal odd-parity detection, recovery, and fidelity to the logical state.

    The decay interval uses H = 0. ``recovery_loss="same"`` reuses ``loss`` for
    the recovery drives; pass ``None`` for lossless recovery.
    """
    if not t_error >= 0:
        raise ValueError("t_error must be >= 0")
    c = as_cutoff(cutoff)
    psi = logical_state(alpha, beta, c)
    rho_t = evolve_gksl(None, psi.dm(), loss, t_error, policy, label=f"decay t_error={t_error:g}")
    f_ini = fidelity_pure(psi, rho_t)
    projected, prob = project_parity(rho_t, "odd")
    rec_loss = loss if recovery_loss == "same" else recovery_loss
    final = piecewise_evolve(recovery_schedule(kp, cal, c), projected, rec_loss, policy)
    f_fin, _ = phase_optimized_fidelity(final, psi, kp)
    return QecExperimentResult(float(t_error), f_ini, f_fin, prob)


def _qec_point(t_error, **kw):
    try:
        return qec_experiment(t_error, **kw)
    except NoSupportError as exc:
        c = as_cutoff(kw.get("cutoff"))
        psi = logical_state(kw.get("alpha", _HALF), kw.get("beta", _HALF), c)
        rho_t = evolve_gksl(None, psi.dm(), kw["loss"], t_error, kw.get("policy", DEFAULT_INTEGRATOR))
        return QecExperimentResult(float(t_error), fidelity_pure(psi, rho_t), math.nan, exc.probability, "no_support")


def qec_sweep(t_errors, kp, loss, cal, cutoff=None, alpha=_HALF, beta=_HALF, policy=DEFAULT_INTEGRATOR,
              threads=1, recovery_loss="same"):
    """qec_experiment over a grid; a vanishing odd-parity outcome becomes a status row."""
    fn = partial(_qec_point, kp=kp, loss=loss, cal=cal, cutoff=as_cutoff(cutoff), alpha=alpha, beta=beta,
                 policy=policy, recovery_loss=recovery_loss)
    return pmap(fn, list(t_errors), threads)


def default_t_error_grid(count=20, lo=5.0, hi=400.0):
    return np.geomspace(lo, hi, count)


def least_squares_slope(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = np.isfinite(x) & np.isfinite(y)
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(x[ok], y[ok], 1)[0])


def crossover_time(t, f_ini, f_fin):
    """First t_error where the corrected fidelity overtakes the uncorrected one (linear interpolation)."""
    t = np.asarray(t, dtype=float)
    d = np.asarray(f_fin, dtype=float) - np.asarray(f_ini, dtype=float)
    for i in range(1, len(t)):
        if np.isfinite(d[i - 1]) and np.isfinite(d[i]) and d[i - 1] < 0 <= d[i]:
            return float(t[i - 1] + (t[i] - t[i - 1]) * (-d[i - 1]) / (d[i] - d[i - 1]))
    return None
