"""Quick oracle-comparison and invariant checks, runnable from the CLI.

Each check returns a ``Check`` record; the suite passes when all of them do.
Everything here finishes in well under a minute at the default settings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bincode import (
    error_state,
    logical_basis,
    logical_state,
    phase_optimized_fidelity,
    phase_rotate,
    project_parity,
)
from .drives import KerrParams, TwoToneParams, h_static, resonance_check, two_tone_hamiltonian
from .hilbert import FockOperator, annihilation, basis, creation, fidelity_pure, number_op
from .propagate import DEFAULT_INTEGRATOR, LossChannel, evolve_gksl, gksl_oracle
from .protocols import REFERENCE_CALIBRATION, STEPS, chain_at, pi_pulse_peak, recovery_stage, z_rotation


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def line(self):
        verdict = "PASS" if self.passed else "FAIL"
        return f"[{verdict}] {self.name}: {self.value:.3e} (threshold {self.threshold:.1e}) {self.detail}".rstrip()

    def to_dict(self):
        return {"name": self.name, "passed": self.passed, "value": self.value,
                "threshold": self.threshold, "detail": self.detail}


def _below(name, value, threshold, detail=""):
    value = float(value)
    return Check(name, bool(value < threshold), value, threshold, detail)


def check_ladder(n=16):
    a, ad = annihilation(n).matrix, creation(n).matrix
    comm = a @ ad - ad @ a
    want = np.eye(n)
    want[-1, -1] = 1 - n  # truncation artefact sits on the top level only
    dev = max(np.max(np.abs(comm - want)), np.max(np.abs(ad @ a - number_op(n).matrix)))
    return _below("ladder algebra", dev, 1e-12, f"n_max={n}")


def check_resonances(kp):
    dev = max(
        abs(resonance_check(kp, (0, 4))),
        abs(resonance_check(kp, (2, 3)) - kp.chi),
        abs(resonance_check(kp, (2, 1)) - kp.chi),
    )
    return _below("Kerr resonance conditions", dev, 1e-12)


def check_drive_hermitian_periodic(kp, n=16):
    h = two_tone_hamiltonian(kp, TwoToneParams.matched(0.05, kp), n)
    period = h.period()
    dev = 0.0
    for t in (0.0, 0.37, 1.9):
        m, m2 = h(t).matrix, h(t + period).matrix
        dev = max(dev, np.max(np.abs(m - m.conj().T)), np.max(np.abs(m - m2)))
    return _below("two-tone Hermitian and periodic", dev, 1e-10)


def check_oracle(kp, gamma=0.001, n=8, times=(1.0, 10.0, 100.0)):
    loss = LossChannel(gamma)
    rho0 = logical_state(1 / math.sqrt(2), 1 / math.sqrt(2), n).dm()
    dev = 0.0
    for h in (FockOperator(np.zeros((n, n))), h_static(kp, n)):
        for t in times:
            oracle = gksl_oracle(h, loss, t)
            got = evolve_gksl(h, rho0, loss, t)
            dev = max(dev, np.max(np.abs(got.entries - oracle(rho0).entries)))
    return _below("GKSL vs superoperator oracle", dev, 1e-8, f"n_max={n}, t in {list(times)}")


def check_single_level_decay(gamma=0.001, t=100.0, n=16):
    rho = evolve_gksl(None, basis(1, n).dm(), LossChannel(gamma), t)
    return _below("single-level decay e^{-gamma t}", abs(rho.entries[1, 1].real - math.exp(-gamma * t)), 1e-9)


def check_parity(gamma=0.001, t=50.0, n=16):
    rho = evolve_gksl(None, logical_state(1 / math.sqrt(2), 1 / math.sqrt(2), n).dm(), LossChannel(gamma), t)
    odd, p_odd = project_parity(rho, "odd")
    even, p_even = project_parity(rho, "even")
    leak = float(np.sum(odd.populations()[::2]) + np.sum(even.populations()[1::2]))
    return _below("parity projection", max(abs(p_odd + p_even - 1), leak), 1e-12)


def check_phase_search(kp, n=16):
    psi = logical_state(1 / math.sqrt(2), 1 / math.sqrt(2), n)
    rotated = phase_rotate(psi.dm(), 0.3, kp)
    fid, _ = phase_optimized_fidelity(rotated, psi, kp)
    return _below("phase-optimized fidelity recovers a pure phase", 1 - fid, 1e-10)


def check_zrot(kp, n=16):
    plus = logical_state(1 / math.sqrt(2), 1 / math.sqrt(2), n)
    minus = logical_state(1 / math.sqrt(2), -1 / math.sqrt(2), n)
    out = z_rotation(kp, math.pi, plus)
    return _below("Z rotation by pi", 1 - fidelity_pure(minus, out), 1e-10)


def check_pi_pulses(kp, amplitude=0.05, n=16):
    worst, worst_step = 0.0, ""
    for step in STEPS:
        # same interaction strength for every stage: s204 amplitude is p1
        t_num, t_ana, _ = pi_pulse_peak(step, amplitude, kp, n)
        err = abs(t_num - t_ana) / t_ana
        if err >= worst:
            worst, worst_step = err, step
    return _below("pi-pulse duration formulas", worst, 0.02, f"worst {worst_step}, amplitude {amplitude}")


def check_tolerance_halving(kp, gamma=0.001, n=16):
    stage = recovery_stage("s32", REFERENCE_CALIBRATION.lambda_32, kp)
    h = stage.hamiltonian(kp, n)
    rho0 = error_state(1 / math.sqrt(2), 1 / math.sqrt(2), n).dm()
    a = evolve_gksl(h, rho0, LossChannel(gamma), stage.duration, DEFAULT_INTEGRATOR)
    b = evolve_gksl(h, rho0, LossChannel(gamma), stage.duration, DEFAULT_INTEGRATOR.halved())
    return _below("tolerance halving", np.max(np.abs(a.entries - b.entries)), 1e-7)


def check_convergence(kp, gamma=0.001, n=16, n_big=24):
    loss = LossChannel(gamma)
    f = [chain_at(REFERENCE_CALIBRATION, error_state(1 / math.sqrt(2), 1 / math.sqrt(2), m).dm(), kp, loss)
         for m in (n, n_big)]
    return _below("cutoff convergence", np.max(np.abs(np.subtract(*f))), 1e-6, f"n_max {n} vs {n_big}")


def check_code_words(n=16):
    lb = logical_basis(n)
    words = [lb.zero_l, lb.one_l, lb.zero_e, lb.one_e]
    gram = np.array([[abs(u.overlap(v)) for v in words] for u in words])
    return _below("code and error words orthonormal", np.max(np.abs(gram - np.eye(4))), 1e-14)


def run_selftest(kp: KerrParams | None = None, gamma=0.001, cutoff=16, convergence_cutoff=24):
    kp = kp or KerrParams()
    checks = [
        check_ladder(cutoff),
        check_code_words(cutoff),
        check_resonances(kp),
        check_drive_hermitian_periodic(kp, cutoff),
        check_oracle(kp, gamma),
        check_single_level_decay(gamma, n=cutoff),
        check_parity(gamma, n=cutoff),
        check_phase_search(kp, cutoff),
        check_zrot(kp, cutoff),
        check_pi_pulses(kp, n=cutoff),
        check_tolerance_halving(kp, gamma, cutoff),
    ]
    if convergence_cutoff is not None:
        checks.append(check_convergence(kp, gamma, cutoff, convergence_cutoff))
    return checks
