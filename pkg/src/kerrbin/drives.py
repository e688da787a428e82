"""Drive Hamiltonians of the Kerr resonator in the coherent-drive rotating frame.

Every generator has the form

    H(t) = H_static + sum_k (A_k exp(i nu_k t) + A_k^dag exp(-i nu_k t))

with a diagonal ``H_static = chi N^2 + Delta N``. Keeping the static part and the
rotating terms separate lets the propagators integrate in the frame of the
static part exactly, without any rotating-wave approximation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidCutoffError
from .hilbert import FockOperator, annihilation, as_cutoff, number_op

SQRT6 = math.sqrt(6.0)

GENERATORS = ("two_tone", "coherent_32", "coherent_12", "static_phase")


@dataclass(frozen=True)
class KerrParams:
    """Kerr nonlinearity ``chi`` and detuning ``Delta`` (hbar = 1, dimensionless)."""

    chi: float = 6.0
    detuning_delta: float | None = None

    def __post_init__(self):
        if not math.isfinite(self.chi):
            raise ValueError("chi must be finite")
        if self.detuning_delta is None:
            object.__setattr__(self, "detuning_delta", -4.0 * self.chi)

    def level_energy(self, n):
        return self.chi * n * n + self.detuning_delta * n

    @property
    def phase_generator_coefficients(self):
        """(N^2, N) coefficients of the chi-free generator used for phase correction."""
        if self.chi == 0:
            return 1.0, -4.0
        return 1.0, self.detuning_delta / self.chi


@dataclass(frozen=True)
class TwoToneParams:
    p1: float
    p2: float
    omega: float

    def __post_init__(self):
        if self.p1 < 0 or self.p2 < 0:
            raise ValueError("parametric amplitudes must be non-negative")

    @classmethod
    def matched(cls, p2, kp: KerrParams, p1_scale=1.0):
        """p1 = scale * sqrt(6) p2 with omega = -4 chi."""
        return cls(p1=p1_scale * SQRT6 * p2, p2=p2, omega=-4.0 * kp.chi)

    @classmethod
    def from_p1(cls, p1, kp: KerrParams):
        return cls(p1=p1, p2=p1 / SQRT6, omega=-4.0 * kp.chi)

    def is_matched(self, rtol=1e-12):
        return math.isclose(self.p1, SQRT6 * self.p2, rel_tol=rtol, abs_tol=0.0)


@dataclass(frozen=True)
class CoherentParams:
    """Single-photon drive; ``phase_sign=+1`` targets 3<->2, ``-1`` targets 1<->2."""

    amplitude: float
    phase_sign: int = 1

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("coherent amplitude must be non-negative")
        if self.phase_sign not in (1, -1):
            raise ValueError("phase_sign must be +1 or -1")


@dataclass(frozen=True)
class DriveTerm:
    """``op * exp(i frequency t)`` plus its Hermitian conjugate."""

    op: np.ndarray
    frequency: float


@dataclass(frozen=True, eq=False)
class DrivenHamiltonian:
    static: FockOperator
    terms: tuple = ()

    def __call__(self, t) -> FockOperator:
        m = np.array(self.static.matrix)
        for term in self.terms:
            x = term.op * np.exp(1j * term.frequency * t)
            m += x + x.conj().T
        return FockOperator(m)

    @property
    def cutoff(self):
        return self.static.cutoff

    @property
    def is_static(self):
        return not self.terms

    def max_drive_frequency(self):
        return max((abs(t.frequency) for t in self.terms), default=0.0)

    def period(self):
        """Common period of the drive terms, ``inf`` for a static generator."""
        freqs = {abs(t.frequency) for t in self.terms if t.frequency != 0}
        if not freqs:
            return math.inf
        base = min(freqs)
        for f in freqs:
            ratio = f / base
            if abs(ratio - round(ratio)) > 1e-12:
                raise ValueError("drive frequencies are not commensurate")
        return 2 * math.pi / base


def h_static(kp: KerrParams, cutoff=None) -> FockOperator:
    c = as_cutoff(cutoff)
    n = number_op(c).matrix
    return FockOperator(kp.chi * n @ n + kp.detuning_delta * n)


def two_tone_hamiltonian(kp: KerrParams, tp: TwoToneParams, cutoff=None) -> DrivenHamiltonian:
    c = as_cutoff(cutoff)
    a = annihilation(c).matrix
    a2 = a @ a
    terms = []
    # p1 (a^2 e^{i w t} + h.c.) + p2 (a^2 e^{-i w t} + h.c.)
    if tp.p1:
        terms.append(DriveTerm(tp.p1 * a2, tp.omega))
    if tp.p2:
        terms.append(DriveTerm(tp.p2 * a2, -tp.omega))
    return DrivenHamiltonian(h_static(kp, c), tuple(terms))


def coherent_hamiltonian(kp: KerrParams, cp: CoherentParams, cutoff=None) -> DrivenHamiltonian:
    c = as_cutoff(cutoff)
    a = annihilation(c).matrix
    terms = ()
    if cp.amplitude:
        terms = (DriveTerm(cp.amplitude * a, cp.phase_sign * kp.chi),)
    return DrivenHamiltonian(h_static(kp, c), terms)


def h_two_tone(kp, tp, t, cutoff=None) -> FockOperator:
    return two_tone_hamiltonian(kp, tp, cutoff)(t)


def h_coherent(kp, cp, t, cutoff=None) -> FockOperator:
    return coherent_hamiltonian(kp, cp, cutoff)(t)


def h_effective_logical_x(p2, cutoff=None) -> FockOperator:
    """Two-level model sqrt(24) p2 (|0_L><1_L| + h.c.) written in the Fock basis.

    Only an oracle for the resonant limit; protocols never propagate with it.
    """
    if p2 < 0:
        raise ValueError("p2 must be non-negative")
    c = as_cutoff(cutoff).require(5)
    zero_l = np.zeros(c.n_max, dtype=complex)
    zero_l[[0, 4]] = 1 / math.sqrt(2)
    one_l = np.zeros(c.n_max, dtype=complex)
    one_l[2] = 1.0
    x = math.sqrt(24.0) * p2 * np.outer(zero_l, one_l)
    return FockOperator(x + x.conj().T)


def resonance_check(kp: KerrParams, transition, cutoff=None) -> float:
    """Energy gap E(n_to) - E(n_from) of the static Hamiltonian."""
    c = as_cutoff(cutoff)
    n_from, n_to = transition
    for n in (n_from, n_to):
        if not 0 <= n < c.n_max:
            raise InvalidCutoffError(f"level {n} outside cutoff n_max={c.n_max}")
    return float(kp.level_energy(n_to) - kp.level_energy(n_from))


# --------------------------------------------------------------------------
# schedules


@dataclass(frozen=True)
class DriveStage:
    """One interval of evolution: generator tag, its parameters, and a duration.

    Each stage runs on its own clock starting at ``t = 0``.
    """

    generator: str
    duration: float
    params: object = None

    def __post_init__(self):
        if self.generator not in GENERATORS:
            raise ValueError(f"unknown generator {self.generator!r}")
        if not self.duration >= 0:
            raise ValueError(f"stage duration must be >= 0, got {self.duration}")
        if self.generator == "two_tone" and not isinstance(self.params, TwoToneParams):
            raise TypeError("two_tone stage needs TwoToneParams")
        if self.generator in ("coherent_32", "coherent_12"):
            if not isinstance(self.params, CoherentParams):
                raise TypeError(f"{self.generator} stage needs CoherentParams")
            want = 1 if self.generator == "coherent_32" else -1
            if self.params.phase_sign != want:
                raise ValueError(f"{self.generator} requires phase_sign={want:+d}")

    def hamiltonian(self, kp: KerrParams, cutoff=None) -> DrivenHamiltonian:
        if self.generator == "two_tone":
            return two_tone_hamiltonian(kp, self.params, cutoff)
        if self.generator == "static_phase":
            return DrivenHamiltonian(h_static(kp, cutoff))
        return coherent_hamiltonian(kp, self.params, cutoff)


@dataclass(frozen=True)
class Schedule:
    stages: tuple
    kerr: KerrParams
    cutoff: object = None

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        object.__setattr__(self, "cutoff", as_cutoff(self.cutoff))

    def __len__(self):
        return len(self.stages)

    @property
    def total_duration(self):
        return sum(s.duration for s in self.stages)
