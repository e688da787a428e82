"""Time evolution: Schrodinger and GKSL propagation plus a superoperator oracle.

Propagation is carried out in the interaction frame of the diagonal static
Hamiltonian ``E = diag(H_static)``. That is an exact change of variables:

    psi_I(t) = exp(+iEt) psi(t),    rho_I(t) = exp(+iEt) rho(t) exp(-iEt)

with every drive term, counter-rotating pieces included, carried along as
``A_mn exp(i (E_m - E_n + nu) t)``. Removing the large diagonal phases
(``chi n^2`` grows quickly with the cutoff) keeps the explicit Runge-Kutta
steps far from their stability limit. States are mapped back to the rotating
frame before they are returned, so callers never see the interaction frame.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp

from .drives import DrivenHamiltonian, Schedule
from .errors import (
    CutoffMismatchError,
    IntegrationError,
    InvalidCutoffError,
    KerrbinError,
    StiffnessError,
)
from .hilbert import (
    Cutoff,
    DensityMatrix,
    FockOperator,
    StateVector,
    annihilation,
    as_cutoff,
)
from .policy import POLICY

log = logging.getLogger(__name__)

METHODS = ("RK45", "DOP853", "RK4")
ORACLE_MAX_N = 8


@dataclass(frozen=True)
class IntegratorPolicy:
    """Integrator settings.

    ``max_step`` is an optional user cap. The automatic cap
    ``(2 pi / omega_fast) / 20`` is always applied on top of it, where
    ``omega_fast`` is the largest diagonal energy of the generator actually
    integrated plus the largest drive rotation frequency.
    """

    rel_tol: float = POLICY.rel_tol
    abs_tol: float = POLICY.abs_tol
    max_step: float | None = None
    method: str = "RK45"
    rk4_step: float = 1e-3

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown integrator method {self.method!r}")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("integrator tolerances must be positive")

    def halved(self) -> IntegratorPolicy:
        return replace(self, rel_tol=self.rel_tol / 2, abs_tol=self.abs_tol / 2)

    @property
    def drift_limit(self):
        return POLICY.drift_factor * self.rel_tol


DEFAULT_INTEGRATOR = IntegratorPolicy()


@dataclass(frozen=True)
class LossChannel:
    """Single-photon loss with Lindblad operator sqrt(gamma) a."""

    gamma: float

    def __post_init__(self):
        if not self.gamma >= 0:
            raise ValueError(f"loss rate must be >= 0, got {self.gamma}")

    def operator(self, cutoff=None) -> FockOperator:
        return annihilation(cutoff) * math.sqrt(self.gamma)


def as_driven(hamiltonian, cutoff) -> DrivenHamiltonian:
    if isinstance(hamiltonian, DrivenHamiltonian):
        h = hamiltonian
    elif hamiltonian is None:
        c = as_cutoff(cutoff)
        h = DrivenHamiltonian(FockOperator(np.zeros((c.n_max, c.n_max))))
    elif isinstance(hamiltonian, FockOperator):
        h = DrivenHamiltonian(hamiltonian)
    else:
        raise TypeError(f"unsupported Hamiltonian type {type(hamiltonian).__name__}")
    if h.cutoff != as_cutoff(cutoff):
        raise CutoffMismatchError(
            f"Hamiltonian n_max={h.cutoff.n_max} vs state n_max={as_cutoff(cutoff).n_max}"
        )
    if not h.static.is_hermitian(1e-12):
        raise ValueError("static Hamiltonian is not Hermitian")
    return h


class _Frame:
    """Interaction-frame generator for one stage."""

    def __init__(self, h: DrivenHamiltonian, loss: FockOperator | None = None):
        static = h.static.matrix
        energies = np.diag(static).real.copy()
        gaps = energies[:, None] - energies[None, :]
        self.energies = energies
        self.gaps = gaps
        terms = [(t.op, gaps + t.frequency) for t in h.terms]
        remainder = static - np.diag(np.diag(static))
        if np.any(remainder):
            terms.append((remainder / 2, gaps))
        self.terms = terms
        diag_scale = max((2 * float(np.max(np.abs(np.diag(op)))) for op, _ in terms), default=0.0)
        self.omega_fast = diag_scale + h.max_drive_frequency()
        self._table = _phase_table(terms, energies.size)
        self.loss = None if loss is None else loss.matrix
        if self.loss is not None:
            k = self.loss.conj().T @ self.loss
            self._loss_table = _phase_table([(self.loss, gaps)], energies.size)
            if self._loss_table is None:
                self.loss = None
        if self.loss is not None:
            self.k_static = k if _is_diagonal(k) else None
            self.k = k

    def step_cap(self, policy: IntegratorPolicy) -> float:
        cap = math.inf
        if self.omega_fast > 0:
            cap = (2 * math.pi / self.omega_fast) / POLICY.step_cap_divisions
        if policy.max_step is not None:
            cap = min(cap, policy.max_step)
        return cap

    def hamiltonian(self, t):
        if self._table is None:
            return None
        m = _assemble(self._table, t)
        return m + m.conj().T

    def pure_rhs(self, t, y):
        h = self.hamiltonian(t)
        if h is None:
            return np.zeros_like(y)
        return -1j * (h @ y)

    def gksl_rhs(self, t, y):
        n = self.energies.size
        rho = y.reshape(n, n)
        h = self.hamiltonian(t)
        g = np.zeros((n, n), dtype=complex) if h is None else -1j * h
        if self.loss is not None:
            l_t = _assemble(self._loss_table, t)
            k_t = self.k_static if self.k_static is not None else self.k * np.exp(1j * self.gaps * t)
            g = g - 0.5 * k_t
            d = g @ rho + rho @ g.conj().T + l_t @ rho @ l_t.conj().T
        else:
            d = g @ rho + rho @ g.conj().T
        # keep every stage of every step exactly Hermitian
        d = 0.5 * (d + d.conj().T)
        return d.ravel()

    def vector_to_frame(self, psi, t):
        return psi * np.exp(-1j * self.energies * t)

    def matrix_to_frame(self, rho, t):
        return rho * np.exp(-1j * self.gaps * t)


def _phase_table(terms, n):
    """Nonzero entries of sum_k op_k exp(i freq_k t) as flat (index, value, frequency) arrays."""
    idx, val, freq = [], [], []
    for op, f in terms:
        f = np.broadcast_to(f, op.shape)
        nz = np.flatnonzero(op)
        idx.append(nz)
        val.append(op.ravel()[nz])
        freq.append(f.ravel()[nz])
    if not terms or not sum(i.size for i in idx):
        return None
    return n, np.concatenate(idx), np.concatenate(val), np.concatenate(freq)


def _assemble(table, t):
    n, idx, val, freq = table
    w = val * np.exp(1j * freq * t)
    m = np.bincount(idx, w.real, n * n) + 1j * np.bincount(idx, w.imag, n * n)
    return m.reshape(n, n)


def _is_diagonal(m):
    return not np.any(m - np.diag(np.diag(m)))


def _rk4(rhs, y0, times, step):
    ys = [y0]
    y = y0
    for t0, t1 in zip(times[:-1], times[1:]):
        n = max(1, math.ceil((t1 - t0) / step - 1e-12))
        h = (t1 - t0) / n
        t = t0
        for _ in range(n):
            k1 = rhs(t, y)
            k2 = rhs(t + h / 2, y + h / 2 * k1)
            k3 = rhs(t + h / 2, y + h / 2 * k2)
            k4 = rhs(t + h, y + h * k3)
            y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += h
        ys.append(y)
    return np.array(ys)


def _integrate(rhs, y0, times, policy, cap, label):
    """Integrate from 0 to times[-1], returning the solution at ``times``."""
    if times[-1] == 0:
        return np.array([y0] * len(times))
    if policy.method == "RK4":
        step = min(policy.rk4_step, cap)
        return _rk4(rhs, y0, times, step)
    sol = solve_ivp(
        rhs,
        (0.0, float(times[-1])),
        y0,
        method=policy.method,
        t_eval=times,
        rtol=policy.rel_tol,
        atol=policy.abs_tol,
        max_step=cap,
    )
    if sol.status != 0:
        raise StiffnessError(f"{label}: integrator failed ({sol.message})")
    return sol.y.T


def _sample_times(duration, samples):
    if not duration >= 0:
        raise ValueError(f"duration must be >= 0, got {duration}")
    if samples is None:
        return np.array([0.0, float(duration)])
    if samples < 2:
        raise ValueError("need at least 2 samples")
    return np.linspace(0.0, float(duration), int(samples))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled states; ``states`` has shape (k, n) for pure or (k, n, n) for mixed."""

    times: np.ndarray
    states: np.ndarray

    @property
    def is_pure(self):
        return self.states.ndim == 2

    def expectation(self, op: FockOperator) -> np.ndarray:
        m = op.matrix
        if self.is_pure:
            vals = np.einsum("ki,ij,kj->k", self.states.conj(), m, self.states)
        else:
            vals = np.einsum("ij,kji->k", m, self.states)
        return vals.real

    def population(self, word: StateVector) -> np.ndarray:
        v = word.amplitudes
        if self.is_pure:
            return np.abs(self.states @ v.conj()) ** 2
        return np.einsum("i,kij,j->k", v.conj(), self.states, v).real

    def final_state(self):
        if self.is_pure:
            return StateVector(self.states[-1], normalize=True)
        return DensityMatrix(self.states[-1], validate=False)

    def to_csv(self, path, observables, time_label="time"):
        """Write ``time_label`` then one column per named observable.

        ``observables`` maps column names to a FockOperator, a StateVector
        (population of that state) or a precomputed array.
        """
        cols = []
        for name, obs in observables.items():
            if isinstance(obs, FockOperator):
                cols.append(self.expectation(obs))
            elif isinstance(obs, StateVector):
                cols.append(self.population(obs))
            else:
                cols.append(np.asarray(obs, dtype=float))
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([time_label, *observables])
            for i, t in enumerate(self.times):
                w.writerow([format(float(t), ".17g")] + [format(float(c[i]), ".17g") for c in cols])
        return Path(path)


# --------------------------------------------------------------------------
# pure states


def _pure_run(hamiltonian, psi0, duration, samples, policy, label):
    if not isinstance(psi0, StateVector):
        raise TypeError("psi0 must be a StateVector")
    h = as_driven(hamiltonian, psi0.cutoff)
    frame = _Frame(h)
    times = _sample_times(duration, samples)
    ys = _integrate(frame.pure_rhs, np.array(psi0.amplitudes), times, policy, frame.step_cap(policy), label)
    states = np.array([frame.vector_to_frame(y, t) for y, t in zip(ys, times)])
    norms = np.linalg.norm(states, axis=1)
    drift = float(np.max(np.abs(norms - 1.0)))
    if drift > policy.drift_limit:
        raise IntegrationError(f"{label}: norm drift {drift:.3g} exceeds {policy.drift_limit:.3g}")
    log.debug("%s: norm drift %.3g", label, drift)
    return times, states


def evolve_pure(hamiltonian, psi0: StateVector, duration, policy=DEFAULT_INTEGRATOR, label="evolve_pure"):
    """Solve i dpsi/dt = H(t) psi up to ``duration``; renormalized on return."""
    _, states = _pure_run(hamiltonian, psi0, duration, None, policy, label)
    return StateVector(states[-1], normalize=True)


def trajectory_pure(hamiltonian, psi0, duration, samples=2000, policy=DEFAULT_INTEGRATOR, label="trajectory_pure"):
    times, states = _pure_run(hamiltonian, psi0, duration, samples, policy, label)
    return Trajectory(times, states)


# --------------------------------------------------------------------------
# density matrices


def _gksl_run(hamiltonian, rho0, loss, duration, samples, policy, label):
    if isinstance(rho0, StateVector):
        rho0 = rho0.dm()
    if not isinstance(rho0, DensityMatrix):
        raise TypeError("rho0 must be a DensityMatrix")
    c = rho0.cutoff
    h = as_driven(hamiltonian, c)
    loss_op = None if loss is None or loss.gamma == 0 else loss.operator(c)
    frame = _Frame(h, loss_op)
    times = _sample_times(duration, samples)
    n = c.n_max
    ys = _integrate(frame.gksl_rhs, np.array(rho0.entries).ravel(), times, policy, frame.step_cap(policy), label)
    states = np.array([frame.matrix_to_frame(y.reshape(n, n), t) for y, t in zip(ys, times)])
    states = 0.5 * (states + np.conj(np.swapaxes(states, 1, 2)))
    traces = np.einsum("kii->k", states).real
    drift = float(np.max(np.abs(traces - rho0.trace)))
    if drift > policy.drift_limit:
        raise IntegrationError(f"{label}: trace drift {drift:.3g} exceeds {policy.drift_limit:.3g}")
    lowest = float(min(np.linalg.eigvalsh(s).min() for s in states))
    if lowest < POLICY.positivity_fail:
        raise IntegrationError(f"{label}: density matrix eigenvalue {lowest:.3g} below {POLICY.positivity_fail}")
    if lowest < POLICY.positivity_floor:
        log.warning("%s: small negative eigenvalue %.3g", label, lowest)
    log.debug("%s: trace drift %.3g, min eigenvalue %.3g", label, drift, lowest)
    return times, states


def evolve_gksl(hamiltonian, rho0, loss: LossChannel | None, duration, policy=DEFAULT_INTEGRATOR, label="evolve_gksl"):
    """GKSL evolution with loss operator sqrt(gamma) a; renormalized on return."""
    _, states = _gksl_run(hamiltonian, rho0, loss, duration, None, policy, label)
    rho = states[-1]
    return DensityMatrix(rho / np.trace(rho).real, validate=False)


def trajectory_gksl(hamiltonian, rho0, loss, duration, samples=2000, policy=DEFAULT_INTEGRATOR, label="trajectory_gksl"):
    times, states = _gksl_run(hamiltonian, rho0, loss, duration, samples, policy, label)
    return Trajectory(times, states)


def piecewise_evolve(schedule: Schedule, initial, loss: LossChannel | None = None, policy=DEFAULT_INTEGRATOR):
    """Apply each stage of ``schedule`` in order, every stage on its own clock.

    The pure-state engine is used only when there is no loss channel and the
    initial state is a StateVector.
    """
    state = initial
    if initial.cutoff != schedule.cutoff:
        raise CutoffMismatchError(
            f"schedule n_max={schedule.cutoff.n_max} vs state n_max={initial.cutoff.n_max}"
        )
    pure = loss is None and isinstance(initial, StateVector)
    if not pure and isinstance(state, StateVector):
        state = state.dm()
    for i, stage in enumerate(schedule.stages):
        label = f"stage {i} ({stage.generator})"
        h = stage.hamiltonian(schedule.kerr, schedule.cutoff)
        try:
            if pure:
                state = evolve_pure(h, state, stage.duration, policy, label=label)
            else:
                state = evolve_gksl(h, state, loss, stage.duration, policy, label=label)
        except KerrbinError as exc:
            if label in str(exc):
                raise
            raise type(exc)(f"{label}: {exc}") from exc
    return state


# --------------------------------------------------------------------------
# superoperator oracle


def _expm(a):
    """Matrix exponential by scaling and squaring of a degree-18 Taylor series."""
    norm = float(np.linalg.norm(a, 1))
    squarings = max(0, math.ceil(math.log2(norm / 0.5))) if norm > 0.5 else 0
    x = a / 2.0**squarings
    ident = np.eye(a.shape[0], dtype=complex)
    term = ident
    out = ident.copy()
    for k in range(1, 19):
        term = term @ x / k
        out = out + term
    for _ in range(squarings):
        out = out @ out
    return out


def liouvillian(h: FockOperator, loss_op: FockOperator | None = None) -> np.ndarray:
    """Column-stacking superoperator: vec(A rho B) = (B^T kron A) vec(rho)."""
    m = h.matrix
    ident = np.eye(m.shape[0], dtype=complex)
    sup = -1j * (np.kron(ident, m) - np.kron(m.T, ident))
    if loss_op is not None:
        l = loss_op.matrix
        k = l.conj().T @ l
        sup = sup + np.kron(l.conj(), l) - 0.5 * (np.kron(ident, k) + np.kron(k.T, ident))
    return sup


@dataclass(frozen=True, eq=False)
class Superoperator:
    matrix: np.ndarray

    def __call__(self, rho: DensityMatrix) -> DensityMatrix:
        n = rho.cutoff.n_max
        if self.matrix.shape[0] != n * n:
            raise InvalidCutoffError("superoperator and state dimensions differ")
        vec = self.matrix @ np.array(rho.entries).reshape(-1, order="F")
        return DensityMatrix(vec.reshape((n, n), order="F"), validate=False)


def gksl_oracle(h_const: FockOperator, loss: LossChannel | None, duration) -> Superoperator:
    """Exact exp(L t) for a time-independent generator; n_max <= 8 only."""
    c: Cutoff = h_const.cutoff
    if c.n_max > ORACLE_MAX_N:
        raise InvalidCutoffError(
            f"oracle superoperator limited to n_max <= {ORACLE_MAX_N}, got {c.n_max}"
        )
    if not duration >= 0:
        raise ValueError("duration must be >= 0")
    loss_op = None if loss is None or loss.gamma == 0 else loss.operator(c)
    return Superoperator(_expm(liouvillian(h_const, loss_op) * duration))
