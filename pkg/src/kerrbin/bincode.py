"""Lowest-order binomial code: code and error words, parity, phase-optimized fidelity.

    |0_L> = (|0> + |4>)/sqrt(2),  |1_L> = |2>        (even photon number)
    |0_E> = |3>,                  |1_E> = |1>        (after one photon loss)
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .drives import KerrParams
from .errors import CutoffMismatchError, NoSupportError, NormalizationError
from .hilbert import (
    DensityMatrix,
    FockOperator,
    StateVector,
    as_cutoff,
    basis,
    superpose,
)
from .optimize import golden_section_max
from .policy import POLICY

WORDS = ("0L", "1L", "0E", "1E")


@dataclass(frozen=True, eq=False)
class LogicalBasis:
    zero_l: StateVector
    one_l: StateVector
    zero_e: StateVector
    one_e: StateVector

    def word(self, which) -> StateVector:
        try:
            return {"0L": self.zero_l, "1L": self.one_l, "0E": self.zero_e, "1E": self.one_e}[which]
        except KeyError:
            raise ValueError(f"unknown code word {which!r}; expected one of {WORDS}") from None


@lru_cache(maxsize=None)
def logical_basis(cutoff=None) -> LogicalBasis:
    c = as_cutoff(cutoff).require()
    return LogicalBasis(
        zero_l=superpose([(1, 0), (1, 4)], c),
        one_l=basis(2, c),
        zero_e=basis(3, c),
        one_e=basis(1, c),
    )


@dataclass(frozen=True, eq=False)
class ParityProjector:
    parity: str
    matrix: FockOperator


@lru_cache(maxsize=None)
def parity_projector(parity, cutoff=None) -> ParityProjector:
    # the even projector keeps the top level when n_max - 1 is even
    if parity not in ("odd", "even"):
        raise ValueError(f"parity must be 'odd' or 'even', got {parity!r}")
    c = as_cutoff(cutoff)
    keep = (c.levels % 2 == 1) if parity == "odd" else (c.levels % 2 == 0)
    return ParityProjector(parity, FockOperator(np.diag(keep.astype(complex))))


def logical_state(alpha, beta, cutoff=None) -> StateVector:
    """alpha |0_L> + beta |1_L>."""
    norm = abs(alpha) ** 2 + abs(beta) ** 2
    if abs(norm - 1.0) > POLICY.norm_tol:
        raise NormalizationError(f"|alpha|^2 + |beta|^2 = {norm!r}, expected 1")
    lb = logical_basis(as_cutoff(cutoff))
    return StateVector(alpha * lb.zero_l.amplitudes + beta * lb.one_l.amplitudes)


def error_state(alpha, beta, cutoff=None) -> StateVector:
    """alpha |0_E> + beta |1_E>, the image of a logical state after one photon loss."""
    norm = abs(alpha) ** 2 + abs(beta) ** 2
    if abs(norm - 1.0) > POLICY.norm_tol:
        raise NormalizationError(f"|alpha|^2 + |beta|^2 = {norm!r}, expected 1")
    lb = logical_basis(as_cutoff(cutoff))
    return StateVector(alpha * lb.zero_e.amplitudes + beta * lb.one_e.amplitudes)


def project_parity(rho, parity="odd"):
    """Ideal parity measurement; returns (post-measurement state, probability)."""
    if isinstance(rho, StateVector):
        rho = rho.dm()
    p = parity_projector(parity, rho.cutoff).matrix.matrix
    projected = p @ rho.entries @ p
    prob = float(np.trace(projected).real)
    if prob < POLICY.support_tol:
        raise NoSupportError(
            f"{parity} parity outcome has probability {prob:.3g}", probability=max(prob, 0.0)
        )
    return DensityMatrix(projected / prob), min(prob, 1.0)


def logical_population(state, which) -> float:
    """|<word|psi>|^2 or <word|rho|word> for a code or error word."""
    word = logical_basis(state.cutoff).word(which)
    if isinstance(state, StateVector):
        return float(abs(word.overlap(state)) ** 2)
    v = word.amplitudes
    return float(np.vdot(v, state.entries @ v).real)


def phase_generator(cutoff=None, kp: KerrParams | None = None) -> np.ndarray:
    """Diagonal of the chi-free phase generator N^2 - 4N (or N^2 + (Delta/chi) N)."""
    c = as_cutoff(cutoff)
    quad, lin = (1.0, -4.0) if kp is None else kp.phase_generator_coefficients
    n = c.levels.astype(float)
    return quad * n * n + lin * n


def phase_rotate(state, theta, kp: KerrParams | None = None):
    """U_theta state (U_theta^dag for density matrices conjugated accordingly)."""
    g = phase_generator(state.cutoff, kp)
    u = np.exp(-1j * g * theta)
    if isinstance(state, StateVector):
        return StateVector(u * state.amplitudes)
    return DensityMatrix(u[:, None] * state.entries * u.conj()[None, :])


def _fundamental_period(freqs):
    """2 pi / gcd of the objective's frequencies when they are all integers."""
    f = np.unique(np.abs(np.round(freqs.ravel())))
    if not np.allclose(freqs, np.round(freqs), atol=1e-9):
        return 2 * math.pi
    f = f[f > 0].astype(int)
    if f.size == 0:
        return 2 * math.pi
    return 2 * math.pi / int(np.gcd.reduce(f))


def phase_optimized_fidelity(rho, target: StateVector, kp: KerrParams | None = None):
    """max over theta of <psi| U_theta^dag rho U_theta |psi>, U_theta = exp(-i G theta).

    ``G = N^2 - 4N`` carries no chi, so theta has period 2 pi. Returns the
    fidelity and the maximizing theta, folded into the objective's fundamental
    period (a divisor of 2 pi, e.g. pi/2 for targets on the code space).
    """
    if isinstance(rho, StateVector):
        rho = rho.dm()
    if rho.cutoff != target.cutoff:
        raise CutoffMismatchError("rho and target have different cutoffs")
    g = phase_generator(rho.cutoff, kp)
    c = target.amplitudes
    support = np.flatnonzero(np.abs(c) > 0)
    cs, gs = c[support], g[support]
    block = rho.entries[np.ix_(support, support)]
    # F(theta) = sum_mn conj(c_m) c_n rho_mn exp(i (g_m - g_n) theta)
    weights = np.conj(cs)[:, None] * block * cs[None, :]
    freqs = gs[:, None] - gs[None, :]

    def fid(theta):
        return float(np.sum(weights * np.exp(1j * freqs * theta)).real)

    spread = float(np.max(np.abs(freqs))) if freqs.size else 0.0
    count = max(POLICY.theta_grid, int(math.ceil(16 * spread)))
    thetas = 2 * math.pi * np.arange(count) / count
    values = np.einsum("mn,tmn->t", weights, np.exp(1j * freqs[None] * thetas[:, None, None])).real
    k = int(np.argmax(values))
    step = 2 * math.pi / count
    theta, best = golden_section_max(
        fid, thetas[k] - step, thetas[k] + step, tol=POLICY.theta_width
    )
    if best < values[k]:
        theta, best = thetas[k], float(values[k])
    period = _fundamental_period(freqs)
    theta = theta % period
    if period - theta < POLICY.theta_snap:
        theta = 0.0
    return min(1.0, max(0.0, best)), theta
