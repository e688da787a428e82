"""Truncated Fock space: cutoffs, states, operators and ladder algebra.

Everything is dense. Dimensions stay below ~32, where plain ``numpy`` arrays
are both simpler and faster than sparse storage. All value types are
immutable after construction (their arrays are flagged read-only).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import CutoffMismatchError, InvalidCutoffError, NormalizationError
from .policy import POLICY

log = logging.getLogger(__name__)

#: smallest space on which a ladder operator is non-trivial
LADDER_MINIMUM = 2
#: code words need levels 0..4 and drives leak upward
CODE_MINIMUM = 6
DEFAULT_N_MAX = 16


@dataclass(frozen=True)
class Cutoff:
    """Dimension of the truncated space; Fock levels ``0 .. n_max - 1``."""

    n_max: int = DEFAULT_N_MAX

    def __post_init__(self):
        if isinstance(self.n_max, bool) or not isinstance(self.n_max, (int, np.integer)):
            raise InvalidCutoffError(f"n_max must be an integer, got {self.n_max!r}")
        if self.n_max < LADDER_MINIMUM:
            raise InvalidCutoffError(
                f"n_max={self.n_max} is below the minimum of {LADDER_MINIMUM}"
            )
        object.__setattr__(self, "n_max", int(self.n_max))

    def require(self, minimum=CODE_MINIMUM):
        if self.n_max < minimum:
            raise InvalidCutoffError(
                f"n_max={self.n_max} is below the minimum of {minimum} needed here"
            )
        return self

    @property
    def levels(self):
        return np.arange(self.n_max)


def as_cutoff(cutoff) -> Cutoff:
    if cutoff is None:
        return Cutoff()
    if isinstance(cutoff, Cutoff):
        return cutoff
    return Cutoff(cutoff)


def _frozen(array, dtype=complex):
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def _same_cutoff(a, b):
    if a.cutoff != b.cutoff:
        raise CutoffMismatchError(
            f"cutoff mismatch: n_max={a.cutoff.n_max} vs n_max={b.cutoff.n_max}"
        )


class FockOperator:
    """Dense complex matrix acting on a truncated Fock space."""

    __slots__ = ("matrix", "cutoff")

    def __init__(self, matrix):
        m = _frozen(matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"operator matrix must be square, got shape {m.shape}")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "cutoff", Cutoff(m.shape[0]))

    def __setattr__(self, name, value):
        raise AttributeError("FockOperator is immutable")

    def __repr__(self):
        return f"FockOperator(n_max={self.cutoff.n_max})"

    def __reduce__(self):
        return (FockOperator, (np.array(self.matrix),))

    def dag(self) -> FockOperator:
        return FockOperator(self.matrix.conj().T)

    def is_hermitian(self, tol=POLICY.hermitian_tol):
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T))) <= tol

    def __add__(self, other):
        if not isinstance(other, FockOperator):
            return NotImplemented
        _same_cutoff(self, other)
        return FockOperator(self.matrix + other.matrix)

    def __sub__(self, other):
        if not isinstance(other, FockOperator):
            return NotImplemented
        _same_cutoff(self, other)
        return FockOperator(self.matrix - other.matrix)

    def __neg__(self):
        return FockOperator(-self.matrix)

    def __mul__(self, scalar):
        if isinstance(scalar, (FockOperator, StateVector, DensityMatrix)):
            return NotImplemented
        return FockOperator(self.matrix * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return FockOperator(self.matrix / scalar)

    def __matmul__(self, other):
        if isinstance(other, FockOperator):
            _same_cutoff(self, other)
            return FockOperator(self.matrix @ other.matrix)
        if isinstance(other, StateVector):
            _same_cutoff(self, other)
            # result need not be normalized (e.g. a|psi>)
            return self.matrix @ other.amplitudes
        return NotImplemented


class StateVector:
    """Normalized pure state on the truncated space."""

    __slots__ = ("amplitudes", "cutoff")

    def __init__(self, amplitudes, normalize=False):
        v = np.array(amplitudes, dtype=complex)
        if v.ndim != 1:
            raise ValueError(f"state vector must be 1-d, got shape {v.shape}")
        norm = float(np.linalg.norm(v))
        if normalize:
            if norm == 0.0:
                raise NormalizationError("cannot normalize the zero vector")
            v = v / norm
        elif abs(norm - 1.0) > POLICY.norm_tol:
            raise NormalizationError(f"state norm {norm!r} deviates from 1")
        object.__setattr__(self, "amplitudes", _frozen(v))
        object.__setattr__(self, "cutoff", Cutoff(v.shape[0]))

    def __setattr__(self, name, value):
        raise AttributeError("StateVector is immutable")

    def __repr__(self):
        return f"StateVector(n_max={self.cutoff.n_max})"

    def __reduce__(self):
        return (StateVector, (np.array(self.amplitudes),))

    def overlap(self, other: StateVector) -> complex:
        """<self|other>"""
        _same_cutoff(self, other)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def dm(self) -> DensityMatrix:
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()))


class DensityMatrix:
    """Mixed state. Hermiticity, unit trace and positivity are checked on entry."""

    __slots__ = ("entries", "cutoff")

    def __init__(self, entries, validate=True):
        rho = np.array(entries, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValueError(f"density matrix must be square, got shape {rho.shape}")
        if validate:
            herm = float(np.max(np.abs(rho - rho.conj().T)))
            if herm > POLICY.hermitian_tol:
                raise ValueError(f"density matrix not Hermitian (deviation {herm:.3g})")
            tr = np.trace(rho).real
            if abs(tr - 1.0) > POLICY.trace_tol:
                raise NormalizationError(f"density matrix trace {tr!r} deviates from 1")
            lo = float(np.linalg.eigvalsh(rho).min())
            if lo < POLICY.positivity_floor:
                raise ValueError(f"density matrix has eigenvalue {lo:.3g} < 0")
        object.__setattr__(self, "entries", _frozen(rho))
        object.__setattr__(self, "cutoff", Cutoff(rho.shape[0]))

    def __setattr__(self, name, value):
        raise AttributeError("DensityMatrix is immutable")

    def __repr__(self):
        return f"DensityMatrix(n_max={self.cutoff.n_max})"

    def __reduce__(self):
        return (DensityMatrix, (np.array(self.entries), False))

    @property
    def trace(self) -> float:
        return float(np.trace(self.entries).real)

    @property
    def purity(self) -> float:
        return float(np.einsum("ij,ji->", self.entries, self.entries).real)

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T)))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.entries).min())

    def populations(self) -> np.ndarray:
        return np.diag(self.entries).real.copy()


# --------------------------------------------------------------------------
# constructors


@lru_cache(maxsize=None)
def _ladder(n_max):
    a = np.diag(np.sqrt(np.arange(1, n_max, dtype=float)), k=1).astype(complex)
    a.setflags(write=False)
    return a


def annihilation(cutoff=None) -> FockOperator:
    """Lowering operator with <n-1|a|n> = sqrt(n)."""
    c = as_cutoff(cutoff)
    return FockOperator(_ladder(c.n_max))


def creation(cutoff=None) -> FockOperator:
    return annihilation(cutoff).dag()


def number_op(cutoff=None) -> FockOperator:
    # exact integers on the diagonal, including the top retained level
    c = as_cutoff(cutoff)
    return FockOperator(np.diag(c.levels.astype(complex)))


def identity(cutoff=None) -> FockOperator:
    c = as_cutoff(cutoff)
    return FockOperator(np.eye(c.n_max, dtype=complex))


def basis(n, cutoff=None) -> StateVector:
    c = as_cutoff(cutoff)
    if not 0 <= n < c.n_max:
        raise InvalidCutoffError(f"Fock level {n} outside cutoff n_max={c.n_max}")
    v = np.zeros(c.n_max, dtype=complex)
    v[n] = 1.0
    return StateVector(v)


def superpose(terms, cutoff=None) -> StateVector:
    """Normalized sum of ``coefficient * |n>`` for (coefficient, n) pairs."""
    c = as_cutoff(cutoff)
    v = np.zeros(c.n_max, dtype=complex)
    for coeff, n in terms:
        v[n] += coeff
    return StateVector(v, normalize=True)


# --------------------------------------------------------------------------
# measurements


def expectation(op: FockOperator, state) -> complex:
    """<psi|O|psi> for a StateVector, tr(O rho) for a DensityMatrix.

    For Hermitian ``op`` a residual imaginary part above ``real_tol`` is logged.
    """
    _same_cutoff(op, state)
    if isinstance(state, StateVector):
        psi = state.amplitudes
        value = complex(np.vdot(psi, op.matrix @ psi))
    elif isinstance(state, DensityMatrix):
        value = complex(np.einsum("ij,ji->", op.matrix, state.entries))
    else:
        raise TypeError(f"expected StateVector or DensityMatrix, got {type(state).__name__}")
    if abs(value.imag) > POLICY.real_tol and op.is_hermitian():
        log.debug("expectation of Hermitian operator has imaginary part %.3g", value.imag)
    return value


def fidelity_pure(target: StateVector, rho) -> float:
    """<psi|rho|psi>, the overlap of a mixed state with a pure target."""
    if not isinstance(target, StateVector):
        raise TypeError("target must be a StateVector")
    norm = float(np.linalg.norm(target.amplitudes))
    if abs(norm - 1.0) > POLICY.norm_tol:
        raise NormalizationError(f"target norm {norm!r} deviates from 1")
    if isinstance(rho, StateVector):
        rho = rho.dm()
    _same_cutoff(target, rho)
    psi = target.amplitudes
    value = complex(np.vdot(psi, rho.entries @ psi))
    if abs(value.imag) > POLICY.real_tol:
        raise ValueError(f"fidelity has imaginary part {value.imag:.3g}; is rho Hermitian?")
    return float(min(1.0, max(0.0, value.real)))
