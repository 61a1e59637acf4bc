"""Finite-alphabet probability primitives and method-of-types machinery.

All logarithms are natural (nats); the CLI converts to bits on output.
The conventions 0*log(0) = 0 and 0*log(0/0) = 0 are applied throughout.
Every value type is immutable after construction, so everything here is
safe for concurrent use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    AbsoluteContinuityViolated,
    DomainError,
    EnumerationTooLarge,
    LengthMismatch,
    SymbolOutOfRange,
)

SUM_TOL = 1e-12
DEFAULT_ENUMERATION_CAP = 10_000_000


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Distribution:
    """A probability vector over a finite alphabet.

    Entries must be nonnegative and sum to 1 within ``SUM_TOL``.
    """

    probs: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.probs, float)
        if arr.ndim != 1 or arr.size == 0:
            raise DomainError("probs must be a nonempty 1-D vector")
        if not np.all(np.isfinite(arr)):
            raise DomainError("probs must be finite")
        if np.any(arr < 0):
            raise DomainError("probs must be nonnegative")
        if abs(float(arr.sum()) - 1.0) > SUM_TOL:
            raise DomainError(
                f"probs must sum to 1 within {SUM_TOL}, got {float(arr.sum())!r}"
            )
        object.__setattr__(self, "probs", arr)

    @property
    def alphabet_size(self) -> int:
        return int(self.probs.size)

    def __len__(self) -> int:
        return self.alphabet_size


@dataclass(frozen=True)
class Channel:
    """A discrete memoryless channel: a row-stochastic |X| x |Y| matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        mat = _frozen_array(self.matrix, float)
        if mat.ndim != 2 or mat.size == 0:
            raise DomainError("channel matrix must be a nonempty 2-D array")
        if not np.all(np.isfinite(mat)):
            raise DomainError("channel matrix must be finite")
        if np.any(mat < 0):
            raise DomainError("channel matrix must be nonnegative")
        row_sums = mat.sum(axis=1)
        if np.any(np.abs(row_sums - 1.0) > SUM_TOL):
            raise DomainError(
                f"each channel row must sum to 1 within {SUM_TOL}; "
                f"row sums are {row_sums.tolist()}"
            )
        object.__setattr__(self, "matrix", mat)

    @property
    def input_size(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def output_size(self) -> int:
        return int(self.matrix.shape[1])


@dataclass(frozen=True)
class EmpiricalType:
    """The type (empirical distribution scaled by n) of a length-n sequence."""

    counts: np.ndarray
    n: int

    def __post_init__(self):
        counts = _frozen_array(self.counts, np.int64)
        if counts.ndim != 1 or counts.size == 0:
            raise DomainError("counts must be a nonempty 1-D integer vector")
        if np.any(counts < 0):
            raise DomainError("counts must be nonnegative")
        if self.n < 1:
            raise DomainError("block length n must be positive")
        if int(counts.sum()) != int(self.n):
            raise DomainError(
                f"counts must sum to n={self.n}, got {int(counts.sum())}"
            )
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "n", int(self.n))

    @property
    def alphabet_size(self) -> int:
        return int(self.counts.size)

    def distribution(self) -> Distribution:
        return Distribution(self.counts / self.n)


@dataclass(frozen=True)
class ConditionalType:
    """Joint counts of an (input, output) sequence pair.

    Row marginals reproduce the input sequence's type exactly.
    """

    joint_counts: np.ndarray
    n: int

    def __post_init__(self):
        joint = _frozen_array(self.joint_counts, np.int64)
        if joint.ndim != 2 or joint.size == 0:
            raise DomainError("joint_counts must be a nonempty 2-D integer array")
        if np.any(joint < 0):
            raise DomainError("joint_counts must be nonnegative")
        if self.n < 1:
            raise DomainError("block length n must be positive")
        if int(joint.sum()) != int(self.n):
            raise DomainError(
                f"joint counts must sum to n={self.n}, got {int(joint.sum())}"
            )
        object.__setattr__(self, "joint_counts", joint)
        object.__setattr__(self, "n", int(self.n))

    def row_marginal(self) -> EmpiricalType:
        return EmpiricalType(self.joint_counts.sum(axis=1), self.n)

    def column_marginal(self) -> EmpiricalType:
        return EmpiricalType(self.joint_counts.sum(axis=0), self.n)


# ---------------------------------------------------------------------------
# Entropy and divergence quantities
# ---------------------------------------------------------------------------

def entropy(p: Distribution) -> float:
    """Shannon entropy H(p) in nats, with 0*log(0) = 0."""
    probs = p.probs
    mask = probs > 0
    return float(-np.sum(probs[mask] * np.log(probs[mask])))


def kl_divergence(p: Distribution, q: Distribution) -> float:
    """Relative entropy D(p || q) in nats.

    Requires absolute continuity: q_i = 0 implies p_i = 0.
    """
    if p.alphabet_size != q.alphabet_size:
        raise DomainError("p and q must share an alphabet")
    pp, qq = p.probs, q.probs
    if np.any((qq == 0) & (pp > 0)):
        raise AbsoluteContinuityViolated("support(p) must be contained in support(q)")
    mask = pp > 0
    return float(np.sum(pp[mask] * np.log(pp[mask] / qq[mask])))


def divergence_variance(p: Distribution, q: Distribution) -> float:
    """Variance of the log-likelihood ratio log(p/q) under p, in nats^2."""
    if p.alphabet_size != q.alphabet_size:
        raise DomainError("p and q must share an alphabet")
    pp, qq = p.probs, q.probs
    if np.any((qq == 0) & (pp > 0)):
        raise AbsoluteContinuityViolated("support(p) must be contained in support(q)")
    mask = pp > 0
    ratio = np.log(pp[mask] / qq[mask])
    mean = float(np.sum(pp[mask] * ratio))
    second = float(np.sum(pp[mask] * ratio * ratio))
    return max(second - mean * mean, 0.0)


# ---------------------------------------------------------------------------
# Gaussian tail utilities
# ---------------------------------------------------------------------------

_SQRT2 = math.sqrt(2.0)


def q_function(x: float) -> float:
    """Gaussian tail Q(x) = P[N(0,1) > x] = erfc(x / sqrt(2)) / 2.

    Max absolute error is that of the platform erfc, well below 1e-12.
    """
    if not math.isfinite(x):
        raise DomainError("q_function requires finite x")
    return 0.5 * math.erfc(x / _SQRT2)


def q_inverse(eps: float) -> float:
    """Inverse of :func:`q_function` on (0, 1) by monotone bisection.

    The bracket is refined below 1e-12 in the argument; q_inverse(0.5)
    returns exactly 0.
    """
    if not (0.0 < eps < 1.0):
        raise DomainError("q_inverse requires eps in (0, 1)")
    lo, hi = -40.0, 40.0  # Q(40) underflows to 0, Q(-40) rounds to 1
    for _ in range(120):
        mid = 0.5 * (lo + hi)
        qm = q_function(mid)
        if qm == eps:
            return mid
        if qm > eps:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12:
            break
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Types of sequences
# ---------------------------------------------------------------------------

def _as_symbols(seq, alphabet_size: int, what: str) -> np.ndarray:
    arr = np.asarray(seq, dtype=np.int64)
    if arr.ndim != 1 or arr.size == 0:
        raise DomainError(f"{what} must be a nonempty 1-D symbol sequence")
    if np.any(arr < 0) or np.any(arr >= alphabet_size):
        raise SymbolOutOfRange(
            f"{what} contains symbols outside [0, {alphabet_size})"
        )
    return arr


def empirical_type(sequence, alphabet_size: int) -> EmpiricalType:
    """Count occurrences of each symbol: P_x(a) = N(a|x)/n scaled by n."""
    if alphabet_size < 1:
        raise DomainError("alphabet_size must be positive")
    arr = _as_symbols(sequence, alphabet_size, "sequence")
    counts = np.bincount(arr, minlength=alphabet_size)
    return EmpiricalType(counts, int(arr.size))


def conditional_type(x, y, input_size: int | None = None,
                     output_size: int | None = None) -> ConditionalType:
    """Joint counts N(a,b | x,y) of a paired sequence, as a ConditionalType."""
    xa = np.asarray(x, dtype=np.int64)
    ya = np.asarray(y, dtype=np.int64)
    if xa.size != ya.size:
        raise LengthMismatch(f"len(x)={xa.size} != len(y)={ya.size}")
    if input_size is None:
        input_size = int(xa.max()) + 1 if xa.size else 1
    if output_size is None:
        output_size = int(ya.max()) + 1 if ya.size else 1
    xa = _as_symbols(xa, input_size, "x")
    ya = _as_symbols(ya, output_size, "y")
    flat = np.bincount(xa * output_size + ya, minlength=input_size * output_size)
    joint = flat.reshape(input_size, output_size)
    return ConditionalType(joint, int(xa.size))


def count_n_types(alphabet_size: int, n: int) -> int:
    """Number of n-types over a k-symbol alphabet: C(n+k-1, k-1)."""
    return math.comb(n + alphabet_size - 1, alphabet_size - 1)


def enumerate_n_types(alphabet_size: int, n: int,
                      cap: int = DEFAULT_ENUMERATION_CAP) -> list[EmpiricalType]:
    """All count vectors summing to n, in colexicographic order.

    Raises EnumerationTooLarge when the stars-and-bars count exceeds ``cap``.
    """
    if alphabet_size < 1 or n < 1:
        raise DomainError("alphabet_size and n must be positive")
    total = count_n_types(alphabet_size, n)
    if total > cap:
        raise EnumerationTooLarge(
            f"{total} types exceed the cap of {cap}"
        )

    out: list[EmpiricalType] = []
    counts = np.zeros(alphabet_size, dtype=np.int64)

    def fill(pos: int, remaining: int):
        # Later coordinates vary slowest: recurse from the last symbol down.
        if pos == 0:
            counts[0] = remaining
            out.append(EmpiricalType(counts.copy(), n))
            return
        for c in range(remaining + 1):
            counts[pos] = c
            fill(pos - 1, remaining - c)

    fill(alphabet_size - 1, n)
    return out


def nearest_type(dist: Distribution, n: int) -> EmpiricalType:
    """An n-type within 1/n of ``dist`` in sup norm (largest-remainder rounding)."""
    if n < 1:
        raise DomainError("n must be positive")
    scaled = dist.probs * n
    base = np.floor(scaled).astype(np.int64)
    short = n - int(base.sum())
    if short:
        order = np.argsort(scaled - base, kind="stable")[::-1]
        base[order[:short]] += 1
    return EmpiricalType(base, n)


def canonical_word(etype: EmpiricalType) -> np.ndarray:
    """A fixed arrangement of a type: symbol a repeated counts[a] times."""
    return np.repeat(np.arange(etype.alphabet_size, dtype=np.int64), etype.counts)
