"""Discrete memoryless source analysis.

Rate-distortion function R(P,D) by alternating minimization with a
Lagrangian slope sweep, its simplex gradient by central differences, and
the source dispersion Var_P of that gradient.

Rates are nats per source sample; the gradient convention is centered
(g(s) = d/de R((1-e)P + e*delta_s, D) at e=0), which differs from raw
partial derivatives by an additive constant that the variance ignores.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BoundaryDistortion, DomainError, NonConvergence, StepTooLarge
from .probcore import Distribution, q_inverse

BOUNDARY_TOL = 1e-12
DEFAULT_RDF_TOL = 1e-9
DEFAULT_H_STEP = 1e-5
_INNER_TOL = 1e-13
_MAX_INNER_ITER = 100_000
_MAX_SLOPE_ITER = 300


@dataclass(frozen=True)
class SourceSpec:
    """A source distribution plus a nonnegative |S| x |Shat| distortion matrix.

    Normalization: every source symbol has at least one zero-distortion
    reproduction, so the minimal achievable distortion is 0.
    """

    distribution: Distribution
    distortion: np.ndarray

    def __post_init__(self):
        mat = np.array(self.distortion, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != self.distribution.alphabet_size:
            raise DomainError(
                "distortion must be 2-D with one row per source symbol"
            )
        if not np.all(np.isfinite(mat)) or np.any(mat < 0):
            raise DomainError("distortion entries must be finite and nonnegative")
        if np.any(mat.min(axis=1) > 0):
            raise DomainError(
                "every source symbol needs a zero-distortion reproduction"
            )
        mat.setflags(write=False)
        object.__setattr__(self, "distortion", mat)

    @property
    def source_size(self) -> int:
        return int(self.distortion.shape[0])

    @property
    def reproduction_size(self) -> int:
        return int(self.distortion.shape[1])


@dataclass(frozen=True)
class RdfResult:
    rate: float
    test_channel: np.ndarray
    lagrange_slope: float
    achieved_distortion: float


def d_max(src: SourceSpec) -> float:
    """Distortion where R hits zero: the best constant reproduction."""
    return float(np.min(src.distribution.probs @ src.distortion))


def _mutual_information_pl(p: np.ndarray, lam: np.ndarray) -> float:
    out = p @ lam
    joint = p[:, None] * lam
    mask = joint > 0
    return max(float(np.sum(joint[mask] * np.log(
        lam[mask] / np.broadcast_to(out, joint.shape)[mask]))), 0.0)


def _blahut_fixed_slope(p: np.ndarray, dmat: np.ndarray, slope: float,
                        zero_mask: np.ndarray | None = None,
                        q0: np.ndarray | None = None):
    """Alternating minimization at a fixed Lagrangian slope s <= 0.

    Returns (rate, distortion, test_channel, q). With ``zero_mask`` the
    exp(s*d) weights become the indicator of d == 0 (the s -> -inf limit),
    which solves the D = 0 endpoint. ``q0`` warm-starts the reproduction
    marginal.
    """
    a = zero_mask.astype(float) if zero_mask is not None else np.exp(slope * dmat)
    n_hat = dmat.shape[1]
    q = np.full(n_hat, 1.0 / n_hat) if q0 is None else q0.copy()
    support = p > 0
    p_s = p[support]
    a_s = a[support]
    for _ in range(_MAX_INNER_ITER):
        denom = a_s @ q
        if np.any(denom <= 0):
            # a dead start can zero a normalizer; restart from uniform
            q = np.full(n_hat, 1.0 / n_hat)
            denom = a_s @ q
            if np.any(denom <= 0):
                raise NonConvergence("test-channel support collapsed")
        c = (p_s / denom) @ a_s
        q_new = q * c
        # two-sided bracket on the Lagrangian value at this slope
        pos = q_new > 0
        t_upper = -float(np.sum(q_new[pos] * np.log(c[pos])))
        t_lower = -float(np.log(np.max(c[pos])))
        q = q_new / q_new.sum()
        if t_upper - t_lower <= _INNER_TOL:
            break
    else:
        raise NonConvergence("rate-distortion inner loop did not converge")
    denom = a_s @ q
    lam = np.zeros_like(a)
    lam[support] = (q[None, :] * a_s) / denom[:, None]
    if np.any(~support):
        lam[~support] = q  # rows off the source support never matter
    dist = float(np.sum(p[:, None] * lam * dmat))
    rate = _mutual_information_pl(p, lam)
    return rate, dist, lam, q


def rdf(src: SourceSpec, d: float, tol: float = DEFAULT_RDF_TOL) -> RdfResult:
    """R(P,D): minimal mutual information over test channels meeting D.

    Sweeps the Lagrangian slope (bracketed bisection with secant proposals
    and warm starts) until the achieved distortion is within ``tol`` of D,
    then applies the tangent-line correction R(D) ~= R(D(s)) + s*(D - D(s)),
    exact to O((D - D(s))^2) and exact on linear segments. Values of D
    within 1e-12 of 0 or d_max route to closed-form endpoints.
    """
    if d < 0:
        raise DomainError("distortion level must be nonnegative")
    if tol <= 0:
        raise DomainError("tol must be positive")
    p = src.distribution.probs
    dmat = src.distortion
    dm = d_max(src)

    if d >= dm - BOUNDARY_TOL:
        best = int(np.argmin(p @ dmat))
        lam = np.zeros_like(dmat)
        lam[:, best] = 1.0
        return RdfResult(0.0, lam, 0.0, float((p @ dmat)[best]))

    if d <= BOUNDARY_TOL:
        rate, dist, lam, _ = _blahut_fixed_slope(p, dmat, 0.0,
                                                 zero_mask=(dmat == 0))
        return RdfResult(rate, lam, -math.inf, dist)

    # bracket the slope: distortion grows toward d_max as slope -> 0-
    s_lo, q_warm = -1.0, None
    for _ in range(80):
        _, dist_lo, _, q_warm = _blahut_fixed_slope(p, dmat, s_lo, q0=q_warm)
        if dist_lo <= d:
            break
        s_lo *= 2.0
    else:
        raise NonConvergence("could not bracket the rate-distortion slope")
    s_hi, dist_hi = 0.0, dm
    evals = [(s_lo, dist_lo)]
    slope, rate_s, dist_s, lam = s_lo, None, dist_lo, None
    for _ in range(_MAX_SLOPE_ITER):
        # secant proposal from the two most recent evaluations, clipped to
        # the bracket; fall back to its midpoint
        slope = 0.5 * (s_lo + s_hi)
        if len(evals) >= 2:
            (s1, d1), (s2, d2) = evals[-2], evals[-1]
            if d2 != d1:
                cand = s2 + (d - d2) * (s1 - s2) / (d1 - d2)
                if s_lo < cand < s_hi:
                    slope = cand
        rate_s, dist_s, lam, q_warm = _blahut_fixed_slope(p, dmat, slope,
                                                          q0=q_warm)
        evals.append((slope, dist_s))
        if abs(dist_s - d) <= tol:
            break
        if dist_s < d:
            s_lo = slope
        else:
            s_hi = slope
        if s_hi - s_lo <= 1e-15 * max(1.0, abs(s_lo)):
            break  # slope pinned; the tangent correction handles the rest
    rate = max(rate_s + slope * (d - dist_s), 0.0)
    return RdfResult(rate, lam, slope, dist_s)


def rdf_gradient(src: SourceSpec, d: float,
                 h_step: float = DEFAULT_H_STEP) -> np.ndarray:
    """Centered simplex gradient of R(Q,D) at Q=P by central differences.

    Perturbs along Q_e = (1-e)P + e*delta_s, which stays on the simplex;
    the result is the raw partials minus their P-mean.
    """
    if h_step <= 0:
        raise DomainError("h_step must be positive")
    dm = d_max(src)
    if not (BOUNDARY_TOL < d < dm - BOUNDARY_TOL):
        raise BoundaryDistortion(
            f"gradient needs D strictly inside (0, {dm}); got {d}"
        )
    p = src.distribution.probs
    k = p.size
    grad = np.zeros(k)
    tol = 1e-11
    for s in range(k):
        if (1.0 + h_step) * p[s] - h_step < 0:
            raise StepTooLarge(
                f"h_step={h_step} pushes coordinate {s} below the simplex"
            )
        delta = np.zeros(k)
        delta[s] = 1.0
        q_plus = (1 - h_step) * p + h_step * delta
        q_minus = np.maximum((1 + h_step) * p - h_step * delta, 0.0)
        r_plus = rdf(_replace_dist(src, q_plus), d, tol).rate
        r_minus = rdf(_replace_dist(src, q_minus), d, tol).rate
        grad[s] = (r_plus - r_minus) / (2 * h_step)
    return grad


def _replace_dist(src: SourceSpec, probs: np.ndarray) -> SourceSpec:
    return SourceSpec(Distribution(probs / probs.sum()), src.distortion)


def source_dispersion(src: SourceSpec, d: float,
                      h_step: float = DEFAULT_H_STEP) -> float:
    """V_S(P,D) = Var_P[ dR(Q,D)/dQ ], invariant to the centering constant."""
    g = rdf_gradient(src, d, h_step)
    p = src.distribution.probs
    mean = float(np.dot(p, g))
    return max(float(np.dot(p, (g - mean) ** 2)), 0.0)


def source_rate_at(src: SourceSpec, d: float, n: int, eps: float,
                   h_step: float = DEFAULT_H_STEP) -> float:
    """Normal approximation R(P,D) + sqrt(V_S/n) * Qinv(eps), in nats.

    The O(log n / n) correction term is omitted (flagged in CLI reports).
    """
    if n < 1:
        raise DomainError("n must be at least 1")
    if not (0.0 < eps < 1.0):
        raise DomainError("eps must lie in (0, 1)")
    rate = rdf(src, d).rate
    v_s = source_dispersion(src, d, h_step)
    return rate + math.sqrt(v_s / n) * q_inverse(eps)
