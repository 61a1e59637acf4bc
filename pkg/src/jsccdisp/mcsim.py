"""Monte-Carlo and exact-enumeration validation of the dispersion claims.

Simulations are organized around empirical types: for a fixed
constant-composition input word only the joint counts matter, so trials
sample sufficient counts (multinomials) instead of symbol sequences, which
has the identical law and vectorizes across trials.

Reproducibility contract: trials are grouped into fixed-size batches
(``DEFAULT_BATCH``); batch b draws from a Philox stream keyed by
(seed, b). Workers consume whole batches and aggregation is associative
and order-fixed, so results are bit-identical for any worker count.
Because sampling never depends on swept parameters (thresholds, distortion
levels), a shared seed acts as common random numbers across a sweep.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, ndtr

from . import source as sa
from .channel import conditional_information_variance
from .errors import (
    BoundaryDistortion,
    DeltaTooLarge,
    DomainError,
    EnumerationTooLarge,
    JsccDispError,
    LengthMismatch,
    RateCapViolated,
    SymbolOutOfRange,
    ZeroVariance,
)
from .probcore import (
    Channel,
    DEFAULT_ENUMERATION_CAP,
    Distribution,
    EmpiricalType,
    entropy,
)
from .source import SourceSpec

DEFAULT_BATCH = 4096
_TABLE_CAP = 5_000_000


@dataclass(frozen=True)
class SimConfig:
    """Common simulation knobs; m = floor(rho * n) is derived."""

    seed: int
    trials: int
    n: int
    rho: float = 1.0

    def __post_init__(self):
        if self.trials < 1 or self.n < 1:
            raise DomainError("trials and n must be positive")
        if math.floor(self.rho * self.n) < 1:
            raise DomainError("rho * n must be at least 1")

    @property
    def m(self) -> int:
        return int(math.floor(self.rho * self.n))


@dataclass(frozen=True)
class SimResult:
    estimate: float
    std_error: float
    trials: int
    diagnostics: dict = field(default_factory=dict)


def _binomial_result(successes: int, trials: int, **diag) -> SimResult:
    est = successes / trials
    return SimResult(
        estimate=est,
        std_error=math.sqrt(est * (1.0 - est) / trials),
        trials=trials,
        diagnostics=dict(diag),
    )


# ---------------------------------------------------------------------------
# Seeding and batching
# ---------------------------------------------------------------------------

def _stream(seed: int, batch_index: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence((seed, batch_index)))
    )


def _batches(trials: int, batch: int = DEFAULT_BATCH):
    return [(b, min(batch, trials - b * batch))
            for b in range((trials + batch - 1) // batch)]


def _map_batches(fn, trials: int, workers: int):
    batches = _batches(trials)
    if workers <= 1:
        return [fn(b, size) for b, size in batches]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda args: fn(*args), batches))


# ---------------------------------------------------------------------------
# Elementary samplers
# ---------------------------------------------------------------------------

def sample_source_block(p: Distribution, n: int, rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. symbols from p, by inverse CDF on rng.random."""
    if n < 1:
        raise DomainError("n must be positive")
    cdf = np.cumsum(p.probs)
    u = rng.random(n)
    return np.minimum(
        np.searchsorted(cdf, u, side="right"), p.alphabet_size - 1
    ).astype(np.int64)


def sample_channel_output(x, w: Channel, rng: np.random.Generator) -> np.ndarray:
    """Independent per-position draws from the rows W(. | x_i)."""
    xa = np.asarray(x, dtype=np.int64)
    if np.any(xa < 0) or np.any(xa >= w.input_size):
        raise SymbolOutOfRange("channel input symbols out of range")
    cdf = np.cumsum(w.matrix, axis=1)[xa]
    u = rng.random(xa.size)
    return np.minimum(
        (u[:, None] > cdf).sum(axis=1), w.output_size - 1
    ).astype(np.int64)


def _joint_counts_given_type(row_counts: np.ndarray, w_mat: np.ndarray,
                             rng: np.random.Generator, size: int) -> np.ndarray:
    """Joint (X,Y) counts for a fixed input word of the given type.

    For each input symbol a, the output counts are Multinomial(r_a, W_a),
    independently; rows are drawn in ascending symbol order.
    """
    n_x, n_y = w_mat.shape
    joint = np.zeros((size, n_x, n_y), dtype=np.int64)
    for a in range(n_x):
        r_a = int(row_counts[a])
        if r_a > 0:
            joint[:, a, :] = rng.multinomial(r_a, w_mat[a], size=size)
    return joint


def _empirical_mi_batch(joint: np.ndarray, m: int) -> np.ndarray:
    """Empirical mutual information I(type, conditional type) per trial."""
    rows = joint.sum(axis=2, dtype=np.float64)           # (size, |X|)
    cols = joint.sum(axis=1, dtype=np.float64)           # (size, |Y|)
    jf = joint.astype(np.float64)
    denom = rows[:, :, None] * cols[:, None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = jf * np.log(jf * m / denom)
    terms[jf == 0] = 0.0
    return np.maximum(terms.sum(axis=(1, 2)) / m, 0.0)


# ---------------------------------------------------------------------------
# Excess-distortion event (Lemma-level simulation)
# ---------------------------------------------------------------------------

def excess_event_probability(src: SourceSpec, w: Channel, phi_m: EmpiricalType,
                             d: float, n: int, trials: int, seed: int,
                             workers: int = 1) -> SimResult:
    """Estimate P[ R(P_S, d) > rho * I(Phi_m, P_{Y|x}) ].

    Per trial the source type is a Multinomial(n, P) draw and the channel
    conditional type comes from a fixed word of type phi_m; rho is realized
    as m/n with m = phi_m.n. Rate-distortion values are memoized per source
    type. Types whose RDF cannot be evaluated count as excess (conservative
    boundary convention); their number is reported in the diagnostics.
    """
    if phi_m.alphabet_size != w.input_size:
        raise DomainError("phi_m must live on the channel input alphabet")
    if trials < 1 or n < 1:
        raise DomainError("trials and n must be positive")
    m = phi_m.n
    rho_eff = m / n
    p = src.distribution.probs
    row_counts = phi_m.counts

    @lru_cache(maxsize=None)
    def rate_of_type(counts: tuple) -> float:
        # NaN marks "RDF undefined" and is counted as excess downstream
        try:
            typed = SourceSpec(Distribution(np.array(counts) / n), src.distortion)
            return sa.rdf(typed, d, 1e-10).rate
        except JsccDispError:
            return math.nan

    def run(batch_index: int, size: int):
        rng = _stream(seed, batch_index)
        src_counts = rng.multinomial(n, p, size=size)
        joint = _joint_counts_given_type(row_counts, w.matrix, rng, size)
        mi = _empirical_mi_batch(joint, m)
        uniq, inverse = np.unique(src_counts, axis=0, return_inverse=True)
        rates = np.array([rate_of_type(tuple(int(c) for c in u)) for u in uniq])
        r_t = rates[inverse]
        undefined = np.isnan(r_t)
        excess = undefined | (r_t > rho_eff * mi)
        return int(excess.sum()), int(undefined.sum())

    parts = _map_batches(run, trials, workers)
    total = sum(p_[0] for p_ in parts)
    boundary = sum(p_[1] for p_ in parts)
    return _binomial_result(total, trials,
                            boundary_trials=boundary, rho_effective=rho_eff)


# ---------------------------------------------------------------------------
# First-order Gaussian statistics and their empirical CLT checks
# ---------------------------------------------------------------------------

def ks_distance_to_normal(samples: np.ndarray) -> float:
    """Kolmogorov-Smirnov sup distance between the ECDF and N(0,1)."""
    x = np.sort(np.asarray(samples, dtype=float))
    cdf = ndtr(x)
    k = x.size
    hi = np.arange(1, k + 1) / k
    lo = np.arange(0, k) / k
    return float(np.max(np.maximum(hi - cdf, cdf - lo)))


@dataclass(frozen=True)
class CltResult:
    """Standardized samples of a first-order statistic, with diagnostics."""

    samples: np.ndarray
    ks_statistic: float
    sample_mean: float
    sample_variance: float
    trials: int
    diagnostics: dict = field(default_factory=dict)


def _mi_deviation_coeff(phi: np.ndarray, w_mat: np.ndarray) -> np.ndarray:
    """log(W(y|x) / phiW(y)) with zeros where W vanishes."""
    out = phi @ w_mat
    coeff = np.zeros_like(w_mat)
    mask = w_mat > 0
    coeff[mask] = np.log(w_mat[mask] / np.broadcast_to(out, w_mat.shape)[mask])
    return coeff


def first_order_mi_samples(phi_n: EmpiricalType, w: Channel, trials: int,
                           seed: int, workers: int = 1,
                           var_tol: float = 1e-15) -> CltResult:
    """First-order term of the empirical-MI Taylor expansion, standardized.

    The statistic sum_{x,y} (P_{Y|x}(y|x) - W(y|x)) * I'_W(y|x) has variance
    exactly V(phi_n, W)/n; each sample is divided by its square root.
    """
    if phi_n.alphabet_size != w.input_size:
        raise DomainError("phi_n must live on the channel input alphabet")
    n = phi_n.n
    phi = phi_n.counts / n
    v_cond = conditional_information_variance(Distribution(phi), w)
    if v_cond <= var_tol:
        raise ZeroVariance(f"V(phi_n, W) = {v_cond} is numerically zero")
    coeff = _mi_deviation_coeff(phi, w.matrix)
    expected = phi_n.counts[:, None] * w.matrix
    scale = 1.0 / (n * math.sqrt(v_cond / n))

    def run(batch_index: int, size: int):
        rng = _stream(seed, batch_index)
        joint = _joint_counts_given_type(phi_n.counts, w.matrix, rng, size)
        dev = joint - expected[None, :, :]
        return (dev * coeff[None, :, :]).sum(axis=(1, 2)) * scale

    samples = np.concatenate(_map_batches(run, trials, workers))
    return CltResult(
        samples=samples,
        ks_statistic=ks_distance_to_normal(samples),
        sample_mean=float(samples.mean()),
        sample_variance=float(samples.var(ddof=1)),
        trials=trials,
        diagnostics={"standardizer_variance": v_cond / n},
    )


def first_order_jscc_samples(src: SourceSpec, d_star: float, w: Channel,
                             phi_m: EmpiricalType, n: int, trials: int,
                             seed: int, workers: int = 1,
                             h_step: float = sa.DEFAULT_H_STEP) -> CltResult:
    """First-order term of the distortion-rate expansion, standardized.

    A(S,Y) = sum_s (P_S(s)-P(s)) D'_P(s)
           + rho * D'_R * sum_{x,y} (P_{Y|x}(y|x)-W(y|x)) I'_W(y|x),
    a sum of n + m independent variables; the standardizer is its exact
    variance (D'_R)^2 V_S / n + (rho D'_R)^2 V(phi_m, W) / m with rho = m/n.
    """
    if phi_m.alphabet_size != w.input_size:
        raise DomainError("phi_m must live on the channel input alphabet")
    m = phi_m.n
    rho_eff = m / n
    p = src.distribution.probs

    rd = sa.rdf(src, d_star, 1e-11)
    slope = rd.lagrange_slope
    if not math.isfinite(slope) or slope >= 0:
        raise BoundaryDistortion(
            f"distortion-rate slope {slope} is degenerate at D = {d_star}"
        )
    d_r = 1.0 / slope
    grad = sa.rdf_gradient(src, d_star, h_step)
    dp = -grad * d_r                      # centered; constants cancel in A
    v_s = float(np.dot(p, (grad - np.dot(p, grad)) ** 2))

    phi = phi_m.counts / m
    v_chan = conditional_information_variance(Distribution(phi), w)
    sigma2 = (d_r ** 2) * v_s / n + (rho_eff * d_r) ** 2 * v_chan / m
    if sigma2 <= 1e-18:
        raise ZeroVariance("the first-order statistic has vanishing variance")

    coeff = _mi_deviation_coeff(phi, w.matrix)
    expected = phi_m.counts[:, None] * w.matrix
    chan_scale = rho_eff * d_r / m
    scale = 1.0 / math.sqrt(sigma2)

    def run(batch_index: int, size: int):
        rng = _stream(seed, batch_index)
        src_counts = rng.multinomial(n, p, size=size)
        joint = _joint_counts_given_type(phi_m.counts, w.matrix, rng, size)
        src_part = (src_counts / n - p) @ dp
        dev = joint - expected[None, :, :]
        chan_part = (dev * coeff[None, :, :]).sum(axis=(1, 2)) * chan_scale
        return (src_part + chan_part) * scale

    samples = np.concatenate(_map_batches(run, trials, workers))
    return CltResult(
        samples=samples,
        ks_statistic=ks_distance_to_normal(samples),
        sample_mean=float(samples.mean()),
        sample_variance=float(samples.var(ddof=1)),
        trials=trials,
        diagnostics={
            "standardizer_variance": sigma2,
            "d_prime_r": d_r,
            "v_s": v_s,
            "v_channel": v_chan,
            "rho_effective": rho_eff,
        },
    )


def xi_n_violation_rate(phi_n: EmpiricalType, w: Channel, trials: int,
                        seed: int, workers: int = 1) -> SimResult:
    """Estimate P[ conditional type outside Xi_n ].

    Xi_n is the set of conditional types V with
    sum (V - W)^2 <= |X||Y| (log n / n) / min_x phi_n(x); the Hoeffding
    bound 2|X||Y| / n^2 is reported in the diagnostics.
    """
    if phi_n.alphabet_size != w.input_size:
        raise DomainError("phi_n must live on the channel input alphabet")
    n = phi_n.n
    n_x, n_y = w.matrix.shape
    phi_min = float(phi_n.counts.min()) / n
    threshold = (
        n_x * n_y * (math.log(n) / n) / phi_min if phi_min > 0 else math.inf
    )
    support = phi_n.counts > 0

    def run(batch_index: int, size: int):
        rng = _stream(seed, batch_index)
        joint = _joint_counts_given_type(phi_n.counts, w.matrix, rng, size)
        cond = joint[:, support, :] / phi_n.counts[support][None, :, None]
        sq = ((cond - w.matrix[support][None, :, :]) ** 2).sum(axis=(1, 2))
        return int((sq > threshold).sum())

    total = sum(_map_batches(run, trials, workers))
    return _binomial_result(total, trials,
                            bound=2.0 * n_x * n_y / n ** 2,
                            threshold=threshold)


# ---------------------------------------------------------------------------
# UEP decoder simulation
# ---------------------------------------------------------------------------

def eta_n(n: int, input_alphabet_size: int, k_n: int) -> float:
    """Rate-cap margin (2/n)(|X|^2 + log(n+1) + log k_n + 1), nats."""
    return (2.0 / n) * (
        input_alphabet_size ** 2 + math.log(n + 1) + math.log(k_n) + 1.0
    )


def gamma_n(n: int, input_alphabet_size: int, k_n: int,
            poly_degree: float) -> float:
    """Decoder threshold 2*eta_n + log(k_n)/(2n) + a*log(n)/n, a=(d+1)/2."""
    a = (poly_degree + 1.0) / 2.0
    return (2.0 * eta_n(n, input_alphabet_size, k_n)
            + math.log(k_n) / (2.0 * n) + a * math.log(n) / n)


def default_k_n(n: int, source_alphabet_size: int) -> int:
    """Codebook-count budget (n+1)^(|S|+1) used by the joint construction."""
    return (n + 1) ** (source_alphabet_size + 1)


def union_bound_gamma(m: int, k_n: int, poly_degree: float = 0.0) -> float:
    """Decoder threshold keeping the wrong-codeword union bound small.

    These are the log(k_n)/(2n) + a*log(n)/n terms of the asymptotic
    threshold; the remaining 2*eta_n margin belongs to the derandomized
    packing construction and exceeds capacity at desk-scale block lengths,
    so it is not included here.
    """
    a = (poly_degree + 1.0) / 2.0
    return math.log(k_n) / (2.0 * m) + a * math.log(m) / m


def uep_dispersion_rate(phi_m: EmpiricalType, w: Channel, eps: float,
                        gamma: float = 0.0) -> float:
    """Class rate targeting error probability eps at the decoder threshold.

    R = I(phi, W) - sqrt(V(phi, W)/m) * Qinv(eps) - gamma, so the event
    {empirical MI < R + gamma} has probability ~ eps; the -gamma term is
    the construction's O(log m / m) rate correction.
    """
    from .channel import mutual_information
    from .probcore import q_inverse

    if not (0.0 < eps < 1.0):
        raise DomainError("eps must lie in (0, 1)")
    m = phi_m.n
    phi = phi_m.distribution()
    v = conditional_information_variance(phi, w)
    rate = mutual_information(phi, w) - math.sqrt(v / m) * q_inverse(eps) - gamma
    if rate < 0:
        raise DomainError(
            f"dispersion rate {rate} is negative at m={m}, eps={eps}, "
            f"gamma={gamma}; the block is too short for this target"
        )
    return rate


@dataclass(frozen=True)
class UepConfig:
    """A UEP code family: per-class rates and constant-composition types.

    N_i = floor(exp(m * R_i)) codewords per class are drawn uniformly from
    the type class of input_types[i] (random constant composition, not the
    packing construction). ``gamma`` is the decoder threshold in nats; the
    asymptotic gamma_n formula is provided separately because at desk-scale
    block lengths it dwarfs the dispersion term.
    """

    rates: tuple
    input_types: tuple
    gamma: float = 0.0
    k_n: int | None = None

    def __post_init__(self):
        rates = tuple(float(r) for r in self.rates)
        types = tuple(self.input_types)
        if len(rates) != len(types) or not rates:
            raise DomainError("need one rate per input type, at least one class")
        if any(r < 0 for r in rates):
            raise DomainError("rates must be nonnegative (N_i >= 1)")
        m = types[0].n
        if any(t.n != m for t in types):
            raise DomainError("all class types must share the block length m")
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "input_types", types)

    @property
    def class_count(self) -> int:
        return len(self.rates)

    @property
    def m(self) -> int:
        return self.input_types[0].n

    def codewords_per_class(self) -> tuple:
        out = []
        for r in self.rates:
            if self.m * r > 700:
                raise EnumerationTooLarge("codebook size overflows a float")
            out.append(int(math.floor(math.exp(self.m * r))))
        return tuple(out)


def _enumerate_tables(row_counts: tuple, col_counts: tuple):
    """All nonnegative integer tables with the given margins."""
    n_x, n_y = len(row_counts), len(col_counts)
    est = 1
    for r in row_counts[:-1]:
        for c in col_counts[:-1]:
            est *= min(r, c) + 1
            if est > _TABLE_CAP:
                raise EnumerationTooLarge(
                    "too many contingency tables for exact enumeration"
                )
    table = np.zeros((n_x, n_y), dtype=np.int64)
    rows_left = list(row_counts)
    cols_left = list(col_counts)

    def rec(idx: int):
        a, b = divmod(idx, n_y)
        if a == n_x - 1:
            # last row forced by the remaining column budgets
            last = np.array(cols_left, dtype=np.int64)
            if last.sum() == rows_left[a]:
                table[a, :] = last
                yield table
            return
        if b == n_y - 1:
            v = rows_left[a]
            if v <= cols_left[b]:
                table[a, b] = v
                rows_left[a] -= v
                cols_left[b] -= v
                yield from rec(idx + 1)
                rows_left[a] += v
                cols_left[b] += v
                table[a, b] = 0
            return
        hi = min(rows_left[a], cols_left[b])
        for v in range(hi + 1):
            table[a, b] = v
            rows_left[a] -= v
            cols_left[b] -= v
            yield from rec(idx + 1)
            rows_left[a] += v
            cols_left[b] += v
            table[a, b] = 0

    yield from rec(0)


def _table_mi(table: np.ndarray, m: int) -> float:
    rows = table.sum(axis=1, dtype=float)
    cols = table.sum(axis=0, dtype=float)
    tf = table.astype(float)
    mask = tf > 0
    denom = np.outer(rows, cols)
    return float(np.sum(tf[mask] * np.log(tf[mask] * m / denom[mask])) / m)


@lru_cache(maxsize=None)
def _mi_tail_log_prob(row_counts: tuple, col_counts: tuple,
                      threshold: float) -> float:
    """log P[ I(table) >= threshold ] for a uniformly random arrangement.

    The arrangement is a word drawn uniformly from the type class of
    row_counts, paired against a fixed word with counts col_counts; the
    joint table is hypergeometric-like with both margins fixed.
    """
    m = int(sum(row_counts))
    log_total = gammaln(m + 1) - sum(gammaln(r + 1) for r in row_counts)
    hits = []
    for table in _enumerate_tables(row_counts, col_counts):
        if _table_mi(table, m) >= threshold - 1e-12:
            lp = -log_total
            for b in range(len(col_counts)):
                lp += gammaln(col_counts[b] + 1) - gammaln(table[:, b] + 1).sum()
            hits.append(lp)
        # note: `table` is reused by the generator; no references kept
    if not hits:
        return -math.inf
    arr = np.array(hits)
    mx = float(arr.max())
    return mx + math.log(float(np.exp(arr - mx).sum()))


@dataclass(frozen=True)
class UepClassResult:
    class_index: int
    rate: float
    n_codewords: int
    e1: SimResult
    e2: SimResult
    overall: SimResult


@dataclass(frozen=True)
class UepResult:
    classes: tuple
    gamma: float
    eta: float
    m: int


def uep_simulate(cfg: UepConfig, w: Channel, sim: SimConfig,
                 workers: int = 1) -> UepResult:
    """Simulate the empirical-MI threshold decoder over random
    constant-composition codebooks.

    For each class the true codeword is a fixed word of the class type
    (conditional-type laws depend only on the type). E1 is the event that
    the true score I(type, P_{Y|x}) - R_i falls below gamma. E2 marginalizes
    the codebook: given the received word's type, the probability that any
    of the other N-1 (same class) or N_j (other classes) codewords, each
    uniform over its type class, scores above gamma is computed exactly by
    contingency-table enumeration, and the event is then drawn as one
    Bernoulli per trial. Estimates are therefore random-coding averages.
    """
    m = sim.m
    if cfg.m != m:
        raise DomainError(f"class types have n={cfg.m} but sim implies m={m}")
    if any(t.alphabet_size != w.input_size for t in cfg.input_types):
        raise DomainError("class types must live on the channel input alphabet")
    k_n_eff = cfg.k_n if cfg.k_n is not None else cfg.class_count
    eta = eta_n(m, w.input_size, k_n_eff)
    for i, (rate, etype) in enumerate(zip(cfg.rates, cfg.input_types)):
        cap = entropy(etype.distribution()) - eta
        if rate > cap:
            raise RateCapViolated(
                f"class {i}: rate {rate} exceeds H(type) - eta_n = {cap}"
            )
    n_codewords = cfg.codewords_per_class()
    thresholds = tuple(r + cfg.gamma for r in cfg.rates)
    type_counts = [tuple(int(c) for c in t.counts) for t in cfg.input_types]

    def competitor_log_miss(col_key: tuple, true_class: int) -> float:
        # log P[no competitor of any class scores >= gamma | y-type]
        acc = 0.0
        for j in range(cfg.class_count):
            n_eff = n_codewords[j] - (1 if j == true_class else 0)
            if n_eff <= 0:
                continue
            lp = _mi_tail_log_prob(type_counts[j], col_key, thresholds[j])
            if lp == -math.inf:
                continue
            if lp >= 0.0:
                return -math.inf
            acc += n_eff * math.log1p(-math.exp(lp))
        return acc

    classes = []
    for i in range(cfg.class_count):
        etype = cfg.input_types[i]
        counts = etype.counts

        def run(batch_index: int, size: int, i=i, counts=counts):
            rng = _stream(seed_for_class(sim.seed, i), batch_index)
            joint = _joint_counts_given_type(counts, w.matrix, rng, size)
            u = rng.random(size)
            mi_true = _empirical_mi_batch(joint, m)
            e1 = mi_true - cfg.rates[i] < cfg.gamma
            cols = joint.sum(axis=1)
            e2 = np.empty(size, dtype=bool)
            for t in range(size):
                log_miss = competitor_log_miss(
                    tuple(int(c) for c in cols[t]), i
                )
                p_e2 = -math.expm1(log_miss) if log_miss > -math.inf else 1.0
                e2[t] = u[t] < p_e2
            both = e1 | e2
            return int(e1.sum()), int(e2.sum()), int(both.sum())

        parts = _map_batches(run, sim.trials, workers)
        e1_total = sum(p[0] for p in parts)
        e2_total = sum(p[1] for p in parts)
        all_total = sum(p[2] for p in parts)
        classes.append(UepClassResult(
            class_index=i,
            rate=cfg.rates[i],
            n_codewords=n_codewords[i],
            e1=_binomial_result(e1_total, sim.trials),
            e2=_binomial_result(e2_total, sim.trials),
            overall=_binomial_result(all_total, sim.trials),
        ))
    return UepResult(classes=tuple(classes), gamma=cfg.gamma, eta=eta, m=m)


def seed_for_class(seed: int, class_index: int) -> int:
    """Disjoint seed lanes for per-class trial streams."""
    return seed * 1000003 + class_index


# ---------------------------------------------------------------------------
# Exact counting and continuity bounds
# ---------------------------------------------------------------------------

def type_class_size(etype: EmpiricalType) -> int:
    """|T_Q| = multinomial(n; counts)."""
    total = 1
    remaining = etype.n
    for c in etype.counts:
        total *= math.comb(remaining, int(c))
        remaining -= int(c)
    return total


def dball_count_exact(q_type: EmpiricalType, s_hat, distortion: np.ndarray,
                      d: float, cap: int = DEFAULT_ENUMERATION_CAP) -> int:
    """Exact |{s in T_Q : d(s, s_hat) <= D}| by enumerating the type class.

    Average distortion uses the absolute slack 1e-9 on the summed cost to
    absorb float dust. Raises EnumerationTooLarge if |T_Q| exceeds ``cap``.
    """
    dmat = np.asarray(distortion, dtype=float)
    n = q_type.n
    s_hat = np.asarray(s_hat, dtype=np.int64)
    if s_hat.size != n:
        raise LengthMismatch(f"s_hat has length {s_hat.size}, expected {n}")
    if np.any(s_hat < 0) or np.any(s_hat >= dmat.shape[1]):
        raise SymbolOutOfRange("s_hat symbols outside the reproduction alphabet")
    if q_type.alphabet_size != dmat.shape[0]:
        raise DomainError("type alphabet does not match the distortion matrix")
    if type_class_size(q_type) > cap:
        raise EnumerationTooLarge(f"|T_Q| exceeds the cap of {cap}")

    budget = n * d + 1e-9
    cost = dmat[:, s_hat]                # cost[a][position]
    counts = [int(c) for c in q_type.counts]
    k = len(counts)

    def rec(pos: int, partial: float) -> int:
        if partial > budget:
            return 0
        if pos == n:
            return 1
        total = 0
        for a in range(k):
            if counts[a] > 0:
                counts[a] -= 1
                total += rec(pos + 1, partial + cost[a, pos])
                counts[a] += 1
        return total

    return rec(0, 0.0)


def dball_bound(q_type: EmpiricalType, src: SourceSpec, d: float) -> float:
    """The counting bound (n+1)^(|S||Shat|) exp{n [H(P) - R(P,D)]}."""
    n = q_type.n
    p = Distribution(q_type.counts / n)
    typed = SourceSpec(p, src.distortion)
    h = entropy(p)
    r = sa.rdf(typed, d, 1e-10).rate
    s_sz, shat_sz = src.distortion.shape
    return (n + 1) ** (s_sz * shat_sz) * math.exp(n * (h - r))


def mi_continuity_check(p: Distribution, q: Distribution, w: Channel,
                        delta: float) -> tuple[float, float, bool]:
    """Check |I(p,W) - I(q,W)| against the continuity bound
    delta |X| log|Y| - |Y||X| delta log(|X| delta), valid for
    sup|p-q| <= delta <= 1 / (2 |X||Y|)."""
    from .channel import mutual_information

    n_x, n_y = w.matrix.shape
    if delta < 0 or delta > 1.0 / (2 * n_x * n_y):
        raise DeltaTooLarge(f"delta = {delta} outside [0, 1/(2*{n_x}*{n_y})]")
    gap = float(np.max(np.abs(p.probs - q.probs)))
    if gap > delta + 1e-15:
        raise DomainError(f"sup|p - q| = {gap} exceeds delta = {delta}")
    lhs = abs(mutual_information(p, w) - mutual_information(q, w))
    if delta == 0:
        rhs = 0.0
    else:
        rhs = delta * n_x * math.log(n_y) - n_y * n_x * delta * math.log(n_x * delta)
    return lhs, rhs, lhs <= rhs + 1e-12
