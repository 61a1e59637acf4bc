import math

import numpy as np
import pytest

from jsccdisp import (
    BoundaryDistortion,
    Distribution,
    DomainError,
    SourceSpec,
    StepTooLarge,
    d_max,
    entropy,
    q_inverse,
    rdf,
    rdf_gradient,
    source_dispersion,
    source_rate_at,
)
from conftest import HAMMING, hamming_source

LN2 = math.log(2.0)


def h_nats(q: float) -> float:
    if q <= 0.0 or q >= 1.0:
        return 0.0
    return -q * math.log(q) - (1 - q) * math.log(1 - q)


def bernoulli_hamming_rdf_oracle(p: float, d: float) -> float:
    # closed form h(p) - h(D) for D < min(p, 1-p)
    return h_nats(p) - h_nats(d)


class TestSourceSpec:
    def test_requires_zero_per_row(self):
        with pytest.raises(DomainError):
            SourceSpec(Distribution(np.array([0.5, 0.5])),
                       np.array([[0.0, 1.0], [1.0, 0.5]]))

    def test_requires_nonnegative(self):
        with pytest.raises(DomainError):
            SourceSpec(Distribution(np.array([0.5, 0.5])),
                       np.array([[0.0, -1.0], [1.0, 0.0]]))

    def test_shape_must_match(self):
        with pytest.raises(DomainError):
            SourceSpec(Distribution(np.array([0.5, 0.5])), np.zeros((3, 2)))


class TestDmax:
    def test_fair_hamming(self, fair_hamming):
        assert d_max(fair_hamming) == pytest.approx(0.5, abs=1e-15)

    def test_skewed_hamming(self):
        assert d_max(hamming_source(0.11)) == pytest.approx(0.11, abs=1e-15)

    def test_three_symbol_uniform(self):
        src = SourceSpec(Distribution(np.ones(3) / 3),
                         np.ones((3, 3)) - np.eye(3))
        # oracle: enumerate constant reproducers
        best = min(float(np.dot(np.ones(3) / 3, src.distortion[:, j]))
                   for j in range(3))
        assert best == pytest.approx(2 / 3, abs=1e-15)
        assert d_max(src) == pytest.approx(best, abs=1e-15)


class TestRdf:
    def test_zero_distortion_is_entropy(self, fair_hamming):
        res = rdf(fair_hamming, 0.0)
        assert res.rate == pytest.approx(LN2, abs=1e-11)

    def test_zero_distortion_entropy_unique_zeros(self):
        # any distortion matrix whose per-row zero is unique and distinct
        src = SourceSpec(Distribution(np.array([0.2, 0.3, 0.5])),
                         np.array([[0.0, 2.0, 1.0],
                                   [1.0, 0.0, 3.0],
                                   [2.0, 1.0, 0.0]]))
        assert rdf(src, 0.0).rate == pytest.approx(
            entropy(src.distribution), abs=1e-10)

    def test_fair_hamming_closed_form(self, fair_hamming):
        res = rdf(fair_hamming, 0.1)
        assert res.rate == pytest.approx(
            bernoulli_hamming_rdf_oracle(0.5, 0.1), abs=1e-10)
        assert res.rate / LN2 == pytest.approx(0.5310, abs=1e-4)
        assert res.achieved_distortion == pytest.approx(0.1, abs=1e-9)

    def test_skewed_hamming_closed_form(self):
        src = hamming_source(0.11)
        for d in (0.02, 0.05, 0.09):
            assert rdf(src, d).rate == pytest.approx(
                bernoulli_hamming_rdf_oracle(0.11, d), abs=1e-10)

    def test_beyond_dmax_is_zero(self, fair_hamming):
        for d in (0.5, 0.7, 2.0):
            res = rdf(fair_hamming, d)
            assert res.rate == 0.0
            assert res.lagrange_slope == 0.0

    def test_at_dmax_consistency(self):
        for p in (0.5, 0.11, 0.3):
            src = hamming_source(p)
            assert rdf(src, d_max(src)).rate <= 1e-10

    def test_nonincreasing_and_convex_in_d(self):
        src = hamming_source(0.3)
        ds = np.linspace(0.01, 0.28, 16)
        rates = [rdf(src, float(d)).rate for d in ds]
        assert all(a >= b - 1e-12 for a, b in zip(rates, rates[1:]))
        for i in range(len(rates) - 2):
            assert rates[i] + rates[i + 2] - 2 * rates[i + 1] >= -1e-8

    def test_test_channel_rows_stochastic(self, fair_hamming):
        res = rdf(fair_hamming, 0.17)
        sums = res.test_channel.sum(axis=1)
        assert np.allclose(sums, 1.0, atol=1e-9)
        assert res.lagrange_slope <= 0

    def test_sources_with_zero_mass_symbols(self):
        src = SourceSpec(Distribution(np.array([0.0, 1.0])), HAMMING)
        assert rdf(src, 0.05).rate == 0.0

    def test_negative_distortion_rejected(self, fair_hamming):
        with pytest.raises(DomainError):
            rdf(fair_hamming, -0.1)


class TestRdfGradient:
    def test_fair_source_is_flat(self, fair_hamming):
        g = rdf_gradient(fair_hamming, 0.2)
        assert abs(g[0]) < 1e-7 and abs(g[1]) < 1e-7

    def test_skewed_matches_closed_form(self):
        # Hamming RDF gradient is -log Q up to an additive constant; the
        # centered version for Bernoulli(p) is (-pL, (1-p)L), L=log((1-p)/p)
        src = hamming_source(0.11)
        L = math.log(0.89 / 0.11)
        g = rdf_gradient(src, 0.05)
        assert g[0] == pytest.approx(-0.11 * L, abs=1e-7)
        assert g[1] == pytest.approx(0.89 * L, abs=1e-7)

    def test_matches_centered_neg_log(self):
        src = hamming_source(0.11)
        p = src.distribution.probs
        g = rdf_gradient(src, 0.05)
        neg_log = -np.log(p)
        centered = neg_log - np.dot(p, neg_log)
        assert np.allclose(g, centered, atol=1e-7)

    def test_relabeling_invariance(self):
        probs = np.array([0.3, 0.3, 0.4])
        src = SourceSpec(Distribution(probs), np.ones((3, 3)) - np.eye(3))
        g = rdf_gradient(src, 0.1)
        assert g[0] == pytest.approx(g[1], abs=1e-7)

    def test_boundary_rejected(self, fair_hamming):
        with pytest.raises(BoundaryDistortion):
            rdf_gradient(fair_hamming, 0.0)
        with pytest.raises(BoundaryDistortion):
            rdf_gradient(fair_hamming, 0.5)

    def test_step_too_large(self):
        src = SourceSpec(Distribution(np.array([1e-7, 1.0 - 1e-7])), HAMMING)
        with pytest.raises(StepTooLarge):
            rdf_gradient(src, 5e-8, h_step=1e-3)


class TestSourceDispersion:
    def test_fair_hamming_zero(self, fair_hamming):
        assert source_dispersion(fair_hamming, 0.1) <= 1e-9

    def test_skewed_closed_form(self):
        src = hamming_source(0.11)
        oracle = 0.11 * 0.89 * math.log(0.89 / 0.11) ** 2
        got = source_dispersion(src, 0.05)
        assert got == pytest.approx(oracle, abs=1e-6)
        assert got / LN2 ** 2 == pytest.approx(0.8907, abs=1e-4)

    def test_independent_of_gradient_centering(self):
        src = hamming_source(0.2)
        p = src.distribution.probs
        g = rdf_gradient(src, 0.08)
        for shift in (0.0, 1.0, -3.7):
            shifted = g + shift
            mean = np.dot(p, shifted)
            var = np.dot(p, (shifted - mean) ** 2)
            assert var == pytest.approx(source_dispersion(src, 0.08), rel=1e-9)

    def test_lossless_limit_matches_var_log_p(self):
        # as D -> 0 the dispersion approaches Var[log P]
        src = hamming_source(0.11)
        p = src.distribution.probs
        logs = np.log(p)
        var_log = float(np.dot(p, logs ** 2) - np.dot(p, logs) ** 2)
        small_d = source_dispersion(src, 1e-4)
        assert small_d == pytest.approx(var_log, rel=1e-3)


class TestSourceRateAt:
    def test_eps_half_is_rate(self, fair_hamming):
        got = source_rate_at(fair_hamming, 0.1, 500, 0.5)
        assert got == pytest.approx(rdf(fair_hamming, 0.1).rate, abs=1e-12)

    def test_zero_dispersion_eps_independent(self, fair_hamming):
        a = source_rate_at(fair_hamming, 0.1, 200, 0.05)
        b = source_rate_at(fair_hamming, 0.1, 200, 0.9)
        assert a == pytest.approx(b, abs=1e-6)

    def test_chained_oracle(self):
        src = hamming_source(0.11)
        v = 0.11 * 0.89 * math.log(0.89 / 0.11) ** 2
        oracle = (bernoulli_hamming_rdf_oracle(0.11, 0.05)
                  + math.sqrt(v / 1000) * 1.2815515655446004)
        assert source_rate_at(src, 0.05, 1000, 0.1) == pytest.approx(
            oracle, abs=1e-6)
