import json
import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

import oracles
from resolvability import bounds
from resolvability.channels import bsc, noiseless, uniform_pmf
from resolvability.codebook import atypical_mass_expectation
from resolvability.errors import DegenerateDispersionError, DomainError, HypothesisViolation, NoValidParamsError
from resolvability.info import mutual_information, renyi_divergence

U2 = uniform_pmf(2)
I_BSC, V_BSC, RHO_BSC = oracles.bsc_two_point(0.25)


def d_curve(ch):
    return lambda a: renyi_divergence(ch, U2, a)


class TestQFunction:
    def test_symmetry(self):
        assert bounds.q_function(0.0) == 0.5
        assert bounds.q_inverse(0.5) == 0.0

    def test_quantile(self):
        assert bounds.q_inverse(0.05) == pytest.approx(oracles.q_inverse_oracle(0.05), abs=1e-6)
        assert bounds.q_function(1.6448536269514722) == pytest.approx(0.05, abs=1e-12)

    def test_domain(self):
        for p in (0.0, 1.0, -0.1, 1.5, float("nan")):
            with pytest.raises(DomainError):
                bounds.q_inverse(p)

    @given(st.floats(-8, 8))
    def test_matches_erfc(self, a):
        assert bounds.q_function(a) == pytest.approx(oracles.q_oracle(a), rel=1e-12, abs=1e-300)

    @given(st.floats(-5.5, 8))
    def test_inverse_roundtrip(self, a):
        # below about -5.5, Q(a) sits within a few ulps of 1 and the inverse is ill-conditioned
        assert bounds.q_inverse(bounds.q_function(a)) == pytest.approx(a, abs=1e-9)

    @given(st.floats(-8, -5.5))
    def test_lower_tail_by_symmetry(self, a):
        assert bounds.q_function(a) == pytest.approx(1 - bounds.q_function(-a), abs=1e-15)
        assert -bounds.q_inverse(bounds.q_function(-a)) == pytest.approx(a, abs=1e-9)

    @given(st.floats(1e-300, 1 - 1e-12))
    def test_q_of_inverse(self, p):
        assume(0 < p < 1)
        assert bounds.q_function(bounds.q_inverse(p)) == pytest.approx(p, rel=1e-9)


class TestLemma1:
    def test_vacuous(self):
        assert bounds.lemma1_bound(0.3, 0.0, 10, 0.5) == 1.0
        assert bounds.lemma1_bound(0.0, 1.0, 10, 0.5) == 1.0

    def test_value(self):
        assert bounds.lemma1_bound(0.1, 1.0, 1, math.log(100)) == pytest.approx(math.exp(-10 / 3), rel=1e-12)
        assert bounds.lemma1_bound(0.1, 1.0, 1, 0.0, codebook_size=100) == pytest.approx(0.035673993347252395, rel=1e-12)

    def test_domain(self):
        with pytest.raises(DomainError):
            bounds.lemma1_bound(1.5, 0.5, 10, 0.5)

    @given(st.floats(0.01, 1), st.floats(0, 0.99), st.floats(0.001, 0.01), st.integers(1, 40), st.floats(0.01, 0.5))
    def test_monotone(self, mu, d, dd, n, R):
        assert bounds.lemma1_bound(mu, d + dd, n, R) <= bounds.lemma1_bound(mu, d, n, R)
        assert bounds.lemma1_bound(mu, d, n + 1, R) <= bounds.lemma1_bound(mu, d, n, R)


class TestLemma2:
    def test_regression(self):
        val = bounds.lemma2_bound(1.0, 10.0, 1, math.log(600), 0.0, 0.0)
        assert val == pytest.approx(oracles.lemma2_plain(1.0, 10.0, 600.0), rel=1e-12)
        assert val == pytest.approx(9.099381118351186e-05, rel=1e-12)

    def test_small_lambda_limit(self):
        assert bounds.lemma2_bound(1.0, 1e-9, 1, math.log(600), 0.0, 0.0) == pytest.approx(2.0, abs=1e-6)

    def test_large_delta(self):
        assert bounds.lemma2_bound(1e3, 10.0, 1, math.log(600), 0.0, 0.0) == 0.0

    def test_hypothesis(self):
        with pytest.raises(HypothesisViolation):
            bounds.lemma2_bound(1.0, 10.0, 1, math.log(50), 0.0, 0.0)

    @given(st.floats(0.01, 5), st.floats(0.01, 1), st.floats(0.5, 20))
    def test_decreasing_in_delta(self, d, dd, lam):
        args = (1, math.log(6 * lam) + 1.0, 0.0, 0.0)
        assert bounds.lemma2_bound(d + dd, lam, *args) <= bounds.lemma2_bound(d, lam, *args)


class TestFirstOrder:
    def test_bsc_params_valid(self):
        p = bounds.select_first_order_params(I_BSC, d_curve(bsc(0.25)), 0.5)
        assert bounds.first_order_violations(p, I_BSC, 0.5, renyi_divergence(bsc(0.25), U2, p.alpha)) == []
        assert p.gamma1 > 0 and p.gamma2 > 0
        assert all(isinstance(v, float) for v in (p.beta1, p.beta2, p.gamma1, p.gamma2))

    def test_noiseless_feasible(self):
        R = 2 * math.log(2)
        p = bounds.select_first_order_params(math.log(2), d_curve(noiseless(2)), R)
        assert p.gamma1 > 0 and p.gamma2 > 0
        assert bounds.first_order_violations(p, math.log(2), R, math.log(2)) == []
        # constant density: beta1 is capped by (alpha - 1) epsilon
        assert p.beta1 <= (p.alpha - 1) * p.epsilon + 1e-15

    def test_infeasible(self):
        with pytest.raises(NoValidParamsError):
            bounds.select_first_order_params(I_BSC, d_curve(bsc(0.25)), I_BSC)
        with pytest.raises(NoValidParamsError):
            bounds.select_first_order_params(0.1, lambda a: math.inf, 0.5)

    def test_array_curve(self):
        alphas = np.array([1.5, 2.0])
        vals = np.array([renyi_divergence(bsc(0.25), U2, a) for a in alphas])
        p = bounds.select_first_order_params(I_BSC, (alphas, vals), 0.5)
        assert p.alpha in (1.5, 2.0)

    def test_n_min(self):
        p = bounds.select_first_order_params(I_BSC, d_curve(bsc(0.25)), 0.5)
        gap = 0.5 - I_BSC - p.epsilon - p.beta2
        assert p.n_min * gap >= math.log(6) and (p.n_min - 1) * gap < math.log(6)

    @given(st.floats(0.05, 0.45), st.floats(0.05, 1.0))
    def test_params_revalidate(self, p, extra):
        ch = bsc(p)
        mi = mutual_information(ch, U2)
        params = bounds.select_first_order_params(mi, d_curve(ch), mi + extra)
        assert bounds.first_order_violations(params, mi, mi + extra, renyi_divergence(ch, U2, params.alpha)) == []

    def test_threshold_and_rhs(self):
        assert bounds.log_theorem2_rhs(0.1, 50) == pytest.approx(-math.exp(5), rel=1e-14)
        assert bounds.theorem2_threshold(0.3, 0) == 1.0
        assert bounds.theorem2_rhs(0.3, 0) == pytest.approx(math.exp(-1))
        for n in (3, 7, 20):
            assert bounds.log_theorem2_rhs(0.1, 2 * n) == pytest.approx(-(math.exp(0.1 * n) ** 2), rel=1e-12)

    def test_union_terms(self):
        p = bounds.select_first_order_params(I_BSC, d_curve(bsc(0.25)), 0.5)
        typical = [bounds.theorem2_union_terms(p, n, I_BSC, 0.5)["typical"] for n in (400, 800, 1600)]
        assert bounds.theorem2_union_terms(p, 40, I_BSC, 0.5)["atypical"] < 0
        assert typical[0] < 0 and np.all(np.diff(typical) < 0)


class TestChernoff:
    def test_zero_exponent(self):
        assert bounds.chernoff_atypical_bound(2.0, 0.1, 0.05, 0.15, 10) == pytest.approx(1.0, abs=1e-14)

    def test_noiseless(self):
        assert bounds.chernoff_atypical_bound(2.0, math.log(2), 0.07, math.log(2), 10) == pytest.approx(math.exp(-0.7))

    def test_bsc_value(self):
        d2 = renyi_divergence(bsc(0.25), U2, 2.0)
        val = bounds.chernoff_atypical_bound(2.0, I_BSC, 0.15, d2, 30)
        assert val == pytest.approx(math.exp(-30 * (I_BSC + 0.15 - d2)), rel=1e-12)
        assert val >= atypical_mass_expectation(bsc(0.25), U2, 30, 0.15)

    @given(st.floats(0.05, 0.45), st.integers(1, 40), st.floats(0.0, 0.4), st.floats(1.05, 3.0))
    def test_upper_bounds_dp(self, p, n, eps, a):
        ch = bsc(p)
        mi = mutual_information(ch, U2)
        b = bounds.chernoff_atypical_bound(a, mi, eps, renyi_divergence(ch, U2, a), n)
        assert b >= atypical_mass_expectation(ch, U2, n, eps) - 1e-12

    def test_domain(self):
        with pytest.raises(DomainError):
            bounds.chernoff_atypical_bound(1.0, 0.1, 0.1, 0.1, 10)


class TestSecondOrder:
    def test_rate_formula(self):
        s = bounds.second_order_schedule(I_BSC, V_BSC, RHO_BSC, 0.1, 2.0, 0.5, 100)
        qi = oracles.q_inverse_oracle(0.1)
        assert s.rate_R == pytest.approx(I_BSC + math.sqrt(V_BSC / 100) * qi + 2 * math.log(100) / 100, rel=1e-9)
        mu = oracles.q_oracle(qi + 0.5 * math.log(100) / math.sqrt(100 * V_BSC)) + RHO_BSC / (V_BSC**1.5 * 10)
        assert s.mu == pytest.approx(mu, rel=1e-9)

    def test_limit_xi(self):
        s = bounds.second_order_schedule(I_BSC, V_BSC, RHO_BSC, 0.05, 2.0, 0.5, 10**6)
        assert abs(s.mu - 0.05) < 0.01

    def test_hypothesis(self):
        bounds.second_order_schedule(I_BSC, V_BSC, RHO_BSC, 0.1, 2.0, 0.5, 13)
        with pytest.raises(HypothesisViolation):
            bounds.second_order_schedule(I_BSC, V_BSC, RHO_BSC, 0.1, 2.0, 0.5, 10)
        with pytest.raises(HypothesisViolation):
            bounds.second_order_schedule(I_BSC, V_BSC, RHO_BSC, 0.1, 2.0, 0.5, 8)

    def test_degenerate(self):
        with pytest.raises(DegenerateDispersionError):
            bounds.second_order_schedule(math.log(2), 0.0, 0.0, 0.1, 2.0, 0.5, 100)
        with pytest.raises(DegenerateDispersionError):
            bounds.berry_esseen_gap(0.1, 0.0, 0.0, 100)

    def test_parameter_domain(self):
        with pytest.raises(DomainError):
            bounds.second_order_schedule(I_BSC, V_BSC, RHO_BSC, 0.1, 1.0, 0.5, 100)
        with pytest.raises(DomainError):
            bounds.second_order_schedule(I_BSC, V_BSC, RHO_BSC, 0.1, 2.0, 1.5, 100)

    def test_gap_shrinks_before_crossing(self):
        # mu approaches xi from above until it crosses below; the distance shrinks up to there
        ns = [16 * 2**k for k in range(9)]
        gaps = [bounds.second_order_schedule(I_BSC, V_BSC, RHO_BSC, 0.1, 2.0, 0.5, n).mu - 0.1 for n in ns]
        assert all(g > 0 for g in gaps)
        assert np.all(np.diff(gaps) < 0)

    def test_constant(self):
        assert bounds.THEOREM3_CONSTANT == pytest.approx(7 / 6 + math.sqrt(3 * math.pi / 2) * math.exp(0.75), rel=1e-15)
        assert bounds.THEOREM3_CONSTANT == pytest.approx(5.762258270429081, rel=1e-14)

    def test_theorem3_rhs_decreasing(self):
        vals = []
        for n in (16, 32, 64, 128, 256):
            s = bounds.second_order_schedule(I_BSC, V_BSC, RHO_BSC, 0.1, 2.0, 0.5, n)
            vals.append(bounds.theorem3_rhs(s.mu, n, s.rate_R, 2.0, 0.5))
        assert np.all(np.diff(vals) < 0)

    def test_proven_exponent_is_weaker(self):
        s = bounds.second_order_schedule(I_BSC, V_BSC, RHO_BSC, 0.1, 2.0, 0.5, 16)
        stated = bounds.log_theorem3_terms(s.mu, 16, s.rate_R, 2.0, 0.5)[0]
        proven = bounds.log_theorem3_terms(s.mu, 16, s.rate_R, 2.0, 0.5, proven_exponent=True)[0]
        assert proven == pytest.approx(stated / 256, rel=1e-12)

    def test_berry_esseen_value(self):
        gap = bounds.berry_esseen_gap(I_BSC, V_BSC, RHO_BSC, 100)
        assert gap == pytest.approx(RHO_BSC / (V_BSC**1.5 * 10), rel=1e-14)
        assert gap == pytest.approx(0.14433756729740643, rel=1e-12)
        assert bounds.berry_esseen_gap(I_BSC, V_BSC, RHO_BSC, 10**12) < 1e-5


def test_bound_report_json():
    rep = bounds.BoundReport({"n": 10, "R": 0.5}, {"lemma1": bounds.lemma1_bound(0.1, 1.0, 10, 0.5)})
    back = json.loads(rep.to_json())
    assert back["inputs"] == {"R": 0.5, "n": 10} and "lemma1" in back["values"]
