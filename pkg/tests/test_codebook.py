import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from resolvability.channels import AWGNChannel, Gaussian, Pmf, bsc, dmc, noiseless, output_distribution, uniform_pmf
from resolvability.codebook import (
    Codebook,
    atypical_mass_expectation,
    codebook_size,
    draw_codebook,
    half_l1,
    induced_output_log_prob,
    induced_output_pmf,
    load_codebook,
    product_pmf,
    save_codebook,
    split_measures,
    tv_exact,
    tv_monte_carlo,
    typical_split,
)
from resolvability.errors import AbsoluteContinuityError, CodebookSizeError, DomainError, EnumerationTooLargeError
from resolvability.info import mutual_information

U2 = uniform_pmf(2)
ASYM = dmc([[0.8, 0.15, 0.05], [0.1, 0.6, 0.3]])
ASYM_QX = Pmf([0.3, 0.7])


def cb_of(words, rate=0.0):
    words = np.asarray(words)
    return Codebook(words.shape[1], rate, words)


def full_space(n, k=2):
    grids = np.meshgrid(*[np.arange(k)] * n, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


class TestDraw:
    def test_size_rule(self):
        assert codebook_size(4, math.log(2)) == 16
        assert codebook_size(3, 0.0) == 1
        assert draw_codebook(U2, 4, math.log(2), 0).M == 16

    def test_deterministic(self):
        a, b = draw_codebook(U2, 6, 0.5, 42), draw_codebook(U2, 6, 0.5, 42)
        np.testing.assert_array_equal(a.codewords, b.codewords)

    def test_max_size(self):
        with pytest.raises(CodebookSizeError):
            draw_codebook(U2, 30, 1.0, 0, max_size=2**24)

    def test_domain(self):
        with pytest.raises(DomainError):
            codebook_size(0, 0.1)

    @given(st.integers(1, 30), st.floats(0, 0.6))
    def test_size_floor(self, n, R):
        m = codebook_size(n, R)
        assert m >= 1
        assert m <= math.exp(n * R) * (1 + 1e-9) or m == 1
        assert m + 1 > math.exp(n * R) * (1 - 1e-9)

    def test_save_load_roundtrip(self, tmp_path):
        for qx in (U2, Gaussian(1.0)):
            cb = draw_codebook(qx, 5, 0.4, 3)
            save_codebook(cb, tmp_path / "cb.csv")
            back = load_codebook(tmp_path / "cb.csv")
            assert (back.n, back.rate, back.M, back.seed) == (cb.n, cb.rate, cb.M, cb.seed)
            np.testing.assert_array_equal(back.codewords, cb.codewords)


class TestInducedOutput:
    def test_point_mass_noiseless(self):
        assert induced_output_log_prob(noiseless(2), cb_of([[0, 1, 1]]), [0, 1, 1]) == 0.0

    def test_single_row(self):
        assert induced_output_log_prob(bsc(0.25), cb_of([[0]]), [0]) == pytest.approx(math.log(0.75))

    def test_two_codewords(self):
        assert induced_output_log_prob(bsc(0.25), cb_of([[0], [1]]), [0]) == pytest.approx(math.log(0.5))

    @given(st.integers(1, 5), st.integers(1, 8), st.integers(0, 10**6))
    def test_pmf_matches_brute_force(self, n, m, seed):
        cb = cb_of(np.random.default_rng(seed).integers(0, 2, (m, n)))
        got = induced_output_pmf(ASYM, cb)
        ref = oracles.brute_induced(ASYM.matrix, cb.codewords.tolist())
        np.testing.assert_allclose(got, list(ref.values()), atol=1e-14)
        assert got.sum() == pytest.approx(1.0, abs=1e-12)

    def test_enumeration_paths_agree(self):
        # many codewords take the histogram path, few take the kernel path
        cb = draw_codebook(U2, 8, 0.6, 1)
        a = induced_output_pmf(bsc(0.2), cb)
        b = np.zeros_like(a)
        for w in cb.codewords:
            b += induced_output_pmf(bsc(0.2), cb_of([w])) / cb.M
        np.testing.assert_allclose(a, b, atol=1e-14)

    def test_stack_of_blocks(self):
        cb = draw_codebook(U2, 3, 0.5, 2)
        ys = full_space(3)
        vals = induced_output_log_prob(bsc(0.1), cb, ys)
        np.testing.assert_allclose(np.exp(vals), induced_output_pmf(bsc(0.1), cb), atol=1e-14)


class TestTvExact:
    def test_identical_measures(self):
        assert tv_exact(noiseless(2), cb_of(full_space(4)), U2).tv == pytest.approx(0.0, abs=1e-15)

    def test_single_codeword(self):
        rep = tv_exact(bsc(0.25), cb_of([[0]]), U2)
        assert rep.tv == pytest.approx(0.25) and rep.std_error is None and rep.method == "exact-enumeration"

    def test_symmetric_pair(self):
        assert tv_exact(bsc(0.25), cb_of([[0], [1]]), U2).tv == pytest.approx(0.0, abs=1e-15)

    def test_l1_toggle(self):
        cb = draw_codebook(U2, 5, 0.4, 0)
        assert tv_exact(bsc(0.2), cb, U2, convention="l1").tv == pytest.approx(2 * tv_exact(bsc(0.2), cb, U2).tv)

    def test_cap(self):
        with pytest.raises(EnumerationTooLargeError):
            tv_exact(bsc(0.2), cb_of([[0] * 21]), U2)

    def test_absolute_continuity(self):
        with pytest.raises(AbsoluteContinuityError):
            tv_exact(bsc(0.2), cb_of([[0, 0]]), Pmf([1.0, 0.0]))

    @given(st.integers(1, 5), st.integers(1, 6), st.integers(0, 10**6))
    def test_matches_brute_and_half_l1(self, n, m, seed):
        cb = cb_of(np.random.default_rng(seed).integers(0, 2, (m, n)))
        qy = output_distribution(ASYM, ASYM_QX)
        tv = tv_exact(ASYM, cb, qy).tv
        assert 0.0 <= tv <= 1.0
        assert tv == pytest.approx(oracles.brute_tv(ASYM.matrix, cb.codewords.tolist(), qy.probs), abs=1e-12)
        assert tv == pytest.approx(half_l1(induced_output_pmf(ASYM, cb), product_pmf(qy, n)), abs=1e-12)

    @pytest.mark.parametrize("n", [6, 8, 10])
    def test_single_codeword_binomial(self, n):
        cb = draw_codebook(U2, n, 0.05, 0)
        assert cb.M == 1
        assert tv_exact(bsc(0.25), cb, U2).tv == pytest.approx(oracles.bsc_single_codeword_tv(0.25, n), abs=1e-12)


class TestTvMonteCarlo:
    def test_identical_measures(self):
        rep = tv_monte_carlo(noiseless(2), cb_of(full_space(3)), U2, 10**4, 0)
        assert rep.tv >= 0 and abs(rep.tv) <= 3 * rep.std_error + 1e-15

    def test_single_codeword(self):
        rep = tv_monte_carlo(bsc(0.25), cb_of([[0]]), U2, 10**5, 1)
        assert abs(rep.tv - 0.25) < 3 * rep.std_error

    @pytest.mark.parametrize("seed", range(20))
    def test_agrees_with_exact(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 8))
        cb = cb_of(rng.integers(0, 2, (int(rng.integers(1, 30)), n)))
        qy = output_distribution(ASYM, ASYM_QX)
        rep = tv_monte_carlo(ASYM, cb, qy, 2 * 10**4, seed)
        assert abs(rep.tv - tv_exact(ASYM, cb, qy).tv) < 4 * rep.std_error + 1e-12

    def test_awgn_decay(self):
        qx = Gaussian(1.0)
        qy = output_distribution(AWGNChannel(1.0), qx)
        R = 2 * mutual_information(AWGNChannel(1.0), qx)
        means = []
        for n in (4, 8):
            tvs = [tv_monte_carlo(AWGNChannel(1.0), draw_codebook(qx, n, R, 100 * n + k), qy, 4000, k).tv for k in range(20)]
            means.append(np.mean(tvs))
        assert means[1] < means[0]


class TestTypicalSplit:
    def test_everything_typical(self):
        cb = draw_codebook(U2, 6, 0.5, 0)
        s = typical_split(bsc(0.25), cb, U2, U2, 1e3)
        assert s.p2_mass == 0.0 and s.typical_tv_part == pytest.approx(s.tv, abs=1e-15)

    def test_everything_atypical(self):
        cb = draw_codebook(U2, 6, 0.5, 0)
        s = typical_split(bsc(0.25), cb, U2, U2, -1e3)
        assert s.p2_mass == pytest.approx(1.0, abs=1e-12) and s.typical_tv_part == 0.0

    def test_split_inequality(self):
        cb = draw_codebook(U2, 6, 0.5, 5)
        s = typical_split(bsc(0.25), cb, U2, U2, 0.1)
        assert s.tv <= s.typical_tv_part + s.p2_mass + 1e-12
        assert s.tv == pytest.approx(tv_exact(bsc(0.25), cb, U2).tv, abs=1e-14)

    @given(st.integers(2, 6), st.floats(-0.3, 0.5), st.integers(0, 10**6))
    def test_measures_reconstruct(self, n, eps, seed):
        cb = draw_codebook(ASYM_QX, n, 0.4, seed)
        qy = output_distribution(ASYM, ASYM_QX)
        mi = mutual_information(ASYM, ASYM_QX)
        p, p1, p2, q = split_measures(ASYM, cb, qy, eps, mi)
        np.testing.assert_allclose(p1 + p2, p, atol=1e-12)
        assert p1.sum() + p2.sum() == pytest.approx(1.0, abs=1e-10)
        s = typical_split(ASYM, cb, ASYM_QX, qy, eps, mi=mi)
        assert s.tv <= s.typical_tv_part + s.p2_mass + 1e-10

    def test_p2_nonincreasing_in_eps(self):
        cb = draw_codebook(ASYM_QX, 6, 0.4, 8)
        qy = output_distribution(ASYM, ASYM_QX)
        vals = [typical_split(ASYM, cb, ASYM_QX, qy, e).p2_mass for e in np.linspace(-0.5, 0.8, 27)]
        assert np.all(np.diff(vals) <= 1e-15)

    def test_monte_carlo_mode(self):
        cb = draw_codebook(U2, 8, 0.5, 4)
        ex = typical_split(bsc(0.25), cb, U2, U2, 0.1)
        mc = typical_split(bsc(0.25), cb, U2, U2, 0.1, method="monte-carlo", num_samples=10**5, seed=1)
        assert abs(mc.p2_mass - ex.p2_mass) < 4 * mc.p2_std_error
        assert abs(mc.typical_tv_part - ex.typical_tv_part) < 4 * mc.typical_std_error + 1e-12
        assert isinstance(mc.p2_std_error, float)

    def test_mean_p2_is_atypical_probability(self):
        # asymmetric channel so p2 actually varies between codebooks
        qy = output_distribution(ASYM, ASYM_QX)
        mi = mutual_information(ASYM, ASYM_QX)
        vals = np.array([typical_split(ASYM, draw_codebook(ASYM_QX, 6, 0.3, k), ASYM_QX, qy, 0.05, mi=mi).p2_mass for k in range(300)])
        assert vals.std() > 0
        target = atypical_mass_expectation(ASYM, ASYM_QX, 6, 0.05)
        assert abs(vals.mean() - target) < 4 * vals.std() / math.sqrt(vals.size)


class TestAtypicalMass:
    def test_eps_large(self):
        assert atypical_mass_expectation(bsc(0.25), U2, 10, 100.0) == 0.0

    def test_noiseless(self):
        assert atypical_mass_expectation(noiseless(2), U2, 10, 0.01) == 0.0

    def test_bsc_regression(self):
        val = atypical_mass_expectation(bsc(0.25), U2, 20, 0.05)
        assert val == pytest.approx(oracles.bsc_atypical_tail(0.25, 20, 0.05), abs=1e-14)
        assert val == pytest.approx(0.41484150253018015, abs=1e-14)

    @given(st.floats(0.02, 0.48), st.integers(1, 40), st.floats(-0.2, 0.4))
    def test_dp_vs_binomial(self, p, n, eps):
        assert atypical_mass_expectation(bsc(p), U2, n, eps) == pytest.approx(oracles.bsc_atypical_tail(p, n, eps), abs=1e-12)

    def test_monte_carlo(self):
        est = atypical_mass_expectation(bsc(0.25), U2, 20, 0.05, method="monte-carlo", num_samples=10**5, seed=2)
        assert abs(est - 0.41484150253018015) < 4 * est.std_error
