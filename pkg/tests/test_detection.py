"""Fusion-center kernel tests: cell tables, information sums, statistics."""

import math

import numpy as np
import pytest

from hybriddet.detection import (
    ReceivedData,
    baseline_statistic,
    bin_prob,
    bin_probs,
    bin_score,
    bin_scores,
    bsc_kernel,
    fisher_information,
    likelihood_kernels,
    lmpt_statistic,
    network_kernels,
    reconstruction_table,
    theoretical_pd,
    threshold_for_pfa,
)
from hybriddet.model import (
    ChannelSpec,
    FullPrecisionSensor,
    Hypothesis,
    NetworkConfig,
    QuantizedSensor,
    QuantizerSpec,
    SignalParams,
    level_to_codeword,
    quantize_batch,
    simulate_observations,
    trial_rng,
)

from oracles import quantized_fi_oracle, upper_tail_inverse_bisect, upper_tail_quad

PARAMS = SignalParams(theta=0.25, sigma_n2=1.0, sigma_h2=0.5)


def _config(n_quantized, bits, thresholds, p_e, n_full, params=PARAMS):
    sensors = tuple(
        QuantizedSensor(QuantizerSpec(bits, thresholds), ChannelSpec(p_e))
        for _ in range(n_quantized)
    )
    sensors += tuple(FullPrecisionSensor() for _ in range(n_full))
    return NetworkConfig(params, sensors)


class TestCellTables:
    def test_one_bit_prob(self):
        assert bin_prob(1, QuantizerSpec(1, (0.0,)), 1.0) == pytest.approx(0.5, abs=1e-12)

    def test_two_bit_prob_against_quadrature(self):
        spec = QuantizerSpec(2, (-1.0, 0.0, 1.0))
        expected = upper_tail_quad(-1.0) - upper_tail_quad(0.0)
        assert bin_prob(2, spec, 1.0) == pytest.approx(expected, abs=1e-9)
        assert bin_prob(2, spec, 1.0) == pytest.approx(0.341345, abs=1e-6)

    def test_probs_partition(self):
        for spec in (QuantizerSpec(1, (0.3,)), QuantizerSpec(3, tuple(np.linspace(-2, 2, 7)))):
            probs = bin_probs(spec, 1.3)
            assert probs.sum() == pytest.approx(1.0, abs=1e-12)
            assert np.all(probs >= 0)

    def test_one_bit_scores(self):
        spec = QuantizerSpec(1, (0.0,))
        psi0 = 0.3989422804014327
        assert bin_score(1, spec, 1.0) == pytest.approx(-psi0, abs=1e-12)
        assert bin_score(2, spec, 1.0) == pytest.approx(psi0, abs=1e-12)

    def test_two_bit_score(self):
        spec = QuantizerSpec(2, (-1.0, 0.0, 1.0))
        assert bin_score(2, spec, 1.0) == pytest.approx(-0.15697155588228936, abs=1e-12)

    def test_scores_telescope_to_zero(self):
        spec = QuantizerSpec(3, (-2.1, -1.4, -0.3, 0.2, 0.9, 1.7, 2.5))
        assert abs(bin_scores(spec, 0.8).sum()) <= 1e-12

    def test_level_bounds(self):
        spec = QuantizerSpec(1, (0.0,))
        with pytest.raises(ValueError):
            bin_prob(0, spec, 1.0)
        with pytest.raises(ValueError):
            bin_score(3, spec, 1.0)


class TestBscKernel:
    def test_noiseless_is_identity(self):
        np.testing.assert_array_equal(bsc_kernel(2, 0.0), np.eye(4))

    def test_entries(self):
        g = bsc_kernel(2, 0.2)
        assert g[0, 1] == pytest.approx(0.16, abs=1e-12)  # one differing bit
        assert g[0, 0] == pytest.approx(0.64, abs=1e-12)
        assert bsc_kernel(1, 0.3)[0, 0] == pytest.approx(0.7, abs=1e-12)

    def test_doubly_stochastic(self):
        for bits in (1, 2, 3):
            for p in (0.0, 0.1, 0.37, 0.5):
                for mapping in ("natural", "gray"):
                    g = bsc_kernel(bits, p, mapping)
                    np.testing.assert_allclose(g.sum(axis=0), 1.0, atol=1e-12)
                    np.testing.assert_allclose(g.sum(axis=1), 1.0, atol=1e-12)


class TestFisherInformation:
    def test_analog_only(self):
        cfg = _config(0, 1, (0.0,), 0.0, 20)
        assert fisher_information(cfg) == pytest.approx(20.0, abs=1e-12)

    def test_one_bit_closed_form(self):
        cfg = _config(1, 1, (0.0,), 0.0, 0)
        assert fisher_information(cfg) == pytest.approx(2.0 / math.pi, abs=1e-9)

    def test_two_bit_reference(self):
        cfg = _config(1, 2, (-1.0, 0.0, 1.0), 0.0, 0)
        expected = quantized_fi_oracle((-1.0, 0.0, 1.0), 0.0, 1.0)
        assert fisher_information(cfg) == pytest.approx(expected, abs=1e-9)
        assert fisher_information(cfg) == pytest.approx(0.8824467547699297, abs=1e-9)

    def test_uninformative_channel(self):
        cfg = _config(1, 1, (0.0,), 0.5, 0)
        assert fisher_information(cfg) == pytest.approx(0.0, abs=1e-15)

    def test_matches_loop_oracle_randomized(self):
        rng = np.random.default_rng(5)
        for _ in range(25):
            bits = int(rng.integers(1, 4))
            thresholds = tuple(np.sort(rng.normal(0, 1.5, 2**bits - 1)))
            p_e = float(rng.choice([0.0, 0.05, 0.2, 0.4]))
            sigma_n2 = float(rng.uniform(0.4, 2.5))
            params = SignalParams(0.1, sigma_n2, 0.5)
            cfg = _config(1, bits, thresholds, p_e, 0, params)
            expected = quantized_fi_oracle(thresholds, p_e, sigma_n2)
            assert fisher_information(cfg) == pytest.approx(expected, rel=1e-9)

    def test_additive_over_sensors(self):
        a = _config(3, 2, (-1.0, 0.0, 1.0), 0.1, 1)
        b = _config(2, 1, (0.2,), 0.0, 2)
        merged = NetworkConfig(PARAMS, a.quantized + b.quantized + tuple(
            s for s in a.sensors + b.sensors if isinstance(s, FullPrecisionSensor)
        ))
        assert fisher_information(merged) == pytest.approx(
            fisher_information(a) + fisher_information(b), rel=1e-12
        )

    def test_monotone_in_channel_quality(self):
        values = [
            fisher_information(_config(1, 2, (-1.0, 0.0, 1.0), p, 0))
            for p in (0.0, 0.2, 0.5)
        ]
        assert values[0] > values[1] > values[2] == pytest.approx(0.0, abs=1e-12)


class TestLmptStatistic:
    def test_single_analog(self):
        cfg = _config(0, 1, (0.0,), 0.0, 1)
        out = lmpt_statistic(cfg, ReceivedData((), (0.7,)))
        assert out.statistic == pytest.approx(0.7, abs=1e-12)
        assert out.fisher_info == pytest.approx(1.0, abs=1e-12)

    def test_symmetric_cancellation(self):
        cfg = _config(0, 1, (0.0,), 0.0, 4)
        out = lmpt_statistic(cfg, ReceivedData((), (1.0, -1.0, 1.0, -1.0)))
        assert out.statistic == pytest.approx(0.0, abs=1e-12)

    def test_single_one_bit_sensor(self):
        # score = pdf(0)/0.5 and sqrt(FI) = sqrt(2/pi) coincide, so the
        # normalized statistic is exactly +/-1 for the two received levels.
        cfg = _config(1, 1, (0.0,), 0.0, 0)
        up = lmpt_statistic(cfg, ReceivedData((level_to_codeword(2, 1),), ()))
        down = lmpt_statistic(cfg, ReceivedData((level_to_codeword(1, 1),), ()))
        assert up.statistic == pytest.approx(1.0, abs=1e-12)
        assert down.statistic == pytest.approx(-1.0, abs=1e-12)

    def test_noncentrality(self):
        cfg = _config(0, 1, (0.0,), 0.0, 16)
        out = lmpt_statistic(cfg, ReceivedData((), tuple(np.zeros(16))))
        assert out.noncentrality == pytest.approx(0.25 * 4.0, abs=1e-12)

    def test_zero_information_raises(self):
        cfg = _config(1, 1, (0.0,), 0.5, 0)
        with pytest.raises(ValueError):
            lmpt_statistic(cfg, ReceivedData((level_to_codeword(1, 1),), ()))

    def test_roster_mismatch_raises(self):
        cfg = _config(1, 1, (0.0,), 0.0, 1)
        with pytest.raises(ValueError):
            lmpt_statistic(cfg, ReceivedData((), (0.1,)))


class TestScoreMoments:
    def test_null_mean_and_variance_match_information(self):
        cfg = _config(12, 2, (-0.8, 0.0, 0.8), 0.1, 4)
        kernels = network_kernels(cfg)
        rng = trial_rng(77, 0)
        trials = 120_000
        y = rng.normal(0.0, 1.0, (trials, cfg.m_total))
        levels = np.empty((trials, cfg.m_q), dtype=np.int64)
        spec = cfg.quantized[0].quantizer
        for pos in range(cfg.m_q):
            sent = quantize_batch(y[:, pos], spec)
            from hybriddet.model import bsc_corrupt_levels

            levels[:, pos] = bsc_corrupt_levels(sent, spec.bits, 0.1, rng)
        scores = kernels.unnormalized_scores(levels, y[:, cfg.m_q:])
        fi = kernels.fisher_info
        stderr = math.sqrt(fi / trials)
        assert abs(scores.mean()) <= 3 * stderr
        assert scores.var() == pytest.approx(fi, rel=0.02)


class TestRocTheory:
    def test_threshold_reference_values(self):
        assert threshold_for_pfa(0.5) == pytest.approx(0.0, abs=1e-12)
        expected = upper_tail_inverse_bisect(0.1)
        assert threshold_for_pfa(0.1) == pytest.approx(expected, abs=1e-9)
        assert threshold_for_pfa(0.9) == pytest.approx(-threshold_for_pfa(0.1), abs=1e-12)

    def test_threshold_domain(self):
        for bad in (0.0, 1.0, -0.2, 1.7):
            with pytest.raises(ValueError):
                threshold_for_pfa(bad)

    def test_pd_reference_values(self):
        eta = threshold_for_pfa(0.1)
        assert theoretical_pd(0.0, eta) == pytest.approx(0.1, abs=1e-12)
        assert theoretical_pd(eta, eta) == pytest.approx(0.5, abs=1e-12)
        expected = upper_tail_quad(eta - 2.0)
        assert theoretical_pd(2.0, eta) == pytest.approx(expected, abs=1e-9)
        assert theoretical_pd(2.0, eta) == pytest.approx(0.7637596, abs=1e-6)


class TestBaselines:
    def test_clairvoyant(self):
        cfg = _config(0, 1, (0.0,), 0.0, 1)
        assert baseline_statistic("clairvoyant", cfg, observations=[1.3]) == pytest.approx(1.3)

    def test_reconstruction_centroid(self):
        spec = QuantizerSpec(1, (0.0,))
        table = reconstruction_table(spec, 1.0)
        assert table[1] == pytest.approx(2 * 0.3989422804014327, abs=1e-9)
        assert table[0] == pytest.approx(-2 * 0.3989422804014327, abs=1e-9)

    def test_quantized_only_equals_sub_network_statistic(self):
        cfg = _config(3, 1, (0.0,), 0.0, 2)
        codewords = tuple(level_to_codeword(lv, 1) for lv in (1, 2, 2))
        data = ReceivedData(codewords, (0.4, -0.1))
        sub = _config(3, 1, (0.0,), 0.0, 0)
        expected = lmpt_statistic(sub, ReceivedData(codewords, ())).statistic
        assert baseline_statistic("quantized_only", cfg, data=data) == pytest.approx(expected)

    def test_empty_subset_raises(self):
        cfg = _config(2, 1, (0.0,), 0.0, 0)
        with pytest.raises(ValueError):
            baseline_statistic("fp_only", cfg, data=ReceivedData((), ()))

    def test_unknown_kind(self):
        cfg = _config(1, 1, (0.0,), 0.0, 1)
        with pytest.raises(ValueError):
            baseline_statistic("nope", cfg, observations=[1.0])


class TestDegenerateCells:
    def test_zero_probability_cell_scores_zero(self):
        # A threshold far in the tail underflows one cell's probability to 0
        # over a noiseless channel; its score table entry must be 0, not inf.
        spec = QuantizerSpec(2, (-40.0, 0.0, 40.0))
        kernels = likelihood_kernels(spec, ChannelSpec(0.0), 1.0)
        assert np.all(np.isfinite(kernels.score_table))
        assert kernels.score_table[0] == 0.0
        assert kernels.score_table[-1] == 0.0


class TestNullDistribution:
    def test_statistic_tail_matches_theory(self):
        cfg = _config(80, 3, tuple(np.linspace(-1.75, 1.75, 7)), 0.0, 20)
        kernels = network_kernels(cfg)
        trials = 5000
        stats = np.empty(trials)
        spec = cfg.quantized[0].quantizer
        for t in range(trials):
            rng = trial_rng(123, t)
            y = simulate_observations(PARAMS, Hypothesis.H0, 100, rng)
            levels = quantize_batch(y[:80], spec)
            stats[t] = kernels.statistic(levels, y[80:])
        for eta, tail in ((0.0, 0.5), (1.2816, 0.09997), (2.3263, 0.01)):
            assert np.mean(stats > eta) == pytest.approx(tail, abs=0.015)
