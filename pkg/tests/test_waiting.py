import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from sprepeater import link, waiting
from sprepeater.errors import InvalidParameterError
from sprepeater.waiting import SimConfig, predicted_mean, rng_stream, simulate


class TestConfig:
    @pytest.mark.parametrize("levels", [(), (0.0,), (0.5, 1.2)])
    def test_bad_probabilities(self, levels):
        with pytest.raises(InvalidParameterError):
            SimConfig(levels)

    def test_bad_trials(self):
        with pytest.raises(InvalidParameterError):
            SimConfig((0.5,), trials=0)

    def test_bad_p_pr(self):
        with pytest.raises(InvalidParameterError):
            SimConfig((0.5,), p_pr=0.0)


class TestStreams:
    def test_reproducible(self):
        a = rng_stream(7, 3).random(1000)
        b = rng_stream(7, 3).random(1000)
        assert np.array_equal(a, b)

    def test_ids_differ(self):
        assert not np.array_equal(rng_stream(7, 0).random(10), rng_stream(7, 1).random(10))

    @pytest.mark.parametrize("stream_id", [0, 1, 2])
    def test_uniformity(self, stream_id):
        draws = rng_stream(11, stream_id).random(100_000)
        assert stats.kstest(draws, "uniform").pvalue > 0.01

    def test_streams_not_correlated(self):
        a, b = rng_stream(11, 0).random(100_000), rng_stream(11, 1).random(100_000)
        assert abs(np.corrcoef(a, b)[0, 1]) < 0.02


class TestSimulate:
    def test_geometric_law(self):
        res = simulate(SimConfig((0.1,), slot_duration=2.0, trials=100_000, seed=5))
        assert abs(res.mean_T - 20.0) <= 3 * res.stderr

    def test_deterministic(self):
        res = simulate(SimConfig((1.0,) * 4, slot_duration=0.25, trials=1000, p_pr=1.0))
        assert res.mean_T == waiting.minimum_time(SimConfig((1.0,) * 4, 0.25))
        assert res.stderr == 0.0

    def test_slot_scaling(self):
        base = simulate(SimConfig((0.2, 0.5), 1.0, 5000, 9, 0.5))
        scaled = simulate(SimConfig((0.2, 0.5), 3.5, 5000, 9, 0.5))
        assert scaled.mean_T == pytest.approx(3.5 * base.mean_T, rel=1e-15)

    def test_bit_identical(self):
        cfg = SimConfig((0.3, 0.6, 0.6), 1.0, 3000, 42, 0.7)
        a, b = simulate(cfg), simulate(cfg)
        assert a.mean_T == b.mean_T and a.stderr == b.stderr
        assert np.array_equal(a.histogram[0], b.histogram[0])

    def test_seed_changes_result(self):
        a = simulate(SimConfig((0.3, 0.6), trials=3000, seed=1))
        b = simulate(SimConfig((0.3, 0.6), trials=3000, seed=2))
        assert a.mean_T != b.mean_T

    def test_partition_invariance(self):
        cfg = SimConfig((0.3, 0.5, 0.5), 1.0, 2000, 13, 0.5)
        serial, parallel = simulate(cfg, workers=1), simulate(cfg, workers=2)
        assert parallel.mean_T == pytest.approx(serial.mean_T, abs=1e-12)
        assert parallel.stderr == pytest.approx(serial.stderr, abs=1e-12)

    def test_monotone_with_common_random_numbers(self):
        means = [simulate(SimConfig((p, 0.5, 0.5), trials=20_000, seed=3)).mean_T for p in (0.1, 0.2, 0.4)]
        assert means[0] > means[1] > means[2]
        swaps = [simulate(SimConfig((0.2, q), trials=20_000, seed=3)).mean_T for q in (0.2, 0.4, 0.8)]
        assert swaps[0] > swaps[1] > swaps[2]

    def test_histogram_counts(self):
        res = simulate(SimConfig((0.4, 0.5), trials=777, seed=0))
        assert res.histogram[0].sum() == 777
        assert res.mean_T > 0 and res.stderr >= 0

    @settings(max_examples=15, deadline=None)
    @given(st.lists(st.floats(0.2, 1.0), min_size=1, max_size=3), st.integers(0, 1000))
    def test_never_below_minimum(self, levels, seed):
        cfg = SimConfig(tuple(levels), 1.0, 200, seed)
        assert simulate(cfg).mean_T >= waiting.minimum_time(cfg)


class TestHeuristic:
    @pytest.mark.parametrize("n", [1, 2, 3])
    @pytest.mark.parametrize("p0", [0.05, 0.5])
    @pytest.mark.parametrize("p_pr", [None, 0.5])
    def test_bracket(self, n, p0, p_pr):
        cfg = SimConfig((p0,) + (0.5,) * n, 1.0, 100_000, 17, p_pr)
        ratio = simulate(cfg).mean_T / predicted_mean(cfg)
        assert 0.6 <= ratio <= 1.5

    @pytest.mark.parametrize("n", [1, 2])
    def test_bracket_low_swap_probability(self, n):
        cfg = SimConfig((0.05,) + (0.2,) * n, 1.0, 20_000, 17, 0.2)
        ratio = simulate(cfg).mean_T / predicted_mean(cfg)
        assert 0.6 <= ratio <= 1.5

    def test_reference_chain_two_levels(self):
        params = link.RepeaterParams(1000, 2)
        report = link.chain_analysis(params)
        cfg = SimConfig(report.P, params.slot, 100_000, 21, report.P_pr)
        res = simulate(cfg)
        assert res.mean_T == pytest.approx(predicted_mean(cfg), rel=0.20)
        # the prediction is the same expression as the closed-form time
        assert predicted_mean(cfg) == pytest.approx(report.T_tot, rel=1e-12)
