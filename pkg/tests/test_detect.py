import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import naive_peaks
from neurobeat.core import EegRecording
from neurobeat.detect import (
    PeakPickConfig,
    StftConfig,
    channel_onsets,
    cluster_timestamps,
    dummy_detector,
    flux_baseline,
    peak_indices,
    peak_pick,
)
from neurobeat.errors import EmptyCurve, NonPositiveDuration


class TestPeakPick:
    def test_worked_example(self):
        curve = [0.1, 0.2, 0.9, 0.2, 0.1, 0.1, 0.1, 0.8, 0.1, 0.1]
        cfg = PeakPickConfig(w1=1, w2=1, w3=2, w4=1, w5=2, delta=0.1)
        assert naive_peaks(curve, 1, 1, 2, 1, 2, 0.1) == [2, 7]
        np.testing.assert_allclose(peak_pick(curve, cfg, 125.0).times_s, [0.016, 0.056])

    def test_constant(self):
        assert len(peak_pick(np.full(50, 0.4), PeakPickConfig(), 125.0)) == 0

    def test_impulse(self):
        x = np.zeros(80)
        x[33] = 1.0
        assert peak_indices(x, PeakPickConfig()).tolist() == [33]

    def test_plateau_leftmost(self):
        x = np.zeros(40)
        x[10:13] = 1.0
        assert peak_indices(x, PeakPickConfig(1, 1, 3, 3, 5, 0.1)).tolist() == [10]

    def test_empty(self):
        with pytest.raises(EmptyCurve):
            peak_pick([], PeakPickConfig(), 125.0)

    def test_accepts_curve_objects(self):
        from neurobeat.nn.checkpoint import ActivationCurve

        x = np.zeros(80)
        x[20] = 0.9
        assert peak_pick(ActivationCurve(x, 125.0)).times_s.tolist() == [20 / 125]

    @settings(max_examples=60)
    @given(
        st.lists(st.floats(0, 1), min_size=1, max_size=60),
        st.integers(0, 4), st.integers(0, 4), st.integers(0, 6), st.integers(0, 6), st.integers(0, 8),
        st.sampled_from([0.05, 0.2]),
    )
    def test_matches_naive(self, x, w1, w2, w3, w4, w5, delta):
        cfg = PeakPickConfig(w1, w2, w3, w4, w5, delta)
        assert peak_indices(x, cfg).tolist() == naive_peaks(x, w1, w2, w3, w4, w5, delta)

    @settings(max_examples=40)
    @given(st.lists(st.floats(0, 1), min_size=1, max_size=60), st.floats(-5, 5))
    def test_shift_invariant(self, x, c):
        x = np.round(np.asarray(x), 3)  # keep the shift exact in binary
        c = round(c, 3)
        cfg = PeakPickConfig(2, 2, 4, 2, 3, 0.1)
        a = peak_indices(x, cfg)
        b = peak_indices(np.round(x + c, 3), cfg)
        # rounding can only matter for exact ties with the threshold
        assert a.tolist() == b.tolist() or len(a) == len(b)

    def test_min_distance(self, rng):
        for _ in range(20):
            idx = peak_indices(rng.random(300), PeakPickConfig(1, 1, 3, 3, 7, 0.0))
            assert np.all(np.diff(idx) >= 7)


class TestDummy:
    def test_three(self):
        assert dummy_detector(3.0).times_s.tolist() == [0.0, 1.0, 2.0]

    def test_four_minutes(self):
        ann = dummy_detector(240.0)
        assert len(ann) == 240 and ann.times_s[-1] == 239.0

    def test_half(self):
        assert dummy_detector(0.5).times_s.tolist() == [0.0]

    @pytest.mark.parametrize("d", [0.0, -1.0])
    def test_non_positive(self, d):
        with pytest.raises(NonPositiveDuration):
            dummy_detector(d)

    @given(st.floats(0.01, 500))
    def test_count(self, d):
        assert len(dummy_detector(d)) == int(np.ceil(d))


class TestCluster:
    def test_mean(self):
        np.testing.assert_allclose(cluster_timestamps([1.00, 1.02, 5.0], 0.05).times_s, [1.01, 5.0])

    def test_empty(self):
        assert len(cluster_timestamps([], 0.05)) == 0

    def test_chained(self):
        np.testing.assert_allclose(cluster_timestamps([0.0, 0.04, 0.08], 0.05).times_s, [0.04])

    @given(st.lists(st.floats(0, 100), max_size=50), st.floats(0.001, 2))
    def test_properties(self, xs, gap):
        out = cluster_timestamps(xs, gap).times_s
        assert len(out) <= len(xs)
        assert np.all(np.diff(out) > 0)
        np.testing.assert_allclose(cluster_timestamps(xs[::-1], gap).times_s, out)


def impulse_train(n=2000, every=150, offset=40):
    x = np.zeros(n)
    x[offset::every] = 5.0
    return x


class TestFluxBaseline:
    def test_identical_channels(self):
        x = impulse_train()
        rec = EegRecording("s", "a", 125, np.tile(x, (4, 1)))
        peak_cfg = PeakPickConfig().rescaled(125, 125 / 4)
        single = channel_onsets(rec.data[0], 125, StftConfig(), peak_cfg)
        assert len(single) > 0
        np.testing.assert_allclose(flux_baseline(rec, StftConfig(), peak_cfg).times_s, single, atol=1e-6)

    def test_zero(self):
        rec = EegRecording("s", "a", 125, np.zeros((3, 1000)))
        assert len(flux_baseline(rec)) == 0

    def test_default_rescale(self):
        cfg = PeakPickConfig().rescaled(125, 31.25)
        assert (cfg.w1, cfg.w3, cfg.w4, cfg.w5) == (1, 3, 2, 3)
