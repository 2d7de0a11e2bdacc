from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from saibench.core import PrecipEvent, PredictionSet
from saibench.sampling import (
    FeatureBins,
    OutOfRangeError,
    RandomSubset,
    SliceError,
    ThresholdResponsive,
    TimeWindow,
    bin_by_scalar,
    bin_index,
    equalized_bin_sample,
    equalized_counts,
    frac_floor,
    is_responsive,
    random_subsample,
    slice_spec_from_dict,
    threshold_responsive_subset,
    time_window_slice,
    window_grid,
    window_ranks,
)

SIZES = [0.30, 0.45, 0.60, 0.75, 0.90]
STARTS = [0.0, 0.15, 0.30, 0.45, 0.60]


def _grid_oracle(sizes, starts, max_end):
    # exact rational enumeration, independent of float tolerance
    F = lambda x: Fraction(str(x))
    return [(s, z) for z in sorted(sizes) for s in sorted(starts) if F(s) + F(z) <= F(max_end)]


def test_window_grid_training_scan_has_15_windows():
    grid = window_grid(SIZES, STARTS, 0.9)
    assert len(grid) == 15
    assert [(w.start_frac, w.size_frac) for w in grid] == _grid_oracle(SIZES, STARTS, 0.9)
    # per size: 5 + 4 + 3 + 2 + 1
    per_size = [sum(1 for w in grid if w.size_frac == z) for z in SIZES]
    assert per_size == [5, 4, 3, 2, 1]


def test_window_grid_errors():
    with pytest.raises(SliceError):
        window_grid([0.5], [0.6], 1.0)
    with pytest.raises(SliceError):
        window_grid([1.5], [0.0])


def test_frac_floor_absorbs_rounding():
    # 0.15 + 0.3 lands just below 0.45, and times 100 just below 45
    end = 0.15 + 0.3
    assert end * 100 < 45
    assert frac_floor(end, 100) == 45
    assert len(window_ranks(100, 0.15, 0.3)) == 30


def test_time_window_slice(md_traj):
    sl = time_window_slice(md_traj, 0.9, 0.1)
    assert len(sl) == 30 and sl.sample_ids == tuple(md_traj.ids[270:])
    assert sl.spec == TimeWindow(0.9, 0.1)
    with pytest.raises(SliceError):
        time_window_slice(md_traj, 0.5, 0.0001)
    with pytest.raises(SliceError):
        TimeWindow(0.8, 0.3)


@settings(max_examples=100)
@given(st.integers(1, 500), st.floats(0, 1), st.floats(0.001, 1))
def test_window_ranks_cover_expected_count(m, start, size):
    if start + size > 1:
        return
    r = window_ranks(m, start, size)
    assert 0 <= r.start <= r.stop <= m


def test_random_subsample_deterministic_and_order_free():
    ids = list(range(100))
    a = random_subsample(ids, 10, seed=5)
    b = random_subsample(list(reversed(ids)) + [3, 3], 10, seed=5)
    assert a.sample_ids == b.sample_ids
    assert len(a) == 10 and list(a.sample_ids) == sorted(a.sample_ids)
    assert random_subsample(ids, 10, seed=6).sample_ids != a.sample_ids


def test_random_subsample_fraction_rounding():
    assert len(random_subsample(range(10), 0.25, 0)) == 3  # 2.5 rounds half up
    assert len(random_subsample(range(10), 1.0, 0)) == 10
    with pytest.raises(SliceError):
        random_subsample(range(10), 11, 0)
    with pytest.raises(SliceError):
        random_subsample(range(10), 0.01, 0)


@settings(max_examples=60)
@given(st.lists(st.integers(-1000, 1000), min_size=1, max_size=60, unique=True), st.integers(0, 2**40), st.data())
def test_random_subsample_subset_property(ids, seed, data):
    k = data.draw(st.integers(1, len(ids)))
    sl = random_subsample(ids, k, seed)
    assert set(sl.sample_ids) <= set(ids) and len(sl) == k


def test_bin_index_edges():
    assert bin_index(0.0, 0, 16, 16) == 0
    assert bin_index(1.0, 0, 16, 16) == 1
    assert bin_index(15.999, 0, 16, 16) == 15
    assert bin_index(16.0, 0, 16, 16) == 15  # last bin closed


@given(st.floats(550, 2440))
def test_bin_index_matches_interval(v):
    lo, hi, n = 550.0, 2440.0, 8
    k = bin_index(v, lo, hi, n)
    w = (hi - lo) / n
    assert lo + k * w <= v + 1e-9
    assert v < lo + (k + 1) * w + 1e-9 or k == n - 1


def test_bin_width_from_energy_range():
    assert FeatureBins("jet_energy", 550, 2440, 8).width == 236.25


class _Ev:
    def __init__(self, eid, v):
        self.event_id, self.v = eid, v


def test_bin_by_scalar_and_out_of_range():
    evs = [_Ev(i, v) for i, v in enumerate([0.0, 0.5, 1.0, 1.5, 2.0])]
    bins = bin_by_scalar(evs, lambda e: e.v, 0.0, 2.0, 2)
    assert bins == {0: [0, 1], 1: [2, 3, 4]}
    with pytest.raises(OutOfRangeError) as info:
        bin_by_scalar(evs + [_Ev(9, 3.0), _Ev(7, -1)], lambda e: e.v, 0.0, 2.0, 2)
    assert info.value.ids == [7, 9]


def test_equalized_counts_remainder_to_lowest():
    assert equalized_counts([5, 2, 9], 8) == {2: 3, 5: 3, 9: 2}


def test_equalized_bin_sample():
    bins = {0: list(range(0, 10)), 1: list(range(10, 20)), 2: list(range(20, 23))}
    sl = equalized_bin_sample(bins, [0, 2], 5, seed=1)
    chosen = set(sl.sample_ids)
    assert len(chosen & set(bins[0])) == 3 and len(chosen & set(bins[2])) == 2
    assert sl.sample_ids == equalized_bin_sample(bins, [2, 0], 5, seed=1).sample_ids
    with pytest.raises(SliceError, match="bin 2 has 3"):
        equalized_bin_sample(bins, [2], 4, seed=1)


def test_slice_spec_from_dict():
    assert slice_spec_from_dict({"kind": "random_subset", "seed": 1, "count": 3}) == RandomSubset(1, count=3)
    assert slice_spec_from_dict({"kind": "threshold_responsive", "T": 5}) == ThresholdResponsive(5)
    fb = slice_spec_from_dict({"kind": "feature_bins", "feature": "e", "lo": 0, "hi": 1, "n_bins": 4, "selected": [3, 1]})
    assert fb.selected == (1, 3)
    for bad in ({"kind": "nope"}, {"kind": "random_subset", "seed": 1}, {"kind": "time_window", "start": 0}):
        with pytest.raises(SliceError):
            slice_spec_from_dict(bad)
    for spec in (TimeWindow(0.1, 0.2), RandomSubset(3, fraction=0.5), fb, ThresholdResponsive(16.0)):
        assert slice_spec_from_dict(spec.to_dict()) == spec


def _event(eid, targets, p=1):
    t = np.asarray(targets, dtype=float)
    return PrecipEvent(eid, np.concatenate([np.zeros((p,) + t.shape[1:]), t]), p, len(t))


def test_threshold_responsive_requires_every_lead():
    ev = _event(0, [[[20.0]], [[0.0]]])
    assert not is_responsive(ev, np.zeros((2, 1, 1)), 16)
    assert is_responsive(ev, np.array([[[0.0]], [[17.0]]]), 16)


def test_threshold_responsive_excludes_all_zero_events():
    zero = _event(1, np.zeros((2, 2, 2)))
    hot = _event(2, np.full((2, 2, 2), 50.0))
    preds = PredictionSet("m", "r", 0, "precip", {1: np.zeros((2, 2, 2)), 2: np.full((2, 2, 2), 10.0)})
    for T in (1e-9, 1.0, 16.0):
        assert threshold_responsive_subset([zero, hot], preds, T).sample_ids == (2,)
    assert threshold_responsive_subset([zero, hot], preds, 60.0).sample_ids == ()
