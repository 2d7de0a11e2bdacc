"""Problem-space partitioning: time windows, seeded subsets, scalar bins,
and threshold-responsive precipitation subsets."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np

from .core import PrecipEvent, PredictionSet, Trajectory
from .rng import SplitMix64, derive_seed, unique_sorted

# fractions such as 0.29 * 100 evaluate to 28.999999999999996
_FRAC_EPS = 1e-9


class SliceError(ValueError):
    pass


class OutOfRangeError(SliceError):
    def __init__(self, ids: Sequence[int], lo: float, hi: float):
        self.ids = list(ids)
        shown = ", ".join(map(str, self.ids[:10])) + (" ..." if len(self.ids) > 10 else "")
        super().__init__(f"{len(self.ids)} value(s) outside [{lo}, {hi}]: ids {shown}")


# ---------------------------------------------------------------------------
# slice specs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TimeWindow:
    start_frac: float
    size_frac: float
    kind = "time_window"

    def __post_init__(self):
        if not (0.0 <= self.start_frac <= 1.0 and 0.0 < self.size_frac <= 1.0):
            raise SliceError(f"window fractions out of range: start={self.start_frac}, size={self.size_frac}")
        if self.start_frac + self.size_frac > 1.0 + _FRAC_EPS:
            raise SliceError(f"window end {self.start_frac + self.size_frac} exceeds 1")

    @property
    def end_frac(self) -> float:
        return self.start_frac + self.size_frac

    def to_dict(self) -> dict:
        return {"kind": self.kind, "start_frac": self.start_frac, "size_frac": self.size_frac}


@dataclass(frozen=True)
class RandomSubset:
    seed: int
    count: int | None = None
    fraction: float | None = None
    kind = "random_subset"

    def __post_init__(self):
        if (self.count is None) == (self.fraction is None):
            raise SliceError("random subset needs exactly one of count or fraction")
        if self.fraction is not None and not (0.0 < self.fraction <= 1.0):
            raise SliceError(f"fraction {self.fraction} not in (0, 1]")
        if self.count is not None and self.count < 1:
            raise SliceError(f"count {self.count} must be positive")

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"kind": self.kind, "seed": self.seed}
        if self.count is not None:
            d["count"] = self.count
        else:
            d["fraction"] = self.fraction
        return d


@dataclass(frozen=True)
class FeatureBins:
    feature: str
    lo: float
    hi: float
    n_bins: int
    selected: tuple[int, ...] = ()
    kind = "feature_bins"

    def __post_init__(self):
        object.__setattr__(self, "selected", tuple(sorted(set(int(b) for b in self.selected))))
        if not self.lo < self.hi:
            raise SliceError(f"lo {self.lo} must be below hi {self.hi}")
        if self.n_bins < 1:
            raise SliceError("n_bins must be >= 1")
        bad = [b for b in self.selected if not 0 <= b < self.n_bins]
        if bad:
            raise SliceError(f"selected bins {bad} outside [0, {self.n_bins})")

    @property
    def width(self) -> float:
        return (self.hi - self.lo) / self.n_bins

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "feature": self.feature,
            "lo": self.lo,
            "hi": self.hi,
            "n_bins": self.n_bins,
            "selected": list(self.selected),
        }


@dataclass(frozen=True)
class ThresholdResponsive:
    T: float
    kind = "threshold_responsive"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "T": self.T}


SliceSpec = TimeWindow | RandomSubset | FeatureBins | ThresholdResponsive

_SPEC_TYPES = {cls.kind: cls for cls in (TimeWindow, RandomSubset, FeatureBins, ThresholdResponsive)}


def slice_spec_from_dict(d: Mapping[str, Any]) -> SliceSpec:
    d = dict(d)
    kind = d.pop("kind", None)
    if kind not in _SPEC_TYPES:
        raise SliceError(f"unknown slice kind {kind!r}")
    if kind == "feature_bins":
        d["selected"] = tuple(d.get("selected", ()))
    try:
        return _SPEC_TYPES[kind](**d)
    except TypeError as exc:
        raise SliceError(f"bad {kind} slice: {exc}") from None


@dataclass(frozen=True)
class SliceResult:
    spec: SliceSpec | None
    sample_ids: tuple[int, ...]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        ids = tuple(int(i) for i in self.sample_ids)
        if len(set(ids)) != len(ids):
            raise SliceError("slice ids are not unique")
        object.__setattr__(self, "sample_ids", ids)

    def __len__(self) -> int:
        return len(self.sample_ids)

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict() if self.spec is not None else None,
            "sample_ids": list(self.sample_ids),
            "provenance": self.provenance,
        }


# ---------------------------------------------------------------------------
# time windows
# ---------------------------------------------------------------------------


def frac_floor(frac: float, m: int) -> int:
    return int(math.floor(frac * m + _FRAC_EPS))


def window_ranks(m: int, start_frac: float, size_frac: float) -> range:
    """Ranks r with floor(start*M) <= r < floor((start+size)*M)."""
    return range(frac_floor(start_frac, m), frac_floor(start_frac + size_frac, m))


def time_window_slice(traj: Trajectory, start_frac: float, size_frac: float) -> SliceResult:
    spec = TimeWindow(start_frac, size_frac)
    ranks = window_ranks(len(traj), start_frac, size_frac)
    if len(ranks) == 0:
        raise SliceError(f"window start={start_frac} size={size_frac} selects no frames of {len(traj)}")
    ids = traj.ids
    return SliceResult(spec, tuple(ids[r] for r in ranks), {"dataset": traj.molecule_name})


def window_grid(sizes: Iterable[float], starts: Iterable[float], max_end: float = 1.0) -> list[TimeWindow]:
    """Cartesian product of sizes x starts with start + size <= max_end, size-major."""
    sizes, starts = list(sizes), list(starts)
    for frac in [*sizes, max_end]:
        if not 0.0 < frac <= 1.0:
            raise SliceError(f"fraction {frac} not in (0, 1]")
    for frac in starts:
        if not 0.0 <= frac <= 1.0:
            raise SliceError(f"start {frac} not in [0, 1]")
    grid = [
        TimeWindow(start, size)
        for size in sorted(sizes)
        for start in sorted(starts)
        if start + size <= max_end + _FRAC_EPS
    ]
    if not grid:
        raise SliceError("window grid is empty")
    return grid


# ---------------------------------------------------------------------------
# random subsets
# ---------------------------------------------------------------------------


def subset_count(n: int, count: int | None = None, fraction: float | None = None) -> int:
    if count is None:
        if fraction is None or not 0.0 < fraction <= 1.0:
            raise SliceError(f"fraction {fraction} not in (0, 1]")
        count = int(math.floor(fraction * n + 0.5))
    if count < 1:
        raise SliceError(f"subset of {n} ids would be empty")
    if count > n:
        raise SliceError(f"count {count} exceeds population {n}")
    return count


def random_subsample(ids: Iterable[int], count_or_fraction: int | float, seed: int, dataset: str = "") -> SliceResult:
    """Uniform draw without replacement; an ``int`` is a count, a ``float`` a fraction.

    The population is de-duplicated and sorted first, so the result depends
    only on the id set and the seed. Output ids are sorted.
    """
    population = unique_sorted(ids)
    if isinstance(count_or_fraction, (int, np.integer)) and not isinstance(count_or_fraction, bool):
        spec = RandomSubset(seed, count=int(count_or_fraction))
    else:
        spec = RandomSubset(seed, fraction=float(count_or_fraction))
    k = subset_count(len(population), spec.count, spec.fraction)
    chosen = SplitMix64(derive_seed(seed)).sample(population, k)
    return SliceResult(spec, tuple(sorted(chosen)), {"dataset": dataset, "seed": seed})


# ---------------------------------------------------------------------------
# scalar bins
# ---------------------------------------------------------------------------


def bin_index(value: float, lo: float, hi: float, n_bins: int) -> int:
    """Bin k covers [lo + k*w, lo + (k+1)*w); the last bin also takes ``hi``."""
    w = (hi - lo) / n_bins
    k = int(math.floor((value - lo) / w))
    # float rounding near interior edges: trust the explicit edge comparison
    while k > 0 and value < lo + k * w:
        k -= 1
    while k < n_bins - 1 and value >= lo + (k + 1) * w:
        k += 1
    return min(max(k, 0), n_bins - 1)


def bin_by_scalar(
    events: Iterable[Any],
    feature_fn: Callable[[Any], float],
    lo: float,
    hi: float,
    n_bins: int,
    id_fn: Callable[[Any], int] = lambda ev: ev.event_id,
) -> dict[int, list[int]]:
    FeatureBins("feature", lo, hi, n_bins)
    bins: dict[int, list[int]] = {k: [] for k in range(n_bins)}
    outside = []
    for ev in events:
        value = float(feature_fn(ev))
        sid = int(id_fn(ev))
        if not (lo <= value <= hi):
            outside.append(sid)
            continue
        bins[bin_index(value, lo, hi, n_bins)].append(sid)
    if outside:
        raise OutOfRangeError(sorted(outside), lo, hi)
    return {k: sorted(v) for k, v in bins.items()}


def equalized_counts(selected: Sequence[int], total: int) -> dict[int, int]:
    selected = sorted(set(selected))
    if not selected:
        raise SliceError("no bins selected")
    base, rem = divmod(total, len(selected))
    return {b: base + (1 if i < rem else 0) for i, b in enumerate(selected)}


def equalized_bin_sample(
    bins: Mapping[int, Sequence[int]], selected: Iterable[int], total: int, seed: int, dataset: str = ""
) -> SliceResult:
    """Equal draws from each selected bin; the remainder goes +1 to the lowest bins."""
    selected = sorted(set(selected))
    counts = equalized_counts(selected, total)
    chosen: list[int] = []
    for b in selected:
        members = unique_sorted(bins.get(b, ()))
        need = counts[b]
        if len(members) < need:
            raise SliceError(f"bin {b} has {len(members)} members, {need} required")
        chosen.extend(SplitMix64(derive_seed(seed, b)).sample(members, need))
    return SliceResult(
        RandomSubset(seed, count=total), tuple(sorted(chosen)), {"dataset": dataset, "seed": seed, "bins": selected}
    )


# ---------------------------------------------------------------------------
# threshold-responsive precipitation events
# ---------------------------------------------------------------------------


def frame_responds(gt_frame: np.ndarray, pd_frame: np.ndarray, T: float) -> bool:
    """A + B + C > 0: some pixel reaches T in the truth or the prediction."""
    return bool(np.any(gt_frame >= T) or np.any(pd_frame >= T))


def is_responsive(event: PrecipEvent, pred_frames: np.ndarray, T: float) -> bool:
    return all(frame_responds(event.targets[i], pred_frames[i], T) for i in range(event.output_len))


def threshold_responsive_subset(events: Sequence[PrecipEvent], preds: PredictionSet, T: float) -> SliceResult:
    keep = []
    for ev in events:
        if ev.event_id not in preds:
            raise SliceError(f"no prediction for event {ev.event_id}")
        if is_responsive(ev, np.asarray(preds[ev.event_id]), T):
            keep.append(ev.event_id)
    return SliceResult(ThresholdResponsive(T), tuple(sorted(keep)), {"model_id": preds.model_id})
