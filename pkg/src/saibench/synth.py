"""Seeded synthetic datasets and simple, analyzable toy predictors.

The generators stand in for the real trajectory, jet, and radar datasets
so every harness path runs at desk scale, and each carries a closed form
that the metrics can be checked against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np
from scipy import ndimage

from .core import (
    JetDataset,
    JetEvent,
    MdPrediction,
    MolecularFrame,
    PrecipEvent,
    PredictionSet,
    Trajectory,
    sample_id_of,
)
from .metrics.precip import center_of_mass
from .rng import numpy_rng
from .transforms import DescriptorCache, DescriptorParams, project_jet_features, structural_descriptor

# ---------------------------------------------------------------------------
# molecular dynamics
# ---------------------------------------------------------------------------


def harmonic_energy_forces(positions: np.ndarray, x0: np.ndarray, k: float) -> tuple[float, np.ndarray]:
    """E = k/2 * sum |x - x0|^2 and F = -dE/dx = -k (x - x0)."""
    d = np.asarray(positions, dtype=np.float64) - x0
    return 0.5 * k * float(np.sum(d * d)), -k * d


@dataclass(frozen=True)
class MdToyParams:
    n_atoms: int = 5
    k: float = 2.0
    n_frames: int = 1200
    period: int = 240
    basin_shift: float = 0.25
    mode_amplitude: float = 0.2
    mode_periods: tuple[float, ...] = (37.3, 11.7)
    noise: float = 0.002
    seed: int = 0
    species: tuple[int, ...] | None = None
    equilibrium: Any = None
    molecule_name: str = "toy"

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError("spring constant must be positive")
        if self.n_frames < 1 or self.n_atoms < 1:
            raise ValueError("need at least one atom and one frame")
        if self.period < 2:
            raise ValueError("basin period must be >= 2 frames")


_TOY_SPECIES = (6, 6, 8, 1, 1, 1, 7, 6)


def _chain_geometry(n: int, rng: np.random.Generator) -> np.ndarray:
    pos = np.zeros((n, 3))
    direction = np.array([1.0, 0.0, 0.0])
    for i in range(1, n):
        turn = rng.normal(size=3)
        direction = direction + 0.8 * turn
        direction /= np.linalg.norm(direction)
        pos[i] = pos[i - 1] + 1.4 * direction
    return pos - pos.mean(axis=0)


def basin_schedule(n_frames: int, period: int) -> np.ndarray:
    """Square wave, 0 for the first half of every period and 1 for the second."""
    t = np.arange(n_frames)
    return ((t // (period // 2)) % 2).astype(np.float64)


def gen_md_toy(params: MdToyParams = MdToyParams()) -> Trajectory:
    """Harmonic toy trajectory hopping between two deformed basins.

    Positions follow x0 + basin(t) * D + sum_m a * sin(2 pi t / P_m) * M_m
    + jitter, with D and the mode shapes M_m fixed random deformations, so
    pair distances (not only coordinates) move. Energies and forces are
    exact for the harmonic well at x0.
    """
    rng = numpy_rng(params.seed, 0)
    species = tuple(params.species) if params.species is not None else tuple(
        _TOY_SPECIES[i % len(_TOY_SPECIES)] for i in range(params.n_atoms)
    )
    if len(species) != params.n_atoms:
        raise ValueError("species length must equal n_atoms")
    x0 = (
        np.asarray(params.equilibrium, dtype=np.float64).reshape(params.n_atoms, 3)
        if params.equilibrium is not None
        else _chain_geometry(params.n_atoms, rng)
    )
    deform = rng.normal(size=x0.shape)
    deform *= params.basin_shift / max(np.abs(deform).max(), 1e-12)
    modes = rng.normal(size=(len(params.mode_periods),) + x0.shape)
    modes *= params.mode_amplitude / np.abs(modes).max(axis=(1, 2), keepdims=True)
    basin = basin_schedule(params.n_frames, params.period)
    jitter = numpy_rng(params.seed, 1).normal(scale=params.noise, size=(params.n_frames, params.n_atoms, 3))
    frames = []
    for t in range(params.n_frames):
        pos = x0 + basin[t] * deform + jitter[t]
        for mode, period in zip(modes, params.mode_periods):
            pos = pos + math.sin(2 * math.pi * t / period) * mode
        energy, forces = harmonic_energy_forces(pos, x0, params.k)
        frames.append(MolecularFrame(t, species, pos, energy, forces))
    return Trajectory(tuple(frames), params.molecule_name)


# ---------------------------------------------------------------------------
# jets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JetClassParams:
    spread: float = 0.3
    energy_lo: float = 550.0
    energy_hi: float = 2440.0
    n_min: int = 8
    n_max: int = 24


DEFAULT_JET_CLASSES = {0: JetClassParams(spread=0.35), 1: JetClassParams(spread=0.12)}


def gen_jet_toy(
    n_events: int, seed: int = 0, class_params: Mapping[int, JetClassParams] | None = None, name: str = "toy_jets"
) -> JetDataset:
    """Balanced two-class jets of massless particles around a random axis.

    Classes differ by angular spread and total-energy range. Particle
    energies split the jet energy with flat Dirichlet fractions.
    """
    if n_events < 2:
        raise ValueError("need at least 2 events")
    classes = dict(DEFAULT_JET_CLASSES if class_params is None else class_params)
    rng = numpy_rng(seed, 0)
    labels = np.array([0] * (n_events - n_events // 2) + [1] * (n_events // 2))
    labels = labels[rng.permutation(n_events)]
    events = []
    for eid, label in enumerate(labels):
        cp = classes[int(label)]
        ev_rng = numpy_rng(seed, 1, eid)
        e_jet = ev_rng.uniform(cp.energy_lo, cp.energy_hi)
        n = int(ev_rng.integers(cp.n_min, cp.n_max + 1))
        energies = e_jet * ev_rng.dirichlet(np.ones(n))
        phi_axis = ev_rng.uniform(-math.pi, math.pi)
        el_axis = ev_rng.uniform(-0.5, 0.5)
        az = phi_axis + cp.spread * ev_rng.normal(size=n)
        el = np.clip(el_axis + cp.spread * ev_rng.normal(size=n), -1.4, 1.4)
        p = energies[:, None] * np.column_stack([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)])
        events.append(JetEvent(eid, np.column_stack([energies, p]), int(label)))
    return JetDataset(tuple(events), name)


# ---------------------------------------------------------------------------
# precipitation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Blob:
    x: float
    y: float
    sigma: float
    peak: float

    @property
    def mass(self) -> float:
        # sum of a grid-sampled 2-D Gaussian; aliasing error ~exp(-2 pi^2 sigma^2)
        return self.peak * 2.0 * math.pi * self.sigma**2


@dataclass(frozen=True)
class PrecipToyParams:
    H: int = 64
    W: int = 64
    p: int = 9
    f: int = 20
    velocity: tuple[float, float] = (0.5, 0.25)  # (vx, vy) pixels per frame
    decay: float = 0.0  # fraction of mass lost per frame
    blobs: tuple[Blob, ...] | None = None
    n_blobs: int = 1
    event_id: int = 0
    seed: int = 0
    margin_sigmas: float = 7.0

    def __post_init__(self):
        if self.H < 8 or self.W < 8:
            raise ValueError("frames must be at least 8 x 8")
        if not 0.0 <= self.decay < 1.0:
            raise ValueError("decay must lie in [0, 1) to keep intensities non-negative")


class OutOfBoundsError(ValueError):
    pass


def _random_blobs(params: PrecipToyParams) -> tuple[Blob, ...]:
    rng = numpy_rng(params.seed, 2, params.event_id)
    T = params.p + params.f
    vx, vy = params.velocity
    blobs = []
    for _ in range(params.n_blobs):
        sigma = rng.uniform(1.8, 3.0)
        m = params.margin_sigmas * sigma
        # keep the whole path inside the margin
        x_lo, x_hi = m - min(0.0, vx * (T - 1)), params.W - 1 - m - max(0.0, vx * (T - 1))
        y_lo, y_hi = m - min(0.0, vy * (T - 1)), params.H - 1 - m - max(0.0, vy * (T - 1))
        if x_lo > x_hi or y_lo > y_hi:
            raise OutOfBoundsError("frame too small for the blob path at this velocity")
        blobs.append(Blob(rng.uniform(x_lo, x_hi), rng.uniform(y_lo, y_hi), sigma, rng.uniform(20.0, 80.0)))
    return tuple(blobs)


def gen_precip_toy(params: PrecipToyParams = PrecipToyParams()) -> PrecipEvent:
    """Gaussian blobs advected at a constant velocity, scaled by (1 - decay)^t.

    ``meta`` records the analytic center-of-mass path and total-mass series.
    """
    blobs = params.blobs if params.blobs is not None else _random_blobs(params)
    T = params.p + params.f
    vx, vy = params.velocity
    for b in blobs:
        m = params.margin_sigmas * b.sigma
        for t in (0, T - 1):
            x, y = b.x + vx * t, b.y + vy * t
            if not (m <= x <= params.W - 1 - m and m <= y <= params.H - 1 - m):
                raise OutOfBoundsError(f"blob at ({b.x}, {b.y}) leaves the frame by frame {t}")
    rows = np.arange(params.H, dtype=np.float64)[:, None]
    cols = np.arange(params.W, dtype=np.float64)[None, :]
    frames = np.zeros((T, params.H, params.W))
    total0 = sum(b.mass for b in blobs)
    com_path, mass = [], []
    for t in range(T):
        scale = (1.0 - params.decay) ** t
        for b in blobs:
            x, y = b.x + vx * t, b.y + vy * t
            frames[t] += scale * b.peak * np.exp(-((cols - x) ** 2 + (rows - y) ** 2) / (2 * b.sigma**2))
        com_path.append(
            (
                sum(b.mass * (b.x + vx * t) for b in blobs) / total0,
                sum(b.mass * (b.y + vy * t) for b in blobs) / total0,
            )
        )
        mass.append(scale * total0)
    meta = {"com_path": com_path, "mass": mass, "velocity": (vx, vy), "decay": params.decay, "blobs": blobs}
    return PrecipEvent(params.event_id, frames, params.p, params.f, meta)


def gen_precip_dataset(n_events: int, seed: int = 0, **overrides) -> list[PrecipEvent]:
    """Events with per-event random blobs, velocities and decay rates."""
    rng = numpy_rng(seed, 3)
    events = []
    for eid in range(n_events):
        velocity = (float(rng.uniform(-0.6, 0.6)), float(rng.uniform(-0.6, 0.6)))
        decay = float(rng.uniform(0.0, 0.08))
        kwargs = dict(velocity=velocity, decay=decay, event_id=eid, seed=seed, n_blobs=int(rng.integers(1, 3)))
        kwargs.update(overrides)
        events.append(gen_precip_toy(PrecipToyParams(**kwargs)))
    return events


# ---------------------------------------------------------------------------
# toy predictors
# ---------------------------------------------------------------------------

TOY_KINDS = ("knn_forces", "linear_tagger", "advection_extrapolator")


class KnnForces:
    """Copies energy and forces from the training frame with the nearest descriptor."""

    workload = "md"

    def __init__(self, train: Sequence[MolecularFrame], descriptor: DescriptorParams | None = None, noise: float = 0.05):
        train = sorted(train, key=lambda fr: fr.time_index)
        if not train:
            raise ValueError("knn needs a non-empty training slice")
        if not all(fr.labeled for fr in train):
            raise ValueError("knn training frames must carry energy and forces")
        self.train = train
        self.noise = noise
        self.cache = DescriptorCache(descriptor or DescriptorParams(species=train[0].species))
        self.train_desc = self.cache.matrix(train)

    def predict(self, frame: MolecularFrame, seed: int | None = None) -> MdPrediction:
        # test frames may share time_index values with training frames, so skip the cache
        d = structural_distance(self.train_desc, structural_descriptor(frame, self.cache.params))
        nn = self.train[int(np.argmin(d))]
        energy, forces = nn.energy, np.array(nn.forces)
        if seed is not None:
            rng = numpy_rng(seed, frame.time_index)
            energy = energy + self.noise * float(rng.normal())
            forces = forces + self.noise * rng.normal(size=forces.shape)
        return MdPrediction(float(energy), forces)


def structural_distance(matrix: np.ndarray, vec: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum((matrix - vec) ** 2, axis=1))


def jet_moments(event: JetEvent, features: str = "projected") -> np.ndarray:
    """Event-level inputs for the linear tagger.

    ``projected``: jet energy, multiplicity and energy-weighted second
    moments of (dphi, deta), all invariant under beam-axis rotation.
    ``raw``: jet energy, multiplicity and energy-weighted means of the raw
    momentum components, which rotate with the event.
    """
    e_tot = event.jet_energy
    n = float(event.n_particles)
    if features == "projected":
        jf = project_jet_features(event)
        w = jf.energy / e_tot
        return np.array([e_tot, n, np.sum(w * jf.dphi**2), np.sum(w * jf.deta**2), np.sum(w * jf.dphi * jf.deta)])
    if features == "raw":
        p = event.particles
        w = p[:, 0] / e_tot
        unit = p[:, 1:4] / np.maximum(p[:, :1], 1e-12)
        return np.array([e_tot, n, *np.sum(w[:, None] * unit, axis=0), *np.sum(w[:, None] * unit**2, axis=0)])
    raise ValueError(f"unknown tagger features {features!r}")


class LinearTagger:
    """Fisher discriminant on standardized event moments, squashed to a score."""

    workload = "jet"

    def __init__(self, train: Sequence[JetEvent], features: str = "projected", noise: float = 0.5, ridge: float = 1e-6):
        train = sorted(train, key=lambda ev: ev.event_id)
        if not train:
            raise ValueError("tagger needs a non-empty training slice")
        self.features = features
        self.noise = noise
        X = np.vstack([jet_moments(ev, features) for ev in train])
        y = np.array([ev.label for ev in train])
        self.mu = X.mean(axis=0)
        self.sd = X.std(axis=0)
        self.sd[self.sd == 0] = 1.0
        Z = (X - self.mu) / self.sd
        if y.min() == y.max():
            self.w = np.zeros(Z.shape[1])
            # one-class training data: always predict that class
            self.b = -5.0 if y[0] == 0 else 5.0
            return
        m0, m1 = Z[y == 0].mean(axis=0), Z[y == 1].mean(axis=0)
        S = np.cov(Z[y == 0], rowvar=False, bias=True) + np.cov(Z[y == 1], rowvar=False, bias=True)
        S = np.atleast_2d(S) + ridge * np.eye(Z.shape[1])
        w = np.linalg.solve(S, m1 - m0)
        proj = Z @ w
        spread = proj.std()
        self.w = w / spread if spread > 0 else w
        self.b = -float(self.w @ (m0 + m1) / 2)

    def score(self, event: JetEvent, seed: int | None = None) -> float:
        z = (jet_moments(event, self.features) - self.mu) / self.sd
        logit = float(z @ self.w) + self.b
        if seed is not None:
            logit += self.noise * float(numpy_rng(seed, event.event_id).normal())
        return 1.0 / (1.0 + math.exp(-max(min(logit, 700.0), -700.0)))

    def predict(self, event: JetEvent, seed: int | None = None) -> np.ndarray:
        s = self.score(event, seed)
        return np.array([1.0 - s, s])


class AdvectionExtrapolator:
    """Estimates velocity and mass ratio from the last two input frames and
    advects the last frame forward."""

    workload = "precip"

    def __init__(self, train: Sequence[PrecipEvent] | None = None, noise: float = 0.1):
        self.noise = noise

    def predict_frames(self, inputs: np.ndarray, output_len: int, event_id: int = 0, seed: int | None = None) -> np.ndarray:
        a, b = np.asarray(inputs[-2], dtype=np.float64), np.asarray(inputs[-1], dtype=np.float64)
        ma, mb = a.sum(), b.sum()
        if ma > 0 and mb > 0:
            (xa, ya), (xb, yb) = center_of_mass(a), center_of_mass(b)
            vx, vy, ratio = xb - xa, yb - ya, mb / ma
        else:
            vx = vy = 0.0
            ratio = 1.0
        out = np.empty((output_len,) + b.shape)
        for k in range(1, output_len + 1):
            out[k - 1] = ndimage.shift(b, (vy * k, vx * k), order=1, mode="constant", cval=0.0) * ratio**k
        np.maximum(out, 0.0, out=out)
        if seed is not None:
            rng = numpy_rng(seed, event_id)
            out *= 1.0 + self.noise * rng.normal(size=out.shape)
            np.maximum(out, 0.0, out=out)
        return out

    def predict(self, event: PrecipEvent, seed: int | None = None) -> np.ndarray:
        return self.predict_frames(event.inputs, event.output_len, event.event_id, seed)


_TOY_CLASSES = {"knn_forces": KnnForces, "linear_tagger": LinearTagger, "advection_extrapolator": AdvectionExtrapolator}


def make_toy_model(kind: str, train: Sequence[Any] | None, **options):
    try:
        cls = _TOY_CLASSES[kind]
    except KeyError:
        raise ValueError(f"unknown toy predictor {kind!r}; expected one of {TOY_KINDS}") from None
    if "descriptor" in options and isinstance(options["descriptor"], Mapping):
        d = dict(options["descriptor"])
        if "species" in d:
            d["species"] = tuple(d["species"])
        options["descriptor"] = DescriptorParams(**d)
    if kind == "advection_extrapolator":
        return cls(train, **options)
    return cls(list(train or []), **options)


def toy_predict(kind: str, train_slice: Sequence[Any] | None, test_slice: Sequence[Any], seed: int | None = None, **options) -> PredictionSet:
    """Fit a toy model on ``train_slice`` and predict every sample of ``test_slice``.

    Without a seed the output is deterministic; a seed adds Gaussian
    perturbations drawn per sample from (seed, sample id), so results do not
    depend on evaluation order.
    """
    model = make_toy_model(kind, train_slice, **options)
    entries = {sample_id_of(s): model.predict(s, seed) for s in test_slice}
    return PredictionSet(f"toy:{kind}", "deterministic" if seed is None else f"seed-{seed}",
                         -1 if seed is None else int(seed), model.workload, entries)
