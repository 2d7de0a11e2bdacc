"""Physically informed projections and perturbations.

* jet-frame feature projection: per-particle (E, dphi, deta) relative to
  the summed-momentum jet axis
* rotations about the beam (z) axis
* a smooth species-pair radial fingerprint used to compare molecular
  configurations, and the window-to-window similarity built on it
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import erf

from .core import JetDataset, JetEvent, MolecularFrame, Trajectory
from .sampling import SliceResult


class ProjectionError(ValueError):
    pass


# ---------------------------------------------------------------------------
# jets
# ---------------------------------------------------------------------------


def wrap_angle(a):
    """Wrap angles into (-pi, pi]."""
    w = np.mod(np.asarray(a, dtype=np.float64) + np.pi, 2 * np.pi) - np.pi
    w = np.where(w <= -np.pi, w + 2 * np.pi, w)
    return w if np.ndim(a) else float(w)


def azimuth(p: np.ndarray) -> np.ndarray:
    # quadrant-correct form of atan(py/px)
    return np.arctan2(p[..., 1], p[..., 0])


def polar_eta(p: np.ndarray) -> np.ndarray:
    """eta = atan(pz / |p|), kept as written for the tubular projection.

    Not the usual pseudorapidity atanh(pz / |p|); both are monotone in
    pz / |p| so orderings agree.
    """
    return np.arctan(p[..., 2] / np.linalg.norm(p, axis=-1))


@dataclass(frozen=True)
class JetFeatures:
    energy: np.ndarray
    dphi: np.ndarray
    deta: np.ndarray
    axis_phi: float
    axis_eta: float

    def __len__(self) -> int:
        return len(self.energy)

    def as_array(self) -> np.ndarray:
        return np.column_stack([self.energy, self.dphi, self.deta])


def project_jet_features(event: JetEvent) -> JetFeatures:
    p = event.particles[:, 1:4]
    norms = np.linalg.norm(p, axis=1)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise ProjectionError(f"event {event.event_id}: particle {int(zero[0])} has zero momentum")
    total = p.sum(axis=0)
    if not np.any(total):
        raise ProjectionError(f"event {event.event_id}: summed momentum is zero")
    phi_j = float(azimuth(total))
    eta_j = float(polar_eta(total))
    return JetFeatures(
        energy=event.particles[:, 0].copy(),
        dphi=wrap_angle(azimuth(p) - phi_j),
        deta=polar_eta(p) - eta_j,
        axis_phi=phi_j,
        axis_eta=eta_j,
    )


def rotate_momenta(particles: np.ndarray, theta: float) -> np.ndarray:
    if not math.isfinite(theta):
        raise ValueError(f"rotation angle {theta} is not finite")
    c, s = math.cos(theta), math.sin(theta)
    out = np.array(particles, dtype=np.float64)
    px, py = particles[:, 1], particles[:, 2]
    out[:, 1] = px * c - py * s
    out[:, 2] = px * s + py * c
    return out


def rotate_event(event: JetEvent, theta: float) -> JetEvent:
    """Rotate every particle by ``theta`` radians about the beam axis."""
    if theta == 0:
        return event
    return JetEvent(event.event_id, rotate_momenta(event.particles, theta), event.label, event.jet_energy)


def rotate_dataset(dataset: JetDataset, theta: float) -> JetDataset:
    return JetDataset(tuple(rotate_event(ev, theta) for ev in dataset.events), dataset.name)


def rotation_sweep(dataset: JetDataset, step_deg: float = 5.0, count: int = 36) -> list[tuple[float, JetDataset]]:
    """Copies of ``dataset`` rotated by k * step_deg for k = 0..count-1, tagged with the angle in degrees."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if step_deg * count > 360 + 1e-9:
        raise ValueError(f"{count} steps of {step_deg} deg exceed a full turn")
    return [(k * step_deg, rotate_dataset(dataset, math.radians(k * step_deg))) for k in range(count)]


# ---------------------------------------------------------------------------
# structural descriptor
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DescriptorParams:
    r_cut: float = 5.0
    n_bins: int = 32
    sigma: float = 0.1
    # fixes the block layout; None uses the frame's own species
    species: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.r_cut <= 0 or self.sigma <= 0:
            raise ValueError("r_cut and sigma must be positive")
        if self.n_bins < 4:
            raise ValueError("n_bins must be >= 4")
        if self.species is not None:
            object.__setattr__(self, "species", tuple(sorted(set(int(z) for z in self.species))))

    def species_pairs(self, species: Iterable[int]) -> list[tuple[int, int]]:
        zs = self.species if self.species is not None else tuple(sorted(set(species)))
        return [(a, b) for i, a in enumerate(zs) for b in zs[i:]]

    def to_dict(self) -> dict:
        d = {"r_cut": self.r_cut, "n_bins": self.n_bins, "sigma": self.sigma}
        if self.species is not None:
            d["species"] = list(self.species)
        return d


def structural_descriptor(frame: MolecularFrame, params: DescriptorParams) -> np.ndarray:
    """Gaussian-smeared pair-distance histogram per species pair, L2-normalized.

    Each pair distance d contributes the mass of N(d, sigma^2) falling in
    each bin of [0, r_cut]. Blocks follow sorted (Z_a <= Z_b) pair order.
    Invariant to rigid motion and atom permutation by construction.
    """
    n = frame.n_atoms
    if n < 2:
        raise ValueError(f"frame {frame.time_index}: descriptor needs at least 2 atoms")
    z = np.asarray(frame.species)
    pos = frame.positions
    iu, ju = np.triu_indices(n, k=1)
    dist = np.linalg.norm(pos[iu] - pos[ju], axis=1)
    za, zb = np.minimum(z[iu], z[ju]), np.maximum(z[iu], z[ju])

    edges = np.linspace(0.0, params.r_cut, params.n_bins + 1)
    scale = params.sigma * math.sqrt(2.0)
    # (pairs, edges) -> cumulative Gaussian mass below each edge
    cdf = 0.5 * erf((edges[None, :] - dist[:, None]) / scale)
    mass = cdf[:, 1:] - cdf[:, :-1]

    pairs = params.species_pairs(frame.species)
    blocks = []
    for a, b in pairs:
        sel = (za == a) & (zb == b)
        blocks.append(mass[sel].sum(axis=0) if sel.any() else np.zeros(params.n_bins))
    vec = np.concatenate(blocks) if blocks else np.zeros(0)
    norm = np.linalg.norm(vec)
    return vec / norm if norm > 0 else vec


class DescriptorCache:
    """Per-frame descriptor memo; concurrent reads, locked insertion."""

    def __init__(self, params: DescriptorParams):
        self.params = params
        self._store: dict[int, np.ndarray] = {}
        self._lock = threading.Lock()

    def get(self, frame: MolecularFrame) -> np.ndarray:
        vec = self._store.get(frame.time_index)
        if vec is None:
            vec = structural_descriptor(frame, self.params)
            vec.setflags(write=False)
            with self._lock:
                vec = self._store.setdefault(frame.time_index, vec)
        return vec

    def matrix(self, frames: Sequence[MolecularFrame]) -> np.ndarray:
        return np.vstack([self.get(fr) for fr in frames])

    def __len__(self) -> int:
        return len(self._store)


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


def window_similarity(
    traj: Trajectory,
    window_a: SliceResult,
    window_b: SliceResult,
    params: DescriptorParams,
    cache: DescriptorCache | None = None,
) -> float:
    """Mean cosine similarity of descriptors over all cross pairs (i in A, j in B)."""
    if not len(window_a) or not len(window_b):
        raise ValueError("window similarity needs two non-empty windows")
    if cache is None:
        cache = DescriptorCache(params)
    A = cache.matrix(traj.select(window_a.sample_ids))
    B = cache.matrix(traj.select(window_b.sample_ids))
    na, nb = np.linalg.norm(A, axis=1), np.linalg.norm(B, axis=1)
    A = np.divide(A, na[:, None], out=np.zeros_like(A), where=na[:, None] > 0)
    B = np.divide(B, nb[:, None], out=np.zeros_like(B), where=nb[:, None] > 0)
    # column sums first keeps the result symmetric in (A, B) up to rounding
    return float(np.dot(A.sum(axis=0), B.sum(axis=0)) / (len(A) * len(B)))
