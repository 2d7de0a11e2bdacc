from __future__ import annotations

import numpy as np
import pytest

from saibench.core import JetEvent, MolecularFrame, PrecipEvent, Trajectory
from saibench.synth import MdToyParams, gen_jet_toy, gen_md_toy, gen_precip_dataset


@pytest.fixture(scope="session")
def md_traj() -> Trajectory:
    return gen_md_toy(MdToyParams(n_frames=300, seed=3))


@pytest.fixture(scope="session")
def jet_ds():
    return gen_jet_toy(120, seed=5)


@pytest.fixture(scope="session")
def precip_events() -> list[PrecipEvent]:
    return gen_precip_dataset(8, seed=11, H=64, W=64, p=4, f=6)


def make_frame(t: int, n: int = 3, seed: int = 0, labeled: bool = True) -> MolecularFrame:
    rng = np.random.default_rng(seed + 1000 * t)
    species = [6, 1, 8, 1, 6][:n]
    pos = rng.normal(size=(n, 3))
    if not labeled:
        return MolecularFrame(t, species, pos)
    return MolecularFrame(t, species, pos, float(rng.normal()), rng.normal(size=(n, 3)))


def make_jet(eid: int, label: int = 0, n: int = 5, seed: int = 0) -> JetEvent:
    rng = np.random.default_rng(seed + eid)
    p = rng.normal(size=(n, 3)) + np.array([3.0, 1.0, 0.5])
    e = np.linalg.norm(p, axis=1)
    return JetEvent(eid, np.column_stack([e, p]), label)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[n])
