import warnings
from pathlib import Path

import numpy as np
import pytest

from bergman_rays.config import load_config
from bergman_rays.grid import make_grid
from bergman_rays.toric import Polytope, ToricMetric, build_basis
from bergman_rays.weights import WeightSystem

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"
DATA = Path(__file__).resolve().parent / "data"


@pytest.fixture(scope="session")
def segment():
    return Polytope.segment()


@pytest.fixture(scope="session")
def fs(segment):
    return ToricMetric(segment)


@pytest.fixture(scope="session")
def bases(segment, fs):
    return {k: build_basis(segment, k, fs) for k in (1, 2, 4, 8, 10, 16, 32)}


@pytest.fixture(scope="session")
def linear(segment):
    return WeightSystem(segment, pieces=[((-1,), 1)], label="linear")


@pytest.fixture(scope="session")
def trivial(segment):
    return WeightSystem.trivial(segment)


@pytest.fixture(scope="session")
def kinked(segment):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return WeightSystem(segment, pieces=[((0,), 0), ((-1,), "1/2")], combinator="max",
                            label="kinked")


@pytest.fixture(scope="session")
def grid256():
    return make_grid(cells=256)


@pytest.fixture(scope="session")
def grid64():
    return make_grid(cells=64)


@pytest.fixture(scope="session")
def shipped_configs():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return {p.stem: load_config(p) for p in sorted(CONFIGS.glob("*.toml"))}


def fs_potential(metric):
    return lambda X, T: metric.potential(X.reshape(-1, 1)).reshape(X.shape)
