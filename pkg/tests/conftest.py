import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sprepeater.fock import ModeRegister, MixedState, PureState  # noqa: E402


def random_pure(register: ModeRegister, rng: np.random.Generator, max_total: int | None = None) -> PureState:
    """Random normalized state, optionally restricted to total photon number <= max_total."""
    amps = rng.normal(size=register.dim) + 1j * rng.normal(size=register.dim)
    if max_total is not None:
        totals = np.indices(register.shape).sum(axis=0).reshape(-1)
        amps[totals > max_total] = 0.0
    return PureState(register, amps).normalized()


def random_mixed(register: ModeRegister, rng: np.random.Generator, max_total: int | None = None, rank: int = 3) -> MixedState:
    weights = rng.dirichlet(np.ones(rank))
    mat = sum(w * random_pure(register, rng, max_total).to_mixed().matrix for w in weights)
    return MixedState(register, mat)


@pytest.fixture
def rng():
    return np.random.default_rng(20071)
