import numpy as np
import pytest

import cmvscat as cs


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def random_disc(rng, radius=0.8):
    """One draw from the disc of the given radius."""
    return radius * np.sqrt(rng.uniform()) * np.exp(2j * np.pi * rng.uniform())


def random_sequence(rng, kind="decay"):
    """A random coefficient sequence for property sweeps."""
    if kind == "decay":
        return cs.random_decay(seed=int(rng.integers(0, 2**31)), rate=float(rng.uniform(0.2, 0.8)))
    if kind == "explicit":
        sites = rng.integers(-6, 7, size=5)
        return cs.explicit({int(k): random_disc(rng) for k in sites})
    raise ValueError(kind)
