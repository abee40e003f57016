import numpy as np
import pytest

from evrep.event_core import EventWindow, SensorGeometry, canonicalize


def make_random_window(
    rng: np.random.Generator,
    geometry: SensorGeometry,
    n: int,
    t_lo: int = 0,
    t_hi: int = 1_000_000,
) -> EventWindow:
    """Uniform random events, canonicalized (sorted, tight span)."""
    raw = np.stack(
        [
            rng.integers(0, geometry.width, n),
            rng.integers(0, geometry.height, n),
            rng.integers(t_lo, t_hi, n),
            rng.integers(0, 2, n),
        ],
        axis=1,
    )
    return canonicalize(raw, geometry)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_geometry():
    return SensorGeometry(32, 24)
