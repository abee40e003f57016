"""Array-in/array-out wrappers over the evrep representations.

Everything here takes plain numpy arrays and returns plain numpy arrays, so
training pipelines can call the representations without touching the window,
cloud, or plane container types. Each wrapper delegates to the corresponding
evrep function and is bit-identical to it (and to the CLI) for fixed inputs;
inputs already contiguous cross without a copy. Errors are the primary
library's exception classes, re-exported as :mod:`evrep.errors`.

Events travel as an N x 4 array with columns (x, y, t_us, p), polarity in
{-1, 0, 1} with 0 meaning "wire zero" (off). No streaming state lives here;
wrappers are pure functions.
"""

from __future__ import annotations

from typing import Union

import numpy as np

from evrep import (
    SensorGeometry,
    canonicalize,
    dea_fuse,
    heatmap_decode,
    heatmap_encode,
    mpjpe,
    project_dev,
    rasterize,
    sample_fixed,
    simdr_decode,
    simdr_encode,
)

__version__ = "0.1.0"

__all__ = [
    "rasterize_arrays",
    "project_dev_arrays",
    "dea_fuse_arrays",
    "simdr_encode",
    "simdr_decode",
    "heatmap_encode_array",
    "heatmap_decode",
    "mpjpe",
]

Dims = Union[int, tuple[int, int, int]]


def _window(events: np.ndarray, width: int, height: int):
    return canonicalize(np.ascontiguousarray(events), SensorGeometry(width, height))


def rasterize_arrays(
    events: np.ndarray,
    width: int,
    height: int,
    k: int = 4,
    sample_n: int = 2048,
    seed: int = 0,
) -> np.ndarray:
    """Condense events into an M x 5 point array (x, y, t_avg, p_acc, e_cnt).

    ``sample_n`` > 0 resamples to exactly that many points with the primary
    library's sampling rule; 0 keeps the raw cloud. Column order matches the
    RPC1 record layout.
    """
    cloud = rasterize(_window(events, width, height), k=k)
    if sample_n:
        cloud = sample_fixed(cloud, n=sample_n, seed=seed)
    return np.stack(
        [
            cloud.xs.astype(np.float64),
            cloud.ys.astype(np.float64),
            cloud.t_avg,
            cloud.p_acc.astype(np.float64),
            cloud.e_cnt.astype(np.float64),
        ],
        axis=1,
    )


def project_dev_arrays(
    events: np.ndarray,
    width: int,
    height: int,
    dims: Dims = (64, 64, 64),
    mode: str = "two_channel",
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Project events onto the three planes: (C,H,W), (C,T,H), (C,W,T)."""
    planes = project_dev(_window(events, width, height), dims=dims, mode=mode)
    return planes.plane_hw, planes.plane_th, planes.plane_wt


def dea_fuse_arrays(
    f_hw: np.ndarray,
    f_th: np.ndarray,
    f_wt: np.ndarray,
    pooling: str = "avg",
) -> np.ndarray:
    """Attention-fuse three plane tensors into a (3C, H, W) tensor."""
    return dea_fuse(np.asarray(f_hw), np.asarray(f_th), np.asarray(f_wt), pooling=pooling)


def heatmap_encode_array(
    joint: tuple[float, float],
    size: tuple[int, int] = (64, 64),
    sigma: float = 2.0,
) -> np.ndarray:
    """Gaussian heatmap for one joint as a bare (height, width) array."""
    return heatmap_encode(joint, size=size, sigma=sigma).grid
