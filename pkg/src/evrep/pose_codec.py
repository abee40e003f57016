"""Joint-coordinate codecs and the mean per-joint position error.

Two interchangeable target encodings for pose regression:

* 1D heat-vectors: each coordinate axis becomes a vector of Gaussian scores
  over integer bins, min-max normalized so the peak bin is exactly 1.
* 2D heatmaps: a Gaussian bump ``exp(-||v - v'||^2 / (2 sigma^2))`` on a
  small grid, peak 1 when the joint sits on an integer pixel.

Both decode by argmax with deterministic tie-breaking (lowest index, row-major
for grids), so encode -> decode is the identity on integer coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    BadAxisLengthError,
    BadSigmaError,
    EmptyVectorError,
    OutOfRangeError,
    ShapeMismatchError,
)


@dataclass(frozen=True)
class JointSet:
    """Joint coordinates for one skeleton, shape (J, 2) or (J, 3)."""

    coords: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.coords, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] not in (2, 3):
            raise ShapeMismatchError(f"joint coords must be (J, 2|3), got {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "coords", arr)

    @property
    def num_joints(self) -> int:
        return self.coords.shape[0]

    @property
    def dims(self) -> int:
        return self.coords.shape[1]


def simdr_encode(coord: float, axis_len: int, sigma: float = 8.0) -> np.ndarray:
    """Encode one coordinate as a normalized Gaussian heat-vector.

    Scores are the Gaussian ``exp(-(i - coord)^2 / (2 sigma^2))`` at integer
    bins ``i = 0..axis_len-1`` (any constant prefactor cancels in the
    normalization), then min-max rescaled to [0, 1]. The bin nearest ``coord``
    scores exactly 1; a coordinate exactly between two bins yields two 1s and
    decoding picks the lower.

    Raises
    ------
    BadAxisLengthError, BadSigmaError, OutOfRangeError
    """
    if axis_len < 2:
        raise BadAxisLengthError(f"axis needs >= 2 bins, got {axis_len}")
    if not sigma > 0:
        raise BadSigmaError(f"sigma must be positive, got {sigma}")
    if not 0 <= coord < axis_len:
        raise OutOfRangeError(f"coordinate {coord} outside [0, {axis_len})")
    i = np.arange(axis_len, dtype=np.float64)
    g = np.exp(-((i - coord) ** 2) / (2.0 * sigma * sigma))
    lo, hi = g.min(), g.max()
    if hi == lo:
        # sigma so wide the scores are indistinguishable in float64
        return np.ones(axis_len, dtype=np.float64)
    return (g - lo) / (hi - lo)


def simdr_decode(vector: np.ndarray) -> int:
    """Return the argmax bin; ties resolve to the lowest index."""
    vector = np.asarray(vector)
    if vector.ndim != 1 or vector.shape[0] == 0:
        raise EmptyVectorError(f"expected a non-empty 1D vector, got shape {vector.shape}")
    return int(np.argmax(vector))


@dataclass(frozen=True)
class Heatmap2D:
    """A Gaussian score grid for one joint, shape (height, width)."""

    grid: np.ndarray
    sigma: float

    def __post_init__(self):
        self.grid.setflags(write=False)


def heatmap_encode(
    joint: tuple[float, float], size: tuple[int, int] = (64, 64), sigma: float = 2.0
) -> Heatmap2D:
    """Encode a joint ``(x, y)`` as a 2D Gaussian on a ``(height, width)`` grid.

    The value at pixel ``(px, py)`` is ``exp(-((px-x)^2 + (py-y)^2) / (2 sigma^2))``;
    the peak is exactly 1 when the joint lies on an integer pixel.
    """
    height, width = size
    x, y = float(joint[0]), float(joint[1])
    if not sigma > 0:
        raise BadSigmaError(f"sigma must be positive, got {sigma}")
    if height < 1 or width < 1:
        raise BadAxisLengthError(f"grid must be non-empty, got {size}")
    if not (0 <= x < width and 0 <= y < height):
        raise OutOfRangeError(f"joint ({x},{y}) outside {width}x{height}")
    xs = np.arange(width, dtype=np.float64)
    ys = np.arange(height, dtype=np.float64)
    d2 = (xs[None, :] - x) ** 2 + (ys[:, None] - y) ** 2
    return Heatmap2D(grid=np.exp(-d2 / (2.0 * sigma * sigma)), sigma=sigma)


def heatmap_decode(heatmap: Heatmap2D | np.ndarray) -> tuple[int, int]:
    """Return the ``(x, y)`` of the grid maximum; ties pick the first in row-major order."""
    grid = heatmap.grid if isinstance(heatmap, Heatmap2D) else np.asarray(heatmap)
    if grid.ndim != 2 or grid.size == 0:
        raise EmptyVectorError(f"expected a non-empty 2D grid, got shape {grid.shape}")
    flat = int(np.argmax(grid))
    y, x = divmod(flat, grid.shape[1])
    return x, y


def mpjpe(pred: JointSet | np.ndarray, gt: JointSet | np.ndarray) -> float:
    """Mean Euclidean distance between matched joints.

    Raises
    ------
    ShapeMismatchError
        If the two joint sets differ in joint count or coordinate width.
    """
    p = pred.coords if isinstance(pred, JointSet) else np.asarray(pred, dtype=np.float64)
    g = gt.coords if isinstance(gt, JointSet) else np.asarray(gt, dtype=np.float64)
    if p.shape != g.shape:
        raise ShapeMismatchError(f"joint sets differ: {p.shape} vs {g.shape}")
    if p.ndim != 2 or p.shape[0] < 1:
        raise ShapeMismatchError(f"expected (J, d) arrays, got {p.shape}")
    return float(np.linalg.norm(p - g, axis=1).mean())
