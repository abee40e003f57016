"""Decoupled tri-plane event voxels.

Instead of materializing a dense ``H x W x T`` voxel grid, each event is
binned once and scattered onto three orthogonal planes:

* ``plane_hw``  shape (C, H, W), summing the grid over t
* ``plane_th``  shape (C, T, H), summing the grid over w
* ``plane_wt``  shape (C, W, T), summing the grid over h

which stores ``C * (HW + TH + WT)`` cells instead of ``C * H * W * T`` - a
``3 / H`` ratio for cubic grids. Three accumulation modes: ``count`` (+1 per
event, C=1), ``polarity_sum`` (+p, C=1) and ``two_channel`` (positive events
in channel 0, negative in channel 1, C=2; the default).

A dense :func:`voxelize_dense` grid is kept behind a cell cap purely as a
reference to check the planes against; production paths never build it.

``DEV1`` is the on-disk container: magic ``b"DEV1"``, u8 mode index, then the
three planes as length-prefixed TEN1 blobs in hw, th, wt order.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from .dea import read_ten1_bytes, ten1_bytes
from .errors import (
    BadDimsError,
    BadMagicError,
    CapExceededError,
    EmptyWindowError,
    OutOfBoundsError,
    OutOfSpanError,
    TruncatedRecordError,
)
from .event_core import Event, EventWindow, SensorGeometry

MODES = ("count", "polarity_sum", "two_channel")
DEFAULT_DIMS = (64, 64, 64)
# Dense reference grids refuse to allocate more cells than this.
DEFAULT_DENSE_CAP = 1 << 24

_DEV1_MAGIC = b"DEV1"

Dims = tuple[int, int, int]


class VoxelCoord(NamedTuple):
    h: int
    w: int
    t: int


def _check_dims(dims: Union[int, Dims]) -> Dims:
    if isinstance(dims, (int, np.integer)):
        dims = (int(dims),) * 3
    if len(dims) != 3 or any(int(d) < 1 for d in dims):
        raise BadDimsError(f"dims must be three positive ints, got {dims}")
    return tuple(int(d) for d in dims)


def _mode_channels(mode: str) -> int:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    return 2 if mode == "two_channel" else 1


@dataclass(frozen=True)
class DevPlanes:
    """The three orthogonal projections of a (virtual) voxel grid."""

    plane_hw: np.ndarray
    plane_th: np.ndarray
    plane_wt: np.ndarray
    mode: str

    def __post_init__(self):
        for arr in (self.plane_hw, self.plane_th, self.plane_wt):
            arr.setflags(write=False)

    @property
    def dims(self) -> Dims:
        c, h, w = self.plane_hw.shape
        return h, w, self.plane_th.shape[1]

    @property
    def channels(self) -> int:
        return self.plane_hw.shape[0]


@dataclass(frozen=True)
class VoxelGrid:
    """Dense reference grid, shape (H, W, T, C). Test oracle only."""

    dims: Dims
    channels: int
    mode: str
    data: np.ndarray

    def __post_init__(self):
        self.data.setflags(write=False)


def quantize(
    event: Union[Event, tuple[int, int, int]],
    geometry: SensorGeometry,
    dims: Union[int, Dims],
    span: tuple[int, int],
) -> VoxelCoord:
    """Map one event to its (h, w, t) bin.

    Bins are ``h = floor(y * H / height)``, ``w = floor(x * W / width)``,
    ``t = floor((t_us - t_start) * T / span)``, computed in exact integer
    arithmetic and clamped to the top bin as a guard.

    Raises
    ------
    OutOfBoundsError, OutOfSpanError
    """
    hh, ww, tt = _check_dims(dims)
    t_start, t_end = span
    if isinstance(event, Event):
        x, y, t = event.x, event.y, event.t
    else:
        x, y, t = (int(v) for v in event)
    if not (0 <= x < geometry.width and 0 <= y < geometry.height):
        raise OutOfBoundsError(f"({x},{y}) outside {geometry.width}x{geometry.height}")
    if not t_start <= t < t_end:
        raise OutOfSpanError(f"t={t} outside [{t_start},{t_end})")
    return VoxelCoord(
        h=min(y * hh // geometry.height, hh - 1),
        w=min(x * ww // geometry.width, ww - 1),
        t=min((t - t_start) * tt // (t_end - t_start), tt - 1),
    )


def _bin_events(window: EventWindow, dims: Dims) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    hh, ww, tt = dims
    g = window.geometry
    if (window.xs >= g.width).any() or (window.ys >= g.height).any():
        raise OutOfBoundsError(f"window has events outside {g.width}x{g.height}")
    span = window.t_end - window.t_start
    ts = window.ts.astype(np.int64)
    if span < 1 or ts.min() < window.t_start or ts.max() >= window.t_end:
        raise OutOfSpanError(f"window events escape [{window.t_start},{window.t_end})")
    h = window.ys.astype(np.int64) * hh // g.height
    w = window.xs.astype(np.int64) * ww // g.width
    t = (ts - window.t_start) * tt // span
    return h, w, t


def _scatter(idx: np.ndarray, window: EventWindow, mode: str, ncells: int) -> np.ndarray:
    """Accumulate events on a flat index space, one row per channel."""
    if mode == "count":
        return np.bincount(idx, minlength=ncells).astype(np.float64)[None]
    if mode == "polarity_sum":
        return np.bincount(idx, weights=window.ps.astype(np.float64), minlength=ncells)[None]
    pos = window.ps > 0
    return np.stack(
        [
            np.bincount(idx[pos], minlength=ncells).astype(np.float64),
            np.bincount(idx[~pos], minlength=ncells).astype(np.float64),
        ]
    )


def project_dev(
    window: EventWindow,
    dims: Union[int, Dims] = DEFAULT_DIMS,
    mode: str = "two_channel",
) -> DevPlanes:
    """Scatter a window directly onto the three planes, never building the grid.

    Each event lands at ``(h, w)``, ``(t, h)`` and ``(w, t)`` with the same
    weight it would contribute to the dense grid, so every plane equals the
    matching axis-sum of :func:`voxelize_dense` exactly.

    Raises
    ------
    EmptyWindowError, BadDimsError
    """
    dims = _check_dims(dims)
    _mode_channels(mode)
    if len(window) == 0:
        raise EmptyWindowError("cannot project an empty window")
    hh, ww, tt = dims
    h, w, t = _bin_events(window, dims)
    plane_hw = _scatter(h * ww + w, window, mode, hh * ww).reshape(-1, hh, ww)
    plane_th = _scatter(t * hh + h, window, mode, tt * hh).reshape(-1, tt, hh)
    plane_wt = _scatter(w * tt + t, window, mode, ww * tt).reshape(-1, ww, tt)
    return DevPlanes(plane_hw=plane_hw, plane_th=plane_th, plane_wt=plane_wt, mode=mode)


def voxelize_dense(
    window: EventWindow,
    dims: Union[int, Dims] = DEFAULT_DIMS,
    mode: str = "two_channel",
    cap: int = DEFAULT_DENSE_CAP,
) -> VoxelGrid:
    """Accumulate the full (H, W, T, C) grid. Reference implementation.

    Raises
    ------
    CapExceededError
        If ``H * W * T * C`` exceeds ``cap``; raise the cap explicitly if a
        bigger reference grid is really wanted.
    EmptyWindowError, BadDimsError
    """
    dims = _check_dims(dims)
    channels = _mode_channels(mode)
    hh, ww, tt = dims
    ncells = hh * ww * tt * channels
    if ncells > cap:
        raise CapExceededError(f"{hh}x{ww}x{tt}x{channels} = {ncells} cells exceeds cap {cap}")
    if len(window) == 0:
        raise EmptyWindowError("cannot voxelize an empty window")
    h, w, t = _bin_events(window, dims)
    flat = _scatter((h * ww + w) * tt + t, window, mode, hh * ww * tt)
    data = flat.reshape(channels, hh, ww, tt).transpose(1, 2, 3, 0)
    return VoxelGrid(dims=dims, channels=channels, mode=mode, data=np.ascontiguousarray(data))


def axis_sums(grid: VoxelGrid) -> DevPlanes:
    """Collapse a dense grid into the three planes by summing one axis each."""
    d = grid.data
    return DevPlanes(
        plane_hw=np.ascontiguousarray(d.sum(axis=2).transpose(2, 0, 1)),
        plane_th=np.ascontiguousarray(d.sum(axis=1).transpose(2, 1, 0)),
        plane_wt=np.ascontiguousarray(d.sum(axis=0).transpose(2, 0, 1)),
        mode=grid.mode,
    )


def _nearest_bin(u: float, nbins: int) -> int:
    """Index of the bin center nearest ``u`` (bin units); ties pick the lower bin."""
    lo = int(np.floor(u - 0.5))
    lo = min(max(lo, 0), nbins - 1)
    hi = min(lo + 1, nbins - 1)
    if abs(u - (lo + 0.5)) <= abs(u - (hi + 0.5)):
        return lo
    return hi


def sample_dev(
    planes: DevPlanes,
    query: tuple[float, float, float],
    geometry: SensorGeometry,
    span: tuple[int, int],
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Read the three per-channel feature vectors nearest a continuous point.

    ``query`` is ``(x, y, t)`` in pixel/microsecond units. Each axis is
    scaled into bin units and snapped to the nearest bin center, lower index
    on exact midpoints; the returned copies are the plane columns at
    ``(h, w)``, ``(t, h)`` and ``(w, t)``.

    Raises
    ------
    OutOfBoundsError, OutOfSpanError
    """
    hh, ww, tt = planes.dims
    x, y, tau = (float(v) for v in query)
    t_start, t_end = span
    if not (0 <= x < geometry.width and 0 <= y < geometry.height):
        raise OutOfBoundsError(f"({x},{y}) outside {geometry.width}x{geometry.height}")
    if not t_start <= tau < t_end:
        raise OutOfSpanError(f"t={tau} outside [{t_start},{t_end})")
    h = _nearest_bin(y * hh / geometry.height, hh)
    w = _nearest_bin(x * ww / geometry.width, ww)
    t = _nearest_bin((tau - t_start) * tt / (t_end - t_start), tt)
    return (
        planes.plane_hw[:, h, w].copy(),
        planes.plane_th[:, t, h].copy(),
        planes.plane_wt[:, w, t].copy(),
    )


class StorageCost(NamedTuple):
    dev_cells: int
    voxel_cells: int
    ratio: float


def storage_cost(dims: Union[int, Dims], channels: int = 1) -> StorageCost:
    """Cell counts for tri-plane vs dense storage and their ratio."""
    hh, ww, tt = _check_dims(dims)
    if channels < 1:
        raise BadDimsError(f"channels must be >= 1, got {channels}")
    dev = channels * (hh * ww + tt * hh + ww * tt)
    voxel = channels * hh * ww * tt
    return StorageCost(dev_cells=dev, voxel_cells=voxel, ratio=dev / voxel)


# ── DEV1 ─────────────────────────────────────────────────────────────────────

def write_dev1(path, planes: DevPlanes) -> None:
    """Serialize tri-planes (payloads narrowed to f32) as a DEV1 file."""
    parts = [_DEV1_MAGIC, struct.pack("<B", MODES.index(planes.mode))]
    for plane in (planes.plane_hw, planes.plane_th, planes.plane_wt):
        blob = ten1_bytes(plane)
        parts.append(struct.pack("<I", len(blob)))
        parts.append(blob)
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def read_dev1(path) -> DevPlanes:
    """Read a DEV1 file back into f32-valued planes.

    Raises
    ------
    BadMagicError, TruncatedRecordError, VersionUnsupportedError
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _DEV1_MAGIC:
        raise BadMagicError(f"expected {_DEV1_MAGIC!r}, got {blob[:4]!r}")
    if len(blob) < 5:
        raise TruncatedRecordError("missing mode byte")
    mode_idx = blob[4]
    if mode_idx >= len(MODES):
        raise TruncatedRecordError(f"unknown mode index {mode_idx}")
    offset = 5
    planes = []
    for _ in range(3):
        if offset + 4 > len(blob):
            raise TruncatedRecordError("missing plane length prefix")
        (length,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        if offset + length > len(blob):
            raise TruncatedRecordError("plane blob shorter than its length prefix")
        planes.append(read_ten1_bytes(blob[offset:offset + length]))
        offset += length
    if offset != len(blob):
        raise TruncatedRecordError(f"{len(blob) - offset} trailing bytes")
    hw, th, wt = (p.astype(np.float64) for p in planes)
    return DevPlanes(plane_hw=hw, plane_th=th, plane_wt=wt, mode=MODES[mode_idx])
