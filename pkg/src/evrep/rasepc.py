"""Rasterized event point clouds.

A window is split into ``k`` equal half-open time slices. Within each
(pixel, slice) cell the ``m`` raw events condense into one 5-field point:

* ``x, y``      pixel coordinates
* ``t_avg``     mean event time, normalized to [0, 1] over the whole window
* ``p_acc``     sum of signed polarities
* ``e_cnt``     the raw event count ``m``

Points are emitted in (slice, y, x) order, so output is deterministic.
Slice membership uses pure integer arithmetic, ``(t - t_start) * k // span``,
which matches the real-valued floor exactly; time sums are accumulated as
integers so the batch kernel and the streaming buffer agree bit-for-bit.

``RPC1`` is the on-disk container (little-endian)::

    offset  size  field
    0       4     magic b"RPC1"
    4       2     u16 sensor width
    6       2     u16 sensor height
    8       2     u16 k (slice count)
    10      4     u32 point count
    14      16n   records: u16 x, u16 y, f32 t_avg, i32 p_acc, u32 e_cnt
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    BadMagicError,
    EmptyCloudError,
    EmptyWindowError,
    InvalidKError,
    InvalidNError,
    OutOfBoundsError,
    TruncatedRecordError,
)
from .event_core import EVENT_DTYPE, EventWindow, SensorGeometry

POINT_DTYPE = np.dtype(
    [("x", "<u2"), ("y", "<u2"), ("t_avg", "<f4"), ("p_acc", "<i4"), ("e_cnt", "<u4")]
)

_RPC1_MAGIC = b"RPC1"
_RPC1_HEADER = struct.Struct("<4sHHHI")


@dataclass(frozen=True)
class RasterCloud:
    """Condensed points for one window, in (slice, y, x) order."""

    geometry: SensorGeometry
    k: int
    xs: np.ndarray
    ys: np.ndarray
    t_avg: np.ndarray
    p_acc: np.ndarray
    e_cnt: np.ndarray

    def __post_init__(self):
        for arr in (self.xs, self.ys, self.t_avg, self.p_acc, self.e_cnt):
            arr.setflags(write=False)

    def __len__(self) -> int:
        return self.xs.shape[0]

    @property
    def slices(self) -> np.ndarray:
        """Recover each point's slice index from its normalized mean time."""
        return np.minimum((self.t_avg * self.k).astype(np.int64), self.k - 1)


def _finalize(
    geometry: SensorGeometry,
    k: int,
    xs: np.ndarray,
    ys: np.ndarray,
    t_sums: np.ndarray,
    p_sums: np.ndarray,
    counts: np.ndarray,
    t_start: int,
    span: int,
) -> RasterCloud:
    """Shared integer-sums -> cloud conversion; keeps both code paths identical."""
    t_avg = (t_sums / counts - float(t_start)) / float(span)
    return RasterCloud(
        geometry=geometry,
        k=k,
        xs=xs.astype(np.uint16),
        ys=ys.astype(np.uint16),
        t_avg=t_avg,
        p_acc=p_sums.astype(np.int32),
        e_cnt=counts.astype(np.uint32),
    )


def rasterize(window: EventWindow, k: int = 4) -> RasterCloud:
    """Condense a window into at most one point per (pixel, slice) cell.

    Parameters
    ----------
    window:
        Canonical event window; its ``[t_start, t_end)`` span defines both
        the slice boundaries and the [0, 1] time normalization.
    k:
        Number of equal-duration time slices.

    Raises
    ------
    EmptyWindowError, InvalidKError
    """
    if k < 1:
        raise InvalidKError(f"slice count must be >= 1, got {k}")
    n = len(window)
    if n == 0:
        raise EmptyWindowError("cannot rasterize an empty window")
    t_start = np.uint64(window.t_start)
    span = np.uint64(window.t_end - window.t_start)
    sl = (window.ts - t_start) * np.uint64(k) // span
    key = (sl * np.uint64(window.geometry.height) + window.ys) * np.uint64(
        window.geometry.width
    ) + window.xs

    order = np.argsort(key, kind="stable")
    key_sorted = key[order]
    starts = np.flatnonzero(np.concatenate(([True], key_sorted[1:] != key_sorted[:-1])))
    t_sums = np.add.reduceat(window.ts[order].astype(np.int64), starts)
    p_sums = np.add.reduceat(window.ps[order].astype(np.int64), starts)
    counts = np.diff(np.append(starts, n)).astype(np.int64)

    cell = key_sorted[starts]
    xs = cell % np.uint64(window.geometry.width)
    ys = (cell // np.uint64(window.geometry.width)) % np.uint64(window.geometry.height)
    return _finalize(
        window.geometry, k, xs, ys, t_sums, p_sums, counts, window.t_start, window.t_end - window.t_start
    )


def sample_fixed(cloud: RasterCloud, n: int = 2048, seed: int = 0) -> RasterCloud:
    """Resample a cloud to exactly ``n`` points, deterministically per seed.

    With at least ``n`` points available, draws uniformly without
    replacement. With fewer, keeps every original point and tops up with
    draws with replacement, so nothing is lost on sparse windows.

    Raises
    ------
    EmptyCloudError, InvalidNError
    """
    if n < 1:
        raise InvalidNError(f"sample size must be >= 1, got {n}")
    m = len(cloud)
    if m == 0:
        raise EmptyCloudError("cannot sample an empty cloud")
    rng = np.random.default_rng(seed)
    if m >= n:
        idx = rng.choice(m, size=n, replace=False)
    else:
        idx = np.concatenate([np.arange(m), rng.choice(m, size=n - m, replace=True)])
    return RasterCloud(
        geometry=cloud.geometry,
        k=cloud.k,
        xs=cloud.xs[idx].copy(),
        ys=cloud.ys[idx].copy(),
        t_avg=cloud.t_avg[idx].copy(),
        p_acc=cloud.p_acc[idx].copy(),
        e_cnt=cloud.e_cnt[idx].copy(),
    )


class RasterStream:
    """Incremental rasterizer over a preset window ``[t_start, t_start + window_len)``.

    Feed events in arbitrarily sized batches with :meth:`update`;
    :meth:`snapshot` at any point equals batch :func:`rasterize` over
    everything fed so far, bit for bit. Per-cell state is three integer
    accumulators (time sum, polarity sum, count), so updates cost O(batch)
    and the buffer can be :meth:`reset` onto the next window without
    reallocating.

    Not thread-safe; give each worker its own instance.
    """

    def __init__(self, geometry: SensorGeometry, k: int, window_len_us: int, t_start: int = 0):
        if k < 1:
            raise InvalidKError(f"slice count must be >= 1, got {k}")
        if window_len_us < 1:
            raise InvalidNError(f"window length must be >= 1, got {window_len_us}")
        self.geometry = geometry
        self.k = k
        self.window_len_us = int(window_len_us)
        self.t_start = int(t_start)
        self._cells: dict[int, list[int]] = {}
        self._total = 0

    def reset(self, t_start: int) -> None:
        """Drop all state and begin a new window at ``t_start``."""
        self.t_start = int(t_start)
        self._cells.clear()
        self._total = 0

    @property
    def total_events(self) -> int:
        return self._total

    def update(self, events: np.ndarray) -> "RasterStream":
        """Fold a batch of events (structured records or EventWindow) into the buffer.

        Raises
        ------
        OutOfBoundsError
            If any event leaves the sensor or the preset time window.
        """
        if isinstance(events, EventWindow):
            events = events.records
        recs = np.asarray(events, dtype=EVENT_DTYPE)
        if recs.shape[0] == 0:
            return self
        xs = recs["x"].astype(np.int64)
        ys = recs["y"].astype(np.int64)
        ts = recs["t"].astype(np.int64)
        ps = recs["p"].astype(np.int64)
        g = self.geometry
        if (xs >= g.width).any() or (ys >= g.height).any():
            raise OutOfBoundsError(f"event outside {g.width}x{g.height}")
        rel = ts - self.t_start
        if (rel < 0).any() or (rel >= self.window_len_us).any():
            raise OutOfBoundsError(
                f"event time outside [{self.t_start},{self.t_start + self.window_len_us})"
            )
        sl = rel * self.k // self.window_len_us
        key = (sl * g.height + ys) * g.width + xs

        order = np.argsort(key, kind="stable")
        key_sorted = key[order]
        starts = np.flatnonzero(np.concatenate(([True], key_sorted[1:] != key_sorted[:-1])))
        t_sums = np.add.reduceat(ts[order], starts)
        p_sums = np.add.reduceat(ps[order], starts)
        counts = np.diff(np.append(starts, len(recs)))

        cells = self._cells
        for cell, tsum, psum, cnt in zip(
            key_sorted[starts].tolist(), t_sums.tolist(), p_sums.tolist(), counts.tolist()
        ):
            acc = cells.get(cell)
            if acc is None:
                cells[cell] = [tsum, psum, cnt]
            else:
                acc[0] += tsum
                acc[1] += psum
                acc[2] += cnt
        self._total += len(recs)
        return self

    def snapshot(self) -> RasterCloud:
        """Condense the buffered state; equals batch rasterize over the same events."""
        if self._total == 0:
            raise EmptyWindowError("no events buffered")
        cells = sorted(self._cells)
        w, h = self.geometry.width, self.geometry.height
        keys = np.array(cells, dtype=np.int64)
        acc = np.array([self._cells[c] for c in cells], dtype=np.int64)
        xs = keys % w
        ys = (keys // w) % h
        return _finalize(
            self.geometry, self.k, xs, ys, acc[:, 0], acc[:, 1], acc[:, 2],
            self.t_start, self.window_len_us,
        )


def raster_stream_update(state: RasterStream, new_events: np.ndarray) -> RasterStream:
    """Functional alias for :meth:`RasterStream.update`."""
    return state.update(new_events)


# ── RPC1 ─────────────────────────────────────────────────────────────────────

def write_rpc1(path, cloud: RasterCloud) -> None:
    """Serialize a cloud (mean times narrowed to f32) as an RPC1 file."""
    recs = np.empty(len(cloud), dtype=POINT_DTYPE)
    recs["x"] = cloud.xs
    recs["y"] = cloud.ys
    recs["t_avg"] = cloud.t_avg.astype(np.float32)
    recs["p_acc"] = cloud.p_acc
    recs["e_cnt"] = cloud.e_cnt
    header = _RPC1_HEADER.pack(
        _RPC1_MAGIC, cloud.geometry.width, cloud.geometry.height, cloud.k, len(cloud)
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(recs.tobytes())


def read_rpc1(path) -> RasterCloud:
    """Read an RPC1 file back into a cloud (mean times stay f32-valued).

    Raises
    ------
    BadMagicError, TruncatedRecordError
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _RPC1_MAGIC:
        raise BadMagicError(f"expected {_RPC1_MAGIC!r}, got {blob[:4]!r}")
    if len(blob) < _RPC1_HEADER.size:
        raise TruncatedRecordError(f"header needs {_RPC1_HEADER.size} bytes, file has {len(blob)}")
    _, width, height, k, count = _RPC1_HEADER.unpack_from(blob)
    payload = blob[_RPC1_HEADER.size:]
    if len(payload) != count * POINT_DTYPE.itemsize:
        raise TruncatedRecordError(
            f"expected {count} records ({count * POINT_DTYPE.itemsize} bytes), got {len(payload)}"
        )
    recs = np.frombuffer(payload, dtype=POINT_DTYPE)
    return RasterCloud(
        geometry=SensorGeometry(width, height),
        k=k,
        xs=recs["x"].copy(),
        ys=recs["y"].copy(),
        t_avg=recs["t_avg"].astype(np.float64),
        p_acc=recs["p_acc"].astype(np.int32),
        e_cnt=recs["e_cnt"].astype(np.uint32),
    )
