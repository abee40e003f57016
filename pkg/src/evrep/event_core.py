"""Core event-stream types.

An event is a brightness-change report ``(x, y, t, p)``: pixel column ``x``,
row ``y``, timestamp ``t`` in integer microseconds, polarity ``p``. On the
wire polarity is often ``{0, 1}``; everywhere inside this package it is the
signed form ``{-1, +1}`` (0 maps to -1). :func:`canonicalize` is the single
entry point that converts, bounds-checks and time-sorts a raw recording into
an :class:`EventWindow`.

Windows carry a half-open time span ``[t_start, t_end)`` that contains every
event. All types are immutable after construction; the backing numpy arrays
are marked read-only, so windows can be shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from .errors import EmptyInputError, OutOfBoundsError

# Packed record layout shared with the EVT1 container (13 bytes, little-endian).
EVENT_DTYPE = np.dtype([("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "<i1")])


@dataclass(frozen=True)
class SensorGeometry:
    """Pixel-array size of the recording sensor."""

    width: int
    height: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"geometry must be positive, got {self.width}x{self.height}")


@dataclass(frozen=True, slots=True)
class Event:
    """A single event with canonical signed polarity."""

    x: int
    y: int
    t: int
    p: int


@dataclass(frozen=True)
class Violation:
    """First broken window invariant, as reported by :func:`validate_window`."""

    code: str
    detail: str


@dataclass(frozen=True)
class EventWindow:
    """A time-sorted batch of events over ``[t_start, t_end)``.

    Storage is four parallel read-only arrays (``xs``, ``ys``: uint16,
    ``ts``: uint64, ``ps``: int8 in {-1,+1}). ``camera_id`` tags the source
    view in multi-camera rigs; single-stream code can ignore it.
    """

    geometry: SensorGeometry
    xs: np.ndarray
    ys: np.ndarray
    ts: np.ndarray
    ps: np.ndarray
    t_start: int
    t_end: int
    camera_id: int = 0

    def __post_init__(self):
        for arr in (self.xs, self.ys, self.ts, self.ps):
            arr.setflags(write=False)

    def __len__(self) -> int:
        return self.ts.shape[0]

    @property
    def span_us(self) -> int:
        return self.t_end - self.t_start

    @property
    def events(self) -> list[Event]:
        """Materialize per-event objects. Convenience for small windows."""
        return [
            Event(int(x), int(y), int(t), int(p))
            for x, y, t, p in zip(self.xs, self.ys, self.ts, self.ps)
        ]

    @property
    def records(self) -> np.ndarray:
        """Events as a packed structured array (EVT1 record layout)."""
        out = np.empty(len(self), dtype=EVENT_DTYPE)
        out["t"] = self.ts
        out["x"] = self.xs
        out["y"] = self.ys
        out["p"] = self.ps
        return out

    @classmethod
    def from_arrays(
        cls,
        geometry: SensorGeometry,
        xs: np.ndarray,
        ys: np.ndarray,
        ts: np.ndarray,
        ps: np.ndarray,
        t_start: Optional[int] = None,
        t_end: Optional[int] = None,
        camera_id: int = 0,
    ) -> "EventWindow":
        """Build a window from parallel arrays assumed already canonical.

        ``t_start``/``t_end`` default to the tight span of the data
        (first timestamp, last timestamp + 1). Empty arrays are allowed
        when an explicit span is given.
        """
        xs = np.asarray(xs, dtype=np.uint16)
        ys = np.asarray(ys, dtype=np.uint16)
        ts = np.asarray(ts, dtype=np.uint64)
        ps = np.asarray(ps, dtype=np.int8)
        if t_start is None or t_end is None:
            if ts.shape[0] == 0:
                raise EmptyInputError("empty window needs an explicit span")
            t_start = int(ts[0]) if t_start is None else t_start
            t_end = int(ts[-1]) + 1 if t_end is None else t_end
        return cls(geometry, xs, ys, ts, ps, int(t_start), int(t_end), camera_id)


# Hook applied to each window before count/label filtering. The package ships
# no built-in filter; callers plug in denoisers with this signature.
PreFilter = Callable[[EventWindow], EventWindow]


def _coerce_raw(raw_events) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Accept (x, y, t, p) tuples, an N x 4 array, or a structured record array."""
    if isinstance(raw_events, np.ndarray) and raw_events.dtype.names is not None:
        r = raw_events
        return (
            np.asarray(r["x"], dtype=np.int64),
            np.asarray(r["y"], dtype=np.int64),
            np.asarray(r["t"], dtype=np.int64),
            np.asarray(r["p"], dtype=np.int64),
        )
    arr = np.asarray(raw_events)
    if arr.ndim == 1 and arr.shape[0] == 0:
        arr = arr.reshape(0, 4)
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise EmptyInputError(f"expected N x 4 event data, got shape {arr.shape}")
    arr = arr.astype(np.int64, copy=False)
    return arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3]


def canonicalize(raw_events, geometry: SensorGeometry, camera_id: int = 0) -> EventWindow:
    """Validate, sign polarities and time-sort a raw recording into a window.

    Parameters
    ----------
    raw_events:
        Sequence of ``(x, y, t_us, p)`` tuples, an ``N x 4`` integer array
        with those columns, or a structured array with fields ``t,x,y,p``.
        Polarity may be the wire form {0,1} or already signed {-1,+1};
        0 becomes -1. Already-canonical input passes through unchanged,
        so the function is idempotent.
    geometry:
        Sensor size; events must satisfy ``0 <= x < width``, ``0 <= y < height``.

    Returns
    -------
    EventWindow
        Stably sorted by timestamp, with ``t_start`` = first timestamp and
        ``t_end`` = last timestamp + 1.

    Raises
    ------
    EmptyInputError, OutOfBoundsError
    """
    xs, ys, ts, ps = _coerce_raw(raw_events)
    n = ts.shape[0]
    if n == 0:
        raise EmptyInputError("no events to canonicalize")
    if xs.min() < 0 or xs.max() >= geometry.width or ys.min() < 0 or ys.max() >= geometry.height:
        bad = int(np.flatnonzero((xs < 0) | (xs >= geometry.width) | (ys < 0) | (ys >= geometry.height))[0])
        raise OutOfBoundsError(
            f"event {bad} at ({int(xs[bad])},{int(ys[bad])}) outside {geometry.width}x{geometry.height}"
        )
    if ts.min() < 0:
        raise OutOfBoundsError("negative timestamp")
    if not np.isin(ps, (-1, 0, 1)).all():
        bad = int(np.flatnonzero(~np.isin(ps, (-1, 0, 1)))[0])
        raise OutOfBoundsError(f"event {bad} has polarity {int(ps[bad])}, expected 0/1 or -1/+1")
    signed = np.where(ps > 0, 1, -1).astype(np.int8)

    order = np.argsort(ts, kind="stable")
    xs, ys, ts, signed = xs[order], ys[order], ts[order], signed[order]
    return EventWindow(
        geometry=geometry,
        xs=xs.astype(np.uint16),
        ys=ys.astype(np.uint16),
        ts=ts.astype(np.uint64),
        ps=signed,
        t_start=int(ts[0]),
        t_end=int(ts[-1]) + 1,
        camera_id=camera_id,
    )


def validate_window(window: EventWindow) -> Optional[Violation]:
    """Report the first broken window invariant, or ``None`` if all hold.

    Checks, in order: coordinate bounds (``OutOfBounds``), polarity domain
    (``BadPolarity``), timestamp ordering (``NonMonotoneTime``), span
    containment (``BadSpan``). Empty windows only need a positive span.
    """
    g = window.geometry
    if len(window) == 0:
        if window.t_end <= window.t_start:
            return Violation("BadSpan", f"empty span [{window.t_start},{window.t_end})")
        return None
    if (window.xs >= g.width).any() or (window.ys >= g.height).any():
        bad = int(np.flatnonzero((window.xs >= g.width) | (window.ys >= g.height))[0])
        return Violation("OutOfBounds", f"event {bad} outside {g.width}x{g.height}")
    if not np.isin(window.ps, (-1, 1)).all():
        bad = int(np.flatnonzero(~np.isin(window.ps, (-1, 1)))[0])
        return Violation("BadPolarity", f"event {bad} has polarity {int(window.ps[bad])}")
    if (window.ts[1:] < window.ts[:-1]).any():
        bad = int(np.flatnonzero(window.ts[1:] < window.ts[:-1])[0])
        return Violation("NonMonotoneTime", f"timestamp inversion at index {bad + 1}")
    if not (window.t_start <= int(window.ts[0]) and int(window.ts[-1]) < window.t_end):
        return Violation(
            "BadSpan",
            f"events [{int(window.ts[0])},{int(window.ts[-1])}] escape [{window.t_start},{window.t_end})",
        )
    return None


def merge_streams(streams: Iterable[np.ndarray]) -> np.ndarray:
    """Merge per-camera record arrays into one stream, stably sorted by time.

    Ties keep the order streams were given in, so the merge is deterministic.
    """
    parts = [np.asarray(s, dtype=EVENT_DTYPE) for s in streams]
    if not parts:
        raise EmptyInputError("no streams to merge")
    merged = np.concatenate(parts)
    order = np.argsort(merged["t"], kind="stable")
    return merged[order]
