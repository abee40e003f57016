"""Readers, writers and window/label extraction for event recordings.

Two event containers are supported:

* EVT1, a little-endian binary file::

      offset  size  field
      0       4     magic b"EVT1"
      4       2     u16 version (= 1)
      6       2     u16 sensor width
      8       2     u16 sensor height
      10      4     u32 reserved (= 0)
      14      13n   records: u64 t_us, u16 x, u16 y, i8 p in {-1,+1}

  The record count is implied by the file length.

* CSV with the exact header ``t_us,x,y,p``. Polarity on disk is either the
  wire form {0,1} (``zero_one``) or already signed {-1,+1} (``signed``).

Joint labels ride in a CSV with header ``t_us,joint_id,u,v`` (or ``...,w``
for 3D), one row per joint per sample, sampled at a constant period which is
inferred from the file and validated.

Windowing is count-based: a stream is cut into consecutive windows of exactly
``n`` events, the trailing remainder is dropped, and a window's label is
either the mean of all labels inside its event span or the label nearest its
last event.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .errors import (
    BadHeaderError,
    BadMagicError,
    EmptyInputError,
    EmptyWindowError,
    InvalidNError,
    NoLabelInWindowError,
    ParseError,
    TruncatedRecordError,
    VersionUnsupportedError,
)
from .event_core import EVENT_DTYPE, EventWindow, PreFilter, SensorGeometry
from .pose_codec import JointSet

_EVT1_MAGIC = b"EVT1"
_EVT1_HEADER = struct.Struct("<4sHHHI")
_EVT1_VERSION = 1

_EVENT_CSV_HEADER = "t_us,x,y,p"
_LABEL_CSV_HEADERS = ("t_us,joint_id,u,v", "t_us,joint_id,u,v,w")


# ── EVT1 ─────────────────────────────────────────────────────────────────────

def write_evt1(path, geometry: SensorGeometry, events: np.ndarray) -> None:
    """Write canonical events (structured array or EventWindow) as EVT1."""
    if isinstance(events, EventWindow):
        events = events.records
    recs = np.ascontiguousarray(events, dtype=EVENT_DTYPE)
    header = _EVT1_HEADER.pack(_EVT1_MAGIC, _EVT1_VERSION, geometry.width, geometry.height, 0)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(recs.tobytes())


def read_evt1(path) -> tuple[SensorGeometry, np.ndarray]:
    """Read an EVT1 file.

    Returns
    -------
    (SensorGeometry, np.ndarray)
        Records in file order with fields ``t, x, y, p`` and signed polarity.

    Raises
    ------
    BadMagicError, VersionUnsupportedError, TruncatedRecordError
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _EVT1_MAGIC:
        raise BadMagicError(f"expected {_EVT1_MAGIC!r}, got {blob[:4]!r}")
    if len(blob) < _EVT1_HEADER.size:
        raise TruncatedRecordError(f"header needs {_EVT1_HEADER.size} bytes, file has {len(blob)}")
    _, version, width, height, _ = _EVT1_HEADER.unpack_from(blob)
    if version != _EVT1_VERSION:
        raise VersionUnsupportedError(f"version {version} not supported")
    payload = blob[_EVT1_HEADER.size:]
    if len(payload) % EVENT_DTYPE.itemsize != 0:
        raise TruncatedRecordError(
            f"payload of {len(payload)} bytes is not a multiple of {EVENT_DTYPE.itemsize}"
        )
    recs = np.frombuffer(payload, dtype=EVENT_DTYPE)
    return SensorGeometry(width, height), recs


# ── event CSV ────────────────────────────────────────────────────────────────

def read_csv(path, polarity_format: str = "zero_one") -> np.ndarray:
    """Parse an event CSV into canonical records (polarity signed).

    ``polarity_format`` names the on-disk convention: ``zero_one`` maps
    0 -> -1 and 1 -> +1; ``signed`` expects -1/+1 as-is.
    """
    if polarity_format not in ("zero_one", "signed"):
        raise ValueError(f"unknown polarity_format {polarity_format!r}")
    allowed = (0, 1) if polarity_format == "zero_one" else (-1, 1)
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\r\n")
        if header != _EVENT_CSV_HEADER:
            raise BadHeaderError(f"expected header {_EVENT_CSV_HEADER!r}, got {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise ParseError(lineno, f"expected 4 fields, got {len(parts)}")
            try:
                t, x, y, p = (int(v) for v in parts)
            except ValueError:
                raise ParseError(lineno, f"non-integer field in {line!r}") from None
            if p not in allowed:
                raise ParseError(lineno, f"polarity {p} not in {allowed}")
            rows.append((t, x, y, 1 if p > 0 else -1))
    recs = np.array(rows, dtype=EVENT_DTYPE)
    return recs


def write_csv(path, events: np.ndarray, polarity_format: str = "zero_one") -> None:
    """Write canonical records as an event CSV in the requested polarity form."""
    if polarity_format not in ("zero_one", "signed"):
        raise ValueError(f"unknown polarity_format {polarity_format!r}")
    if isinstance(events, EventWindow):
        events = events.records
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_EVENT_CSV_HEADER + "\n")
        for rec in events:
            p = int(rec["p"])
            if polarity_format == "zero_one":
                p = 1 if p > 0 else 0
            fh.write(f"{int(rec['t'])},{int(rec['x'])},{int(rec['y'])},{p}\n")


# ── label track ──────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class LabelTrack:
    """Joint positions sampled at a constant period.

    ``coords`` has shape (L, J, d); sample ``i`` is at ``t0 + i * dt_us``.
    """

    t0: int
    dt_us: int
    coords: np.ndarray

    def __post_init__(self):
        self.coords.setflags(write=False)

    def __len__(self) -> int:
        return self.coords.shape[0]

    @property
    def timestamps(self) -> np.ndarray:
        return self.t0 + self.dt_us * np.arange(len(self), dtype=np.int64)

    def joint_set(self, i: int) -> JointSet:
        return JointSet(self.coords[i])


def read_label_track(path) -> LabelTrack:
    """Parse a joint-label CSV and validate its constant sampling period."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\r\n")
        if header not in _LABEL_CSV_HEADERS:
            raise BadHeaderError(f"expected one of {_LABEL_CSV_HEADERS}, got {header!r}")
        ncols = 4 if header == _LABEL_CSV_HEADERS[0] else 5
        times: list[int] = []
        blocks: list[dict[int, tuple[float, ...]]] = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != ncols:
                raise ParseError(lineno, f"expected {ncols} fields, got {len(parts)}")
            try:
                t = int(parts[0])
                jid = int(parts[1])
                coord = tuple(float(v) for v in parts[2:])
            except ValueError:
                raise ParseError(lineno, f"malformed row {line!r}") from None
            if not times or t != times[-1]:
                if times and t < times[-1]:
                    raise ParseError(lineno, f"timestamps not increasing at t={t}")
                times.append(t)
                blocks.append({})
            if jid in blocks[-1]:
                raise ParseError(lineno, f"duplicate joint {jid} at t={t}")
            blocks[-1][jid] = coord
    if not blocks:
        raise EmptyInputError("label file has no rows")
    joint_ids = sorted(blocks[0])
    if joint_ids != list(range(len(joint_ids))):
        raise BadHeaderError(f"joint ids must be 0..J-1, got {joint_ids}")
    for t, block in zip(times, blocks):
        if sorted(block) != joint_ids:
            raise ParseError(2, f"sample at t={t} misses joints")
    coords = np.array(
        [[block[j] for j in joint_ids] for block in blocks], dtype=np.float64
    )
    t0 = times[0]
    if len(times) == 1:
        dt = 1
    else:
        dt = times[1] - times[0]
        if dt <= 0 or any(b - a != dt for a, b in zip(times, times[1:])):
            raise ParseError(2, f"sampling period is not constant: {times[:4]}...")
    return LabelTrack(t0=t0, dt_us=dt, coords=coords)


def write_label_track(path, track: LabelTrack) -> None:
    """Write a label track as CSV, 2D or 3D depending on coordinate width."""
    d = track.coords.shape[2]
    header = _LABEL_CSV_HEADERS[0] if d == 2 else _LABEL_CSV_HEADERS[1]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for i, t in enumerate(track.timestamps):
            for j in range(track.coords.shape[1]):
                coord = ",".join(repr(float(c)) for c in track.coords[i, j])
                fh.write(f"{int(t)},{j},{coord}\n")


# ── single joint-set CSV (no time axis) ─────────────────────────────────────

_JOINT_CSV_HEADERS = ("joint_id,u,v", "joint_id,u,v,w")


def read_joints(path) -> JointSet:
    """Parse a one-sample joint CSV (header ``joint_id,u,v`` or ``joint_id,u,v,w``)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\r\n")
        if header not in _JOINT_CSV_HEADERS:
            raise BadHeaderError(f"expected one of {_JOINT_CSV_HEADERS}, got {header!r}")
        ncols = 3 if header == _JOINT_CSV_HEADERS[0] else 4
        rows: dict[int, tuple[float, ...]] = {}
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != ncols:
                raise ParseError(lineno, f"expected {ncols} fields, got {len(parts)}")
            try:
                jid = int(parts[0])
                coord = tuple(float(v) for v in parts[1:])
            except ValueError:
                raise ParseError(lineno, f"malformed row {line!r}") from None
            if jid in rows:
                raise ParseError(lineno, f"duplicate joint {jid}")
            rows[jid] = coord
    if not rows:
        raise EmptyInputError("joint file has no rows")
    ids = sorted(rows)
    if ids != list(range(len(ids))):
        raise BadHeaderError(f"joint ids must be 0..J-1, got {ids}")
    return JointSet(np.array([rows[j] for j in ids], dtype=np.float64))


def write_joints(path, joints: JointSet) -> None:
    header = _JOINT_CSV_HEADERS[0] if joints.dims == 2 else _JOINT_CSV_HEADERS[1]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for j in range(joints.num_joints):
            coord = ",".join(repr(float(c)) for c in joints.coords[j])
            fh.write(f"{j},{coord}\n")


# ── windowing ────────────────────────────────────────────────────────────────

def window_by_count(
    stream: np.ndarray,
    geometry: SensorGeometry,
    n: int = 30_000,
    min_points: int = 1024,
    pre_filter: Optional[PreFilter] = None,
    camera_id: int = 0,
) -> list[EventWindow]:
    """Cut a time-sorted stream into consecutive windows of exactly ``n`` events.

    The trailing remainder shorter than ``n`` is dropped. Each window gets the
    tight span of its own events. ``pre_filter`` runs on every window before
    the ``min_points`` check; windows left with fewer events are discarded.

    Raises
    ------
    InvalidNError
        If ``n`` is not a positive integer.
    """
    if n < 1:
        raise InvalidNError(f"window size must be >= 1, got {n}")
    stream = np.asarray(stream, dtype=EVENT_DTYPE)
    out: list[EventWindow] = []
    for start in range(0, len(stream) - n + 1, n):
        chunk = stream[start:start + n]
        win = EventWindow.from_arrays(
            geometry, chunk["x"], chunk["y"], chunk["t"], chunk["p"], camera_id=camera_id
        )
        if pre_filter is not None:
            win = pre_filter(win)
        if len(win) >= min_points:
            out.append(win)
    return out


def _window_event_span(window: EventWindow) -> tuple[int, int]:
    if len(window) == 0:
        raise EmptyWindowError("window has no events")
    return int(window.ts[0]), int(window.ts[-1])


def mean_label(window: EventWindow, track: LabelTrack) -> JointSet:
    """Average every label whose timestamp falls inside the window's event span.

    The span is closed: from the earliest label timestamp at or after the
    first event to the latest at or before the last event.

    Raises
    ------
    NoLabelInWindowError
        If no label timestamp lands inside the span.
    EmptyWindowError
    """
    t_first, t_last = _window_event_span(window)
    ts = track.timestamps
    lo = int(np.searchsorted(ts, t_first, side="left"))
    hi = int(np.searchsorted(ts, t_last, side="right"))
    if lo >= hi:
        raise NoLabelInWindowError(
            f"no label in [{t_first},{t_last}] (track covers [{ts[0]},{ts[-1]}])"
        )
    return JointSet(track.coords[lo:hi].mean(axis=0))


def last_label(window: EventWindow, track: LabelTrack) -> JointSet:
    """Pick the label nearest the window's last event; ties go to the earlier one."""
    _, t_last = _window_event_span(window)
    dist = np.abs(track.timestamps - np.int64(t_last))
    return track.joint_set(int(np.argmin(dist)))


@dataclass(frozen=True)
class LabeledWindow:
    """An event window paired with its ground-truth joints."""

    window: EventWindow
    label: JointSet
    label_mode: str


def labeled_windows(
    stream: np.ndarray,
    geometry: SensorGeometry,
    track: LabelTrack,
    n: int = 30_000,
    min_points: int = 1024,
    label_mode: str = "mean",
    pre_filter: Optional[PreFilter] = None,
) -> list[LabeledWindow]:
    """Window a stream and attach one label per window.

    Windows whose span contains no label sample are skipped (only possible in
    ``mean`` mode, at the edges of the recording).
    """
    labeler = _pick_labeler(label_mode)
    out = []
    for win in window_by_count(stream, geometry, n, min_points, pre_filter):
        try:
            out.append(LabeledWindow(win, labeler(win, track), label_mode))
        except NoLabelInWindowError:
            continue
    return out


def window_multiview(
    streams: Mapping[int, np.ndarray],
    geometry: SensorGeometry,
    track: LabelTrack,
    n: int = 30_000,
    min_points: int = 1024,
    label_mode: str = "mean",
) -> list[LabeledWindow]:
    """Window a multi-camera rig on the merged stream, sharing labels.

    All views are merged into one time-sorted stream and cut into windows of
    ``n`` events there, so window boundaries and labels are common to every
    camera. Each merged window is then split back per camera; views left with
    fewer than ``min_points`` events are dropped, the rest carry the shared
    label and their own ``camera_id``.
    """
    if not streams:
        raise EmptyInputError("no camera streams")
    labeler = _pick_labeler(label_mode)
    cam_ids = sorted(streams)
    parts = [np.asarray(streams[c], dtype=EVENT_DTYPE) for c in cam_ids]
    cams = np.concatenate([np.full(len(p), c, dtype=np.int32) for c, p in zip(cam_ids, parts)])
    merged = np.concatenate(parts)
    order = np.argsort(merged["t"], kind="stable")
    merged, cams = merged[order], cams[order]

    out = []
    for start in range(0, len(merged) - n + 1, n):
        chunk, chunk_cams = merged[start:start + n], cams[start:start + n]
        shared = EventWindow.from_arrays(
            geometry, chunk["x"], chunk["y"], chunk["t"], chunk["p"], camera_id=-1
        )
        try:
            label = labeler(shared, track)
        except NoLabelInWindowError:
            continue
        for cam in cam_ids:
            mask = chunk_cams == cam
            if int(mask.sum()) < min_points:
                continue
            sub = chunk[mask]
            win = EventWindow.from_arrays(
                geometry, sub["x"], sub["y"], sub["t"], sub["p"], camera_id=cam
            )
            out.append(LabeledWindow(win, label, label_mode))
    return out


def _pick_labeler(label_mode: str) -> Callable[[EventWindow, LabelTrack], JointSet]:
    if label_mode == "mean":
        return mean_label
    if label_mode == "last":
        return last_label
    raise ValueError(f"label_mode must be 'mean' or 'last', got {label_mode!r}")
