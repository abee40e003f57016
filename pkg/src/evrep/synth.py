"""Synthetic event streams with exact ground-truth joints.

A stick figure (bones drawn as constant-intensity capsules over a constant
background, joints linearly interpolated between keyframes) is rendered to
intensity frames at a fixed period. Per pixel, an event is emitted each time
the log-intensity crosses a threshold level between consecutive frames, with
its timestamp linearly interpolated inside the frame interval and polarity
equal to the sign of the change.

Crossing levels are the multiples of ``theta`` offset by each pixel's initial
log-intensity, mirroring a sensor that references its comparator at stream
start; only levels strictly between the two frame values fire. With the
binary scenes this renderer produces, every transition then crosses
``floor(|log fg - log bg| / theta)`` levels (for ``theta`` not an exact
divisor of the contrast), which makes the event count exactly non-increasing
in ``theta`` and gives moving edges matched +/- event pairs.

:func:`gen_corpus` writes sequences as EVT1 + label CSV plus a JSON manifest
and is byte-deterministic for a fixed seed.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import DegenerateTrackError, EmptyInputError, OutOfSpanError
from .event_core import EventWindow, SensorGeometry, canonicalize
from .ingest import LabelTrack, write_evt1, write_label_track


@dataclass(frozen=True)
class SkeletonTrack:
    """Keyframed joint positions plus the bone topology drawn between them.

    ``key_times`` is strictly increasing (microseconds); ``key_coords`` has
    shape (L, J, 2) in pixel units; ``bones`` lists joint-index pairs.
    """

    key_times: np.ndarray
    key_coords: np.ndarray
    bones: tuple[tuple[int, int], ...]
    thickness: float = 3.0

    def __post_init__(self):
        times = np.asarray(self.key_times, dtype=np.int64)
        coords = np.asarray(self.key_coords, dtype=np.float64)
        if times.ndim != 1 or coords.ndim != 3 or coords.shape[0] != times.shape[0]:
            raise ValueError(f"inconsistent track shapes {times.shape} / {coords.shape}")
        if times.shape[0] >= 2 and (np.diff(times) <= 0).any():
            raise ValueError("keyframe times must be strictly increasing")
        j = coords.shape[1]
        for a, b in self.bones:
            if not (0 <= a < j and 0 <= b < j):
                raise ValueError(f"bone ({a},{b}) references a missing joint")
        times.setflags(write=False)
        coords.setflags(write=False)
        object.__setattr__(self, "key_times", times)
        object.__setattr__(self, "key_coords", coords)
        object.__setattr__(self, "bones", tuple((int(a), int(b)) for a, b in self.bones))

    @property
    def num_joints(self) -> int:
        return self.key_coords.shape[1]


@dataclass(frozen=True)
class SynthConfig:
    """Camera and renderer parameters for event synthesis."""

    geometry: SensorGeometry = SensorGeometry(346, 260)
    frame_period_us: int = 10_000
    theta: float = 0.4
    fg_intensity: float = 200.0
    bg_intensity: float = 20.0
    noise_rate_hz: float = 0.0

    def __post_init__(self):
        if self.frame_period_us < 1:
            raise ValueError(f"frame period must be >= 1 us, got {self.frame_period_us}")
        if not self.theta > 0:
            raise ValueError(f"theta must be positive, got {self.theta}")
        if self.fg_intensity <= 0 or self.bg_intensity <= 0:
            raise ValueError("intensities must be positive")
        if self.noise_rate_hz < 0:
            raise ValueError(f"noise rate must be >= 0, got {self.noise_rate_hz}")


def interp_pose(track: SkeletonTrack, t: int) -> np.ndarray:
    """Joint positions at time ``t``, linearly interpolated between keyframes.

    Raises
    ------
    OutOfSpanError
        If ``t`` lies outside the keyframe range.
    """
    times = track.key_times
    if not times[0] <= t <= times[-1]:
        raise OutOfSpanError(f"t={t} outside keyframes [{times[0]},{times[-1]}]")
    if times.shape[0] == 1:
        return track.key_coords[0].copy()
    i = int(np.searchsorted(times, t, side="right")) - 1
    i = min(i, times.shape[0] - 2)
    frac = (t - times[i]) / (times[i + 1] - times[i])
    return (1.0 - frac) * track.key_coords[i] + frac * track.key_coords[i + 1]


def render_intensity(track: SkeletonTrack, t: int, config: SynthConfig) -> np.ndarray:
    """Rasterize the figure at time ``t`` into an (height, width) intensity frame.

    Bones are capsules of radius ``thickness / 2`` at foreground intensity;
    everything else is background. A track with no bones renders uniform.
    """
    g = config.geometry
    frame = np.full((g.height, g.width), config.bg_intensity, dtype=np.float64)
    pose = interp_pose(track, t)
    r = track.thickness / 2.0
    for a, b in track.bones:
        _paint_capsule(frame, pose[a], pose[b], r, config.fg_intensity)
    return frame


def _paint_capsule(frame: np.ndarray, p0: np.ndarray, p1: np.ndarray, r: float, value: float) -> None:
    h, w = frame.shape
    x_lo = max(int(math.floor(min(p0[0], p1[0]) - r)), 0)
    x_hi = min(int(math.ceil(max(p0[0], p1[0]) + r)) + 1, w)
    y_lo = max(int(math.floor(min(p0[1], p1[1]) - r)), 0)
    y_hi = min(int(math.ceil(max(p0[1], p1[1]) + r)) + 1, h)
    if x_lo >= x_hi or y_lo >= y_hi:
        return
    xs = np.arange(x_lo, x_hi, dtype=np.float64)
    ys = np.arange(y_lo, y_hi, dtype=np.float64)
    qx = xs[None, :] - p0[0]
    qy = ys[:, None] - p0[1]
    vx, vy = p1[0] - p0[0], p1[1] - p0[1]
    seg2 = vx * vx + vy * vy
    if seg2 == 0.0:
        d2 = qx**2 + qy**2
    else:
        s = np.clip((qx * vx + qy * vy) / seg2, 0.0, 1.0)
        d2 = (qx - s * vx) ** 2 + (qy - s * vy) ** 2
    patch = frame[y_lo:y_hi, x_lo:x_hi]
    patch[d2 <= r * r] = value


def _crossings(
    level0: np.ndarray, level1: np.ndarray, theta: float, t0: int, period: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Events for one frame transition: flat pixel index, time, polarity."""
    d0 = level0.ravel()
    d1 = level1.ravel()
    # levels strictly between the endpoints; a value sitting exactly on a
    # level fires only once it actually moves past it
    k_last = np.ceil(np.maximum(d0, d1) / theta) - 1.0
    k_first = np.floor(np.minimum(d0, d1) / theta) + 1.0
    counts = np.maximum(k_last - k_first + 1.0, 0.0).astype(np.int64)
    counts[d0 == d1] = 0
    active = np.flatnonzero(counts)
    if active.shape[0] == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty, empty.astype(np.int8), empty
    counts_a = counts[active]
    total = int(counts_a.sum())
    pix = np.repeat(active, counts_a)
    offsets = np.repeat(np.cumsum(counts_a) - counts_a, counts_a)
    j = np.arange(total, dtype=np.int64) - offsets
    k = k_first[pix] + j
    levels = k * theta
    frac = (levels - d0[pix]) / (d1[pix] - d0[pix])
    t = t0 + np.rint(frac * period).astype(np.int64)
    p = np.where(d1[pix] > d0[pix], 1, -1).astype(np.int8)
    return pix, t, p, counts_a


def gen_events(
    track: SkeletonTrack, config: SynthConfig, seed: int = 0
) -> tuple[EventWindow, LabelTrack]:
    """Simulate the event stream and the aligned label track for one take.

    Frames are rendered every ``frame_period_us`` across the keyframe range;
    labels are the interpolated joints at those same frame times. A static
    scene yields an empty window spanning the full take. Uniform background
    noise is mixed in only when ``config.noise_rate_hz > 0``, drawn from
    ``seed``.

    Raises
    ------
    DegenerateTrackError
        If the track has fewer than two keyframes.
    """
    if track.key_times.shape[0] < 2:
        raise DegenerateTrackError(f"need >= 2 keyframes, got {track.key_times.shape[0]}")
    g = config.geometry
    period = config.frame_period_us
    t_begin = int(track.key_times[0])
    t_final = int(track.key_times[-1])
    n_frames = (t_final - t_begin) // period + 1
    frame_times = t_begin + period * np.arange(n_frames, dtype=np.int64)

    label_coords = np.stack([interp_pose(track, int(t)) for t in frame_times])
    labels = LabelTrack(t0=t_begin, dt_us=period, coords=label_coords)

    prev = np.log(render_intensity(track, int(frame_times[0]), config))
    init = prev
    xs_parts, ys_parts, ts_parts, ps_parts = [], [], [], []
    for i in range(1, n_frames):
        cur = np.log(render_intensity(track, int(frame_times[i]), config))
        pix, t, p, _ = _crossings(prev - init, cur - init, config.theta,
                                  int(frame_times[i - 1]), period)
        if pix.shape[0]:
            ys_parts.append(pix // g.width)
            xs_parts.append(pix % g.width)
            ts_parts.append(t)
            ps_parts.append(p)
        prev = cur

    if config.noise_rate_hz > 0 and n_frames > 1:
        rng = np.random.default_rng(seed)
        span = int(frame_times[-1]) - t_begin
        n_noise = int(round(config.noise_rate_hz * span / 1e6))
        if n_noise:
            xs_parts.append(rng.integers(0, g.width, n_noise))
            ys_parts.append(rng.integers(0, g.height, n_noise))
            ts_parts.append(rng.integers(t_begin, int(frame_times[-1]) + 1, n_noise))
            ps_parts.append(rng.choice(np.array([-1, 1], dtype=np.int8), n_noise))

    if not xs_parts:
        window = EventWindow.from_arrays(
            g, np.empty(0), np.empty(0), np.empty(0), np.empty(0),
            t_start=t_begin, t_end=int(frame_times[-1]) + 1,
        )
        return window, labels
    raw = np.stack(
        [
            np.concatenate(xs_parts),
            np.concatenate(ys_parts),
            np.concatenate(ts_parts),
            np.concatenate(ps_parts),
        ],
        axis=1,
    )
    return canonicalize(raw, g), labels


# ── corpus generation ────────────────────────────────────────────────────────

def _random_track(
    rng: np.random.Generator,
    config: SynthConfig,
    duration_us: int,
    n_joints: int,
    n_keyframes: int,
) -> SkeletonTrack:
    """A bounded random chain figure: joint i bones to joint i+1."""
    g = config.geometry
    thickness = 3.0
    margin = thickness + 2.0
    lo = np.array([margin, margin])
    hi = np.array([g.width - 1 - margin, g.height - 1 - margin])
    seg = min(g.width, g.height) / (n_joints + 1)

    times = np.linspace(0, duration_us, n_keyframes).astype(np.int64)
    coords = np.empty((n_keyframes, n_joints, 2))
    root = rng.uniform(lo + seg, hi - seg)
    for f in range(n_keyframes):
        root = np.clip(root + rng.uniform(-seg, seg, 2), lo, hi)
        coords[f, 0] = root
        for j in range(1, n_joints):
            step = rng.uniform(-seg, seg, 2)
            coords[f, j] = np.clip(coords[f, j - 1] + step, lo, hi)
    bones = tuple((j, j + 1) for j in range(n_joints - 1))
    return SkeletonTrack(key_times=times, key_coords=coords, bones=bones, thickness=thickness)


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def gen_corpus(
    out_dir,
    n_sequences: int = 3,
    seed: int = 0,
    config: Optional[SynthConfig] = None,
    duration_us: int = 200_000,
    n_joints: int = 5,
    n_keyframes: int = 5,
) -> dict:
    """Write ``n_sequences`` synthetic takes plus a manifest under ``out_dir``.

    Each take is one EVT1 file and one label CSV; the manifest records the
    configuration and per-file SHA-256 digests. Repeating a seed reproduces
    every byte.
    """
    if n_sequences < 1:
        raise EmptyInputError(f"need >= 1 sequences, got {n_sequences}")
    config = config or SynthConfig()
    os.makedirs(out_dir, exist_ok=True)
    children = np.random.SeedSequence(seed).spawn(n_sequences)
    sequences = []
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        track = _random_track(rng, config, duration_us, n_joints, n_keyframes)
        window, labels = gen_events(track, config, seed=int(child.generate_state(1)[0]))
        ev_name = f"seq_{i:03d}.evt1"
        lb_name = f"seq_{i:03d}_labels.csv"
        ev_path = os.path.join(out_dir, ev_name)
        lb_path = os.path.join(out_dir, lb_name)
        write_evt1(ev_path + ".tmp", config.geometry, window)
        os.replace(ev_path + ".tmp", ev_path)
        write_label_track(lb_path + ".tmp", labels)
        os.replace(lb_path + ".tmp", lb_path)
        sequences.append(
            {
                "events": ev_name,
                "labels": lb_name,
                "n_events": len(window),
                "n_label_samples": len(labels),
                "sha256": {ev_name: _sha256(ev_path), lb_name: _sha256(lb_path)},
            }
        )
    manifest = {
        "kind": "synthetic-corpus",
        "seed": seed,
        "n_sequences": n_sequences,
        "duration_us": duration_us,
        "n_joints": n_joints,
        "n_keyframes": n_keyframes,
        "config": {
            "width": config.geometry.width,
            "height": config.geometry.height,
            "frame_period_us": config.frame_period_us,
            "theta": config.theta,
            "fg_intensity": config.fg_intensity,
            "bg_intensity": config.bg_intensity,
            "noise_rate_hz": config.noise_rate_hz,
        },
        "sequences": sequences,
    }
    man_path = os.path.join(out_dir, "corpus.json")
    with open(man_path + ".tmp", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(man_path + ".tmp", man_path)
    return manifest
