"""Cross-plane attention fusion for tri-plane features.

Input is the three plane tensors ``f_hw`` (C, H, W), ``f_th`` (C, T, H) and
``f_wt`` (C, W, T). The temporal planes are pooled over their t axis and
broadcast back to (C, H, W); each pooled tensor is then correlated with
``f_hw`` by a channel dot product, giving one (H, W) map per temporal plane
that is shared across channels. The fused output is::

    concat[ f_hw,  C_h * pooled_th,  C_w * pooled_wt ]   -> (3C, H, W)

with each correlation map broadcast into every channel of its pooled tensor.
The operator is a pure tensor function: no learned weights, no normalization,
no nonlinearity, deterministic for fixed inputs. Plain ``add`` and ``concat``
of the pooled tensors are exposed as comparison fusion modes.

``TEN1`` is the minimal tensor container used across the CLI (little-endian):
magic ``b"TEN1"``, u8 ndim, u32 dims[ndim], then the f32 payload row-major.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import BadMagicError, ShapeMismatchError, TruncatedRecordError

POOLINGS = ("avg", "max")
FUSIONS = ("dea", "add", "concat")

_TEN1_MAGIC = b"TEN1"


def _check_planes(f_hw: np.ndarray, f_th: np.ndarray, f_wt: np.ndarray) -> tuple[int, int, int, int]:
    if f_hw.ndim != 3 or f_th.ndim != 3 or f_wt.ndim != 3:
        raise ShapeMismatchError(
            f"planes must be 3D, got {f_hw.shape}, {f_th.shape}, {f_wt.shape}"
        )
    c, h, w = f_hw.shape
    if f_th.shape[0] != c or f_wt.shape[0] != c:
        raise ShapeMismatchError(f"channel counts differ: {c}, {f_th.shape[0]}, {f_wt.shape[0]}")
    t = f_th.shape[1]
    if f_th.shape[2] != h:
        raise ShapeMismatchError(f"f_th is {f_th.shape}, expected (C, T, {h})")
    if f_wt.shape != (c, w, t):
        raise ShapeMismatchError(f"f_wt is {f_wt.shape}, expected ({c}, {w}, {t})")
    return c, h, w, t


def pool_expand(
    f_th: np.ndarray,
    f_wt: np.ndarray,
    target: tuple[int, int],
    pooling: str = "avg",
) -> tuple[np.ndarray, np.ndarray]:
    """Pool the temporal axis out of both planes and broadcast to (C, H, W).

    ``f_th`` (C, T, H) pools over t into a per-h profile replicated along w;
    ``f_wt`` (C, W, T) pools over t into a per-w profile replicated along h.

    Raises
    ------
    ShapeMismatchError
    """
    if pooling not in POOLINGS:
        raise ValueError(f"pooling must be one of {POOLINGS}, got {pooling!r}")
    h, w = target
    f_th = np.asarray(f_th)
    f_wt = np.asarray(f_wt)
    if f_th.ndim != 3 or f_th.shape[2] != h:
        raise ShapeMismatchError(f"f_th is {f_th.shape}, expected (C, T, {h})")
    if f_wt.ndim != 3 or f_wt.shape[1] != w or f_wt.shape[0] != f_th.shape[0]:
        raise ShapeMismatchError(f"f_wt is {f_wt.shape}, expected ({f_th.shape[0]}, {w}, T)")
    if f_wt.shape[2] != f_th.shape[1]:
        raise ShapeMismatchError(
            f"temporal axes differ: f_th has T={f_th.shape[1]}, f_wt has T={f_wt.shape[2]}"
        )
    reduce = np.mean if pooling == "avg" else np.max
    per_h = reduce(f_th, axis=1)
    per_w = reduce(f_wt, axis=2)
    c = f_th.shape[0]
    expanded_th = np.broadcast_to(per_h[:, :, None], (c, h, w)).copy()
    expanded_wt = np.broadcast_to(per_w[:, None, :], (c, h, w)).copy()
    return expanded_th, expanded_wt


def correlate(expanded: np.ndarray, f_hw: np.ndarray) -> np.ndarray:
    """Channel dot product of two (C, H, W) tensors, giving one (H, W) map."""
    expanded = np.asarray(expanded)
    f_hw = np.asarray(f_hw)
    if expanded.ndim != 3 or expanded.shape != f_hw.shape:
        raise ShapeMismatchError(f"shapes differ: {expanded.shape} vs {f_hw.shape}")
    return (expanded * f_hw).sum(axis=0)


def dea_fuse(
    f_hw: np.ndarray,
    f_th: np.ndarray,
    f_wt: np.ndarray,
    pooling: str = "avg",
) -> np.ndarray:
    """Fuse the three planes into a (3C, H, W) tensor.

    Channels [0, C) are ``f_hw`` untouched; channels [C, 2C) are the pooled
    th tensor reweighted by its correlation map; channels [2C, 3C) likewise
    for the wt tensor.

    Raises
    ------
    ShapeMismatchError
    """
    f_hw = np.asarray(f_hw)
    f_th = np.asarray(f_th)
    f_wt = np.asarray(f_wt)
    _, h, w, _ = _check_planes(f_hw, f_th, f_wt)
    expanded_th, expanded_wt = pool_expand(f_th, f_wt, (h, w), pooling)
    corr_h = correlate(expanded_th, f_hw)
    corr_w = correlate(expanded_wt, f_hw)
    return np.concatenate([f_hw, corr_h[None] * expanded_th, corr_w[None] * expanded_wt], axis=0)


def fuse(
    f_hw: np.ndarray,
    f_th: np.ndarray,
    f_wt: np.ndarray,
    method: str = "dea",
    pooling: str = "avg",
) -> np.ndarray:
    """Fuse planes by ``dea`` (default), or the plain ``add``/``concat`` baselines.

    ``add`` sums f_hw with both pooled tensors into (C, H, W); ``concat``
    stacks them into (3C, H, W) without correlation weighting.
    """
    if method not in FUSIONS:
        raise ValueError(f"method must be one of {FUSIONS}, got {method!r}")
    if method == "dea":
        return dea_fuse(f_hw, f_th, f_wt, pooling)
    f_hw = np.asarray(f_hw)
    f_th = np.asarray(f_th)
    f_wt = np.asarray(f_wt)
    _, h, w, _ = _check_planes(f_hw, f_th, f_wt)
    expanded_th, expanded_wt = pool_expand(f_th, f_wt, (h, w), pooling)
    if method == "add":
        return f_hw + expanded_th + expanded_wt
    return np.concatenate([f_hw, expanded_th, expanded_wt], axis=0)


# ── TEN1 ─────────────────────────────────────────────────────────────────────

def ten1_bytes(array: np.ndarray) -> bytes:
    """Serialize an array as TEN1 (payload narrowed to little-endian f32)."""
    arr = np.ascontiguousarray(array, dtype="<f4")
    if arr.ndim < 1 or arr.ndim > 255:
        raise ShapeMismatchError(f"TEN1 holds 1..255 dims, got {arr.ndim}")
    head = _TEN1_MAGIC + struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape)
    return head + arr.tobytes()


def read_ten1_bytes(blob: bytes) -> np.ndarray:
    """Parse a TEN1 blob back into an f32 array.

    Raises
    ------
    BadMagicError, TruncatedRecordError
    """
    if blob[:4] != _TEN1_MAGIC:
        raise BadMagicError(f"expected {_TEN1_MAGIC!r}, got {blob[:4]!r}")
    if len(blob) < 5:
        raise TruncatedRecordError("missing ndim byte")
    ndim = blob[4]
    if ndim < 1:
        raise TruncatedRecordError("ndim must be >= 1")
    head = 5 + 4 * ndim
    if len(blob) < head:
        raise TruncatedRecordError(f"header needs {head} bytes, blob has {len(blob)}")
    shape = struct.unpack_from(f"<{ndim}I", blob, 5)
    expected = int(np.prod(shape, dtype=np.int64)) * 4
    payload = blob[head:]
    if len(payload) != expected:
        raise TruncatedRecordError(f"payload is {len(payload)} bytes, shape {shape} needs {expected}")
    return np.frombuffer(payload, dtype="<f4").reshape(shape).copy()


def write_ten1(path, array: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(ten1_bytes(array))


def read_ten1(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return read_ten1_bytes(fh.read())
