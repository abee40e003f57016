import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evrep.dea import (
    correlate,
    dea_fuse,
    fuse,
    pool_expand,
    read_ten1,
    read_ten1_bytes,
    ten1_bytes,
    write_ten1,
)
from evrep.errors import BadMagicError, ShapeMismatchError, TruncatedRecordError

F_HW = np.array([[[1.0, 2.0], [3.0, 4.0]]])           # (1, 2, 2)
F_TH = np.array([[[1.0, 0.0], [0.0, 1.0]]])           # (1, T=2, H=2)
F_WT = np.array([[[1.0, 1.0], [0.0, 0.0]]])           # (1, W=2, T=2)


def naive_fuse(f_hw, f_th, f_wt, pooling="avg"):
    """Triple-loop reference, no vectorized shortcuts."""
    c, h, w = f_hw.shape
    t = f_th.shape[1]
    ex_th = np.zeros((c, h, w))
    ex_wt = np.zeros((c, h, w))
    for ci in range(c):
        for hi in range(h):
            col = [f_th[ci, ti, hi] for ti in range(t)]
            v = sum(col) / t if pooling == "avg" else max(col)
            for wi in range(w):
                ex_th[ci, hi, wi] = v
        for wi in range(w):
            row = [f_wt[ci, wi, ti] for ti in range(t)]
            v = sum(row) / t if pooling == "avg" else max(row)
            for hi in range(h):
                ex_wt[ci, hi, wi] = v
    corr_h = np.zeros((h, w))
    corr_w = np.zeros((h, w))
    for hi in range(h):
        for wi in range(w):
            corr_h[hi, wi] = sum(ex_th[ci, hi, wi] * f_hw[ci, hi, wi] for ci in range(c))
            corr_w[hi, wi] = sum(ex_wt[ci, hi, wi] * f_hw[ci, hi, wi] for ci in range(c))
    out = np.zeros((3 * c, h, w))
    for ci in range(c):
        for hi in range(h):
            for wi in range(w):
                out[ci, hi, wi] = f_hw[ci, hi, wi]
                out[c + ci, hi, wi] = corr_h[hi, wi] * ex_th[ci, hi, wi]
                out[2 * c + ci, hi, wi] = corr_w[hi, wi] * ex_wt[ci, hi, wi]
    return out


# ── pooling and expansion ────────────────────────────────────────────────────

def test_pool_expand_avg_fixture():
    ex_th, ex_wt = pool_expand(F_TH, F_WT, (2, 2))
    assert np.array_equal(ex_th, np.full((1, 2, 2), 0.5))
    assert np.array_equal(ex_wt, np.array([[[1.0, 0.0], [1.0, 0.0]]]))


def test_pool_expand_max_fixture():
    ex_th, ex_wt = pool_expand(F_TH, F_WT, (2, 2), pooling="max")
    assert np.array_equal(ex_th, np.ones((1, 2, 2)))
    assert np.array_equal(ex_wt, np.array([[[1.0, 0.0], [1.0, 0.0]]]))


def test_pool_expand_shape_errors():
    with pytest.raises(ShapeMismatchError):
        pool_expand(F_TH, F_WT, (3, 2))
    with pytest.raises(ShapeMismatchError):
        pool_expand(F_TH, np.zeros((1, 2, 5)), (2, 2))
    with pytest.raises(ShapeMismatchError):
        pool_expand(F_TH, np.zeros((2, 2, 2)), (2, 2))
    with pytest.raises(ValueError):
        pool_expand(F_TH, F_WT, (2, 2), pooling="median")


# ── correlation ──────────────────────────────────────────────────────────────

def test_correlate_fixture():
    half = np.full((1, 2, 2), 0.5)
    assert np.array_equal(correlate(half, F_HW), np.array([[0.5, 1.0], [1.5, 2.0]]))


def test_correlate_zero_and_ones():
    assert np.array_equal(correlate(np.zeros((1, 2, 2)), F_HW), np.zeros((2, 2)))
    ones = np.ones((7, 3, 5))
    assert np.array_equal(correlate(ones, ones), np.full((3, 5), 7.0))


def test_correlate_shape_error():
    with pytest.raises(ShapeMismatchError):
        correlate(np.zeros((1, 2, 2)), np.zeros((1, 2, 3)))


# ── fusion ───────────────────────────────────────────────────────────────────

def test_fuse_worked_fixture_exact():
    out = dea_fuse(F_HW, F_TH, F_WT)
    assert out.shape == (3, 2, 2)
    assert np.array_equal(out[0], np.array([[1.0, 2.0], [3.0, 4.0]]))
    assert np.array_equal(out[1], np.array([[0.25, 0.5], [0.75, 1.0]]))
    assert np.array_equal(out[2], np.array([[1.0, 0.0], [3.0, 0.0]]))


def test_fuse_zero_temporal_planes():
    out = dea_fuse(F_HW, np.zeros_like(F_TH), np.zeros_like(F_WT))
    assert np.array_equal(out[0], F_HW[0])
    assert np.array_equal(out[1:], np.zeros((2, 2, 2)))


def test_fuse_first_slice_is_input(rng):
    f_hw = rng.normal(size=(3, 4, 5))
    f_th = rng.normal(size=(3, 6, 4))
    f_wt = rng.normal(size=(3, 5, 6))
    out = dea_fuse(f_hw, f_th, f_wt)
    assert out.shape == (9, 4, 5)
    assert np.array_equal(out[:3], f_hw)


def test_fuse_th_branch_scales_quadratically(rng):
    f_hw = rng.normal(size=(2, 3, 3))
    f_th = rng.normal(size=(2, 4, 3))
    f_wt = rng.normal(size=(2, 3, 4))
    base = dea_fuse(f_hw, f_th, f_wt)
    scaled = dea_fuse(f_hw, 3.0 * f_th, f_wt)
    assert np.allclose(scaled[2:4], 9.0 * base[2:4], rtol=1e-12)
    assert np.array_equal(scaled[4:], base[4:])


def test_fuse_matches_naive_loops(rng):
    for _ in range(60):
        c, h, w, t = (int(v) for v in rng.integers(1, 5, 4))
        f_hw = rng.normal(size=(c, h, w))
        f_th = rng.normal(size=(c, t, h))
        f_wt = rng.normal(size=(c, w, t))
        pooling = "avg" if rng.integers(2) else "max"
        got = dea_fuse(f_hw, f_th, f_wt, pooling=pooling)
        assert got.shape == (3 * c, h, w)
        assert np.allclose(got, naive_fuse(f_hw, f_th, f_wt, pooling), atol=1e-5)


def test_avg_equals_max_when_constant_along_t(rng):
    c, h, w, t = 2, 3, 4, 5
    f_hw = rng.normal(size=(c, h, w))
    f_th = np.repeat(rng.normal(size=(c, 1, h)), t, axis=1)
    f_wt = np.repeat(rng.normal(size=(c, w, 1)), t, axis=2)
    a = dea_fuse(f_hw, f_th, f_wt, pooling="avg")
    m = dea_fuse(f_hw, f_th, f_wt, pooling="max")
    assert np.allclose(a, m, rtol=1e-12)


def test_fuse_shape_errors():
    with pytest.raises(ShapeMismatchError):
        dea_fuse(F_HW, np.zeros((2, 2, 2)), F_WT)
    with pytest.raises(ShapeMismatchError):
        dea_fuse(F_HW, F_TH, np.zeros((1, 3, 2)))
    with pytest.raises(ShapeMismatchError):
        dea_fuse(np.zeros((2, 2)), F_TH, F_WT)


def test_comparison_fusions():
    added = fuse(F_HW, F_TH, F_WT, method="add")
    assert added.shape == (1, 2, 2)
    assert np.array_equal(added, F_HW + np.full((1, 2, 2), 0.5) + [[[1.0, 0.0], [1.0, 0.0]]])
    cat = fuse(F_HW, F_TH, F_WT, method="concat")
    assert cat.shape == (3, 2, 2)
    assert np.array_equal(cat[0], F_HW[0])
    assert np.array_equal(cat[1], np.full((2, 2), 0.5))
    assert np.array_equal(fuse(F_HW, F_TH, F_WT, method="dea"), dea_fuse(F_HW, F_TH, F_WT))
    with pytest.raises(ValueError):
        fuse(F_HW, F_TH, F_WT, method="mean")


@given(
    st.integers(1, 4), st.integers(1, 4), st.integers(1, 4), st.integers(1, 4),
    st.integers(0, 2**31 - 1),
)
@settings(max_examples=40, deadline=None)
def test_property_shape_and_first_slice(c, h, w, t, seed):
    rng = np.random.default_rng(seed)
    f_hw = rng.normal(size=(c, h, w))
    out = dea_fuse(f_hw, rng.normal(size=(c, t, h)), rng.normal(size=(c, w, t)))
    assert out.shape == (3 * c, h, w)
    assert np.array_equal(out[:c], f_hw)


# ── TEN1 container ───────────────────────────────────────────────────────────

def test_ten1_round_trip(tmp_path, rng):
    arr = rng.normal(size=(3, 4, 5)).astype(np.float32)
    path = tmp_path / "a.ten1"
    write_ten1(path, arr)
    back = read_ten1(path)
    assert back.dtype == np.float32
    assert np.array_equal(back, arr)


def test_ten1_exact_layout():
    blob = ten1_bytes(np.array([[1.0, 2.0]], dtype=np.float32))
    assert blob[:4] == b"TEN1"
    assert blob[4] == 2
    assert int.from_bytes(blob[5:9], "little") == 1
    assert int.from_bytes(blob[9:13], "little") == 2
    assert np.frombuffer(blob[13:], dtype="<f4").tolist() == [1.0, 2.0]
    assert len(blob) == 13 + 8


def test_ten1_narrows_to_f32():
    arr = np.array([1.0, 1e-300], dtype=np.float64)
    back = read_ten1_bytes(ten1_bytes(arr))
    assert back.dtype == np.float32
    assert back[1] == 0.0


def test_ten1_errors():
    with pytest.raises(BadMagicError):
        read_ten1_bytes(b"NOPE" + bytes(9))
    good = ten1_bytes(np.zeros((2, 2), dtype=np.float32))
    with pytest.raises(TruncatedRecordError):
        read_ten1_bytes(good[:-1])
    with pytest.raises(TruncatedRecordError):
        read_ten1_bytes(good + b"\x00")
    with pytest.raises(TruncatedRecordError):
        read_ten1_bytes(b"TEN1")
