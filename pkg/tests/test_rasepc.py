import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evrep.errors import (
    BadMagicError,
    EmptyCloudError,
    EmptyWindowError,
    InvalidKError,
    InvalidNError,
    OutOfBoundsError,
    TruncatedRecordError,
)
from evrep.event_core import EventWindow, SensorGeometry
from evrep.rasepc import (
    RasterStream,
    raster_stream_update,
    rasterize,
    read_rpc1,
    sample_fixed,
    write_rpc1,
)
from tests.conftest import make_random_window

GEO = SensorGeometry(16, 16)


def _fixture_window():
    return EventWindow.from_arrays(
        GEO, [3, 3, 3, 5], [4, 4, 4, 5], [50, 80, 99, 350], [1, -1, 1, 1],
        t_start=0, t_end=400,
    )


def rasterize_oracle(window, k):
    """Group-by reference: dict keyed on (slice, y, x), exact integer sums."""
    span = window.t_end - window.t_start
    cells = {}
    for x, y, t, p in zip(
        window.xs.tolist(), window.ys.tolist(), window.ts.tolist(), window.ps.tolist()
    ):
        s = (t - window.t_start) * k // span
        acc = cells.setdefault((s, y, x), [0, 0, 0])
        acc[0] += t
        acc[1] += p
        acc[2] += 1
    out = {}
    for (s, y, x), (tsum, psum, m) in cells.items():
        out[(s, y, x)] = ((tsum / m - window.t_start) / span, psum, m)
    return out


def test_fixture_condenses_to_two_points():
    cloud = rasterize(_fixture_window(), k=4)
    assert len(cloud) == 2
    assert cloud.xs.tolist() == [3, 5]
    assert cloud.ys.tolist() == [4, 5]
    assert cloud.p_acc.tolist() == [1, 1]
    assert cloud.e_cnt.tolist() == [3, 1]
    assert cloud.t_avg[0] == pytest.approx((229 / 3) / 400, abs=1e-12)
    assert cloud.t_avg[1] == 0.875
    assert cloud.slices.tolist() == [0, 3]


def test_rejects_empty_window_and_bad_k():
    empty = EventWindow.from_arrays(GEO, [], [], [], [], t_start=0, t_end=10)
    with pytest.raises(EmptyWindowError):
        rasterize(empty)
    with pytest.raises(InvalidKError):
        rasterize(_fixture_window(), k=0)


def test_single_slice_collapses_per_pixel():
    cloud = rasterize(_fixture_window(), k=1)
    assert len(cloud) == 2  # two active pixels


def test_matches_group_by_oracle(rng):
    for _ in range(20):
        n = int(rng.integers(1, 3000))
        k = int(rng.integers(1, 9))
        win = make_random_window(rng, GEO, n, t_hi=int(rng.integers(10, 100_000)))
        cloud = rasterize(win, k=k)
        oracle = rasterize_oracle(win, k)
        assert len(cloud) == len(oracle)
        for i, key in enumerate(zip(cloud.slices.tolist(), cloud.ys.tolist(), cloud.xs.tolist())):
            t_avg, p_acc, e_cnt = oracle[key]
            assert cloud.t_avg[i] == pytest.approx(t_avg, rel=1e-12)
            assert int(cloud.p_acc[i]) == p_acc
            assert int(cloud.e_cnt[i]) == e_cnt


def test_conservation_and_parity(rng):
    for _ in range(10):
        win = make_random_window(rng, GEO, 2000)
        cloud = rasterize(win, k=4)
        assert int(cloud.e_cnt.sum()) == len(win)
        assert (np.abs(cloud.p_acc) <= cloud.e_cnt).all()
        assert ((cloud.p_acc - cloud.e_cnt.astype(np.int64)) % 2 == 0).all()
        assert len(cloud) <= min(len(win), 4 * len(set(zip(win.xs.tolist(), win.ys.tolist()))))


def test_t_avg_ordered_within_pixel(rng):
    win = make_random_window(rng, GEO, 5000)
    cloud = rasterize(win, k=6)
    order = np.lexsort((cloud.slices, cloud.ys, cloud.xs))
    xs, ys, sl, ta = cloud.xs[order], cloud.ys[order], cloud.slices[order], cloud.t_avg[order]
    same_pixel = (xs[1:] == xs[:-1]) & (ys[1:] == ys[:-1])
    assert (ta[1:][same_pixel] >= ta[:-1][same_pixel]).all()
    assert (ta >= 0).all() and (ta < 1).all()


def test_points_in_slice_major_order(rng):
    win = make_random_window(rng, GEO, 500)
    cloud = rasterize(win, k=4)
    keys = list(zip(cloud.slices.tolist(), cloud.ys.tolist(), cloud.xs.tolist()))
    assert keys == sorted(keys)


# ── fixed-count sampling ─────────────────────────────────────────────────────

def test_sample_permutes_when_sizes_match():
    cloud = rasterize(_fixture_window(), k=4)
    picked = sample_fixed(cloud, n=2, seed=3)
    assert sorted(picked.xs.tolist()) == sorted(cloud.xs.tolist())


def test_sample_without_replacement_has_no_duplicates(rng):
    win = make_random_window(rng, GEO, 4000)
    cloud = rasterize(win, k=4)
    assert len(cloud) > 64
    picked = sample_fixed(cloud, n=64, seed=9)
    keys = set(zip(picked.xs.tolist(), picked.ys.tolist(), picked.t_avg.tolist()))
    assert len(picked) == 64 and len(keys) == 64


def test_sample_with_replacement_keeps_all_originals():
    cloud = rasterize(_fixture_window(), k=4)  # 2 points
    picked = sample_fixed(cloud, n=5, seed=0)
    assert len(picked) == 5
    originals = set(zip(cloud.xs.tolist(), cloud.ys.tolist()))
    sampled = list(zip(picked.xs.tolist(), picked.ys.tolist()))
    assert originals <= set(sampled)
    assert len(sampled) - len(set(sampled)) >= 1  # duplicates present


def test_sample_three_to_five_adds_exactly_two_duplicates(rng):
    win = make_random_window(rng, SensorGeometry(4, 1), 3, t_hi=100)
    cloud = rasterize(win, k=1)
    if len(cloud) == 3:
        picked = sample_fixed(cloud, n=5, seed=1)
        pts = list(zip(picked.xs.tolist(), picked.ys.tolist(), picked.t_avg.tolist()))
        assert len(pts) == 5 and len(set(pts)) == 3


def test_sample_deterministic_per_seed(rng):
    cloud = rasterize(make_random_window(rng, GEO, 1000), k=4)
    a = sample_fixed(cloud, n=128, seed=42)
    b = sample_fixed(cloud, n=128, seed=42)
    c = sample_fixed(cloud, n=128, seed=43)
    assert np.array_equal(a.xs, b.xs) and np.array_equal(a.t_avg, b.t_avg)
    assert not np.array_equal(a.xs, c.xs)


def test_sample_errors():
    cloud = rasterize(_fixture_window(), k=4)
    with pytest.raises(InvalidNError):
        sample_fixed(cloud, n=0)
    empty = read_back_empty()
    with pytest.raises(EmptyCloudError):
        sample_fixed(empty, n=4)


def read_back_empty():
    from evrep.rasepc import RasterCloud

    z = np.array([], dtype=np.int64)
    return RasterCloud(GEO, 4, z, z, z.astype(float), z, z)


# ── streaming buffer ─────────────────────────────────────────────────────────

def test_stream_snapshot_equals_batch_bit_for_bit(rng):
    for _ in range(10):
        n = int(rng.integers(1, 4000))
        win = make_random_window(rng, GEO, n, t_hi=50_000)
        k = int(rng.integers(1, 7))
        stream = RasterStream(GEO, k, win.t_end - win.t_start, t_start=win.t_start)
        recs = win.records
        cuts = np.sort(rng.integers(0, n + 1, 3))
        for lo, hi in zip(np.concatenate(([0], cuts)), np.concatenate((cuts, [n]))):
            stream.update(recs[lo:hi])
        snap = stream.snapshot()
        batch = rasterize(win, k=k)
        assert np.array_equal(snap.xs, batch.xs)
        assert np.array_equal(snap.ys, batch.ys)
        assert np.array_equal(snap.t_avg, batch.t_avg)  # exact float equality
        assert np.array_equal(snap.p_acc, batch.p_acc)
        assert np.array_equal(snap.e_cnt, batch.e_cnt)


def test_stream_two_updates_equal_one(rng):
    win = make_random_window(rng, GEO, 600, t_hi=10_000)
    recs = win.records
    one = RasterStream(GEO, 4, win.span_us, t_start=win.t_start).update(recs)
    two = RasterStream(GEO, 4, win.span_us, t_start=win.t_start)
    raster_stream_update(two, recs[:300])
    raster_stream_update(two, recs[300:])
    a, b = one.snapshot(), two.snapshot()
    assert np.array_equal(a.t_avg, b.t_avg) and np.array_equal(a.e_cnt, b.e_cnt)


def test_stream_empty_update_is_identity(rng):
    win = make_random_window(rng, GEO, 100, t_hi=1000)
    s = RasterStream(GEO, 4, win.span_us, t_start=win.t_start).update(win.records)
    before = s.snapshot()
    s.update(win.records[:0])
    after = s.snapshot()
    assert np.array_equal(before.t_avg, after.t_avg)


def test_stream_rejects_events_outside_window():
    from evrep.event_core import EVENT_DTYPE

    s = RasterStream(GEO, 4, 100, t_start=0)
    with pytest.raises(OutOfBoundsError):
        s.update(np.array([(250, 1, 1, 1)], dtype=EVENT_DTYPE))
    with pytest.raises(OutOfBoundsError):
        s.update(np.array([(50, 99, 1, 1)], dtype=EVENT_DTYPE))


def test_stream_reset_starts_fresh(rng):
    win = make_random_window(rng, GEO, 50, t_hi=99)
    s = RasterStream(GEO, 2, 100, t_start=0)
    s.update(win.records)
    s.reset(t_start=1000)
    assert s.total_events == 0
    with pytest.raises(EmptyWindowError):
        s.snapshot()


# ── RPC1 container ───────────────────────────────────────────────────────────

def test_rpc1_round_trip(tmp_path, rng):
    cloud = rasterize(make_random_window(rng, GEO, 2000), k=4)
    path = tmp_path / "c.rpc1"
    write_rpc1(path, cloud)
    back = read_rpc1(path)
    assert back.geometry == GEO and back.k == 4 and len(back) == len(cloud)
    assert np.array_equal(back.xs, cloud.xs)
    assert np.array_equal(back.p_acc, cloud.p_acc)
    assert np.array_equal(back.e_cnt, cloud.e_cnt)
    assert np.array_equal(back.t_avg, cloud.t_avg.astype(np.float32).astype(np.float64))


def test_rpc1_exact_header(tmp_path):
    cloud = rasterize(_fixture_window(), k=4)
    path = tmp_path / "c.rpc1"
    write_rpc1(path, cloud)
    blob = path.read_bytes()
    assert blob[:4] == b"RPC1"
    assert int.from_bytes(blob[4:6], "little") == 16   # width
    assert int.from_bytes(blob[6:8], "little") == 16   # height
    assert int.from_bytes(blob[8:10], "little") == 4   # k
    assert int.from_bytes(blob[10:14], "little") == 2  # points
    assert len(blob) == 14 + 2 * 16


def test_rpc1_errors(tmp_path):
    p = tmp_path / "x.rpc1"
    p.write_bytes(b"WAT?" + bytes(16))
    with pytest.raises(BadMagicError):
        read_rpc1(p)
    cloud = rasterize(_fixture_window(), k=4)
    good = tmp_path / "g.rpc1"
    write_rpc1(good, cloud)
    bad = tmp_path / "b.rpc1"
    bad.write_bytes(good.read_bytes()[:-3])
    with pytest.raises(TruncatedRecordError):
        read_rpc1(bad)


@given(st.integers(1, 400), st.integers(1, 6), st.integers(0, 2**31 - 1))
@settings(max_examples=30, deadline=None)
def test_property_conservation(n, k, seed):
    rng = np.random.default_rng(seed)
    win = make_random_window(rng, GEO, n, t_hi=10_000)
    cloud = rasterize(win, k=k)
    assert int(cloud.e_cnt.sum()) == n
    assert len(cloud) <= min(n, k * GEO.width * GEO.height)
