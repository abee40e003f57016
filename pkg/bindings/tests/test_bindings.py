"""Cross-surface equality: every wrapper reproduces the CLI's output bytes.

A small synthetic corpus is generated once through the CLI; each test then
runs the matching subcommand on it and checks that the wrapper's result,
serialized through the primary containers, hashes to the same digest.
"""

import hashlib
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from evrep.dea import ten1_bytes, write_ten1
from evrep.devox import DevPlanes, write_dev1
from evrep.event_core import SensorGeometry
from evrep.ingest import read_evt1, write_joints
from evrep.pose_codec import JointSet
from evrep.rasepc import RasterCloud, write_rpc1
from evrep_bindings import (
    dea_fuse_arrays,
    heatmap_decode,
    heatmap_encode_array,
    mpjpe,
    project_dev_arrays,
    rasterize_arrays,
    simdr_decode,
    simdr_encode,
)

CLI = [sys.executable, "-m", "evrep"]
WIDTH, HEIGHT = 64, 48


def run_cli(*args):
    env = os.environ.copy()
    env.pop("EVREP_SEED", None)
    proc = subprocess.run(CLI + [str(a) for a in args], capture_output=True, text=True, env=env)
    assert proc.returncode == 0, proc.stderr
    return proc


def sha256_file(path):
    return hashlib.sha256(open(path, "rb").read()).hexdigest()


def sha256_bytes(blob):
    return hashlib.sha256(blob).hexdigest()


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("fixture_corpus")
    run_cli(
        "synth", "--out", out, "--n", 2, "--seed", 42, "--width", WIDTH, "--height", HEIGHT,
        "--duration", 60000, "--joints", 3, "--keyframes", 4,
    )
    return out


def load_events(path):
    """EVT1 file -> the N x 4 (x, y, t, p) array the wrappers take."""
    geometry, recs = read_evt1(path)
    assert (geometry.width, geometry.height) == (WIDTH, HEIGHT)
    return np.stack(
        [
            recs["x"].astype(np.int64),
            recs["y"].astype(np.int64),
            recs["t"].astype(np.int64),
            recs["p"].astype(np.int64),
        ],
        axis=1,
    )


def test_rasterize_arrays_reproduces_cli_digest(corpus, tmp_path):
    src = corpus / "seq_000.evt1"
    cli_out = tmp_path / "cli.rpc1"
    run_cli("rasterize", src, cli_out, "--k", 4, "--sample-n", 256, "--seed", 9)

    points = rasterize_arrays(load_events(src), WIDTH, HEIGHT, k=4, sample_n=256, seed=9)
    assert points.shape == (256, 5)
    cloud = RasterCloud(
        geometry=SensorGeometry(WIDTH, HEIGHT),
        k=4,
        xs=points[:, 0].astype(np.uint16),
        ys=points[:, 1].astype(np.uint16),
        t_avg=points[:, 2],
        p_acc=points[:, 3].astype(np.int32),
        e_cnt=points[:, 4].astype(np.uint32),
    )
    mine = tmp_path / "wrapper.rpc1"
    write_rpc1(mine, cloud)
    assert sha256_file(mine) == sha256_file(cli_out)


def test_rasterize_arrays_raw_cloud_digest(corpus, tmp_path):
    src = corpus / "seq_001.evt1"
    cli_out = tmp_path / "cli.rpc1"
    run_cli("rasterize", src, cli_out, "--k", 6, "--sample-n", 0)
    points = rasterize_arrays(load_events(src), WIDTH, HEIGHT, k=6, sample_n=0)
    cloud = RasterCloud(
        geometry=SensorGeometry(WIDTH, HEIGHT),
        k=6,
        xs=points[:, 0].astype(np.uint16),
        ys=points[:, 1].astype(np.uint16),
        t_avg=points[:, 2],
        p_acc=points[:, 3].astype(np.int32),
        e_cnt=points[:, 4].astype(np.uint32),
    )
    mine = tmp_path / "wrapper.rpc1"
    write_rpc1(mine, cloud)
    assert sha256_file(mine) == sha256_file(cli_out)


def test_project_dev_arrays_reproduces_cli_digest(corpus, tmp_path):
    src = corpus / "seq_000.evt1"
    for mode in ("count", "polarity_sum", "two_channel"):
        cli_out = tmp_path / f"{mode}.dev1"
        run_cli("voxelize", src, cli_out, "--dims", 8, 8, 8, "--mode", mode)
        hw, th, wt = project_dev_arrays(load_events(src), WIDTH, HEIGHT, (8, 8, 8), mode)
        mine = tmp_path / f"{mode}_wrapper.dev1"
        write_dev1(mine, DevPlanes(plane_hw=hw, plane_th=th, plane_wt=wt, mode=mode))
        assert sha256_file(mine) == sha256_file(cli_out)


def test_dea_fuse_arrays_reproduces_cli_digest(tmp_path):
    rng = np.random.default_rng(3)
    f_hw = rng.normal(size=(2, 5, 4)).astype(np.float32)
    f_th = rng.normal(size=(2, 3, 5)).astype(np.float32)
    f_wt = rng.normal(size=(2, 4, 3)).astype(np.float32)
    paths = [tmp_path / n for n in ("hw.ten1", "th.ten1", "wt.ten1")]
    for path, arr in zip(paths, (f_hw, f_th, f_wt)):
        write_ten1(path, arr)
    for pooling in ("avg", "max"):
        cli_out = tmp_path / f"{pooling}.ten1"
        run_cli("dea", *paths, cli_out, "--pooling", pooling)
        fused = dea_fuse_arrays(f_hw, f_th, f_wt, pooling=pooling)
        assert sha256_bytes(ten1_bytes(fused)) == sha256_file(cli_out)


def test_dea_fuse_arrays_worked_fixture():
    out = dea_fuse_arrays(
        np.array([[[1.0, 2.0], [3.0, 4.0]]]),
        np.array([[[1.0, 0.0], [0.0, 1.0]]]),
        np.array([[[1.0, 1.0], [0.0, 0.0]]]),
    )
    assert out.shape == (3, 2, 2)
    assert np.array_equal(out[0], [[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(out[1], [[0.25, 0.5], [0.75, 1.0]])
    assert np.array_equal(out[2], [[1.0, 0.0], [3.0, 0.0]])


def test_simdr_encode_reproduces_cli_digest(tmp_path):
    joints = JointSet(np.array([[3.0, 9.0], [14.0, 2.0], [7.5, 11.0]]))
    src = tmp_path / "joints.csv"
    write_joints(src, joints)
    cli_out = tmp_path / "cli.ten1"
    run_cli("encode-labels", src, cli_out, "--codec", "simdr", "--width", 16, "--height", 12)
    rows = [
        np.concatenate([simdr_encode(x, 16, 8.0), simdr_encode(y, 12, 8.0)])
        for x, y in joints.coords
    ]
    assert sha256_bytes(ten1_bytes(np.stack(rows))) == sha256_file(cli_out)


def test_heatmap_encode_reproduces_cli_digest(tmp_path):
    joints = JointSet(np.array([[3.0, 9.0], [14.0, 2.0]]))
    src = tmp_path / "joints.csv"
    write_joints(src, joints)
    cli_out = tmp_path / "cli.ten1"
    run_cli("encode-labels", src, cli_out, "--codec", "heatmap", "--grid", 16, 16)
    grids = np.stack([heatmap_encode_array((x, y), (16, 16), 2.0) for x, y in joints.coords])
    assert sha256_bytes(ten1_bytes(grids)) == sha256_file(cli_out)


def test_decoders_invert_encoders():
    assert simdr_decode(simdr_encode(11, 64)) == 11
    assert heatmap_decode(heatmap_encode_array((5, 40))) == (5, 40)


def test_mpjpe_matches_cli_report(tmp_path):
    pred = JointSet(np.array([[3.0, 4.0], [10.0, 10.0]]))
    gt = JointSet(np.array([[0.0, 0.0], [10.0, 10.0]]))
    write_joints(tmp_path / "pred.csv", pred)
    write_joints(tmp_path / "gt.csv", gt)
    report = json.loads(run_cli("eval-mpjpe", tmp_path / "pred.csv", tmp_path / "gt.csv").stdout)
    assert mpjpe(pred.coords, gt.coords) == report["mpjpe"] == 2.5
    assert mpjpe(pred.coords, pred.coords) == 0.0


def test_errors_are_primary_classes():
    from evrep.errors import OutOfBoundsError

    bad = np.array([[99, 0, 10, 1]])
    with pytest.raises(OutOfBoundsError):
        rasterize_arrays(bad, 8, 8)
