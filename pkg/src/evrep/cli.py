"""Command-line front end.

Subcommands::

    convert        CSV <-> EVT1 event container conversion
    window         cut a labeled recording into count windows
    rasterize      EVT1 window -> RPC1 point cloud
    voxelize       EVT1 window -> DEV1 tri-planes
    dea            three TEN1 planes -> fused TEN1 tensor
    encode-labels  joint CSV -> TEN1 codec targets
    eval-mpjpe     joint CSV vs joint CSV -> error report (stdout JSON)
    synth          generate a synthetic corpus
    bench          representation-construction throughput (stdout JSON)

Exit codes: 0 success, 2 usage, 3 bad data, 4 I/O failure. Every successful
run emits a JSON run manifest (command, version, config hash, input/output
digests, seed, wall time): a ``<output>.manifest.json`` sidecar for commands
that write files, or a ``manifest`` block inside the stdout report. Output
files land atomically (temp file + rename). ``--seed`` falls back to the
``EVREP_SEED`` environment variable, then 0.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import statistics
import sys
import time

import numpy as np

from . import __version__
from .dea import FUSIONS, POOLINGS, fuse, read_ten1, write_ten1
from .devox import MODES, project_dev, read_dev1, write_dev1
from .errors import DataError
from .event_core import EventWindow, SensorGeometry, canonicalize
from .ingest import (
    labeled_windows,
    read_csv,
    read_evt1,
    read_joints,
    read_label_track,
    write_csv,
    write_evt1,
)
from .pose_codec import heatmap_encode, mpjpe, simdr_encode
from .rasepc import rasterize, sample_fixed, write_rpc1
from .synth import SynthConfig, gen_corpus


def _resolve_seed(value) -> int:
    if value is not None:
        return int(value)
    env = os.environ.get("EVREP_SEED")
    return int(env) if env else 0


def _digest_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _run_manifest(command, config, inputs, outputs, seed, wall_s) -> dict:
    cfg_json = json.dumps(config, sort_keys=True)
    return {
        "command": command,
        "version": __version__,
        "config": config,
        "config_hash": hashlib.sha256(cfg_json.encode()).hexdigest(),
        "inputs": {os.path.basename(p): _digest_file(p) for p in inputs},
        "outputs": {os.path.basename(p): _digest_file(p) for p in outputs},
        "seed": seed,
        "wall_time_s": wall_s,
    }


def _emit_sidecar(manifest, primary_output) -> None:
    path = str(primary_output) + ".manifest.json"
    _atomic_text(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _atomic(write_fn, path, *args, **kwargs) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    try:
        write_fn(tmp, *args, **kwargs)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_text(path, text: str) -> None:
    def _write(p, t):
        with open(p, "w", encoding="utf-8") as fh:
            fh.write(t)

    _atomic(_write, path, text)


# ── subcommands ──────────────────────────────────────────────────────────────

def _cmd_convert(args, parser) -> int:
    t0 = time.perf_counter()
    target = args.to
    if target is None:
        ext = os.path.splitext(args.output)[1].lower()
        target = {".evt1": "evt1", ".csv": "csv"}.get(ext)
        if target is None:
            parser.error("cannot infer --to from output extension; pass --to evt1|csv")
    if target == "evt1":
        if args.width is None or args.height is None:
            parser.error("csv -> evt1 conversion needs --width and --height")
        recs = read_csv(args.input, polarity_format=args.polarity)
        geometry = SensorGeometry(args.width, args.height)
        window = canonicalize(recs, geometry)
        _atomic(write_evt1, args.output, geometry, window)
        config = {"to": "evt1", "width": args.width, "height": args.height, "polarity": args.polarity}
    else:
        _, recs = read_evt1(args.input)
        _atomic(write_csv, args.output, recs, polarity_format=args.polarity)
        config = {"to": "csv", "polarity": args.polarity}
    manifest = _run_manifest(
        "convert", config, [args.input], [args.output], 0, time.perf_counter() - t0
    )
    _emit_sidecar(manifest, args.output)
    return 0


def _cmd_window(args, parser) -> int:
    t0 = time.perf_counter()
    geometry, recs = read_evt1(args.events)
    track = read_label_track(args.labels)
    wins = labeled_windows(
        recs, geometry, track, n=args.count, min_points=args.min_points, label_mode=args.label_mode
    )
    os.makedirs(args.out, exist_ok=True)
    entries = []
    outputs = []
    for i, lw in enumerate(wins):
        name = f"window_{i:04d}.evt1"
        path = os.path.join(args.out, name)
        _atomic(write_evt1, path, geometry, lw.window)
        outputs.append(path)
        entries.append(
            {
                "file": name,
                "n_events": len(lw.window),
                "t_first": int(lw.window.ts[0]),
                "t_last": int(lw.window.ts[-1]),
                "label": lw.label.coords.tolist(),
            }
        )
    index = {
        "geometry": {"width": geometry.width, "height": geometry.height},
        "count": args.count,
        "min_points": args.min_points,
        "label_mode": args.label_mode,
        "windows": entries,
    }
    index_path = os.path.join(args.out, "windows.json")
    _atomic_text(index_path, json.dumps(index, indent=2, sort_keys=True) + "\n")
    outputs.append(index_path)
    config = {"count": args.count, "min_points": args.min_points, "label_mode": args.label_mode}
    manifest = _run_manifest(
        "window", config, [args.events, args.labels], outputs, 0, time.perf_counter() - t0
    )
    _emit_sidecar(manifest, index_path)
    print(f"wrote {len(wins)} windows to {args.out}")
    return 0


def _cmd_rasterize(args, parser) -> int:
    t0 = time.perf_counter()
    seed = _resolve_seed(args.seed)
    geometry, recs = read_evt1(args.input)
    window = canonicalize(recs, geometry)
    cloud = rasterize(window, k=args.k)
    if args.sample_n:
        cloud = sample_fixed(cloud, n=args.sample_n, seed=seed)
    _atomic(write_rpc1, args.output, cloud)
    config = {"k": args.k, "sample_n": args.sample_n}
    manifest = _run_manifest(
        "rasterize", config, [args.input], [args.output], seed, time.perf_counter() - t0
    )
    _emit_sidecar(manifest, args.output)
    return 0


def _cmd_voxelize(args, parser) -> int:
    t0 = time.perf_counter()
    if len(args.dims) not in (1, 3):
        parser.error("--dims takes one value (cubic grid) or three (H W T)")
    dims = args.dims[0] if len(args.dims) == 1 else tuple(args.dims)
    geometry, recs = read_evt1(args.input)
    window = canonicalize(recs, geometry)
    planes = project_dev(window, dims=dims, mode=args.mode)
    _atomic(write_dev1, args.output, planes)
    config = {"dims": list(args.dims), "mode": args.mode}
    manifest = _run_manifest(
        "voxelize", config, [args.input], [args.output], 0, time.perf_counter() - t0
    )
    _emit_sidecar(manifest, args.output)
    return 0


def _cmd_dea(args, parser) -> int:
    t0 = time.perf_counter()
    f_hw = read_ten1(args.plane_hw)
    f_th = read_ten1(args.plane_th)
    f_wt = read_ten1(args.plane_wt)
    fused = fuse(f_hw, f_th, f_wt, method=args.fusion, pooling=args.pooling)
    _atomic(write_ten1, args.output, fused)
    config = {"pooling": args.pooling, "fusion": args.fusion}
    manifest = _run_manifest(
        "dea", config, [args.plane_hw, args.plane_th, args.plane_wt], [args.output],
        0, time.perf_counter() - t0,
    )
    _emit_sidecar(manifest, args.output)
    return 0


def _cmd_encode_labels(args, parser) -> int:
    t0 = time.perf_counter()
    joints = read_joints(args.input)
    if args.codec == "simdr":
        if args.width is None or args.height is None:
            parser.error("simdr encoding needs --width and --height axis lengths")
        sigma = args.sigma if args.sigma is not None else 8.0
        rows = []
        for j in range(joints.num_joints):
            px = simdr_encode(float(joints.coords[j, 0]), args.width, sigma)
            py = simdr_encode(float(joints.coords[j, 1]), args.height, sigma)
            rows.append(np.concatenate([px, py]))
        tensor = np.stack(rows)
        config = {"codec": "simdr", "sigma": sigma, "width": args.width, "height": args.height}
    else:
        sigma = args.sigma if args.sigma is not None else 2.0
        gh, gw = args.grid
        tensor = np.stack(
            [
                heatmap_encode((joints.coords[j, 0], joints.coords[j, 1]), (gh, gw), sigma).grid
                for j in range(joints.num_joints)
            ]
        )
        config = {"codec": "heatmap", "sigma": sigma, "grid": [gh, gw]}
    _atomic(write_ten1, args.output, tensor)
    manifest = _run_manifest(
        "encode-labels", config, [args.input], [args.output], 0, time.perf_counter() - t0
    )
    _emit_sidecar(manifest, args.output)
    return 0


def _cmd_eval_mpjpe(args, parser) -> int:
    t0 = time.perf_counter()
    pred = read_joints(args.pred)
    gt = read_joints(args.gt)
    mean = mpjpe(pred, gt)
    per_joint = np.linalg.norm(pred.coords - gt.coords, axis=1)
    report = {
        "mpjpe": mean,
        "per_joint": per_joint.tolist(),
        "n_joints": pred.num_joints,
        "manifest": _run_manifest(
            "eval-mpjpe", {}, [args.pred, args.gt], [], 0, time.perf_counter() - t0
        ),
    }
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def _cmd_synth(args, parser) -> int:
    t0 = time.perf_counter()
    seed = _resolve_seed(args.seed)
    config = SynthConfig(
        geometry=SensorGeometry(args.width, args.height),
        frame_period_us=args.frame_period,
        theta=args.theta,
        fg_intensity=args.fg,
        bg_intensity=args.bg,
        noise_rate_hz=args.noise_rate,
    )
    corpus = gen_corpus(
        args.out,
        n_sequences=args.n,
        seed=seed,
        config=config,
        duration_us=args.duration,
        n_joints=args.joints,
        n_keyframes=args.keyframes,
    )
    outputs = [os.path.join(args.out, "corpus.json")]
    for seq in corpus["sequences"]:
        outputs.append(os.path.join(args.out, seq["events"]))
        outputs.append(os.path.join(args.out, seq["labels"]))
    manifest = _run_manifest(
        "synth", corpus["config"] | {"n": args.n}, [], outputs, seed, time.perf_counter() - t0
    )
    _emit_sidecar(manifest, os.path.join(args.out, "corpus"))
    print(f"wrote {args.n} sequences to {args.out}")
    return 0


def _percentiles(samples_s) -> dict:
    ms = sorted(s * 1e3 for s in samples_s)
    return {
        "p50_ms": float(np.percentile(ms, 50)),
        "p99_ms": float(np.percentile(ms, 99)),
    }


def _cmd_bench(args, parser) -> int:
    t0 = time.perf_counter()
    seed = _resolve_seed(args.seed)
    rng = np.random.default_rng(seed)
    g = SensorGeometry(346, 260)
    n = args.events
    ts = np.sort(rng.integers(0, 1_000_000, n).astype(np.uint64))
    window = EventWindow.from_arrays(
        g,
        rng.integers(0, g.width, n),
        rng.integers(0, g.height, n),
        ts,
        rng.choice(np.array([-1, 1], dtype=np.int8), n),
    )
    cloud = rasterize(window, k=args.k)
    planes = project_dev(window, dims=args.dims, mode="two_channel")

    stages = {
        "rasterize": lambda: rasterize(window, k=args.k),
        "sample_fixed": lambda: sample_fixed(cloud, n=2048, seed=seed),
        "project_dev": lambda: project_dev(window, dims=args.dims, mode="two_channel"),
        "dea_fuse": lambda: fuse(planes.plane_hw, planes.plane_th, planes.plane_wt),
    }
    report = {"events": n, "repeats": args.repeats, "stages": {}}
    for name, fn in stages.items():
        fn()  # warm-up
        times = []
        for _ in range(args.repeats):
            start = time.perf_counter()
            fn()
            times.append(time.perf_counter() - start)
        entry = _percentiles(times)
        entry["events_per_sec"] = n / statistics.median(times)
        report["stages"][name] = entry
    report["manifest"] = _run_manifest(
        "bench",
        {"events": n, "k": args.k, "dims": args.dims, "repeats": args.repeats},
        [], [], seed, time.perf_counter() - t0,
    )
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


# ── parser ───────────────────────────────────────────────────────────────────

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evrep", description="Event-camera 3D representation toolkit"
    )
    parser.add_argument("--version", action="version", version=f"evrep {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="convert events between CSV and EVT1")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--to", choices=("evt1", "csv"), default=None)
    p.add_argument("--width", type=int, default=None)
    p.add_argument("--height", type=int, default=None)
    p.add_argument("--polarity", choices=("zero_one", "signed"), default="zero_one")
    p.set_defaults(func=_cmd_convert)

    p = sub.add_parser("window", help="cut a recording into labeled count windows")
    p.add_argument("events")
    p.add_argument("labels")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=30_000)
    p.add_argument("--min-points", type=int, default=1024)
    p.add_argument("--label-mode", choices=("mean", "last"), default="mean")
    p.set_defaults(func=_cmd_window)

    p = sub.add_parser("rasterize", help="condense an EVT1 window into an RPC1 cloud")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--sample-n", type=int, default=2048,
                   help="fixed point count after sampling; 0 keeps the raw cloud")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_rasterize)

    p = sub.add_parser("voxelize", help="project an EVT1 window onto tri-planes (DEV1)")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--dims", type=int, nargs="+", default=[64])
    p.add_argument("--mode", choices=MODES, default="two_channel")
    p.set_defaults(func=_cmd_voxelize)

    p = sub.add_parser("dea", help="fuse three TEN1 planes into one tensor")
    p.add_argument("plane_hw")
    p.add_argument("plane_th")
    p.add_argument("plane_wt")
    p.add_argument("output")
    p.add_argument("--pooling", choices=POOLINGS, default="avg")
    p.add_argument("--fusion", choices=FUSIONS, default="dea")
    p.set_defaults(func=_cmd_dea)

    p = sub.add_parser("encode-labels", help="encode a joint CSV as codec targets (TEN1)")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--codec", choices=("simdr", "heatmap"), required=True)
    p.add_argument("--sigma", type=float, default=None,
                   help="Gaussian width; defaults to 8 for simdr, 2 for heatmap")
    p.add_argument("--width", type=int, default=None, help="simdr x-axis length")
    p.add_argument("--height", type=int, default=None, help="simdr y-axis length")
    p.add_argument("--grid", type=int, nargs=2, default=[64, 64], metavar=("H", "W"))
    p.set_defaults(func=_cmd_encode_labels)

    p = sub.add_parser("eval-mpjpe", help="mean per-joint error between two joint CSVs")
    p.add_argument("pred")
    p.add_argument("gt")
    p.set_defaults(func=_cmd_eval_mpjpe)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--width", type=int, default=346)
    p.add_argument("--height", type=int, default=260)
    p.add_argument("--frame-period", type=int, default=10_000)
    p.add_argument("--theta", type=float, default=0.4)
    p.add_argument("--fg", type=float, default=200.0)
    p.add_argument("--bg", type=float, default=20.0)
    p.add_argument("--noise-rate", type=float, default=0.0)
    p.add_argument("--duration", type=int, default=200_000)
    p.add_argument("--joints", type=int, default=5)
    p.add_argument("--keyframes", type=int, default=5)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("bench", help="representation-construction throughput")
    p.add_argument("--events", type=int, default=1_000_000)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--dims", type=int, default=64)
    p.add_argument("--repeats", type=int, default=20)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except DataError as exc:
        print(f"error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"io-error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
