"""Command-line entry point: curves, golden traces, sweeps, array runs,
DMA reports and fixture inference.

Every report embeds a manifest (subcommand, canonical parameters, seed, tool
version, rng) as its reproducibility header: CSV files carry it as a leading
``# manifest`` comment line, JSON files as a ``manifest`` key.  ``replay``
re-executes a manifest and writes a byte-identical report.

Exit codes: 0 success, 2 usage error, 3 constraint violation, 4 golden-trace
gate failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from .cordic import ConvergenceError, StagePlan, default_stage_plan, golden_trace_rows
from .fixedpoint import FormatError, activation_format, mac_format, quantize_raw
from .mc import RNG_ALGORITHM, pareto_sweep, reports_to_csv
from .nn import ModelError, fixture_path, load_dataset, load_model, run_inference
from .pe import ConfigurationError, PeConfig, af_curve
from .simd import LaneError
from .systolic import (
    ArrayConfig,
    ScheduleError,
    ShapeError,
    TileSchedule,
    load_workload,
    run_gemm,
    throughput_report,
    workload_dma_report,
)

CONSTRAINT_ERRORS = (
    ConfigurationError,
    ConvergenceError,
    FormatError,
    LaneError,
    ModelError,
    ScheduleError,
    ShapeError,
    ValueError,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONSTRAINT = 3
EXIT_GATE = 4


def _manifest(subcommand: str, params: dict, seed=None, outputs=()):
    return {
        "subcommand": subcommand,
        "params": params,
        "seed": seed,
        "version": __version__,
        "rng": RNG_ALGORITHM,
        "outputs": list(outputs),
    }


def _manifest_line(manifest: dict) -> str:
    return "# manifest " + json.dumps(manifest, sort_keys=True, separators=(",", ":"))


def _write_csv(path, manifest, header, rows):
    with open(path, "w") as fh:
        fh.write(_manifest_line(manifest) + "\n")
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(str(v) for v in row) + "\n")


def _write_json(path, manifest, payload):
    doc = {"manifest": manifest}
    doc.update(payload)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _out_path(args, default_name):
    if getattr(args, "out", None):
        return args.out
    out_dir = getattr(args, "out_dir", None) or os.environ.get("CORDICPE_OUT", ".")
    return os.path.join(out_dir, default_name)


# ---------------------------------------------------------------------------
# Subcommand implementations (params dict -> report at out path)
# ---------------------------------------------------------------------------

def run_af(params, out):
    cfg = PeConfig(f"fxp{params['precision']}", sel_af=params["fn"])  # validates combos
    plan = (
        StagePlan(params["stages"][0], params["stages"][1], params["precision"])
        if params.get("stages")
        else default_stage_plan(params["precision"])
    )
    bits = params["precision"]
    if params["fn"] == "relu":
        af = activation_format(bits)
        xs = np.linspace(params["lo"], params["hi"], params["points"])
        raws = np.maximum(quantize_raw(xs, af), 0)
        rows = [(float(x), float(r) * af.lsb, int(r)) for x, r in zip(xs, raws)]
    elif params["fn"] == "softmax":
        from .pe import softmax_batch_raw

        af = activation_format(bits)
        xs = np.linspace(params["lo"], params["hi"], params["points"])
        raws = softmax_batch_raw(quantize_raw(xs, af)[:, None], bits, plan)[:, 0]
        rows = [(float(x), float(r) * af.lsb, int(r)) for x, r in zip(xs, raws)]
    else:
        rows = af_curve(params["fn"], bits, plan, params["lo"], params["hi"], params["points"])
    manifest = _manifest("af", params, outputs=[DEFAULT_NAMES["af"](params)])
    _write_csv(out, manifest, "input,output,output_raw", [(repr(a), repr(b), c) for a, b, c in rows])
    return manifest, EXIT_OK


def run_trace(params, out):
    fmt = activation_format(params["precision"])
    kind = {"hyp": "hyperbolic", "div": "division"}[params["table"]]
    rows = golden_trace_rows(kind, fmt)
    ok = all(r["max_delta"] <= 2 and r["d_match"] for r in rows)
    print(f"golden {kind} trace at {fmt} (raw-lattice deltas, gate: <= 2 LSB per row)")
    for r in rows:
        print(
            f"  stage {r['stage']}: x={r['x']:+.6f} y={r['y']:+.6f} z={r['z']:+.6f} d={r['d']:+d}"
            f"  ref=({r['ref_x']}, {r['ref_y']}, {r['ref_z']}, {r['ref_d']})"
            f"  deltas=({r['delta_x']},{r['delta_y']},{r['delta_z']})"
        )
    print("gate:", "PASS" if ok else "FAIL")
    if out:
        manifest = _manifest("trace", params, outputs=[DEFAULT_NAMES["trace"](params)])
        _write_csv(
            out,
            manifest,
            "stage,x,y,z,d,ref_x,ref_y,ref_z,ref_d,delta_x,delta_y,delta_z",
            [
                (
                    r["stage"], repr(r["x"]), repr(r["y"]), repr(r["z"]), r["d"],
                    repr(r["ref_x"]), repr(r["ref_y"]), repr(r["ref_z"]), r["ref_d"],
                    r["delta_x"], r["delta_y"], r["delta_z"],
                )
                for r in rows
            ],
        )
    return None, (EXIT_OK if ok else EXIT_GATE)


def run_sweep(params, out):
    reports = pareto_sweep(
        params["fn"],
        params["precision"],
        range(params["stages"][0], params["stages"][1] + 1),
        axis=params["axis"],
        seed=params["seed"],
    )
    manifest = _manifest("sweep", params, seed=params["seed"], outputs=[DEFAULT_NAMES["sweep"](params)])
    body = reports_to_csv(reports)
    with open(out, "w") as fh:
        fh.write(_manifest_line(manifest) + "\n")
        fh.write(body)
    return manifest, EXIT_OK


def run_gemm_cmd(params, out):
    fmt = mac_format(params["precision"])
    rng = np.random.Generator(np.random.PCG64(params["seed"]))
    a = quantize_raw(rng.uniform(-1, 1, (params["m"], params["k"])), fmt)
    b = quantize_raw(rng.uniform(-1, 1, (params["k"], params["n"])), fmt)
    cfg = ArrayConfig(
        rows=params["rows"], cols=params["cols"],
        pe_config=PeConfig(f"fxp{params['precision']}", ctrl_op="mac"),
    )
    sched = None
    if params.get("tile"):
        tm, tn, tk = params["tile"]
        bi, bw, bp = params.get("buffers") or (tm * tk, tk * tn, params["m"] * tn)
        sched = TileSchedule(tm, tn, tk, bi, bw, bp)
    c, counters, cycles = run_gemm(a, b, fmt, cfg, sched)
    tp = throughput_report(cfg, params["clock_hz"])
    manifest = _manifest("gemm", params, seed=params["seed"], outputs=[DEFAULT_NAMES["gemm"](params)])
    _write_json(out, manifest, {
        "result_sha256": hashlib.sha256(c.tobytes()).hexdigest(),
        "cycles": cycles,
        "counters": {
            "ifmap_reads": counters.ifmap_reads,
            "weight_reads": counters.weight_reads,
            "psum_writes": counters.psum_writes,
            "psum_reads": counters.psum_reads,
        },
        "ops_per_cycle": tp.ops_per_cycle,
        "gops_at_clock": tp.gops,
    })
    return manifest, EXIT_OK


def run_dma(params, out):
    path = fixture_path("vgg16_workload.txt") if params["workload"] == "vgg16" else params["workload"]
    wl = load_workload(path)
    if params.get("buffers"):
        wl.ifmap_buffer, wl.weight_buffer, wl.psum_buffer = params["buffers"]
    if params.get("dataflow"):
        wl.dataflow = params["dataflow"]
    rows, aggregate = workload_dma_report(wl)
    manifest = _manifest("dma", params, outputs=[DEFAULT_NAMES["dma"](params)])
    _write_json(out, manifest, {"layers": rows, "aggregate": aggregate})
    return manifest, EXIT_OK


def run_infer(params, out):
    model_path = {
        "fixture:mlp": fixture_path("mlp_digits.fxm"),
        "fixture:conv": fixture_path("conv_digits.fxm"),
    }.get(params["model"], params["model"])
    data_path = fixture_path("digits_test.fxd") if params["dataset"] == "fixture" else params["dataset"]
    model = load_model(model_path)
    dataset = load_dataset(data_path)
    report = run_inference(model, dataset, params["precision"])
    manifest = _manifest("infer", params, outputs=[DEFAULT_NAMES["infer"](params)])
    _write_json(out, manifest, {
        "precision": report.precision,
        "top1_fixed": report.top1_fixed,
        "top1_reference": report.top1_reference,
        "delta_points": report.delta_points,
        "samples": report.samples,
        "calibration": report.calibration,
    })
    return manifest, EXIT_OK


def run_tables(params, out):
    from .cordic import export_angle_tables

    export_angle_tables(out, tuple(params["precisions"]))
    # re-write with the manifest header ahead of the table
    body = open(out).read()
    manifest = _manifest("tables", params, outputs=[DEFAULT_NAMES["tables"](params)])
    with open(out, "w") as fh:
        fh.write(_manifest_line(manifest) + "\n")
        fh.write(body)
    return manifest, EXIT_OK


RUNNERS = {
    "af": run_af,
    "trace": run_trace,
    "sweep": run_sweep,
    "gemm": run_gemm_cmd,
    "dma": run_dma,
    "infer": run_infer,
    "tables": run_tables,
}

DEFAULT_NAMES = {
    "af": lambda p: f"af_{p['fn']}_fxp{p['precision']}.csv",
    "trace": lambda p: f"trace_{p['table']}.csv",
    "sweep": lambda p: f"sweep_{p['fn']}_fxp{p['precision']}_{p['axis']}.csv",
    "gemm": lambda p: f"gemm_{p['m']}x{p['k']}x{p['n']}_fxp{p['precision']}.json",
    "dma": lambda p: "dma_report.json",
    "infer": lambda p: f"infer_fxp{p['precision']}.json",
    "tables": lambda p: "angle_tables.csv",
}


def run_replay(args):
    with open(args.report) as fh:
        first = fh.readline()
        if first.startswith("# manifest "):
            manifest = json.loads(first[len("# manifest "):])
        else:
            fh.seek(0)
            manifest = json.load(fh)["manifest"]
    sub = manifest["subcommand"]
    params = manifest["params"]
    out = args.out or os.path.join(
        args.out_dir or os.environ.get("CORDICPE_OUT", "."), DEFAULT_NAMES[sub](params)
    )
    _, code = RUNNERS[sub](params, out)
    print(f"replayed {sub} -> {out}")
    return code


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _pair(text):
    a, b = text.split(":" if ":" in text else ",")
    return (int(a), int(b))


def _triple(text):
    return tuple(int(v) for v in text.split(","))


def build_parser():
    parser = argparse.ArgumentParser(prog="cordicpe", description=__doc__)
    parser.add_argument("--out-dir", default=None, help="output directory (or $CORDICPE_OUT)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("af", help="dump an activation curve as CSV")
    p.add_argument("--fn", required=True, choices=["sigmoid", "tanh", "exp", "relu", "softmax"])
    p.add_argument("--precision", required=True, type=int, choices=[4, 8, 16, 32])
    p.add_argument("--stages", type=_pair, default=None, metavar="H,L")
    p.add_argument("--from", dest="lo", type=float, default=-1.1182)
    p.add_argument("--to", dest="hi", type=float, default=1.1182)
    p.add_argument("--points", type=int, default=256)
    p.add_argument("--out")

    p = sub.add_parser("trace", help="check the golden iteration traces")
    p.add_argument("--table", required=True, choices=["hyp", "div"])
    p.add_argument("--precision", type=int, default=16, choices=[16, 32])
    p.add_argument("--out")

    p = sub.add_parser("sweep", help="Monte-Carlo stage sweep to CSV")
    p.add_argument("--fn", required=True, choices=["sigmoid", "tanh", "exp", "divide", "mac", "softmax"])
    p.add_argument("--precision", required=True, type=int, choices=[4, 8, 16, 32])
    p.add_argument("--stages", type=_pair, default=None, metavar="LO:HI")
    p.add_argument("--axis", choices=["hyperbolic", "linear"], default="hyperbolic")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")

    p = sub.add_parser("gemm", help="run a random GEMM through the array")
    p.add_argument("--m", type=int, default=16)
    p.add_argument("--k", type=int, default=16)
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--precision", type=int, default=16, choices=[4, 8, 16, 32])
    p.add_argument("--rows", type=int, default=8)
    p.add_argument("--cols", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tile", type=_triple, default=None, metavar="M,N,K")
    p.add_argument("--buffers", type=_triple, default=None, metavar="I,W,P")
    p.add_argument("--clock-hz", dest="clock_hz", type=float, default=100e6)
    p.add_argument("--out")

    p = sub.add_parser("dma", help="DMA reuse report for a conv workload file")
    p.add_argument("--workload", required=True, help="path or 'vgg16'")
    p.add_argument("--buffers", type=_triple, default=None, metavar="I,W,P")
    p.add_argument("--dataflow", choices=["weight_stationary", "output_stationary"], default=None)
    p.add_argument("--out")

    p = sub.add_parser("infer", help="fixed vs reference inference accuracy")
    p.add_argument("--model", required=True, help="path, fixture:mlp or fixture:conv")
    p.add_argument("--dataset", default="fixture")
    p.add_argument("--precision", required=True, type=int, choices=[4, 8, 16, 32])
    p.add_argument("--out")

    p = sub.add_parser("tables", help="export the CORDIC angle tables")
    p.add_argument("--precisions", type=_triple, default=(4, 8, 16, 32))
    p.add_argument("--out")

    p = sub.add_parser("replay", help="re-run a report's embedded manifest")
    p.add_argument("report")
    p.add_argument("--out")
    return parser


def _params_from_args(args):
    if args.command == "af":
        return {
            "fn": args.fn, "precision": args.precision,
            "stages": list(args.stages) if args.stages else None,
            "lo": args.lo, "hi": args.hi, "points": args.points,
        }
    if args.command == "trace":
        return {"table": args.table, "precision": args.precision}
    if args.command == "sweep":
        stages = args.stages or (1, args.precision)
        return {
            "fn": args.fn, "precision": args.precision,
            "stages": list(stages), "axis": args.axis, "seed": args.seed,
        }
    if args.command == "gemm":
        return {
            "m": args.m, "k": args.k, "n": args.n, "precision": args.precision,
            "rows": args.rows, "cols": args.cols, "seed": args.seed,
            "tile": list(args.tile) if args.tile else None,
            "buffers": list(args.buffers) if args.buffers else None,
            "clock_hz": args.clock_hz,
        }
    if args.command == "dma":
        return {
            "workload": args.workload,
            "buffers": list(args.buffers) if args.buffers else None,
            "dataflow": args.dataflow,
        }
    if args.command == "infer":
        return {"model": args.model, "dataset": args.dataset, "precision": args.precision}
    if args.command == "tables":
        return {"precisions": list(args.precisions)}
    raise AssertionError(args.command)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "replay":
            return run_replay(args)
        params = _params_from_args(args)
        if args.command == "trace" and not args.out:
            out = None
        else:
            out = _out_path(args, DEFAULT_NAMES[args.command](params))
        _, code = RUNNERS[args.command](params, out)
        if out and args.command != "trace":
            print(f"wrote {out}")
        return code
    except CONSTRAINT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONSTRAINT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONSTRAINT


if __name__ == "__main__":
    sys.exit(main())
