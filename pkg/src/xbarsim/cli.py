"""Command-line entry point: ``xbarsim <command> [options]``.

Exit codes: 0 success, 2 invalid configuration or input, 3 I/O failure.
"""

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import harness, nn
from .config import ConfigError, load_config, parse_config
from .encode import encode, save_planes
from .quant import load_activations, load_matrix, quantize, save_matrix

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3

log = logging.getLogger("xbarsim")

TRACE_FIELDS = ["scheme", "trial", "bit", "plane", "tile", "group", "sample", "column", "kind",
                "current", "code"]


def _u64(text):
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _config(args, default=None):
    if args.config:
        return load_config(args.config, seed=args.seed, output=args.out)
    return parse_config(default or {}, seed=args.seed, output=args.out)


def _out_path(args, cfg, fallback):
    return args.out or (cfg.output if cfg is not None else None) or fallback


def _check_writable(path):
    directory = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(directory) or not os.access(directory, os.W_OK):
        raise OSError(f"cannot write to {directory}")


def _read_real_matrix(path):
    if path.endswith(".npy"):
        return np.load(path)
    if path.endswith(".json"):
        with open(path) as fh:
            doc = json.load(fh)
        return np.asarray(doc["data"], dtype=np.float64).reshape(int(doc["rows"]), int(doc["cols"]))
    return np.loadtxt(path, delimiter=",", ndmin=2)


def cmd_quantize(args):
    q = quantize(_read_real_matrix(args.input), bit_width=args.bits)
    save_matrix(q, args.out)
    print(f"quantized {q.rows}x{q.cols} to {q.bit_width} bits, scale {q.scale:.9g} -> {args.out}")


def cmd_encode(args):
    q = load_matrix(args.input)
    e = encode(q, args.encoding, args.bits_per_cell)
    save_planes(e, args.out)
    print(f"{args.encoding}: {len(e)} planes, weights {list(e.plane_weights)}, "
          f"bias {e.bias}, clipped {e.clip_count} -> {args.out}")


def _write_trace(trace, path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=TRACE_FIELDS, lineterminator="\n")
        w.writeheader()
        for rec in trace:
            w.writerow({k: (format(v, ".9g") if isinstance(v, float) else v) for k, v in rec.items()})


def cmd_simulate(args):
    cfg = _config(args)
    if len(cfg.points) != 1:
        raise ConfigError("config", f"simulate runs one axis point, got {len(cfg.points)}")
    workload = None
    if args.weights or args.activations:
        if not (args.weights and args.activations):
            raise ConfigError("--weights", "--weights and --activations go together")
        q = load_matrix(args.weights)
        acts = load_activations(args.activations).values
        workload = harness.RandomWorkload(q, np.atleast_2d(acts))
    else:
        workload = harness.build_workload(cfg)
    rows, trace = [], [] if args.trace else None
    for stack in cfg.stacks:
        for t in range(cfg.trials):
            sink = None if trace is None else []
            rows.append(harness.run_point(cfg, workload, cfg.points[0], stack, t, 0, trace=sink))
            if sink is not None:
                trace.extend(dict(rec, scheme=stack.name, trial=t) for rec in sink)
    out = _out_path(args, cfg, "simulate.csv")
    harness.emit_csv(rows, out)
    if trace is not None:
        path = args.trace if isinstance(args.trace, str) else os.path.splitext(out)[0] + ".trace.csv"
        _write_trace(trace, path)
        print(f"trace: {len(trace)} records -> {path}")
    print(harness.report(rows)[0])


def cmd_sweep(args):
    if not args.config:
        raise ConfigError("--config", "sweep needs a config file")
    cfg = _config(args)
    out = _out_path(args, cfg, "results.csv")
    _check_writable(out)
    rows = harness.run_sweep(cfg, workers=args.workers)
    harness.emit_csv(rows, out)
    print(f"{len(rows)} rows -> {out}")


def cmd_nn_eval(args):
    cfg = _config(args, default={"workload": {"kind": "mlp"}})
    if cfg.workload["kind"] != "mlp":
        raise ConfigError("workload.kind", "nn-eval needs an mlp workload")
    out = _out_path(args, cfg, "nn_eval.csv")
    _check_writable(out)
    workload = harness.build_workload(cfg)
    if args.model:
        model = nn.load_model(args.model)
        if model.input_dim != workload.test.feature_dim:
            raise ConfigError("--model", "model input size does not match the workload")
        workload = harness.MlpWorkload(model, workload.test)
    if args.save_model:
        nn.save_model(workload.model, args.save_model)
    for stack in cfg.stacks:
        ref = nn.software_logits(workload.model, workload.test.features, stack.encoding)
        print(f"{stack.name}: software accuracy {nn.accuracy(ref, workload.test.labels):.4f}")
    rows = harness.run_sweep(cfg, workers=args.workers, workload=workload)
    harness.emit_csv(rows, out)
    print(harness.report(rows, metrics=("accuracy", "rmse"))[0])


def cmd_report(args):
    rows = harness.load_csv(args.input)
    metrics = tuple(args.metrics.split(",")) if args.metrics else harness.DEFAULT_METRICS
    bad = [m for m in metrics if m not in harness.FIELDNAMES]
    if bad:
        raise ConfigError("--metrics", f"unknown metric(s) {bad}")
    text, charts = harness.report(rows, chart_dir=args.charts, metrics=metrics)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    for path in charts:
        print(f"chart: {path}")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config")
    common.add_argument("--seed", type=_u64, help="override master_seed")
    common.add_argument("--out", help="output path")
    common.add_argument("--workers", type=int, default=1, help="worker processes")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="xbarsim", description="MLC ReRAM crossbar MAC simulator")
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("quantize", parents=[common], help="quantize a real matrix (csv, npy or json)")
    q.add_argument("input")
    q.add_argument("--bits", type=int, default=8, choices=(4, 8))
    q.set_defaults(func=cmd_quantize, out_required=True)

    e = sub.add_parser("encode", parents=[common], help="slice a quantized matrix into digit planes")
    e.add_argument("input")
    e.add_argument("--encoding", default="vecom", choices=("conventional", "vecom"))
    e.add_argument("--bits-per-cell", type=int, default=2)
    e.set_defaults(func=cmd_encode, out_required=True)

    s = sub.add_parser("simulate", parents=[common], help="simulate a single axis point")
    s.add_argument("--weights", help="quantized matrix JSON (replaces the config workload)")
    s.add_argument("--activations", help="activation JSON, one sample per row")
    s.add_argument("--trace", nargs="?", const=True, default=None,
                   help="dump per-group currents and codes as CSV (optional path)")
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("sweep", parents=[common], help="run a config sweep to CSV")
    w.set_defaults(func=cmd_sweep)

    n = sub.add_parser("nn-eval", parents=[common], help="tiny-MLP accuracy through the crossbar")
    n.add_argument("--model", help="load a saved model instead of training")
    n.add_argument("--save-model", help="write the reference model JSON")
    n.set_defaults(func=cmd_nn_eval)

    r = sub.add_parser("report", parents=[common], help="summarize a results CSV")
    r.add_argument("input")
    r.add_argument("--charts", help="directory for SVG line charts")
    r.add_argument("--metrics", help="comma-separated metric columns")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "out_required", False) and not args.out:
        parser.error(f"{args.command} requires --out")
    if args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
