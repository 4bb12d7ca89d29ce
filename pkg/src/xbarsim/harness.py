"""Monte-Carlo sweep driver, CSV emission and summary reports."""

import csv
import logging
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, fields
from itertools import groupby

import multiprocessing
import numpy as np

from . import nn
from .device import DeviceParams
from .encode import area_cells, effective_weights, encode
from .metrics import PerfModel, cycles, energy, mac_error_stats, mean_std
from .quant import QuantizedMatrix
from .xbar import Compensation, MacConfig, MacStats, exact_matvec, matvec, program_matrix

log = logging.getLogger(__name__)

_WORKLOAD_KEY = 0
_TRIAL_KEY = 1


@dataclass(frozen=True)
class ResultRow:
    scheme: str
    encoding: str
    programming: str
    compensation: str
    sigma: float
    naw: int
    r_ratio: float
    bits_per_cell: int
    trial: int
    master_seed: int
    rmse: float
    max_abs: float
    code_error_rate: float
    accuracy: float
    cycles: int
    e_xbar: float
    e_adc: float
    e_total: float
    saturation_count: int
    clip_count: int
    area_overhead: float


FIELDNAMES = [f.name for f in fields(ResultRow)]
_INT_FIELDS = {f.name for f in fields(ResultRow) if f.type in ("int", int)}
_STR_FIELDS = {f.name for f in fields(ResultRow) if f.type in ("str", str)}


def stream_rng(master_seed, *key):
    """Generator for one stream of a splittable 64-bit seed hierarchy."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=key))


@dataclass(frozen=True, eq=False)
class RandomWorkload:
    weights: QuantizedMatrix
    activations: np.ndarray


@dataclass(frozen=True, eq=False)
class MlpWorkload:
    model: object
    test: object


def build_workload(cfg):
    """Materialize the workload once per sweep; it is shared by every trial."""
    w = cfg.workload
    if w["kind"] == "random":
        rng = stream_rng(cfg.master_seed, _WORKLOAD_KEY)
        lo, hi = -(2 ** (w["bit_width"] - 1)), 2 ** (w["bit_width"] - 1) - 1
        scale = w["weight_std"] * (1.0 if w["bit_width"] == 8 else 1 / 16)
        raw = np.round(rng.normal(0.0, scale, size=(w["rows"], w["cols"])))
        q = QuantizedMatrix(np.clip(raw, lo, hi).astype(np.int64), bit_width=w["bit_width"])
        acts = rng.integers(0, 256, size=(w["samples"], w["rows"]))
        return RandomWorkload(q, acts)
    seed = cfg.master_seed if w["seed"] is None else w["seed"]
    data = nn.generate_dataset(w["classes"], w["dim"], w["n_train"] + w["n_test"], seed,
                               separation=w["separation"])
    train, test = data.split(w["n_train"])
    model = nn.train_reference(train, tuple(w["hidden"]), w["epochs"], seed, w["lr"], w["bit_width"])
    return MlpWorkload(model, test)


def _matrices(workload):
    if isinstance(workload, RandomWorkload):
        return [workload.weights]
    return [layer.weights for layer in workload.model.layers]


def run_point(cfg, workload, point, stack, trial, point_index, trace=None):
    """One (axis point, scheme, trial) simulation -> ResultRow."""
    sigma, naw, r_ratio, bpc = point
    params = DeviceParams(r_ratio=r_ratio, bits_per_cell=bpc, sigma=sigma, **cfg.device)
    mac = MacConfig(naw, stack.compensation, cfg.analog_bias, cfg.subtract)
    rng = stream_rng(cfg.master_seed, _TRIAL_KEY, point_index, trial)
    stats = MacStats()
    mats = _matrices(workload)
    if isinstance(workload, RandomWorkload):
        q = workload.weights
        pm = program_matrix(encode(q, stack.encoding, bpc), params, stack.programming, rng,
                            analog_bias=cfg.analog_bias)
        sim = matvec(pm, workload.activations, mac, stats=stats, trace=trace)
        ref = exact_matvec(effective_weights(q, stack.encoding), workload.activations)
        acc = math.nan
    else:
        model, test = workload.model, workload.test
        programmed = nn.program_model(model, stack, params, rng, cfg.analog_bias)
        sim = nn.forward(model, test.features,
                         lambda i, a: matvec(programmed[i], a, mac, stats=stats, trace=trace))
        ref = nn.software_logits(model, test.features, stack.encoding)
        acc = nn.accuracy(sim, test.labels)
    err = mac_error_stats(sim, ref)
    e = energy(cfg.energy, stats)

    planes = len(encode(mats[0], stack.encoding, bpc))
    total_cycles = sum(
        cycles(PerfModel(rows=m.rows, naw=naw, bits_per_cell=bpc, planes=planes)) for m in mats
    )
    extra = int(stack.compensation is not Compensation.NONE) + int(cfg.analog_bias)
    area = area_cells(stack.encoding, mats[0].bit_width, bpc, extra_columns=extra)
    clips = sum(encode(m, stack.encoding, bpc).clip_count for m in mats)
    return ResultRow(
        scheme=stack.name,
        encoding=stack.encoding.value,
        programming=stack.programming.value,
        compensation=stack.compensation.value,
        sigma=sigma,
        naw=naw,
        r_ratio=r_ratio,
        bits_per_cell=bpc,
        trial=trial,
        master_seed=cfg.master_seed,
        rmse=err.rmse,
        max_abs=err.max_abs,
        code_error_rate=err.code_error_rate,
        accuracy=acc,
        cycles=total_cycles,
        e_xbar=e.e_xbar,
        e_adc=e.e_adc,
        e_total=e.e_total,
        saturation_count=stats.saturations,
        clip_count=clips,
        area_overhead=area.overhead,
    )


def _tasks(cfg):
    out = []
    for si, stack in enumerate(cfg.stacks):
        for pi, point in enumerate(cfg.points):
            for t in range(cfg.trials):
                out.append((si, pi, t))
    return out


_worker_state = {}


def _init_worker(cfg, workload):
    _worker_state["cfg"] = cfg
    _worker_state["workload"] = workload


def _run_task(task):
    si, pi, t = task
    cfg, workload = _worker_state["cfg"], _worker_state["workload"]
    return task, run_point(cfg, workload, cfg.points[pi], cfg.stacks[si], t, pi)


def run_sweep(cfg, workers=1, workload=None):
    """Run the Cartesian sweep; rows are ordered by scheme, axes, trial.

    Every trial's generator is derived from ``(master_seed, point, trial)``
    alone, so the result does not depend on ``workers``.
    """
    workload = build_workload(cfg) if workload is None else workload
    tasks = _tasks(cfg)
    log.info("sweep: %d tasks on %d worker(s)", len(tasks), workers)
    if workers <= 1:
        _init_worker(cfg, workload)
        done = [_run_task(t) for t in tasks]
    else:
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(workers, mp_context=ctx, initializer=_init_worker,
                                 initargs=(cfg, workload)) as pool:
            done = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    done.sort(key=lambda item: item[0])
    return [row for _, row in done]


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".9g")
    return str(value)


def emit_csv(results, path):
    """Write rows atomically: a failed write leaves no partial file behind."""
    results = list(results)
    if not results:
        raise ValueError("no results to write")
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".xbarsim-", suffix=".csv", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(FIELDNAMES)
            for row in results:
                w.writerow([_fmt(v) for v in astuple(row)])
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def load_csv(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != FIELDNAMES:
            raise ValueError(f"{path} is not a sweep result file")
        rows = []
        for rec in reader:
            vals = {}
            for k, v in rec.items():
                if k in _STR_FIELDS:
                    vals[k] = v
                elif k in _INT_FIELDS:
                    vals[k] = int(v)
                else:
                    vals[k] = float(v)
            rows.append(ResultRow(**vals))
    return rows


def _point_key(row):
    return (row.scheme, row.sigma, row.naw, row.r_ratio, row.bits_per_cell)


DEFAULT_METRICS = ("rmse", "code_error_rate", "accuracy", "e_total")


def summarize(results, metrics=DEFAULT_METRICS):
    """Mean/std of each metric per (scheme, axis point), in first-seen order."""
    order = {}
    for row in results:
        order.setdefault(_point_key(row), len(order))
    rows = sorted(results, key=lambda r: order[_point_key(r)])
    out = []
    for key, group in groupby(rows, key=_point_key):
        group = list(group)
        entry = dict(zip(("scheme", "sigma", "naw", "r_ratio", "bits_per_cell"), key))
        entry["trials"] = len(group)
        for m in metrics:
            entry[m] = mean_std([getattr(r, m) for r in group])
        out.append(entry)
    return out


def _available(results, metrics):
    return [m for m in metrics if any(math.isfinite(getattr(r, m)) for r in results)]


def swept_axes(results):
    return [a for a in ("sigma", "naw", "r_ratio", "bits_per_cell")
            if len({getattr(r, a) for r in results}) > 1]


def report(results, chart_dir=None, metrics=DEFAULT_METRICS):
    """Text table of per-point mean/std; optionally one SVG line chart per
    (metric, swept axis) in ``chart_dir``. Returns ``(text, chart_paths)``."""
    results = list(results)
    metrics = _available(results, metrics)
    summary = summarize(results, metrics)
    head = ["scheme", "sigma", "naw", "r_ratio", "bpc", "trials"] + [f"{m} (mean±std)" for m in metrics]
    lines = ["\t".join(head)]
    for e in summary:
        cells = [e["scheme"], _fmt(e["sigma"]), str(e["naw"]), _fmt(e["r_ratio"]),
                 str(e["bits_per_cell"]), str(e["trials"])]
        cells += [f"{mu:.6g}±{sd:.3g}" for mu, sd in (e[m] for m in metrics)]
        lines.append("\t".join(cells))
    text = "\n".join(lines)

    paths = []
    if chart_dir is not None:
        os.makedirs(chart_dir, exist_ok=True)
        for axis in swept_axes(results):
            for m in metrics:
                paths.append(_chart(results, axis, m, chart_dir))
    return text, paths


def _chart(results, axis, metric, chart_dir):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.5))
    schemes = list(dict.fromkeys(r.scheme for r in results))
    for s in schemes:
        rows = [r for r in results if r.scheme == s]
        xs = sorted({getattr(r, axis) for r in rows})
        ys = [np.mean([getattr(r, metric) for r in rows if getattr(r, axis) == x]) for x in xs]
        ax.plot(xs, ys, marker="o", label=s)
    if axis in ("naw", "r_ratio") and all(x > 0 for r in results for x in [getattr(r, axis)]):
        ax.set_xscale("log")
    ax.set_xlabel(axis)
    ax.set_ylabel(metric)
    ax.legend()
    fig.tight_layout()
    path = os.path.join(chart_dir, f"{metric}_vs_{axis}.svg")
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def naw_at_drop(results, scheme, reference, max_drop=0.01, metric="accuracy"):
    """Largest NAW whose mean ``metric`` stays within ``max_drop`` of ``reference``.

    Direct search over measured NAW values; ``None`` if none qualifies.
    """
    rows = [r for r in results if r.scheme == scheme]
    best = None
    for naw in sorted({r.naw for r in rows}):
        mean = np.mean([getattr(r, metric) for r in rows if r.naw == naw])
        if mean >= reference - max_drop:
            best = naw
    return best
