"""Experiment configuration: JSON schema, defaults and validation.

A config is a JSON object::

    {
      "sigma": [0.0, 0.04],          # log-normal sigma, >= 0
      "naw": [8, 128],               # activated wordlines, 1..128
      "r_ratio": [300],              # > 1; "inf" for an ideal off state
      "bits_per_cell": [2],          # 1..6
      "schemes": ["conventional", "vecom"],
      "trials": 10,
      "master_seed": 0,
      "workload": {"kind": "random", "rows": 128, "cols": 16, "bit_width": 8,
                   "weight_std": 32.0, "samples": 8},
      "device": {"g_max": 1.0, "v_read": 1.0},
      "energy": {"k_adc": 0.001, "adc_base": 2.0, "t_int": 1.0},
      "analog_bias": false,
      "subtract": "analog",
      "output": "results.csv"
    }

Schemes are preset names (see :mod:`xbarsim.schemes`) or objects with
``encoding``, ``programming`` and ``compensation``. The ``mlp`` workload
takes ``classes``, ``dim``, ``hidden``, ``n_train``, ``n_test``,
``separation``, ``epochs``, ``lr``, ``bit_width`` and ``seed``.
"""

import json
import math
from dataclasses import dataclass, field

from . import schemes as _schemes
from .metrics import EnergyModel
from .xbar import TILE, SubtractDomain


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


RANDOM_DEFAULTS = {"rows": 128, "cols": 16, "bit_width": 8, "weight_std": 32.0, "samples": 8}
MLP_DEFAULTS = {
    "classes": 10,
    "dim": 128,
    "hidden": [128],
    "n_train": 2500,
    "n_test": 500,
    "separation": 4.0,
    "epochs": 30,
    "lr": 0.1,
    "bit_width": 8,
    "seed": None,
}

AXES = ("sigma", "naw", "r_ratio", "bits_per_cell")


@dataclass(frozen=True)
class ExperimentConfig:
    sigma: tuple = (0.0,)
    naw: tuple = (128,)
    r_ratio: tuple = (300.0,)
    bits_per_cell: tuple = (2,)
    schemes: tuple = ("vecom",)
    trials: int = 1
    master_seed: int = 0
    workload: dict = field(default_factory=lambda: {"kind": "random", **RANDOM_DEFAULTS})
    device: dict = field(default_factory=dict)
    energy: EnergyModel = EnergyModel()
    analog_bias: bool = False
    subtract: SubtractDomain = SubtractDomain.ANALOG
    output: str = None

    @property
    def stacks(self):
        return tuple(_schemes.resolve(s) for s in self.schemes)

    @property
    def points(self):
        """Axis points in sweep order (sigma, naw, r_ratio, bits_per_cell)."""
        return [
            (s, n, r, b)
            for s in self.sigma
            for n in self.naw
            for r in self.r_ratio
            for b in self.bits_per_cell
        ]

    @property
    def swept_axes(self):
        return [a for a in AXES if len(getattr(self, a)) > 1]

    def row_count(self):
        return len(self.points) * len(self.schemes) * self.trials

    def to_dict(self):
        return {
            "sigma": list(self.sigma),
            "naw": list(self.naw),
            "r_ratio": [r if math.isfinite(r) else "inf" for r in self.r_ratio],
            "bits_per_cell": list(self.bits_per_cell),
            "schemes": [s if isinstance(s, str) else dict(s) for s in self.schemes],
            "trials": self.trials,
            "master_seed": self.master_seed,
            "workload": dict(self.workload),
            "device": dict(self.device),
            "energy": {"k_adc": self.energy.k_adc, "adc_base": self.energy.adc_base,
                       "t_int": self.energy.t_int},
            "analog_bias": self.analog_bias,
            "subtract": self.subtract.value,
            "output": self.output,
        }


def _number(value, name):
    if isinstance(value, str) and value.lower() in ("inf", "infinity"):
        return math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(name, f"expected a number, got {value!r}")
    return float(value)


def _integer(value, name):
    if isinstance(value, bool) or not isinstance(value, int):
        if isinstance(value, float) and value.is_integer():
            return int(value)
        raise ConfigError(name, f"expected an integer, got {value!r}")
    return value


def _axis(doc, name, convert, check, default):
    raw = doc.get(name, default)
    if not isinstance(raw, (list, tuple)):
        raw = [raw]
    if not raw:
        raise ConfigError(name, "axis must list at least one value")
    out = []
    for i, v in enumerate(raw):
        key = f"{name}[{i}]"
        v = convert(v, key)
        msg = check(v)
        if msg:
            raise ConfigError(key, f"{msg} (got {v!r})")
        out.append(v)
    return tuple(out)


def _workload(doc):
    raw = doc.get("workload", {"kind": "random"})
    if not isinstance(raw, dict):
        raise ConfigError("workload", "expected an object")
    kind = raw.get("kind", "random")
    if kind == "random":
        defaults = RANDOM_DEFAULTS
    elif kind == "mlp":
        defaults = MLP_DEFAULTS
    else:
        raise ConfigError("workload.kind", f"expected 'random' or 'mlp', got {kind!r}")
    unknown = set(raw) - set(defaults) - {"kind"}
    if unknown:
        raise ConfigError("workload", f"unknown keys {sorted(unknown)}")
    w = {"kind": kind, **defaults, **{k: v for k, v in raw.items() if k != "kind"}}
    if w["bit_width"] not in (4, 8):
        raise ConfigError("workload.bit_width", "must be 4 or 8")
    if kind == "random":
        for key in ("rows", "cols", "samples"):
            if _integer(w[key], f"workload.{key}") < 1:
                raise ConfigError(f"workload.{key}", "must be >= 1")
        if _number(w["weight_std"], "workload.weight_std") <= 0:
            raise ConfigError("workload.weight_std", "must be > 0")
    else:
        if _integer(w["classes"], "workload.classes") < 2:
            raise ConfigError("workload.classes", "must be >= 2")
        if _integer(w["dim"], "workload.dim") < 2:
            raise ConfigError("workload.dim", "must be >= 2")
        for key in ("n_train", "n_test"):
            if _integer(w[key], f"workload.{key}") < w["classes"]:
                raise ConfigError(f"workload.{key}", "must be >= classes")
        if not isinstance(w["hidden"], (list, tuple)) or any(
            _integer(h, "workload.hidden") < 1 for h in w["hidden"]
        ):
            raise ConfigError("workload.hidden", "expected a list of positive widths")
        w["hidden"] = list(w["hidden"])
        if _integer(w["epochs"], "workload.epochs") < 0:
            raise ConfigError("workload.epochs", "must be >= 0")
    return w


KNOWN_KEYS = {*AXES, "schemes", "trials", "master_seed", "workload", "device", "energy",
              "analog_bias", "subtract", "output"}


def parse_config(doc, seed=None, output=None):
    """Validate a config mapping; everything is checked before any work starts."""
    if not isinstance(doc, dict):
        raise ConfigError("config", "expected a JSON object")
    unknown = set(doc) - KNOWN_KEYS
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown key")
    sigma = _axis(doc, "sigma", _number, lambda v: None if v >= 0 and math.isfinite(v) else "must be >= 0", [0.0])
    naw = _axis(doc, "naw", _integer, lambda v: None if 1 <= v <= TILE else f"must be in [1, {TILE}]", [128])
    r_ratio = _axis(doc, "r_ratio", _number, lambda v: None if v > 1 else "must be > 1", [300.0])
    bpc = _axis(doc, "bits_per_cell", _integer, lambda v: None if 1 <= v <= 6 else "must be in [1, 6]", [2])

    raw_schemes = doc.get("schemes", ["vecom"])
    if isinstance(raw_schemes, (str, dict)):
        raw_schemes = [raw_schemes]
    if not raw_schemes:
        raise ConfigError("schemes", "at least one scheme is required")
    for i, s in enumerate(raw_schemes):
        try:
            _schemes.resolve(s)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"schemes[{i}]", str(exc)) from None
    names = [_schemes.resolve(s).name for s in raw_schemes]
    if len(set(names)) != len(names):
        raise ConfigError("schemes", "scheme names must be unique")

    trials = _integer(doc.get("trials", 1), "trials")
    if trials < 1:
        raise ConfigError("trials", "must be >= 1")
    master_seed = _integer(doc.get("master_seed", 0) if seed is None else seed, "master_seed")
    if not 0 <= master_seed < 2**64:
        raise ConfigError("master_seed", "must be an unsigned 64-bit integer")

    device = doc.get("device", {})
    if not isinstance(device, dict) or set(device) - {"g_max", "v_read"}:
        raise ConfigError("device", "only g_max and v_read may be set here")
    for key, v in device.items():
        if _number(v, f"device.{key}") <= 0:
            raise ConfigError(f"device.{key}", "must be > 0")

    energy_doc = doc.get("energy", {})
    if not isinstance(energy_doc, dict) or set(energy_doc) - {"k_adc", "adc_base", "t_int"}:
        raise ConfigError("energy", "allowed keys are k_adc, adc_base, t_int")
    for key, v in energy_doc.items():
        if _number(v, f"energy.{key}") < 0:
            raise ConfigError(f"energy.{key}", "must be >= 0")
    energy = EnergyModel(**{k: float(v) for k, v in energy_doc.items()})

    analog_bias = doc.get("analog_bias", False)
    if not isinstance(analog_bias, bool):
        raise ConfigError("analog_bias", "expected true or false")
    try:
        subtract = SubtractDomain(doc.get("subtract", "analog"))
    except ValueError:
        raise ConfigError("subtract", "expected 'analog' or 'digital'") from None

    out = output if output is not None else doc.get("output")
    if out is not None and not isinstance(out, str):
        raise ConfigError("output", "expected a path string")

    return ExperimentConfig(
        sigma=sigma,
        naw=naw,
        r_ratio=r_ratio,
        bits_per_cell=bpc,
        schemes=tuple(raw_schemes),
        trials=trials,
        master_seed=master_seed,
        workload=_workload(doc),
        device={k: float(v) for k, v in device.items()},
        energy=energy,
        analog_bias=analog_bias,
        subtract=subtract,
        output=out,
    )


def load_config(path, seed=None, output=None):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON: {exc}") from None
    return parse_config(doc, seed=seed, output=output)
