"""Experiment configuration: loading, validation, presets and object construction.

A configuration is a JSON document checked against the schema shipped in
``spinshape/data/schema.json``. Presets are complete documents stored in
``spinshape/data/presets.json``; a user document given together with a
preset is merged on top of it (objects merge key by key, everything else
replaces). The fully resolved document is what gets hashed.
"""

from __future__ import annotations

import copy
import hashlib
import itertools
import json
from dataclasses import dataclass
from importlib import resources

import jsonschema
import numpy as np

from . import exchange as ex
from . import noise as nz
from . import shaper
from . import simulator as sim
from .qcore import GateTarget, ValidationError
from .sigchain import FilterSpec
from .windows import WindowSpec

SEED_ENV = "SPINSHAPE_SEED"

DEFAULTS = {
    "system": {"Ez": 10.0, "dEz": 0.1, "beta": 0.0, "J_res": 0.0, "exchange": None, "v_b0": 0.0,
               "coupling": [1.0, 1.0]},
    "signal": {"enabled": True, "cutoff": 0.15, "order": 3},
    "noise": None,
    "sim": {"frame": "rwa", "dt": None, "realizations": 300, "seed": 0, "extension": None,
            "sampling": "end", "audit": False},
    "output": {"prefix": "result", "pulse_csv": False, "channel_rates": True},
}

GATE_DEFAULTS = {
    "identity": {},
    "rx": {"window": {"kind": "hann"}, "angle": np.pi / 2, "qubit": 1, "shaping": "static"},
    "cz": {"window": {"kind": "hann"}, "phase": np.pi, "mode": "full"},
    "swap": {"window": {"kind": "hann"}, "phase_mode": "bessel", "idle_exchange": None, "calibrate": True,
             "conditional_phase": None},
}

CHANNEL_FAMILY = {"rx": "one_qubit", "cz": "cz", "swap": "swap_ac"}


class ConfigError(ValueError):
    """Invalid configuration document; the message carries the location."""


def _load_data(name: str) -> dict:
    return json.loads(resources.files("spinshape").joinpath("data", name).read_text())


def schema() -> dict:
    return _load_data("schema.json")


def presets() -> dict:
    return _load_data("presets.json")


def merge(base, over):
    """Recursive merge where dictionaries combine and other values replace."""
    if isinstance(base, dict) and isinstance(over, dict):
        out = dict(base)
        for k, v in over.items():
            out[k] = merge(base[k], v) if k in base else copy.deepcopy(v)
        return out
    return copy.deepcopy(over)


def _pointer(path) -> str:
    return "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in path)


def validate(doc: dict, source: str = "<config>") -> None:
    """Raise ``ConfigError`` listing every schema violation with its JSON path."""
    validator = jsonschema.Draft202012Validator(schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        lines = [f"{source}: {_pointer(e.absolute_path)}: {e.message}" for e in errors]
        raise ConfigError("\n".join(lines))


def parse_json(text: str, source: str = "<config>") -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{source}: line {err.lineno} column {err.colno}: {err.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{source}: $: top level must be an object")
    return doc


def resolve(doc: dict | None = None, preset: str | None = None, seed: str | None = None,
            source: str = "<config>") -> dict:
    """Validated, preset-merged document with the optional seed override applied."""
    if doc is None and preset is None:
        raise ConfigError("either a config file or a preset is required")
    base = {}
    if preset is not None:
        table = presets()
        if preset not in table:
            raise ConfigError(f"unknown preset {preset!r}; available: {', '.join(sorted(table))}")
        base = table[preset]
    if doc is not None and preset is None:
        validate(doc, source)
    full = merge(base, doc or {})
    if seed is not None:
        try:
            value = int(seed)
        except ValueError:
            raise ConfigError(f"{SEED_ENV}: not an integer: {seed!r}") from None
        if value < 0:
            raise ConfigError(f"{SEED_ENV}: must be non-negative")
        full = merge(full, {"sim": {"seed": value}})
    validate(full, source if preset is None else f"{source} + preset {preset}")
    return full


def config_hash(doc: dict) -> str:
    """SHA-256 prefix of the canonical JSON form of ``doc``."""
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


# --------------------------------------------------------------------------- sweeps


def axis_values(axis: dict) -> list:
    if "values" in axis:
        return list(axis["values"])
    lo, hi, n = axis["min"], axis["max"], axis["count"]
    if axis.get("scale", "linear") == "log":
        if lo <= 0 or hi <= 0:
            raise ConfigError(f"sweep axis {axis['path']}: log scale needs positive bounds")
        vals = np.geomspace(lo, hi, n)
    else:
        vals = np.linspace(lo, hi, n)
    return [float(v) for v in vals]


def set_path(doc: dict, path: str, value) -> dict:
    """Copy of ``doc`` with the dotted ``path`` replaced by ``value``."""
    out = copy.deepcopy(doc)
    keys = path.split(".")
    node = out
    for k in keys[:-1]:
        if not isinstance(node.get(k), dict):
            node[k] = {}
        node = node[k]
    node[keys[-1]] = copy.deepcopy(value)
    return out


def sweep_points(doc: dict) -> tuple[list, list]:
    """Axis paths and the grid in row-major order (last axis fastest)."""
    axes = doc.get("sweep", {}).get("axes")
    if not axes:
        raise ConfigError("$.sweep: at least one axis is required")
    paths = [a["path"] for a in axes]
    if len(set(paths)) != len(paths):
        raise ConfigError("$.sweep.axes: duplicate paths")
    grid = list(itertools.product(*(axis_values(a) for a in axes)))
    return paths, grid


def point_document(doc: dict, paths, values) -> dict:
    out = {k: v for k, v in doc.items() if k != "sweep"}
    for p, v in zip(paths, values):
        out = set_path(out, p, v)
    validate(out, "sweep point")
    return out


# --------------------------------------------------------------------------- objects


@dataclass
class Experiment:
    """Everything needed to simulate one configuration."""

    family: str
    target: GateTarget
    pulse: object
    params: sim.SystemParams
    config: sim.SimConfig
    basis: np.ndarray | None = None


def _section(doc, name):
    return merge(DEFAULTS[name], doc.get(name) or {})


def build_exchange(spec: dict | None):
    if spec is None:
        return None
    kind = spec["kind"]
    if kind == "exponential":
        if "J0" not in spec:
            raise ConfigError("$.system.exchange: the exponential model needs J0")
        return ex.ExchangeModel.exponential(spec["J0"], spec["alpha"])
    if "J_sat" not in spec:
        raise ConfigError("$.system.exchange: the saturating model needs J_sat")
    if "J_res" in spec:
        return ex.ExchangeModel.saturating_from_residual(spec["J_sat"], spec["alpha"], spec["J_res"])
    return ex.ExchangeModel.saturating(spec["J_sat"], spec["alpha"], spec.get("v_off", 0.0))


def build_params(doc: dict) -> sim.SystemParams:
    s = _section(doc, "system")
    shift = ex.ZeemanShiftModel(s["dEz"], s["beta"])
    return sim.SystemParams(Ez=s["Ez"], shift=shift, exchange=build_exchange(s["exchange"]), J_res=s["J_res"],
                            v_b0=s["v_b0"], coupling=tuple(s["coupling"]))


def build_filter(doc: dict) -> FilterSpec:
    s = _section(doc, "signal")
    return FilterSpec(order=s["order"], cutoff=s["cutoff"], enabled=s["enabled"])


def build_noise(doc: dict) -> nz.NoiseSpec | None:
    spec = doc.get("noise")
    if spec is None:
        return None
    seed = _section(doc, "sim")["seed"]
    return nz.NoiseSpec(charge_amp=spec.get("charge_amp", 0.0), f_min=spec.get("f_min", 0.1),
                        quasi_static_sigma=tuple(spec.get("quasi_static_sigma", (0.0, 0.0))), seed=seed,
                        static_compensation=spec.get("static_compensation", True))


def build_simconfig(doc: dict) -> sim.SimConfig:
    s = _section(doc, "sim")
    return sim.SimConfig(frame=s["frame"], dt=s["dt"], filter=build_filter(doc), noise=build_noise(doc),
                         realizations=s["realizations"], extension=s["extension"], sampling=s["sampling"])


def gate_section(doc: dict) -> dict:
    g = doc.get("gate")
    if g is None:
        raise ConfigError("$: 'gate' is required for this command")
    return merge(GATE_DEFAULTS[g["family"]], g)


def build_experiment(doc: dict) -> Experiment:
    """Pulse, target, device and numerics described by a resolved document.

    Raises
    ------
    ConfigError
        If the sections are inconsistent (e.g. an exchange gate without an
        exchange model).
    ValidationError
        If a pulse cannot be constructed for numerical reasons.
    """
    g = gate_section(doc)
    family = g["family"]
    try:
        params = build_params(doc)
        config = build_simconfig(doc)
        window = WindowSpec.from_dict(g["window"]) if "window" in g else None
    except ValidationError as err:
        raise ConfigError(f"$: {err}") from None
    t_g = g["t_g"]
    if family == "identity":
        return Experiment(family, GateTarget.identity(), sim.IdlePulse(t_g), params, config)
    if family == "rx":
        q = g["qubit"]
        nu_d = params.Ez + (params.dEz / 2 if q == 1 else -params.dEz / 2)
        target = GateTarget.rx(g["angle"], q)
        if g["shaping"] == "static":
            pulse = shaper.static_1q_pulse(window, t_g, g["angle"], nu_d, q)
        elif g["shaping"] == "drag":
            pulse = shaper.drag_1q_pulse(window, t_g, params.dEz, g["angle"], nu_d, q)
        else:
            quiet = sim.SimConfig(frame=config.frame, dt=config.dt, filter=config.filter,
                                  extension=config.extension, sampling=config.sampling)
            pulse, _ = sim.calibrate_drag(window, t_g, params, quiet, g["angle"], nu_d, q, target)
        return Experiment(family, target, pulse, params, config)
    if params.exchange is None:
        raise ConfigError(f"$.system.exchange: gate family {family!r} needs an exchange model")
    if family == "cz":
        pulse = shaper.cz_pulse(window, t_g, params.exchange, params.shift, g["phase"], g["mode"], params.v_b0)
        return Experiment(family, GateTarget.cz(g["phase"]), pulse, params, config)
    # resonant SWAP: the idle point may be moved to a larger exchange
    if g["idle_exchange"] is not None:
        v_b0 = float(ex.v_of_j(params.exchange, g["idle_exchange"]))
        params = sim.SystemParams(Ez=params.Ez, shift=params.shift, exchange=params.exchange, J_res=params.J_res,
                                  v_b0=v_b0, coupling=params.coupling)
    pulse = shaper.swap_ac_pulse(window, t_g, params.exchange, params.shift, g["phase_mode"], params.v_b0,
                                 g["calibrate"])
    basis = sim.odd_block_rotation(np.arctan2(params.idle_exchange, params.dEz))
    return Experiment(family, GateTarget.swap_class(g["conditional_phase"]), pulse, params, config, basis)
