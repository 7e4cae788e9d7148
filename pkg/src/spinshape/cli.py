"""Command-line runner.

``spinshape simulate|sweep|sync|shape|predict --config <path> [--preset <name>] [--out <dir>] [--jobs N]``

The JSON document is the only source of physics settings; flags select the
document, the output directory and the degree of parallelism. Exit codes:
0 on success, 2 for an invalid configuration (nothing is written), 3 for a
numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import subprocess
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import config as cfg
from . import errframe
from . import exchange as ex
from . import shaper
from . import simulator as sim
from .qcore import ValidationError
from .sigchain import lowpass

COMMANDS = ("simulate", "sweep", "sync", "shape", "predict")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

_UNITS = {"bx": "bx_ghz", "by": "by_ghz", "theta": "theta_rad", "theta_dot": "theta_dot_rad_per_ns",
          "v_b": "v_b_mv", "v_b1": "v_b1_mv", "theta_j": "theta_j_rad", "j": "j_ghz"}


class NumericalError(RuntimeError):
    """A simulation produced a non-finite or otherwise unusable result."""


def fmt(value) -> str:
    """Shortest round-trip text for numbers; compact sorted JSON for structures."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    return json.dumps(value, sort_keys=True, separators=(",", ":"))


def git_revision() -> str | None:
    try:
        out = subprocess.run(["git", "rev-parse", "HEAD"], cwd=Path(__file__).resolve().parent,
                             capture_output=True, text=True, timeout=5)
    except (OSError, subprocess.SubprocessError):
        return None
    return out.stdout.strip() or None if out.returncode == 0 else None


def _header(doc_hash: str, command: str) -> str:
    return f"# spinshape {__version__}\n# config_hash {doc_hash}\n# command {command}\n"


def _csv_text(doc_hash: str, command: str, columns: list, rows: list) -> str:
    buf = io.StringIO()
    buf.write(_header(doc_hash, command))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# --------------------------------------------------------------------------- evaluation


def channel_rates(exp: cfg.Experiment) -> dict:
    family = cfg.CHANNEL_FAMILY.get(exp.family)
    if family is None:
        return {}
    chans = errframe.channels_for(family, exp.params, exp.pulse)
    return {c.label: errframe.channel_error_rate(c) for c in chans}


def evaluate(doc: dict, jobs: int = 1) -> dict:
    """Simulate one resolved document and return a flat result record."""
    exp = cfg.build_experiment(doc)
    res = sim.run_ensemble(exp.target, exp.pulse, exp.params, exp.config, basis=exp.basis, jobs=jobs)
    if not np.isfinite(res.fidelity):
        raise NumericalError("fidelity is not finite")
    out = {
        "fidelity": res.fidelity,
        "infidelity": res.infidelity,
        "stderr": res.stderr,
        "noiseless_infidelity": 1.0 - res.metadata.get("noiseless_fidelity", res.fidelity),
        "realizations": res.metadata.get("realizations", 0),
        "virtual_z_phases": [float(p) for p in res.phases],
        "converged": bool(res.converged),
    }
    opts = cfg.merge(cfg.DEFAULTS["output"], doc.get("output") or {})
    if opts["channel_rates"]:
        out["channel_rates"] = channel_rates(exp)
    if cfg.merge(cfg.DEFAULTS["sim"], doc.get("sim") or {})["audit"]:
        a, b, rel = sim.richardson_check(exp.target, exp.pulse, exp.params, exp.config)
        out["audit"] = {"infidelity_dt": a, "infidelity_half_dt": b, "relative_change": rel}
    return out


def _evaluate_point(doc: dict) -> dict:
    return evaluate(doc, jobs=1)


# --------------------------------------------------------------------------- commands


def cmd_simulate(doc: dict, doc_hash: str, jobs: int) -> dict:
    result = evaluate(doc, jobs)
    opts = cfg.merge(cfg.DEFAULTS["output"], doc.get("output") or {})
    prefix = opts["prefix"]
    files = {f"{prefix}.json": _json_text({
        "tool": "spinshape", "version": __version__, "config_hash": doc_hash, "git_revision": git_revision(),
        "command": "simulate", "config": doc, "result": result})}
    if opts["pulse_csv"]:
        files[f"{prefix}_pulse.csv"] = _shape_csv(doc, doc_hash)
    return files


def cmd_sweep(doc: dict, doc_hash: str, jobs: int) -> dict:
    paths, grid = cfg.sweep_points(doc)
    docs = [cfg.point_document(doc, paths, values) for values in grid]
    if jobs > 1 and len(docs) > 1:
        with ProcessPoolExecutor(min(jobs, len(docs))) as pool:
            results = list(pool.map(_evaluate_point, docs))
    else:
        results = [evaluate(d, jobs) for d in docs]
    labels = sorted({k for r in results for k in r.get("channel_rates", {})})
    columns = [*paths, "fidelity", "infidelity", "stderr", "noiseless_infidelity", "realizations",
               *(f"rate_{k}" for k in labels)]
    rows = []
    for values, r in zip(grid, results):
        row = dict(zip(paths, values))
        row.update({k: r[k] for k in ("fidelity", "infidelity", "stderr", "noiseless_infidelity", "realizations")})
        row.update({f"rate_{k}": v for k, v in r.get("channel_rates", {}).items()})
        rows.append(row)
    prefix = cfg.merge(cfg.DEFAULTS["output"], doc.get("output") or {})["prefix"]
    return {f"{prefix}_sweep.csv": _csv_text(doc_hash, "sweep", columns, rows)}


def sync_rows(dEz: float, m_max: int = 5) -> list:
    rows = []
    for gate in ("pi/2", "pi"):
        for s in shaper.sync_1q_times(dEz, gate, m_max):
            rows.append({"family": "rx", "gate": gate, "m": s.m, "n": s.n, "t_g_ns": s.t_g,
                         "amplitude_ghz": s.amplitude})
    for m in range(1, m_max + 1):
        tg = shaper.sync_cz(dEz, m)
        rows.append({"family": "cz", "gate": "pi", "m": m, "n": 0, "t_g_ns": tg, "amplitude_ghz": 1.0 / (2 * tg)})
    return rows


def cmd_sync(doc: dict, doc_hash: str, jobs: int) -> dict:
    dEz = abs(cfg.merge(cfg.DEFAULTS["system"], doc.get("system") or {})["dEz"])
    if dEz <= 0:
        raise cfg.ConfigError("$.system.dEz: synchronization needs a non-zero Zeeman difference")
    m_max = (doc.get("sync") or {}).get("m_max", 5)
    rows = sync_rows(dEz, m_max)
    columns = ["family", "gate", "m", "n", "t_g_ns", "amplitude_ghz"]
    print(f"{'family':>6} {'gate':>5} {'m':>3} {'n':>3} {'t_g (ns)':>12} {'amplitude (GHz)':>16}")
    for r in rows:
        print(f"{r['family']:>6} {r['gate']:>5} {r['m']:>3} {r['n']:>3} {r['t_g_ns']:>12.4f} "
              f"{r['amplitude_ghz']:>16.6g}")
    prefix = cfg.merge(cfg.DEFAULTS["output"], doc.get("output") or {})["prefix"]
    return {f"{prefix}_sync.csv": _csv_text(doc_hash, "sync", columns, rows)}


def _shape_csv(doc: dict, doc_hash: str) -> str:
    exp = cfg.build_experiment(doc)
    t = sim.time_nodes(exp.pulse, exp.config)
    dt = t[1] - t[0]
    spec = exp.config.filter
    raw = exp.pulse.sample(t)
    if "j" in raw:
        raw["j"] = np.where(np.isnan(raw["j"]), exp.params.idle_exchange, raw["j"])
    cols = {}
    for name, x in raw.items():
        x = np.broadcast_to(np.asarray(x, float), t.shape)
        cols[_UNITS.get(name, name)] = x
        cols[_UNITS.get(name, name) + "_filtered"] = lowpass(x, dt, spec) if spec.enabled else x
    if "v_b" in raw and exp.params.exchange is not None:
        cols["J_ghz"] = ex.j_of_v(exp.params.exchange, cols["v_b_mv"])
        cols["J_ghz_filtered"] = ex.j_of_v(exp.params.exchange, cols["v_b_mv_filtered"])
    columns = ["t_ns", *cols]
    rows = [{"t_ns": float(tk), **{k: float(v[i]) for k, v in cols.items()}} for i, tk in enumerate(t)]
    return _csv_text(doc_hash, "shape", columns, rows)


def cmd_shape(doc: dict, doc_hash: str, jobs: int) -> dict:
    prefix = cfg.merge(cfg.DEFAULTS["output"], doc.get("output") or {})["prefix"]
    return {f"{prefix}_pulse.csv": _shape_csv(doc, doc_hash)}


def converted_gate_time(t_g: float, dEz_foreign: float, dEz: float) -> float:
    """Gate time with the same ``t_g * dEz`` product at the local Zeeman difference."""
    return t_g * dEz_foreign / dEz


def cmd_predict(doc: dict, doc_hash: str, jobs: int) -> dict:
    pred = doc.get("predict")
    if pred is None:
        raise cfg.ConfigError("$.predict: section required for the predict command")
    dEz = abs(cfg.merge(cfg.DEFAULTS["system"], doc.get("system") or {})["dEz"])
    if dEz <= 0:
        raise cfg.ConfigError("$.system.dEz: must be non-zero")
    t_conv = converted_gate_time(pred["t_g"], pred["dEz_foreign"], dEz)
    gate = {"family": "cz", "t_g": t_conv, "window": {"kind": "rect"}, "phase": np.pi, "mode": "simplified"}
    base = cfg.set_path({k: v for k, v in doc.items() if k not in ("sweep", "predict")}, "gate", gate)
    coherent = evaluate(cfg.set_path(base, "noise", None), jobs)
    report = {"t_g": pred["t_g"], "dEz_foreign": pred["dEz_foreign"], "dEz": dEz, "t_g_converted": t_conv,
              "coherent_infidelity": coherent["infidelity"]}
    if pred.get("noisy", False) and base.get("noise") is not None:
        noisy = evaluate(base, jobs)
        report.update(noisy_infidelity=noisy["infidelity"], noisy_stderr=noisy["stderr"],
                      realizations=noisy["realizations"])
    print(f"converted gate time {t_conv:.4f} ns; coherent 1-F {report['coherent_infidelity']:.3e}"
          + (f"; noisy 1-F {report['noisy_infidelity']:.3e}" if "noisy_infidelity" in report else ""))
    prefix = cfg.merge(cfg.DEFAULTS["output"], doc.get("output") or {})["prefix"]
    return {f"{prefix}_predict.json": _json_text({
        "tool": "spinshape", "version": __version__, "config_hash": doc_hash, "git_revision": git_revision(),
        "command": "predict", "config": doc, "result": report})}


HANDLERS = {"simulate": cmd_simulate, "sweep": cmd_sweep, "sync": cmd_sync, "shape": cmd_shape,
            "predict": cmd_predict}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spinshape", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", type=Path, help="JSON experiment document")
    p.add_argument("--preset", help="named preset used as the base document")
    p.add_argument("--out", type=Path, default=Path("spinshape-out"), help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--version", action="version", version=f"spinshape {__version__}")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("spinshape: --jobs must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        doc = None
        if args.config is not None:
            try:
                text = args.config.read_text()
            except OSError as err:
                raise cfg.ConfigError(f"{args.config}: {err.strerror}") from None
            doc = cfg.parse_json(text, str(args.config))
        resolved = cfg.resolve(doc, args.preset, os.environ.get(cfg.SEED_ENV), str(args.config or "<preset>"))
        files = HANDLERS[args.command](resolved, cfg.config_hash(resolved), args.jobs)
    except cfg.ConfigError as err:
        print(f"spinshape: invalid configuration\n{err}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValidationError, NumericalError, ArithmeticError, np.linalg.LinAlgError) as err:
        print(f"spinshape: numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    args.out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (args.out / name).write_text(text)
        print(f"wrote {args.out / name}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
