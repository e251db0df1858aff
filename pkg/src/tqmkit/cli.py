"""Command-line experiment runner.

Every subcommand takes ``--config`` (JSON), ``--seed``, ``--out`` and
``--format``.  A config file is either the parameter object itself or
``{"subcommand": ..., "params": {...}, "seed": ..., "output_dir": ...}``.
Outputs are tables (CSV or JSON) plus ``manifest.json``.

Exit codes: 0 ok, 1 selftest failure, 2 bad input or schema, 3 numerical
failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import platform
import sys
import time
from dataclasses import asdict
from pathlib import Path
from typing import Any, Callable

import numpy as np
import scipy

from . import __version__
from .detection import sqm_arrival, tqm_time_part
from .errors import InputError, NumericalError
from .evolver import Axis, Grid4, SwordConfig, evolve, sword_trace
from .gtf import Gaussian1, Gaussian4, free_evolve
from .io import fmt, write_csv, write_json
from .loop import (LoopConfig, loop_fixed_tau, loop_numeric_oracle, mass_correction, omega_curve_rows,
                   tau_sweep_rows)
from .merit import merit_sweep
from .parallel import ENV_VAR, thread_count
from .scattering import AbcModel, ScatterEvent, exchanged_energy_tqm, gtf_scatter, slit_sweep
from .selftest import run_checks
from .units import FourMomentum

EXIT_OK, EXIT_FAILED, EXIT_SCHEMA, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3, 4
SEED_MAX = 2**64 - 1

Table = tuple[str, list[str], list[tuple]]

DEFAULTS: dict[str, dict[str, Any]] = {
    "free-packet": {
        "E0": 10.0, "mass": 10.0, "p0": [1.5, 0.0], "sigma": [1.0, 1.0, 1.0],
        "tau_max": 10.0, "samples": 11, "points": 64, "half_width": 16.0,
    },
    "scatter": {
        "m": 1000.0, "mu": 1.0, "lam": 1.0, "p1": [0.0, 0.0, 200.0], "p2": [0.0, 0.0, -200.0],
        "sigma1": [3.0, 3.0, 3.0, 3.0], "sigma2": [4.0, 4.0, 4.0, 4.0], "theta": math.pi / 2,
        "mode": "tqm", "events": 1000, "event_scale": 3.0,
    },
    "slit": {
        "gate_sigma_E": [0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0], "probe_sigma": [0.01, 0.01, 0.01, 0.01],
        "probe_p": [0.0, 0.0, 1.0], "mass": 1.0, "tau_bar": 1000.0, "probe_clock_var": 4.0,
    },
    "sword": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(SwordConfig()).items()},
    "loop": {
        "m": 1.0, "mu": 0.1, "p": [0.0, 0.0, 0.0], "taus": [0.5, 1.0, 2.0, 5.0, 10.0, 20.0],
        "omegas": [-2.0, -1.0, -0.5, 0.0, 0.0954545454545, 0.5, 1.0, 2.0],
        "sigma_E": [1e-4, 1e-3, 1e-2, 3e-2], "oracle_taus": [5.0],
    },
    "merit": {
        "ratios": [1.1, 1.5, 2.0, 3.0, 5.0, 10.0], "sigmas": 5.0, "rate_T": 1.0, "trials": 10000,
        "test": "chi2", "two_sided": False,
    },
    "selftest": {},
}


# --------------------------------------------------------------- schema


def _coerce(key: str, default: Any, value: Any) -> Any:
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise InputError(f"{key} must be a boolean")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or value != int(value):
            raise InputError(f"{key} must be an integer")
        return int(value)
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise InputError(f"{key} must be a number")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise InputError(f"{key} must be a string")
        return value
    if isinstance(default, list):
        if not isinstance(value, list) or not value:
            raise InputError(f"{key} must be a non-empty list")
        if any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value):
            raise InputError(f"{key} must hold numbers")
        return [float(v) for v in value]
    return value


def resolve_params(subcommand: str, overrides: dict | None) -> dict:
    base = dict(DEFAULTS[subcommand])
    overrides = overrides or {}
    if not isinstance(overrides, dict):
        raise InputError("params must be a JSON object")
    unknown = sorted(set(overrides) - set(base))
    if unknown:
        raise InputError(f"unknown {subcommand} parameters: {unknown}")
    for key, value in overrides.items():
        base[key] = _coerce(key, base[key], value)
    return base


def load_config(path: Path | None, subcommand: str) -> tuple[dict, int | None, str | None]:
    """Return (params overrides, seed, output_dir) from a config file."""
    if path is None:
        return {}, None, None
    raw = json.loads(Path(path).read_text())
    if not isinstance(raw, dict):
        raise InputError("config must be a JSON object")
    if "params" not in raw:
        return raw, None, None
    extra = sorted(set(raw) - {"subcommand", "params", "seed", "output_dir"})
    if extra:
        raise InputError(f"unknown experiment config keys: {extra}")
    if raw.get("subcommand", subcommand) != subcommand:
        raise InputError(f"config is for {raw['subcommand']!r}, not {subcommand!r}")
    seed = raw.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed <= SEED_MAX):
        raise InputError("seed must be an unsigned 64-bit integer")
    return raw["params"], seed, raw.get("output_dir")


# ------------------------------------------------------------ experiments


def _require(cond: bool, msg: str):
    if not cond:
        raise InputError(msg)


def run_free_packet(p: dict, seed: int) -> list[Table]:
    _require(len(p["p0"]) == 2 and len(p["sigma"]) == 3, "p0 needs 2 entries and sigma 3")
    _require(p["samples"] >= 2 and p["points"] >= 8, "need samples >= 2 and points >= 8")
    pk = [Gaussian1(0.0, p["E0"], p["sigma"][0] ** 2, "time"),
          Gaussian1(0.0, p["p0"][0], p["sigma"][1] ** 2, "x"),
          Gaussian1(0.0, p["p0"][1], p["sigma"][2] ** 2, "y")]
    h = p["half_width"]
    axes = [Axis(n, -h, h, p["points"]) for n in "txy"]
    grid = Grid4.from_gaussians(axes, pk, comoving_velocity=p["E0"] / p["mass"])
    taus = np.linspace(0.0, p["tau_max"], p["samples"])
    rows = []
    prev = 0.0
    for tau in taus:
        grid = evolve(grid, None, float(tau - prev), 1, p["mass"]) if tau > prev else grid
        prev = float(tau)
        row = [float(tau)]
        for name, g in zip("txy", pk):
            mean, var = grid.moments(name)
            row += [mean, var, free_evolve(g, float(tau), p["mass"]).variance]
        row.append(grid.norm())
        rows.append(tuple(row))
    header = ["tau"] + [f"{a}_{b}" for a in "txy" for b in ("mean", "var", "var_analytic")] + ["norm"]
    return [("free_packet", header, rows)]


def run_scatter(p: dict, seed: int) -> list[Table]:
    model = AbcModel(p["m"], p["mu"], p["lam"])

    def packet(p3, sig):
        _require(len(p3) == 3 and len(sig) == 4, "momenta need 3 entries and sigmas 4")
        return Gaussian4.diagonal(np.zeros(4), FourMomentum.on_shell(p["m"], p3), sig, rep="momentum")

    phi1, phi2 = packet(p["p1"], p["sigma1"]), packet(p["p2"], p["sigma2"])
    cloud = gtf_scatter(model, phi1, phi2, p["theta"], p["mode"])
    axes = ["E", "px", "py", "pz"] if p["mode"] == "tqm" else ["px", "py", "pz"]
    offset = 0 if p["mode"] == "tqm" else 1
    s1 = np.diag(phi1.Sigma)[offset:]
    s2 = np.diag(phi2.Sigma)[offset:]
    cloud_rows = [(a, float(x), float(y), float(z)) for a, x, y, z in zip(axes, s1, s2, cloud.sigma_sq)]
    rng = np.random.default_rng(seed)
    ev_rows = []
    for i in range(int(p["events"])):
        ev = ScatterEvent.on_shell(p["m"], rng.normal(scale=p["event_scale"], size=3), rng.uniform(0, np.pi))
        ev_rows.append((i, ev.p1.E, ev.theta, exchanged_energy_tqm(model, ev)))
    return [("scatter_cloud", ["axis", "sigma1_sq", "sigma2_sq", "sigma3_sq"], cloud_rows),
            ("scatter_exchanged_energy", ["event", "E1", "theta", "w"], ev_rows)]


def run_slit(p: dict, seed: int) -> list[Table]:
    _require(len(p["probe_sigma"]) == 4 and len(p["probe_p"]) == 3, "probe_sigma needs 4 entries, probe_p 3")
    p0 = FourMomentum.on_shell(p["mass"], p["probe_p"])
    probe = Gaussian4.diagonal(np.zeros(4), p0, p["probe_sigma"], rep="momentum")
    rows = slit_sweep(p["gate_sigma_E"], probe, p["tau_bar"], p0.E, p["probe_clock_var"])
    return [("slit", ["sigma_E", "dt_sqm", "dt_tqm", "signal"], rows)]


def run_sword(p: dict, seed: int) -> list[Table]:
    cfg = SwordConfig.from_json(p)
    report = sword_trace(cfg)
    tables = []
    for tr in (report.sqm, report.tqm):
        tables.append((f"sword_{tr.mode}_hist", ["y", "t", "density"], tr.rows()))
        tables.append((f"sword_{tr.mode}_moments", ["y", "weight", "mean_t", "var_t"], tr.variance_rows()))
    pk = cfg.packets()
    if cfg.B == 0:
        ref_sqm = sqm_arrival(pk["x"], cfg.L, cfg.p0, m=cfg.fst_mass, relativistic=False, near_field=True).variance
        ref_t = tqm_time_part(pk["t"], cfg.tau_bar, m=cfg.fst_mass).variance
    else:
        ref_sqm = ref_t = float("nan")
    rows = [(y, a, b, int(pop), ref_sqm, ref_sqm + ref_t) for y, a, b, pop in report.comparison_rows()]
    tables.append(("sword_compare", ["y", "var_sqm", "var_tqm", "populated", "var_sqm_formula", "var_tqm_formula"],
                   rows))
    return tables


def run_loop(p: dict, seed: int) -> list[Table]:
    _require(len(p["p"]) == 3, "p needs 3 entries")
    cfg = LoopConfig(p["m"], p["mu"], FourMomentum.on_shell(p["m"], p["p"]))
    oracle_rows = []
    for tau in p["oracle_taus"]:
        res = loop_numeric_oracle(cfg, tau)
        ref = loop_fixed_tau(cfg, tau)
        oracle_rows.append((tau, res.value.real, res.value.imag, ref.real, ref.imag, res.tail, res.doubling_change))
    mass_rows = [(s,) + tuple(mass_correction(cfg, s)) for s in p["sigma_E"]]
    return [("loop_tau", ["tau", "re_L", "im_L"], tau_sweep_rows(cfg, p["taus"])),
            ("loop_omega", ["omega", "abs_L"], omega_curve_rows(cfg, p["omegas"])),
            ("loop_oracle", ["tau", "re_oracle", "im_oracle", "re_closed", "im_closed", "tail", "doubling_change"],
             oracle_rows),
            ("loop_mass_correction", ["sigma_E", "closed_form", "quadrature"], mass_rows)]


def run_merit(p: dict, seed: int) -> list[Table]:
    rows = merit_sweep(p["ratios"], p["sigmas"], p["rate_T"], int(p["trials"]), seed, p["test"], p["two_sided"])
    return [("merit", ["sigma_ratio", "N_analytic", "N_mc", "M"], rows)]


def run_selftest(p: dict, seed: int) -> list[Table]:
    rows = [(r.name, r.passed, r.error, r.tolerance) for r in run_checks()]
    return [("selftest", ["check", "passed", "error", "tolerance"], rows)]


RUNNERS: dict[str, Callable] = {
    "free-packet": run_free_packet,
    "scatter": run_scatter,
    "slit": run_slit,
    "sword": run_sword,
    "loop": run_loop,
    "merit": run_merit,
    "selftest": run_selftest,
}


# ------------------------------------------------------------------ output


def write_table(out: Path, name: str, header: list[str], rows: list[tuple], form: str) -> Path:
    if form == "csv":
        return write_csv(out / f"{name}.csv", header, rows)
    records = [{h: (v if isinstance(v, (str, bool)) else _json_number(v)) for h, v in zip(header, r)} for r in rows]
    return write_json(out / f"{name}.json", {"columns": header, "rows": records})


def _json_number(v):
    if isinstance(v, (int, np.integer)):
        return int(v)
    x = float(v)
    return float(fmt(x)) if math.isfinite(x) else None


def _seed(text: str) -> int:
    try:
        val = int(text, 0)
    except ValueError as exc:
        raise argparse.ArgumentTypeError("seed must be an integer") from exc
    if not 0 <= val <= SEED_MAX:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return val


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tqmkit", description="TQM/SQM numerical experiments.")
    parser.add_argument("--version", action="version", version=f"tqmkit {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in DEFAULTS:
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("--config", type=Path, help="JSON parameter file")
        sp.add_argument("--seed", type=_seed, help="unsigned 64-bit seed (default 0)")
        sp.add_argument("--out", type=Path, help="output directory (default ./tqmkit-out/<subcommand>)")
        sp.add_argument("--format", choices=("csv", "json"), default="csv", help="table format")
        sp.add_argument("--show-defaults", action="store_true", help="print the default parameters and exit")
    return parser


def run(args: argparse.Namespace) -> int:
    name = args.subcommand
    if args.show_defaults:
        print(json.dumps(DEFAULTS[name], indent=2, sort_keys=True))
        return EXIT_OK
    overrides, cfg_seed, cfg_out = load_config(args.config, name)
    params = resolve_params(name, overrides)
    seed = args.seed if args.seed is not None else (cfg_seed if cfg_seed is not None else 0)
    out = args.out or (Path(cfg_out) if cfg_out else Path("tqmkit-out") / name)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    tables = RUNNERS[name](params, seed)
    files = [write_table(out, t, h, rows, args.format).name for t, h, rows in tables]
    manifest = {
        "subcommand": name,
        "params": params,
        "seed": seed,
        "format": args.format,
        "outputs": files,
        "threads": thread_count(),
        "threads_env": ENV_VAR,
        "versions": {"tqmkit": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "wall_time_s": time.perf_counter() - start,
    }
    write_json(out / "manifest.json", manifest)
    if name == "selftest":
        failed = [r[0] for r in tables[0][2] if not r[1]]
        for check, passed, err, tol in tables[0][2]:
            print(f"{'PASS' if passed else 'FAIL'} {check} error={err:.3g} tol={tol:.3g}")
        return EXIT_FAILED if failed else EXIT_OK
    print(f"wrote {len(files)} table(s) to {out}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except (InputError, json.JSONDecodeError) as exc:
        print(f"tqmkit: invalid input: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except NumericalError as exc:
        print(f"tqmkit: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"tqmkit: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
