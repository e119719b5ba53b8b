"""Command line interface: configuration, validation and deterministic outputs."""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigurationError, SegkinError

log = logging.getLogger(__name__)

ALPHA_SWEEP = [float(a) for a in np.logspace(-1, 2, 20)]

_POTENTIAL = {
    "potential": (str, "polynomial_bump", "polynomial_bump | mollifier | tabulated"),
    "degree": (int, 6, "even degree of the polynomial bump"),
    "potential_table": (str, None, "two-column CSV for the tabulated potential"),
}

# name -> (type, default, help); types: int, float, str, bool, "floats"
SCHEMA: dict[str, dict[str, tuple]] = {
    "phase-diagram": {
        "beta_min": (float, 0.5, "smallest beta"),
        "beta_max": (float, 4.0, "largest beta"),
        "rho": (float, 2.0, "total density"),
        "n_samples": (int, 101, "number of beta samples"),
    },
    "front": {
        "beta": (float, 2.0, "inverse temperature"),
        "rho": (float, 2.0, "total density"),
        "L": (float, 10.0, "half length of the interval"),
        "nx": (int, 1024, "spatial nodes"),
        "tol": (float, 1e-10, "residual tolerance"),
        "max_iter": (int, 50000, "iteration cap"),
        "damping": (float, 0.5, "Picard damping in (0, 1]"),
        "initial_guess": (str, None, "CSV (x, rho1, rho2) starting profile"),
        **_POTENTIAL,
    },
    "dispersion": {
        "beta": (float, 2.0, "inverse temperature"),
        "k_max": (float, 6.0, "largest wave number"),
        "n_samples": (int, 100, "number of k samples"),
        **_POTENTIAL,
    },
    "eigen": {
        "beta": (float, 2.0, "inverse temperature"),
        "k": (float, 0.3, "wave number"),
        "alphas": ("floats", ALPHA_SWEEP, "comma separated collision strengths"),
        "nv": (int, 128, "Gauss-Hermite nodes"),
        "collision": (str, "bgk", "none | bgk | bgk_hard_sphere_frequency"),
        "nu0": (float, 1.0, "collision frequency scale"),
        "invariants": (str, "mixture", "mixture | species"),
        **_POTENTIAL,
    },
    "simulate": {
        "experiment": (str, "instability", "instability | stability"),
        "beta": (float, 2.0, "inverse temperature"),
        "equilibrium": (str, "front", "stability: front | pure-phase | mixed"),
        "k0": (float, 1.0, "instability: seeded wave number"),
        "deltas": ("floats", [1e-4, 1e-5, 1e-6], "instability: perturbation sizes"),
        "delta": (float, 1e-4, "stability: perturbation size"),
        "theta": (float, None, "escape threshold (default 0.1 of the equilibrium norm)"),
        "nx": (int, 64, "spatial nodes"),
        "nv": (int, 128, "velocity nodes"),
        "L": (float, 10.0, "stability: half length of the interval"),
        "dt": (float, 0.05, "time step"),
        "t_end": (float, 60.0, "final time"),
        "alpha": (float, 1.0, "collision strength"),
        "nu0": (float, 1.0, "collision frequency"),
        "collision": (str, "bgk", "none | bgk"),
        "transport": (str, "spectral", "spectral | muscl"),
        "baseline": (str, "companion", "stability: companion | equilibrium"),
        "c_bound": (float, 10.0, "stability: PASS bound on the wLinf ratio"),
        "every": (int, 1, "record diagnostics every n steps"),
        "seed": (int, None, "random phase of the seeded mode (default: symmetric seed)"),
        "snapshot_every": (int, 0, "write a phase-space snapshot every n records (0: off)"),
        **_POTENTIAL,
    },
    "characteristics": {
        "beta": (float, 2.0, "inverse temperature of the front"),
        "rho": (float, 2.0, "total density"),
        "L": (float, 10.0, "half length of the interval"),
        "nx": (int, 256, "spatial nodes"),
        "species": (int, 1, "species of the particle (1 or 2)"),
        "field": (str, "front", "front | zero"),
        "t0": (float, 0.0, "start time"),
        "x": (float, 0.3, "start position"),
        "v": (float, 0.8, "start velocity"),
        "s_span": (float, 20.0, "integration span"),
        "tol": (float, 1e-12, "integrator tolerance"),
        "n_samples": (int, 201, "output samples"),
        **_POTENTIAL,
    },
    "verify": {
        "paths": ("strs", [], "files to check"),
    },
}


@dataclass(frozen=True)
class RunConfig:
    """Validated parameters of one subcommand.  Output location is not part of it."""

    subcommand: str
    params: dict

    def canonical(self) -> str:
        return canonical_json({"subcommand": self.subcommand, "params": self.params})

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def to_json(self) -> str:
        return self.canonical() + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        data = json.loads(text)
        if set(data) != {"subcommand", "params"}:
            raise ConfigurationError("config JSON needs exactly 'subcommand' and 'params'")
        return validate(data["subcommand"], data["params"])


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


# ------------------------------------------------------------------ validation


def _coerce(kind, value, name: str):
    if value is None:
        return None
    if kind in ("floats", "strs"):
        if isinstance(value, str):
            value = [p for p in value.split(",") if p.strip()]
        if not isinstance(value, (list, tuple)):
            raise ConfigurationError(f"{name} must be a list")
        return [float(p) if kind == "floats" else str(p) for p in value]
    if kind is int:
        if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
            raise ConfigurationError(f"{name} must be an integer")
        return int(value)
    if kind is float:
        if isinstance(value, bool):
            raise ConfigurationError(f"{name} must be a number")
        out = float(value)
        if not math.isfinite(out):
            raise ConfigurationError(f"{name} must be finite")
        return out
    return str(value)


def _check(sub: str, p: dict) -> list[str]:
    bad = []

    def positive(*names):
        for n in names:
            if n in p and p[n] is not None and not p[n] > 0:
                bad.append(f"{n} must be positive")

    positive("beta", "rho", "L", "nx", "nv", "tol", "max_iter", "k", "k_max", "n_samples", "dt",
             "nu0", "k0", "delta", "theta", "c_bound", "every", "beta_min", "beta_max")
    if "potential" in p:
        if p["potential"] not in ("polynomial_bump", "mollifier", "tabulated"):
            bad.append(f"unknown potential {p['potential']!r}")
        if p["potential"] == "tabulated" and not p.get("potential_table"):
            bad.append("tabulated potential needs potential_table")
        if p["potential"] == "polynomial_bump" and (p["degree"] < 2 or p["degree"] % 2):
            bad.append("degree must be an even integer >= 2")
    if sub == "phase-diagram":
        if p["beta_min"] >= p["beta_max"]:
            bad.append("beta_min must be below beta_max")
        if p["n_samples"] < 2:
            bad.append("n_samples must be >= 2")
    if sub in ("front", "characteristics") and p.get("field", "front") == "front":
        if p["beta"] * p["rho"] <= 2.0:
            bad.append(f"subcritical beta for front (beta * rho = {p['beta'] * p['rho']:g} <= 2)")
    if sub == "front" and not 0 < p["damping"] <= 1:
        bad.append("damping must lie in (0, 1]")
    if sub == "eigen":
        if any(a < 0 for a in p["alphas"]) or not p["alphas"]:
            bad.append("alphas must be a nonempty list of non negative numbers")
        if p["collision"] not in ("none", "bgk", "bgk_hard_sphere_frequency"):
            bad.append(f"unknown collision {p['collision']!r}")
        if p["invariants"] not in ("mixture", "species"):
            bad.append(f"unknown invariants {p['invariants']!r}")
    if sub == "simulate":
        if p["experiment"] not in ("instability", "stability"):
            bad.append(f"unknown experiment {p['experiment']!r}")
        if p["equilibrium"] not in ("front", "pure-phase", "mixed"):
            bad.append(f"unknown equilibrium {p['equilibrium']!r}")
        if p["transport"] not in ("spectral", "muscl"):
            bad.append(f"unknown transport {p['transport']!r}")
        if p["collision"] not in ("none", "bgk"):
            bad.append("simulate supports collision none | bgk")
        if p["baseline"] not in ("companion", "equilibrium"):
            bad.append(f"unknown baseline {p['baseline']!r}")
        if not p["deltas"] or any(d <= 0 for d in p["deltas"]):
            bad.append("deltas must be positive")
        if p["alpha"] < 0 or p["t_end"] <= 0:
            bad.append("alpha must be >= 0 and t_end > 0")
        if p["snapshot_every"] < 0:
            bad.append("snapshot_every must be >= 0")
        if p["experiment"] == "stability" and p["equilibrium"] != "mixed" and p["beta"] * 2.0 <= 2.0:
            bad.append(f"subcritical beta for {p['equilibrium']} (beta * rho <= 2)")
        if p["experiment"] == "instability" and p["beta"] <= 1.0:
            bad.append("instability experiment needs beta > 1")
        if not bad:
            bad.extend(_cfl_violations(p))
    if sub == "characteristics":
        if p["species"] not in (1, 2):
            bad.append("species must be 1 or 2")
        if p["field"] not in ("front", "zero"):
            bad.append(f"unknown field {p['field']!r}")
        if p["s_span"] == 0 or p["n_samples"] < 2:
            bad.append("s_span must be nonzero and n_samples >= 2")
    return bad


def _cfl_violations(p: dict) -> list[str]:
    """Free-streaming part of the CFL bound (the force part is checked while stepping)."""
    from .kernel import default_vmax
    if p["experiment"] == "instability":
        h = 2.0 * math.pi / p["k0"] / p["nx"]
    else:
        h = 2.0 * p["L"] / p["nx"]
    limit = 4.0 if p["transport"] == "spectral" else 1.0
    number = p["dt"] * default_vmax(p["beta"]) / h
    if number > limit:
        return [f"CFL inconsistency: dt vmax / h = {number:.3g} exceeds {limit:g}"]
    return []


def validate(subcommand: str, values: dict) -> RunConfig:
    """Fill defaults, coerce types and collect every violation."""
    if subcommand not in SCHEMA:
        raise ConfigurationError(f"unknown subcommand {subcommand!r}")
    schema = SCHEMA[subcommand]
    bad = [f"unknown key {k!r}" for k in values if k not in schema]
    params = {}
    for name, (kind, default, _) in schema.items():
        try:
            params[name] = _coerce(kind, values.get(name, default), name)
        except (ValueError, TypeError, ConfigurationError) as exc:
            bad.append(str(exc) if isinstance(exc, ConfigurationError) else f"{name}: {exc}")
    if not bad:
        bad = _check(subcommand, params)
    if bad:
        raise ConfigurationError("invalid configuration: " + "; ".join(bad), bad)
    return RunConfig(subcommand, params)


class _Parser(argparse.ArgumentParser):
    """Argument errors become ConfigurationError so they are reported as JSON."""

    def error(self, message):
        raise ConfigurationError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="segkin", description=__doc__)
    parser.add_argument("--version", action="version", version=f"segkin {__version__}")
    subs = parser.add_subparsers(dest="subcommand", required=True)
    for name, schema in SCHEMA.items():
        sp = subs.add_parser(name)
        if name == "verify":
            sp.add_argument("paths", nargs="+", help="output files to check")
            continue
        sp.add_argument("--config", help="JSON config file (flags override it)")
        sp.add_argument("--out-dir", default=".", help="output directory")
        sp.add_argument("--print-config", action="store_true",
                        help="print the validated canonical config and exit")
        sp.add_argument("-v", "--verbose", action="store_true")
        for key, (kind, _, help_) in schema.items():
            flag = "--" + key.replace("_", "-")
            sp.add_argument(flag, dest=key, default=None, help=help_,
                            type=str if kind in ("floats", "strs") else kind)
    return parser


def parse_and_validate(argv=None) -> tuple[RunConfig, argparse.Namespace]:
    """Defaults, then the config file, then explicit flags."""
    args = build_parser().parse_args(argv)
    if args.subcommand == "verify":
        return RunConfig("verify", {"paths": list(args.paths)}), args
    values: dict = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {args.config}: {exc}") from exc
        if isinstance(data, dict) and set(data) == {"subcommand", "params"}:
            if data["subcommand"] != args.subcommand:
                raise ConfigurationError(
                    f"config is for {data['subcommand']!r}, not {args.subcommand!r}")
            data = data["params"]
        if not isinstance(data, dict):
            raise ConfigurationError("config file must hold a JSON object")
        values.update(data)
    for key in SCHEMA[args.subcommand]:
        if getattr(args, key, None) is not None:
            values[key] = getattr(args, key)
    return validate(args.subcommand, values), args


# --------------------------------------------------------------------- outputs


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    return "nan" if math.isnan(x) else repr(x)


def _header_lines(config: RunConfig, extra: dict | None = None) -> list[str]:
    lines = [f"# segkin {__version__}", f"# config_hash: {config.hash}",
             f"# config: {config.canonical()}"]
    for k, v in (extra or {}).items():
        lines.append(f"# {k}: {v}")
    return lines


def write_csv(path: Path, config: RunConfig, columns, rows, extra: dict | None = None) -> None:
    buf = io.StringIO()
    for line in _header_lines(config, extra):
        buf.write(line + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(x) for x in row])
    path.write_text(buf.getvalue(), encoding="utf-8")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return None if not math.isfinite(float(obj)) else float(obj)
    return obj


def write_json(path: Path, config: RunConfig, summary: dict) -> None:
    doc = {"segkin_version": __version__, "config_hash": config.hash,
           "config": json.loads(config.canonical()), "summary": _jsonable(summary)}
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def read_csv_table(path: str | Path) -> tuple[dict, list[str], list[list[str]]]:
    """(metadata, header, rows) of a segkin CSV."""
    meta, body = {}, []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            meta[key] = value
        elif line:
            body.append(line)
    rows = list(csv.reader(body))
    return meta, (rows[0] if rows else []), rows[1:]


# -------------------------------------------------------------------- dispatch


def _potential(p: dict):
    from .kernel import make_potential
    return make_potential(p["potential"], p["degree"], p["potential_table"])


def _run_phase_diagram(cfg: RunConfig, out: Path) -> dict:
    from .phasediag import bifurcation_scan
    p = cfg.params
    points = bifurcation_scan(p["beta_min"], p["beta_max"], p["rho"], p["n_samples"])
    write_csv(out / "phase_diagram.csv", cfg, ["beta", "m", "rho_plus", "rho_minus", "regime"],
              (pt.as_row() for pt in points))
    return {"files": ["phase_diagram.csv"]}


def _load_initial(path: str, grid) -> tuple[np.ndarray, np.ndarray]:
    """Columns (x, rho1, rho2) of a CSV (comment lines and a header row allowed)."""
    _, header, rows = read_csv_table(path)
    try:
        arr = np.array([header] + rows if header else rows, dtype=float)
    except ValueError:
        arr = np.array(rows, dtype=float)
    if arr.ndim != 2 or arr.shape[1] < 3 or len(arr) < 2:
        raise ConfigurationError("initial guess CSV needs columns x, rho1, rho2")
    if np.any(np.diff(arr[:, 0]) <= 0):
        raise ConfigurationError("initial guess x column must increase")
    return np.interp(grid.x, arr[:, 0], arr[:, 1]), np.interp(grid.x, arr[:, 0], arr[:, 2])


def _run_front(cfg: RunConfig, out: Path) -> dict:
    from .front import build_A, excess_free_energy, solve_front, spectral_gap, tail_decay_rate
    from .kernel import SpatialGrid
    p = cfg.params
    grid = SpatialGrid(p["L"], p["nx"], "pinned")
    pot = _potential(p)
    initial = _load_initial(p["initial_guess"], grid) if p["initial_guess"] else None
    prof = solve_front(p["beta"], grid, tol=p["tol"], max_iter=p["max_iter"], damping=p["damping"],
                       rho_total=p["rho"], pot=pot, initial=initial)
    fe = excess_free_energy(prof)
    gap = spectral_gap(build_A(prof))
    tail = tail_decay_rate(prof)
    grid_meta = {"grid": f"pinned L={p['L']!r} nx={p['nx']} h={grid.h!r}", "potential": pot.name}
    write_csv(out / "front.csv", cfg, ["x", "rho1", "rho2"],
              zip(grid.x, prof.rho1, prof.rho2), grid_meta)
    summary = {"C": prof.chem_pot, "residual": prof.residual, "iterations": prof.iterations,
               "converged": prof.converged, "excess_free_energy": fe.value,
               "tail_truncation_warning": fe.truncation_warning, "gap": gap.gap,
               "null_residual": gap.null_residual, "decay_rate": tail.rate,
               "rho_plus": prof.phase.rho_plus, "rho_minus": prof.phase.rho_minus,
               "midpoint": prof.midpoint(), "potential": pot.name}
    write_json(out / "front.json", cfg, summary)
    return summary


def _run_dispersion(cfg: RunConfig, out: Path) -> dict:
    from .dispersion import penrose_scan
    p = cfg.params
    pot = _potential(p)
    scan = penrose_scan(p["beta"], p["k_max"], p["n_samples"], pot)
    write_csv(out / "dispersion.csv", cfg, ["k", "beta_uhat", "lambda"],
              ((k, p["beta"] * u, lam) for k, u, lam in scan.rows()), {"potential": pot.name})
    summary = {"band": [list(b) for b in scan.band.intervals], "nonempty": scan.band.nonempty,
               "potential": pot.name}
    write_json(out / "dispersion.json", cfg, summary)
    return summary


def _run_eigen(cfg: RunConfig, out: Path) -> dict:
    from .dispersion import CollisionModel, alpha_sweep, growth_rate, purely_imaginary
    from .kernel import VelocityGrid
    p = cfg.params
    pot = _potential(p)
    model = CollisionModel(p["collision"], p["nu0"], 1.0, p["invariants"])
    results = alpha_sweep(p["beta"], p["k"], p["alphas"], model,
                          VelocityGrid.gauss_hermite(p["beta"], p["nv"]), pot)
    rows = [(r.alpha, r.lam.real, r.lam.imag, r.residual,
             bool(purely_imaginary(r.eigenvalues).size) if r.alpha > 0 else False)
            for r in results]
    write_csv(out / "eigen.csv", cfg, ["alpha", "re_lambda", "im_lambda", "residual",
                                       "imaginary_eigenvalue"], rows, {"potential": pot.name})
    summary = {"penrose_lambda": growth_rate(p["beta"], p["k"], pot),
               "all_unstable": all(r.lam.real > 0 for r in results),
               "results": [r.summary() for r in results]}
    write_json(out / "eigen.json", cfg, summary)
    return summary


def _record_rows(records):
    from .kinetics.diagnostics import FIELDS
    return FIELDS, [r.row() for r in records]


def _run_simulate(cfg: RunConfig, out: Path) -> dict:
    from .dispersion import CollisionModel
    from .kinetics import SimConfig, run_instability_experiment, run_stability_experiment
    p = cfg.params
    pot = _potential(p)
    sim = SimConfig(dt=p["dt"], beta=p["beta"], t_end=p["t_end"],
                    collision=CollisionModel(p["collision"], p["nu0"], p["alpha"]),
                    potential=pot, transport=p["transport"], output_every=p["every"])
    files = []
    if p["experiment"] == "instability":
        phase = 0.0
        if p["seed"] is not None:
            phase = float(np.random.default_rng(p["seed"]).uniform(0.0, 2.0 * math.pi))
        rep = run_instability_experiment(p["beta"], p["k0"], p["deltas"], sim, theta=p["theta"],
                                         nx=p["nx"], nv=p["nv"], every=p["every"], phase=phase)
        for i, r in enumerate(sorted(rep.runs, key=lambda r: -r.delta)):
            cols, rows = _record_rows(r.records)
            name = f"diagnostics_{i}.csv"
            write_csv(out / name, cfg, cols, rows, {"delta": repr(r.delta)})
            files.append(name)
        summary = {"linear_rate": rep.linear_rate, "theta": rep.theta, "phase": phase,
                   "runs": [{"delta": r.delta, "fitted_rate": r.fitted_rate,
                             "fit_window": list(r.fit_window), "escape_time": r.escape_time}
                            for r in rep.runs],
                   "escape_slope": rep.escape_slope, "slope_error": rep.slope_error,
                   "rate_pass": bool(rep.rate_error <= 0.05),
                   "slope_pass": rep.slope_error is not None and rep.slope_error <= 0.10}
        if p["snapshot_every"]:
            files += _instability_snapshots(cfg, out, rep, sim, phase)
    else:
        rep = run_stability_experiment(p["beta"], p["equilibrium"], p["delta"], sim, nx=p["nx"],
                                       nv=p["nv"], half_length=p["L"], c_bound=p["c_bound"],
                                       every=p["every"], baseline=p["baseline"])
        cols, rows = _record_rows(rep.records)
        write_csv(out / "diagnostics.csv", cfg, cols, rows)
        files.append("diagnostics.csv")
        summary = {"equilibrium": rep.equilibrium, "baseline": rep.baseline, "wLinf0": rep.wLinf0,
                   "sup_wLinf": rep.sup_wLinf, "ratio": rep.ratio, "raw_ratio": rep.raw_ratio,
                   "c_bound": rep.c_bound, "pass": rep.passed, "hcal_increase": rep.hcal_increase}
    summary["files"] = files
    write_json(out / "summary.json", cfg, summary)
    return summary


def _instability_snapshots(cfg: RunConfig, out: Path, rep, sim, phase: float) -> list[str]:
    """Replay the largest-delta run and store snapshots of the recorded states."""
    from .kernel import SpatialGrid, VelocityGrid
    from .kinetics import Reference, maxwellian_state, run, seeded_state, write_snapshot
    from .kinetics.experiments import linear_mode
    from .dispersion import CollisionModel
    p = cfg.params
    xg = SpatialGrid.periodic_cell(2.0 * math.pi / p["k0"], p["nx"])
    vg = VelocityGrid.uniform(p["beta"], p["nv"])
    model = CollisionModel(p["collision"], p["nu0"], p["alpha"], "species")
    op, res = linear_mode(p["beta"], p["k0"], model, pot=sim.potential)
    delta = max(p["deltas"])
    state = seeded_state(xg, vg, p["beta"], p["k0"], delta, op, res, phase)
    ref = Reference(maxwellian_state(xg, vg, (1.0, 1.0), p["beta"]), p["beta"], p["beta"],
                    potential=sim.potential)
    names: list[str] = []
    count = [0]

    def snap(s):
        if count[0] % p["snapshot_every"] == 0:
            name = f"snapshot_{len(names):05d}.bin"
            write_snapshot(out / name, s.f1, s.f2, s.t)
            names.append(name)
        count[0] += 1

    escape = next((r.escape_time for r in rep.runs if r.delta == delta), None)
    run(state, sim, ref, t_end=escape if escape is not None else sim.t_end, every=p["every"],
        snapshot=snap)
    index = {"snapshots": names,
             "sha256": {n: hashlib.sha256((out / n).read_bytes()).hexdigest() for n in names}}
    write_json(out / "snapshots.json", cfg, index)
    return names + ["snapshots.json"]


def _run_characteristics(cfg: RunConfig, out: Path) -> dict:
    from .front import solve_front
    from .kernel import SpatialGrid
    from .kinetics import StaticField, integrate_characteristics
    p = cfg.params
    pot = _potential(p)
    grid = SpatialGrid(p["L"], p["nx"], "pinned")
    if p["field"] == "zero":
        fld = StaticField.zero(grid)
    else:
        prof = solve_front(p["beta"], grid, rho_total=p["rho"], pot=pot)
        other = prof.rho2 if p["species"] == 1 else prof.rho1
        halo = prof.halo2 if p["species"] == 1 else prof.halo1
        fld = StaticField(grid, other, halo, pot)
    traj = integrate_characteristics(fld, (p["t0"], p["x"], p["v"]), p["s_span"], p["tol"],
                                     p["n_samples"])
    cols = ["s", "X", "V", "dXdv", "dVdv", "energy"]
    write_csv(out / "characteristics.csv", cfg, cols,
              ([getattr(st, c) for c in cols] for st in traj.states))
    summary = {"energy_drift": traj.energy_drift(), "exited_range": traj.exited,
               "final": {c: getattr(traj.states[-1], c) for c in cols}}
    write_json(out / "characteristics.json", cfg, summary)
    return summary


def verify_file(path: str | Path) -> tuple[bool, str]:
    """Recompute the config hash embedded in a segkin CSV or JSON output."""
    path = Path(path)
    try:
        if path.suffix == ".json":
            doc = json.loads(path.read_text())
            stored, config = doc.get("config_hash"), doc.get("config")
            if config is None:
                return False, "no embedded config"
            recomputed = RunConfig(config["subcommand"], config["params"]).hash
            if "sha256" in doc.get("summary", {}):
                for name, digest in doc["summary"]["sha256"].items():
                    if hashlib.sha256((path.parent / name).read_bytes()).hexdigest() != digest:
                        return False, f"payload digest mismatch for {name}"
        else:
            meta, _, _ = read_csv_table(path)
            stored = meta.get("config_hash")
            if "config" not in meta:
                return False, "no embedded config"
            config = json.loads(meta["config"])
            recomputed = RunConfig(config["subcommand"], config["params"]).hash
    except (OSError, ValueError, KeyError, TypeError) as exc:
        return False, f"unreadable: {exc}"
    if stored != recomputed:
        return False, f"hash mismatch (stored {stored}, recomputed {recomputed})"
    return True, recomputed


def _run_verify(cfg: RunConfig, out: Path | None) -> dict:
    results = {str(p): verify_file(p) for p in cfg.params["paths"]}
    for p, (ok, msg) in results.items():
        print(f"{'OK' if ok else 'FAIL'} {p} {msg}")
    if not all(ok for ok, _ in results.values()):
        raise SegkinError("verification failed for: " + ", ".join(
            p for p, (ok, _) in results.items() if not ok))
    return {"verified": list(results)}


HANDLERS = {
    "phase-diagram": _run_phase_diagram,
    "front": _run_front,
    "dispersion": _run_dispersion,
    "eigen": _run_eigen,
    "simulate": _run_simulate,
    "characteristics": _run_characteristics,
    "verify": _run_verify,
}


def dispatch(config: RunConfig, out_dir: str | Path = ".") -> dict:
    """Run the subcommand and write its artifacts into ``out_dir``."""
    out = Path(out_dir)
    if config.subcommand != "verify":
        out.mkdir(parents=True, exist_ok=True)
    return HANDLERS[config.subcommand](config, out)


def _error_json(exc: BaseException) -> str:
    doc = {"error": type(exc).__name__, "message": str(exc)}
    violations = getattr(exc, "violations", None)
    if violations:
        doc["violations"] = list(violations)
    residual = getattr(exc, "residual", None)
    if residual is not None:
        doc["residual"] = residual
    return json.dumps(_jsonable(doc), sort_keys=True)


def main(argv=None) -> int:
    try:
        config, args = parse_and_validate(argv)
        logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if getattr(args, "print_config", False):
            sys.stdout.write(config.to_json())
            return 0
        dispatch(config, getattr(args, "out_dir", "."))
        return 0
    except SegkinError as exc:
        print(_error_json(exc), file=sys.stderr)
        return 2 if isinstance(exc, ConfigurationError) else 1


if __name__ == "__main__":
    sys.exit(main())
