"""``holoflow`` command-line front end.

    holoflow <integrate|surface|spectrum|classify|residual> --config run.json [--out DIR] [--workers N]

Every run writes its files plus ``manifest.json`` into the output
directory. Exit codes: 0 success, 1 configuration error, 2 singularity,
3 step-size underflow.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import HoloflowError, IntegrationFailure, SingularityEncountered
from .expr import eval_ast, parse_expression, variables
from .field import VectorField, builtin_field, expression_field
from .integrator import (SINGULARITY, STEP_UNDERFLOW, IntegratorConfig, TimePath, integrate_path,
                         trajectory_status, write_trajectory_csv)
from .io import fmt, write_json
from .sim import (SimGraph, SpectralSettings, benchmark_truth, invariance_residual, known_graph,
                  resolve_band)
from .spectral import classify_sim_membership, imaginary_time_spectrum, write_spectrum_csv
from .surface import project_surface_svg, sample_surface, tau_total_variation, write_mesh_csv

EXIT_OK, EXIT_CONFIG, EXIT_SINGULAR, EXIT_UNDERFLOW = 0, 1, 2, 3
COMMANDS = ("integrate", "surface", "spectrum", "classify", "residual")


class ConfigError(HoloflowError):
    pass


def parse_complex(value, where: str) -> complex:
    """Number, ``{"re": .., "im": ..}``, or an expression string using ``i`` and ``pi``."""
    if isinstance(value, bool):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, dict):
        try:
            return complex(float(value.get("re", 0.0)), float(value.get("im", 0.0)))
        except (TypeError, ValueError):
            raise ConfigError(f"{where}: bad complex object {value!r}") from None
    if isinstance(value, str):
        try:
            ast = parse_expression(value, 1)
            if variables(ast):
                raise ConfigError(f"{where}: variables are not allowed in {value!r}")
            return eval_ast(ast, [0.0], {"i": 1j})
        except HoloflowError as exc:
            raise ConfigError(f"{where}: cannot read {value!r} as a complex number ({exc})") from None
    raise ConfigError(f"{where}: expected a number, got {value!r}")


def _require(block: dict, key: str, where: str):
    if key not in block:
        raise ConfigError(f"missing required key '{where + '.' if where else ''}{key}'")
    return block[key]


@dataclass
class RunConfig:
    raw: dict
    field: VectorField
    system_name: str | None  # builtin name, None for expression systems
    gamma: float | None
    initial_values: list[np.ndarray]
    output_dir: Path
    workers: int | None
    integrator: IntegratorConfig

    @property
    def digest(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


def _system(raw: dict):
    system = _require(raw, "system", "")
    if not isinstance(system, dict):
        raise ConfigError("'system' must be an object")
    has_builtin = "builtin" in system
    has_expr = "expressions" in system
    if has_builtin == has_expr:
        raise ConfigError("'system' needs exactly one of 'builtin' or 'expressions'")
    params = system.get("params", {})
    try:
        if has_builtin:
            name = system["builtin"]
            f = builtin_field(name, **params)
            return f, name, f.param_map.get("gamma")
        exprs = system["expressions"]
        if not isinstance(exprs, list) or not exprs:
            raise ConfigError("'system.expressions' must be a non-empty list of strings")
        dim = system.get("dimension", len(exprs))
        if dim != len(exprs):
            raise ConfigError(f"'system.dimension' is {dim} but {len(exprs)} expressions were given")
        return expression_field(exprs, params), None, None
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"system: {exc}") from None


def load_config(path, out: str | None = None, workers: int | None = None) -> RunConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    f, name, gamma = _system(raw)
    inits = []
    for i, z in enumerate(raw.get("initial_values", [])):
        if not isinstance(z, list) or len(z) != f.dimension:
            raise ConfigError(f"initial_values[{i}] must be a list of {f.dimension} values")
        inits.append(np.array([parse_complex(v, f"initial_values[{i}]") for v in z]))
    integ = raw.get("integrator", {})
    try:
        icfg = IntegratorConfig(**integ)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"integrator: {exc}") from None
    output_dir = Path(out or raw.get("output_dir", "holoflow_out"))
    if workers is None:
        workers = raw.get("workers")
    if workers is None and os.environ.get("HOLOFLOW_WORKERS"):
        workers = int(os.environ["HOLOFLOW_WORKERS"])
    if workers is None:
        workers = os.cpu_count() or 1
    return RunConfig(raw, f, name, gamma, inits, output_dir, workers, icfg)


def _pmap(fn, items, workers):
    """Ordered map, optionally over a process pool; order never depends on scheduling."""
    items = list(items)
    if workers and workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


def _need_initial(cfg: RunConfig):
    if not cfg.initial_values:
        raise ConfigError("'initial_values' must contain at least one initial value")


def _worst(statuses) -> int:
    if STEP_UNDERFLOW in statuses:
        return EXIT_UNDERFLOW
    if SINGULARITY in statuses:
        return EXIT_SINGULAR
    return EXIT_OK


# --- integrate ---------------------------------------------------------------

def _integrate_one(args):
    f, z0, path, icfg = args
    return integrate_path(f, z0, path, icfg)


def cmd_integrate(cfg: RunConfig):
    _need_initial(cfg)
    pts = _require(cfg.raw, "path", "")
    if not isinstance(pts, list):
        raise ConfigError("'path' must be a list of complex waypoints")
    try:
        path = TimePath([parse_complex(p, f"path[{i}]") for i, p in enumerate(pts)])
    except ValueError as exc:
        raise ConfigError(f"path: {exc}") from None
    trajs = _pmap(_integrate_one, [(cfg.field, z, path, cfg.integrator) for z in cfg.initial_values],
                  cfg.workers)
    files, info = [], []
    for i, traj in enumerate(trajs):
        csv_name, status_name = f"trajectory_{i:03d}.csv", f"trajectory_{i:03d}.status.json"
        write_trajectory_csv(traj, cfg.output_dir / csv_name)
        write_json(trajectory_status(traj), cfg.output_dir / status_name)
        files += [csv_name, status_name]
        info.append({"index": i, "status": traj.status})
    return files, {"runs": info}, _worst({t.status for t in trajs})


# --- surface -----------------------------------------------------------------

def _surface_settings(block):
    sig = [parse_complex(v, "surface.sigma").real for v in _require(block, "sigma", "surface")]
    tau = [parse_complex(v, "surface.tau").real for v in _require(block, "tau", "surface")]
    if len(sig) != 2 or len(tau) != 2:
        raise ConfigError("'surface.sigma' and 'surface.tau' must be [lo, hi] pairs")
    return sig, tau, int(block.get("n_sigma", 41)), int(block.get("n_tau", 41)), \
        list(block.get("projection", ["re1", "re2", "im2"]))


def cmd_surface(cfg: RunConfig):
    _need_initial(cfg)
    if not cfg.raw.get("surface"):
        raise ConfigError("missing required key 'surface'")
    sig, tau, ns, nt, proj = _surface_settings(cfg.raw["surface"])
    files, info, warnings = [], [], 0
    for i, z0 in enumerate(cfg.initial_values):
        try:
            mesh = sample_surface(cfg.field, z0, sig, tau, ns, nt, cfg.integrator, workers=cfg.workers or 1)
        except ValueError as exc:
            raise ConfigError(f"surface: {exc}") from None
        mesh_name, svg_name = f"mesh_{i:03d}.csv", f"surface_{i:03d}.svg"
        write_mesh_csv(mesh, cfg.output_dir / mesh_name)
        try:
            svg = project_surface_svg(mesh, cfg.output_dir / svg_name, proj)
        except ValueError as exc:
            raise ConfigError(f"surface.projection: {exc}") from None
        failed = int((~mesh.valid).sum())
        warnings += failed
        files += [mesh_name, svg_name]
        info.append({"index": i, "failed_nodes": failed, "failure_fraction": mesh.failure_fraction,
                     "tau_total_variation": tau_total_variation(mesh), **svg})
    if warnings:
        print(f"warning: {warnings} mesh node(s) failed and were masked", file=sys.stderr)
    return files, {"runs": info, "warnings": warnings}, EXIT_OK


# --- spectrum / classify -----------------------------------------------------

def _spectral_settings(cfg: RunConfig) -> SpectralSettings:
    block = dict(cfg.raw.get("spectral", {}))
    known = {"sigma_anchor", "tau_span", "n", "window", "epsilon", "power_floor", "band",
             "slow_dimension", "equilibrium"}
    unknown = set(block) - known
    if unknown:
        raise ConfigError(f"unknown keys in 'spectral': {sorted(unknown)}")
    if "tau_span" in block:
        block["tau_span"] = parse_complex(block["tau_span"], "spectral.tau_span").real
    if "band" in block and block["band"] is not None:
        block["band"] = tuple(float(b) for b in block["band"])
    if "equilibrium" in block and block["equilibrium"] is not None:
        block["equilibrium"] = tuple(parse_complex(v, "spectral.equilibrium") for v in block["equilibrium"])
    return SpectralSettings(**block)


def _spectrum_one(args):
    f, z0, s, icfg = args
    try:
        return imaginary_time_spectrum(f, z0, s.sigma_anchor, s.tau_span, s.n, s.window, icfg), None
    except IntegrationFailure as exc:
        return None, exc


def _failure_status(exc) -> str:
    return SINGULARITY if isinstance(exc, SingularityEncountered) else STEP_UNDERFLOW


def cmd_spectrum(cfg: RunConfig):
    _need_initial(cfg)
    s = _spectral_settings(cfg)
    results = _pmap(_spectrum_one, [(cfg.field, z, s, cfg.integrator) for z in cfg.initial_values],
                    cfg.workers)
    files, info, statuses = [], [], set()
    for i, (spec, exc) in enumerate(results):
        if spec is None:
            statuses.add(_failure_status(exc))
            info.append({"index": i, "status": _failure_status(exc), "message": str(exc)})
            continue
        name = f"spectrum_{i:03d}.csv"
        write_spectrum_csv(spec, cfg.output_dir / name)
        files.append(name)
        info.append({"index": i, "status": "completed", "peaks": list(spec.peaks(3))})
    return files, {"runs": info}, _worst(statuses)


def _real_point(z) -> bool:
    return bool(np.all(np.asarray(z).imag == 0))


def cmd_classify(cfg: RunConfig):
    _need_initial(cfg)
    s = _spectral_settings(cfg)
    try:
        band = resolve_band(cfg.field, s)
    except ValueError as exc:
        raise ConfigError(f"spectral: {exc}") from None
    s_band = SpectralSettings(**{**s.__dict__, "band": tuple(float(b) for b in band)})
    results = _pmap(_spectrum_one, [(cfg.field, z, s_band, cfg.integrator) for z in cfg.initial_values],
                    cfg.workers)
    files, statuses = [], set()
    has_truth = cfg.system_name is not None and all(_real_point(z) for z in cfg.initial_values)
    points = []
    for i, (spec, exc) in enumerate(results):
        z0 = cfg.initial_values[i]
        entry = {"index": i, "point": [[v.real, v.imag] for v in z0]}
        if spec is None:
            statuses.add(_failure_status(exc))
            entry.update(verdict="Unclassified", message=str(exc))
        else:
            report = classify_sim_membership(spec, s_band.band, s.epsilon, s.power_floor)
            name = f"classify_{i:03d}.json"
            write_json(report.to_dict(), cfg.output_dir / name)
            files.append(name)
            entry.update(verdict=report.verdict, ratio=report.ratio)
        points.append(entry)
    summary = {"band": list(s_band.band), "points": points}
    if has_truth:
        pts = [tuple(float(v.real) for v in z) for z in cfg.initial_values]
        entries = [_validation_entry(cfg, p, r) for p, r in zip(pts, points)]
        table = {
            "system": cfg.system_name,
            "gamma": cfg.gamma,
            "band": list(s_band.band),
            "total": len(entries),
            "correct": sum(e["outcome"] == "correct" for e in entries),
            "incorrect": sum(e["outcome"] == "incorrect" for e in entries),
            "unclassified": sum(e["outcome"] == "unclassified" for e in entries),
            "points": entries,
        }
        write_json(table, cfg.output_dir / "validation.json")
        files.append("validation.json")
        summary["validation"] = {k: table[k] for k in ("total", "correct", "incorrect", "unclassified")}
    return files, summary, _worst(statuses)


def _validation_entry(cfg, point, result):
    truth = benchmark_truth(cfg.system_name, cfg.gamma, point)
    verdict = result["verdict"]
    if verdict == "Unclassified":
        outcome = "unclassified"
    elif verdict == truth.verdict or (verdict == "Equilibrium" and truth.verdict == "OnSIM"):
        outcome = "correct"
    else:
        outcome = "incorrect"
    return {"point": list(point), "truth": truth.verdict, "distance": truth.distance,
            "verdict": verdict, "ratio": result.get("ratio"), "outcome": outcome}


# --- residual ----------------------------------------------------------------

def _graph(cfg: RunConfig) -> SimGraph:
    block = cfg.raw.get("graph")
    if not block:
        if cfg.system_name is None:
            raise ConfigError("missing required key 'graph' (no known manifold for expression systems)")
        return known_graph(cfg.system_name)
    try:
        return SimGraph.from_sources(_require(block, "slow", "graph"), _require(block, "fast", "graph"),
                                     _require(block, "h", "graph"))
    except ValueError as exc:
        raise ConfigError(f"graph: {exc}") from None


def cmd_residual(cfg: RunConfig):
    graph = _graph(cfg)
    if graph.dimension != cfg.field.dimension:
        raise ConfigError("graph dimension does not match the system")
    block = cfg.raw.get("residual", {})
    raw_pts = block.get("points")
    if raw_pts is None:
        _need_initial(cfg)
        slow_pts = [[z[i - 1] for i in graph.slow] for z in cfg.initial_values]
    else:
        slow_pts = [[parse_complex(v, f"residual.points[{j}]") for v in p] for j, p in enumerate(raw_pts)]
    if not slow_pts:
        raise ConfigError("'residual.points' must not be empty")
    header = []
    for i in graph.slow:
        header += [f"re_x{i}", f"im_x{i}"]
    for i in graph.fast:
        header += [f"re_R{i}", f"im_R{i}"]
    header.append("abs_max")
    lines = [",".join(header)]
    worst = 0.0
    failed = 0
    for p in slow_pts:
        row = []
        for v in p:
            row += [fmt(v.real), fmt(v.imag)]
        try:
            R = invariance_residual(cfg.field, graph, p)
            for v in R:
                row += [fmt(v.real), fmt(v.imag)]
            m = float(np.max(np.abs(R)))
            worst = max(worst, m)
            row.append(fmt(m))
        except HoloflowError as exc:
            failed += 1
            row += ["nan"] * (2 * len(graph.fast)) + ["nan"]
            print(f"warning: residual at {p}: {exc}", file=sys.stderr)
        lines.append(",".join(row))
    (cfg.output_dir / "residual.csv").write_text("\n".join(lines) + "\n")
    return ["residual.csv"], {"max_abs_residual": worst, "failed_points": failed}, EXIT_OK


HANDLERS = {
    "integrate": cmd_integrate,
    "surface": cmd_surface,
    "spectrum": cmd_spectrum,
    "classify": cmd_classify,
    "residual": cmd_residual,
}


def run(command: str, config_path, out: str | None = None, workers: int | None = None) -> int:
    try:
        cfg = load_config(config_path, out, workers)
        cfg.output_dir.mkdir(parents=True, exist_ok=True)
        files, summary, code = HANDLERS[command](cfg)
    except ConfigError as exc:
        print(f"holoflow {command}: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    manifest = {"command": command, "config_sha256": cfg.digest, "files": sorted(files),
                "exit_code": code, "summary": summary}
    write_json(manifest, cfg.output_dir / "manifest.json")
    return code


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="holoflow", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", help="output directory (overrides config output_dir)")
    p.add_argument("--workers", type=int, help="worker processes (default: config, $HOLOFLOW_WORKERS, CPU count)")
    a = p.parse_args(argv)
    return run(a.command, a.config, a.out, a.workers)


if __name__ == "__main__":
    sys.exit(main())
