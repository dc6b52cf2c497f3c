"""Command-line front end: one JSON config describes one run.

    mfgmaster --config run.json --out results/ [--seed N] [--threads N]

Each run writes ``report.json`` (deterministic for a fixed config and seed),
``manifest.json`` (hashes, versions, wall time), CSV tables and PNG figures.
Exit status: 0 when every verdict passes, 2 when a verdict fails, 1 on errors.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import itertools
import json
import logging
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import jsonschema
import numpy as np
import scipy
from scipy.interpolate import CubicSpline

from . import __version__
from .errors import MFGError
from .hamiltonian import make_model, make_surface
from .lq_oracle import LqSpec, oracle_dmuV, oracle_dxV, oracle_V, solve_lq, variation_moments, \
    variation_profile
from .master_surface import (MasterEvalConfig, dmu_row, dxmu_from_row, lipschitz_estimate,
                             master_solve)
from .measures import DiscreteMeasure, sample_gaussian
from .mfg_solver import Grid1D, solve_mfg
from .monotonicity import SamplingConfig, certify, search_violation
from .propagation import dissipation_profile, particle_cloud, rate_check, simulate_flow

logger = logging.getLogger(__name__)

COMMANDS = ("certify", "search-violation", "solve-mfg", "master-eval", "dmu", "lipschitz",
            "propagate", "lq-oracle")

_num = {"type": "number"}
_int = {"type": "integer"}
_nums = {"type": "array", "items": {"type": "number"}}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["command"],
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "seed": {"type": "integer", "minimum": 0},
        "threads": {"type": "integer", "minimum": 1},
        "plots": {"type": "boolean"},
        "model": {
            "type": "object",
            "additionalProperties": False,
            "required": ["name"],
            "properties": {"name": {"enum": ["lq", "constructed", "separable"]},
                           "params": {"type": "object"},
                           "target": {"enum": ["hamiltonian", "terminal"]},
                           "surface": {"type": "object"}},
        },
        "measure": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"kind": {"enum": ["gaussian", "atoms"]}, "n": _int, "mean": _num,
                           "sd": _num, "seed": _int, "atoms": _nums, "weights": _nums},
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"nx": _int, "nt": _int, "T": _num, "t0": _num, "margin": _num,
                           "drift_bound": _num, "x_min": _num, "x_max": _num},
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"damping": _num, "tol": _num, "max_iter": _int,
                           "partition_len": _num, "eps": _num, "richardson": {"type": "boolean"}},
        },
        "options": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "trials": _int, "steps": _int, "n_atoms": _int, "tol": _num, "spread": _num,
                "max_atoms": _int, "t0": _num, "x": _nums, "atoms": {"type": "array",
                                                                     "items": _int},
                "metric": {"enum": ["W1", "W2"]}, "scales": _nums,
                "particles_per_atom": _int, "checkpoints": _int, "n_bins": _int,
                "n_substeps": _int, "oracle_tol": _num, "tangent_shift": _num,
                "ode_steps": _int,
            },
        },
        "sweep": {"type": "object", "additionalProperties": {"type": "array", "minItems": 1}},
    },
}


class ConfigError(ValueError):
    def __init__(self, message, pointer=""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer


def _pointer(err: jsonschema.ValidationError) -> str:
    parts = [str(p) for p in err.absolute_path]
    if err.validator == "additionalProperties" and isinstance(err.instance, dict):
        allowed = set(err.schema.get("properties", {}))
        extra = sorted(k for k in err.instance if k not in allowed)
        if extra:
            parts.append(extra[0])
    return "/" + "/".join(parts)


def validate(config: dict):
    errors = sorted(jsonschema.Draft7Validator(SCHEMA).iter_errors(config),
                    key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        err = errors[0]
        raise ConfigError(err.message, _pointer(err))


def canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical(config).encode()).hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else repr(v)
    return obj


# --------------------------------------------------------------------------
# config helpers
# --------------------------------------------------------------------------


def _measure(cfg: dict) -> DiscreteMeasure:
    spec = cfg.get("measure", {})
    if spec.get("kind", "gaussian") == "atoms":
        if "atoms" not in spec:
            raise ConfigError("atoms are required for kind 'atoms'", "/measure/atoms")
        atoms = np.asarray(spec["atoms"], dtype=float)
        w = spec.get("weights")
        return DiscreteMeasure.uniform(atoms) if w is None else DiscreteMeasure(atoms, w)
    return sample_gaussian(spec.get("n", 20), spec.get("mean", 1.0), spec.get("sd", 0.5),
                           seed=spec.get("seed", cfg.get("seed", 0)))


def _model(cfg: dict):
    spec = cfg.get("model", {"name": "lq"})
    return make_model(spec["name"], spec.get("params", {}))


def _grid(cfg: dict, mu: DiscreteMeasure, nx: int = 100, nt: int = 40) -> Grid1D:
    g = cfg.get("grid", {})
    t0, T = g.get("t0", 0.0), g.get("T", 1.0)
    nx, nt = g.get("nx", nx), g.get("nt", nt)
    if "x_min" in g or "x_max" in g:
        if not ("x_min" in g and "x_max" in g):
            raise ConfigError("x_min and x_max go together", "/grid")
        return Grid1D(g["x_min"], g["x_max"], nx, t0, T, nt)
    return Grid1D.around(mu, t0, T, nx, nt, g.get("drift_bound", 0.0), g.get("margin", 0.0))


def _master_cfg(cfg: dict, mu: DiscreteMeasure, threads: int) -> MasterEvalConfig:
    s = cfg.get("solver", {})
    return MasterEvalConfig(_grid(cfg, mu), damping=s.get("damping", 0.8),
                            tol=s.get("tol", 1e-10), max_iter=s.get("max_iter", 300),
                            eps=s.get("eps"), richardson=s.get("richardson", True),
                            workers=threads)


def _lq_coeffs(cfg: dict, mu: DiscreteMeasure, t0=None):
    p = cfg.get("model", {}).get("params", {})
    g = cfg.get("grid", {})
    spec = LqSpec(q=p.get("q", 1.0), c=p.get("c", 0.5), g=p.get("g", 1.0), T=g.get("T", 1.0),
                  m0=float(mu.mean()[0]), t0=g.get("t0", 0.0) if t0 is None else t0)
    return solve_lq(spec, cfg.get("options", {}).get("ode_steps", 10_000))


def _is_lq(cfg):
    return cfg.get("model", {}).get("name", "lq") == "lq"


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) for v in r])
    return path.name


# --------------------------------------------------------------------------
# commands; each returns (report dict, verdict, artifact names)
# --------------------------------------------------------------------------


def cmd_certify(cfg, out, threads, plots):
    opts = cfg.get("options", {})
    model = _certify_target(cfg)
    scfg = SamplingConfig(max_atoms=opts.get("max_atoms", 32), spread=opts.get("spread", 3.0),
                          dim=model.dim)
    rep = certify(model, trials=opts.get("trials", 1000), seed=cfg.get("seed", 0),
                  tol=opts.get("tol"), cfg=scfg, workers=threads)
    reports = {"certify": rep.to_dict()}
    ok = rep.passed
    if opts.get("steps", 0) > 0:
        srch = search_violation(model, seed=cfg.get("seed", 0), steps=opts["steps"],
                                n_atoms=opts.get("n_atoms", 8), cfg=scfg, tol=opts.get("tol"))
        reports["search"] = srch.to_dict()
        ok = ok and srch.passed
    return reports, ok, []


def _certify_target(cfg):
    spec = cfg.get("model", {})
    if "surface" in spec:
        return make_surface(spec["surface"])
    h, g = _model(cfg)
    return g if spec.get("target") == "terminal" else h


def cmd_search(cfg, out, threads, plots):
    opts = cfg.get("options", {})
    model = _certify_target(cfg)
    scfg = SamplingConfig(spread=opts.get("spread", 3.0), dim=model.dim)
    rep = search_violation(model, seed=cfg.get("seed", 0), steps=opts.get("steps", 200),
                           n_atoms=opts.get("n_atoms", 8), cfg=scfg, tol=opts.get("tol"))
    return {"search": rep.to_dict()}, rep.passed, []


def cmd_solve(cfg, out, threads, plots):
    mu = _measure(cfg)
    h, g = _model(cfg)
    grid = _grid(cfg, mu, 200, 200)
    s = cfg.get("solver", {})
    sol = solve_mfg(h, g, mu, grid, damping=s.get("damping", 0.5), tol=s.get("tol", 1e-8),
                    max_iter=s.get("max_iter", 100), partition_len=s.get("partition_len", 0.0))
    arts = [_write_csv(out / "solution.csv", ["t", "x", "u", "rho"], sol.csv_rows()),
            _write_csv(out / "mean_path.csv", ["t", "mean", "mass"],
                       np.column_stack([grid.times, sol.mean_path(), sol.mass()]))]
    report = {"grid": grid.to_dict(), "iterations": sol.iterations,
              "residual_history": sol.residual_history, "partition": sol.partition,
              "mass_error": float(np.max(np.abs(sol.mass() - 1.0)))}
    ok = True
    if _is_lq(cfg):
        co = _lq_coeffs(cfg, mu)
        T, X = np.meshgrid(grid.times, grid.nodes, indexing="ij")
        u_err = float(np.max(np.abs(sol.u - oracle_V(co, T, X))))
        m_err = float(np.max(np.abs(sol.mean_path() - co.at("m", grid.times))))
        tol = cfg.get("options", {}).get("oracle_tol", 1e-2)
        report["oracle"] = {"u_sup_error": u_err, "mean_sup_error": m_err, "tol": tol}
        ok = u_err <= tol and m_err <= tol
        if plots:
            from .plotting import plot_curves
            arts.append(Path(plot_curves(grid.times, {"solver": sol.mean_path(),
                                                      "oracle": co.at("m", grid.times)},
                                         out / "mean_path.png", xlabel="t",
                                         ylabel="mean")).name)
    if plots:
        from .plotting import plot_solution
        arts.append(Path(plot_solution(sol, out / "solution.png")).name)
    return report, ok, arts


def _probe_x(cfg, mcfg):
    xs = cfg.get("options", {}).get("x")
    if xs is None:
        nodes = mcfg.grid.nodes
        lo, hi = nodes[len(nodes) // 4], nodes[3 * len(nodes) // 4]
        xs = np.linspace(lo, hi, 9)
    return np.asarray(xs, dtype=float)


def cmd_master_eval(cfg, out, threads, plots):
    mu = _measure(cfg)
    h, g = _model(cfg)
    mcfg = _master_cfg(cfg, mu, threads)
    t0 = cfg.get("options", {}).get("t0", mcfg.grid.t0)
    x = _probe_x(cfg, mcfg)
    sol = master_solve(h, g, mu, t0, mcfg)
    v, dv = sol.value(0, x), sol.gradient(0, x)
    report = {"t0": t0, "x": x, "V": v, "dxV": dv, "atoms": mu.to_dict(),
              "iterations": sol.iterations}
    rows = [x, v, dv]
    header = ["x", "V", "dxV"]
    ok = True
    if _is_lq(cfg):
        co = _lq_coeffs(cfg, mu, t0=t0)
        ref = oracle_V(co, t0, x)
        err = float(np.max(np.abs(v - ref)))
        tol = cfg.get("options", {}).get("oracle_tol", 1e-2)
        report["oracle"] = {"V": ref, "sup_error": err, "dxV": oracle_dxV(co, t0, x), "tol": tol}
        ok = err <= tol
        rows.append(ref)
        header.append("oracle_V")
    arts = [_write_csv(out / "master_eval.csv", header, np.column_stack(rows))]
    if plots:
        from .plotting import plot_curves
        curves = {"V": v} if not _is_lq(cfg) else {"V": v, "oracle": report["oracle"]["V"]}
        arts.append(Path(plot_curves(x, curves, out / "master_eval.png", ylabel="V")).name)
    return report, ok, arts


def cmd_dmu(cfg, out, threads, plots):
    mu = _measure(cfg)
    h, g = _model(cfg)
    mcfg = _master_cfg(cfg, mu, threads)
    opts = cfg.get("options", {})
    t0 = opts.get("t0", mcfg.grid.t0)
    x = _probe_x(cfg, mcfg)
    atoms = opts.get("atoms", [0])
    base = master_solve(h, g, mu, t0, mcfg)
    tol = opts.get("oracle_tol", 0.05)
    entries, rows = [], []
    ok = True
    for k in atoms:
        row = dmu_row(t0, mu, k, h, g, mcfg, base)
        d = CubicSpline(mcfg.grid.nodes, row)(x)
        dd = dxmu_from_row(mcfg, row, x)
        entry = {"atom": int(k), "position": float(mu.atoms[k, 0]), "d_mu_values": d,
                 "d_x_mu_values": dd}
        if _is_lq(cfg):
            co = _lq_coeffs(cfg, mu, t0=t0)
            ref = oracle_dmuV(co, t0, x)
            beta = float(co.at("beta", t0))
            scale = float(np.max(np.abs(ref)))
            e1 = float(np.max(np.abs(d - ref))) / scale
            e2 = float(np.max(np.abs(dd - beta))) / abs(beta) if beta else float(np.max(np.abs(dd)))
            entry["oracle"] = {"d_mu": ref, "d_x_mu": beta, "rel_error_d_mu": e1,
                               "rel_error_d_x_mu": e2}
            ok = ok and e1 <= tol and e2 <= tol
        entries.append(entry)
        rows += [[k, xi, di, ddi] for xi, di, ddi in zip(x, d, dd)]
    report = {"t0": t0, "x": x, "atoms": mu.to_dict(), "d_mu_values": entries,
              "eps": mcfg.step, "richardson": mcfg.richardson}
    arts = [_write_csv(out / "dmu.csv", ["atom", "x", "d_mu_V", "d_x_mu_V"], rows)]
    if plots:
        from .plotting import plot_curves
        curves = {f"atom {e['atom']}": e["d_mu_values"] for e in entries}
        arts.append(Path(plot_curves(x, curves, out / "dmu.png", ylabel="d_mu V")).name)
    return report, ok, arts


def cmd_lipschitz(cfg, out, threads, plots):
    mu = _measure(cfg)
    h, g = _model(cfg)
    mcfg = _master_cfg(cfg, mu, threads)
    opts = cfg.get("options", {})
    t0 = opts.get("t0", mcfg.grid.t0)
    x = _probe_x(cfg, mcfg)
    rep = lipschitz_estimate(t0, x, mu, h, g, mcfg, metric=opts.get("metric", "W2"),
                             trials=opts.get("trials", 50), seed=cfg.get("seed", 0),
                             scales=tuple(opts.get("scales", (1e-1, 1e-2, 1e-3))))
    report = {"t0": t0, "x": x, "atoms": mu.to_dict(), "lipschitz": rep.to_dict()}
    prof = rep.ratio_at_shrinking_steps
    ok = prof[-1] <= 2.0 * prof[0] + 1e-12
    if _is_lq(cfg):
        co = _lq_coeffs(cfg, mu, t0=t0)
        # |V(nu) - V(mu)| <= sup_x |d_mu V| |m(nu) - m(mu)| and |dm| <= W1 <= W2
        bound = float(np.max(np.abs(oracle_dmuV(co, t0, x))))
        bound_dx = abs(float(co.at("beta", t0)))
        report["oracle"] = {"bound": bound, "bound_dx": bound_dx}
        ok = ok and rep.max_ratio <= 1.1 * bound and rep.max_ratio_dx <= 1.1 * bound_dx
    arts = [_write_csv(out / "lipschitz.csv", ["scale", "max_ratio", "max_ratio_dx"],
                       np.column_stack([rep.scales, rep.ratio_at_shrinking_steps,
                                        rep.dx_ratio_at_shrinking_steps]))]
    if plots:
        from .plotting import plot_lipschitz
        arts.append(Path(plot_lipschitz(rep, out / "lipschitz.png")).name)
    return report, ok, arts


def cmd_propagate(cfg, out, threads, plots):
    mu = _measure(cfg)
    h, g = _model(cfg)
    # checkpoint tables default to plain central differences (cost)
    mcfg = replace(_master_cfg(cfg, mu, threads),
                   richardson=cfg.get("solver", {}).get("richardson", False))
    opts = cfg.get("options", {})
    seed = cfg.get("seed", 0)
    rng = np.random.default_rng(seed)
    eta = rng.standard_normal(mu.size) + opts.get("tangent_shift", 0.5)
    sol = master_solve(h, g, mu, mcfg.grid.t0, mcfg)
    cloud = particle_cloud(mu, eta, opts.get("particles_per_atom", 100))
    traj = simulate_flow(sol, h, g, cloud, mcfg, checkpoints=opts.get("checkpoints", 5),
                         n_substeps=opts.get("n_substeps", 4), seed=seed,
                         n_bins=opts.get("n_bins", 20))
    prof = dissipation_profile(traj, h, with_rate=True)
    rate = rate_check(traj, h, profile=prof)
    report = {"profile": prof.to_dict(), "rate": rate.to_dict(), "n_norm": traj.n_norm,
              "tangents": eta, "atoms": mu.to_dict()}
    ok = prof.passed and rate.passed
    oracle = None
    if _is_lq(cfg):
        co = _lq_coeffs(cfg, mu)
        e, s2 = variation_moments(co, traj.times, float(mu.weights @ eta**2),
                                  float(mu.weights @ eta))
        oracle = variation_profile(co, traj.times, s2, e)
        err = float(np.max(np.abs(prof.values - oracle) / np.abs(oracle)))
        tol = opts.get("oracle_tol", 0.05)
        report["oracle"] = {"profile": oracle, "rel_error": err, "tol": tol}
        ok = ok and err <= tol
    dec = np.concatenate([[np.nan], -np.diff(prof.values)])
    arts = [_write_csv(out / "profile.csv", ["time", "I_plus_Ibar", "rate_bound", "decrement"],
                       np.column_stack([prof.times, prof.values, prof.rate_bound, dec]))]
    if plots:
        from .plotting import plot_profile
        arts.append(Path(plot_profile(prof, out / "profile.png", oracle)).name)
    return report, ok, arts


def cmd_lq_oracle(cfg, out, threads, plots):
    mu = _measure(cfg)
    co = _lq_coeffs(cfg, mu)
    gap = abs(co.shoot_sensitivity - float(co.beta[0]))
    report = {"spec": dict(co.spec.__dict__), "shoot_sensitivity": co.shoot_sensitivity,
              "beta_t0": float(co.beta[0]), "sensitivity_gap": gap,
              "a_T": float(co.a[-1]), "b_T": float(co.b[-1]), "c_T": float(co.c[-1])}
    stride = max(1, len(co.t) // 200)
    arts = [_write_csv(out / "coefficients.csv", ["t", "a", "b", "c", "m", "dm_b", "dm_c"],
                       co.to_rows()[::stride])]
    if plots:
        from .plotting import plot_coefficients
        arts.append(Path(plot_coefficients(co, out / "coefficients.png")).name)
    return report, gap < 1e-6, arts


HANDLERS = {"certify": cmd_certify, "search-violation": cmd_search, "solve-mfg": cmd_solve,
            "master-eval": cmd_master_eval, "dmu": cmd_dmu, "lipschitz": cmd_lipschitz,
            "propagate": cmd_propagate, "lq-oracle": cmd_lq_oracle}


# --------------------------------------------------------------------------
# driver
# --------------------------------------------------------------------------


def expand_sweep(config: dict) -> list:
    """Cartesian product of the ``sweep`` lists; keys are dotted paths."""
    sweep = config.get("sweep")
    if not sweep:
        return []
    base = {k: v for k, v in config.items() if k != "sweep"}
    keys = sorted(sweep)
    children = []
    for values in itertools.product(*(sweep[k] for k in keys)):
        child = copy.deepcopy(base)
        for key, val in zip(keys, values):
            node = child
            parts = key.split(".")
            for p in parts[:-1]:
                node = node.setdefault(p, {})
            node[parts[-1]] = val
        validate(child)
        children.append((dict(zip(keys, values)), child))
    return children


def _versions():
    return {"mfgmaster": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__}


def run_config(config: dict, out: Path, threads: int = 1) -> int:
    """Run one validated config into ``out``; returns the exit code."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    digest = config_hash(config)
    children = expand_sweep(config)
    artifacts = []
    try:
        if children:
            report, code = _run_sweep(children, out, threads)
        else:
            handler = HANDLERS[config["command"]]
            body, ok, artifacts = handler(config, out, threads, config.get("plots", True))
            report = {"command": config["command"], "seed": config.get("seed", 0),
                      "config_hash": digest, "verdict": "pass" if ok else "fail",
                      "result": body}
            code = 0 if ok else 2
    except (MFGError, ValueError, KeyError) as exc:
        logger.error("%s", exc)
        report = {"command": config.get("command"), "seed": config.get("seed", 0),
                  "config_hash": digest, "verdict": "error",
                  "error": f"{type(exc).__name__}: {exc}"}
        code = 1
    with open(out / "report.json", "w") as fh:
        fh.write(json.dumps(_jsonable(report), sort_keys=True, indent=2))
    manifest = {"config": config, "config_hash": digest, "seed": config.get("seed", 0),
                "versions": _versions(), "wall_time_s": time.perf_counter() - start,
                "threads": threads, "exit_code": code,
                "artifacts": ["report.json", *artifacts]}
    with open(out / "manifest.json", "w") as fh:
        fh.write(json.dumps(_jsonable(manifest), sort_keys=True, indent=2))
    return code


def _child(args):
    config, out = args
    return run_config(config, out, 1)


def _run_sweep(children, out, threads):
    jobs = [(c, out / f"child-{config_hash(c)[:12]}") for _, c in children]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            codes = list(pool.map(_child, jobs))
    else:
        codes = [_child(j) for j in jobs]
    runs = [{"overrides": ov, "dir": path.name, "exit_code": code}
            for (ov, _), (_, path), code in zip(children, jobs, codes)]
    code = 1 if 1 in codes else (2 if 2 in codes else 0)
    verdict = {0: "pass", 2: "fail", 1: "error"}[code]
    return {"command": "sweep", "children": runs, "verdict": verdict}, code


def load_config(path, seed=None) -> dict:
    try:
        with open(path) as fh:
            config = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    if not isinstance(config, dict):
        raise ConfigError("config must be a JSON object")
    if seed is not None:
        config["seed"] = seed
    validate(config)
    return config


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mfgmaster", description=__doc__.splitlines()[0])
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", default="out", help="output directory (default: out)")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--threads", type=int, default=None, help="worker processes")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.seed is not None and args.seed < 0:
        parser.error("--seed must be a non-negative integer")
    try:
        config = load_config(args.config, args.seed)
    except (OSError, ConfigError) as exc:
        print(f"mfgmaster: {exc}", file=sys.stderr)
        return 1
    threads = args.threads or config.get("threads", 1)
    code = run_config(config, Path(args.out), threads)
    with open(Path(args.out) / "report.json") as fh:
        verdict = json.load(fh).get("verdict")
    print(f"{config['command']}: {verdict} -> {args.out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
