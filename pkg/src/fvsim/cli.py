"""Command-line entry point: one experiment per invocation, CSV artifacts out.

Exit codes: 0 success, 1 config error, 2 numerical failure.  For a fixed
config and seed the emitted files are byte-identical across repeat runs and
across `--threads` settings; floats are serialized with 17 significant
digits so they round-trip exactly.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import bessel as bessel_mod
from . import fokker_planck as fp
from . import particle_system as ps
from .config import ConfigError, ExperimentConfig, load_config
from .estimators import (MeasureSnapshot, boundary_mass, killing_rate,
                         stationary_qsd_estimate, wasserstein1)
from .geometry import interior_ball_radius

__all__ = ["main", "run_subcommand"]

SUBCOMMANDS = ("simulate", "pde", "qsd", "bifurcation", "bessel", "compare")


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = [_fmt(v) for v in row]
            if any("," in c or '"' in c or "\n" in c for c in cells):
                raise ValueError(f"cell needs quoting, schema forbids it: {cells}")
            fh.write(",".join(cells) + "\n")


def _axis_names(dim: int) -> list[str]:
    return ["x", "y", "z"][:dim] if dim <= 3 else [f"x{i}" for i in range(dim)]


def _run_particles(cfg: ExperimentConfig, threads: int):
    ens = ps.init_ensemble(cfg.domain, cfg.n_particles, cfg.initial, cfg.seed,
                           bridge_correction=cfg.bridge_correction, threads=threads)
    return ps.run(ens, cfg.drift, cfg.domain, cfg.t_horizon, cfg.dt, cfg.snapshot_every)


def _cmd_simulate(cfg: ExperimentConfig, out: Path, threads: int) -> None:
    series, log = _run_particles(cfg, threads)
    names = _axis_names(cfg.domain.dim)
    rows = ((t, j, i, *series.positions[k, i])
            for k, (t, j) in enumerate(zip(series.times, series.js))
            for i in range(series.n_particles))
    write_csv(out / "trajectory.csv", ["t", "J", "particle_index", *names], rows)
    write_csv(out / "events.csv",
              ["t", "dying", "death_ordinal", "target", *[f"landing_{a}" for a in names]],
              ((e.time, e.dying, e.death_ordinal, e.target, *e.landing) for e in log))
    _write_estimates(cfg, series, out)


def _write_estimates(cfg: ExperimentConfig, series, out: Path) -> None:
    """Derived observables of the run, as (metric_name, t_or_window, value) rows."""
    metrics: list[tuple[str, str, float]] = [
        ("j_final", _fmt(series.times[-1]), float(series.js[-1]))]
    try:
        window = (cfg.burn_in, cfg.t_horizon)
        # comma-free window label: cells are written unquoted
        metrics.append(("killing_rate", f"{_fmt(window[0])}..{_fmt(window[1])}",
                        killing_rate(series, window)))
    except ValueError:
        pass  # too few snapshots past burn-in
    if cfg.domain.kind == "interval":
        snap = MeasureSnapshot.from_points(series.positions[-1])
        for delta in (0.02, 0.05, 0.1):
            metrics.append((f"boundary_mass_{delta:g}", _fmt(series.times[-1]),
                            boundary_mass(snap, cfg.domain, delta)))
        try:
            est = stationary_qsd_estimate(series, cfg.burn_in, cfg.spacing, cfg.bins)
            centers = 0.5 * (est.edges[:-1] + est.edges[1:])
            write_csv(out / "qsd_estimate.csv", ["x", "density"],
                      zip(centers, est.masses / np.diff(est.edges)))
        except ValueError:
            pass  # horizon too short for a stationary estimate
    write_csv(out / "estimates.csv", ["metric_name", "t_or_window", "value"], metrics)


def _pde_initial(cfg: ExperimentConfig, grid: fp.Grid1D) -> fp.PdeState:
    kind = cfg.initial.get("sampler", "uniform")
    if kind == "cosine":
        density, _ = fp.brownian_interval_eigenpair(grid.a, grid.b)
        return fp.state_from_density(grid, density)
    if kind == "uniform":
        lo = cfg.initial.get("low", grid.a)
        hi = cfg.initial.get("high", grid.b)
        u = ((grid.nodes > lo) & (grid.nodes < hi)).astype(float)
        return fp.state_from_density(grid, u)
    if kind == "point":
        # discrete delta: all mass in the cell nearest the requested point
        at = float(np.atleast_1d(cfg.initial["at"])[0])
        u = np.zeros(grid.m)
        u[int(np.argmin(np.abs(grid.nodes - at)))] = 1.0
        return fp.state_from_density(grid, u)
    raise ConfigError(f"initial sampler {kind!r} has no density counterpart for the pde solver")


def _pde_grid(cfg: ExperimentConfig) -> fp.Grid1D:
    if cfg.domain.kind != "interval":
        raise ConfigError("the pde solver needs an interval domain")
    return fp.Grid1D(cfg.domain.a, cfg.domain.b, cfg.pde_nodes)


def _cmd_pde(cfg: ExperimentConfig, out: Path, threads: int) -> None:
    grid = _pde_grid(cfg)
    series = fp.evolve_conditional_law(_pde_initial(cfg, grid), cfg.drift,
                                       cfg.t_horizon, cfg.pde_dt,
                                       snapshot_every=cfg.snapshot_every)
    write_csv(out / "pde_law.csv", ["t", "x", "density"],
              ((t, x, series.densities[k, ix])
               for k, t in enumerate(series.times) for ix, x in enumerate(grid.nodes)))
    write_csv(out / "pde_J.csv", ["t", "J"], zip(series.times, series.js))


def _qsd_guess(name: str, grid: fp.Grid1D) -> np.ndarray:
    base = np.sin(np.pi * (grid.nodes - grid.a) / (grid.b - grid.a))
    if name == "flat":
        return np.ones(grid.m)
    if name == "right":
        return base * np.exp(3.0 * (grid.nodes - grid.a) / (grid.b - grid.a))
    if name == "left":
        return base * np.exp(-3.0 * (grid.nodes - grid.a) / (grid.b - grid.a))
    raise ConfigError(f"qsd field 'guess' must be flat/right/left, got {name!r}")


def _cmd_qsd(cfg: ExperimentConfig, out: Path, threads: int) -> None:
    grid = _pde_grid(cfg)
    tol = float(cfg.qsd.get("tol", 1e-9))
    guess = _qsd_guess(cfg.qsd.get("guess", "flat"), grid)
    res = fp.solve_qsd_fixed_point(cfg.drift, grid, tol=tol, initial_guess=guess)
    write_csv(out / "qsd.csv", ["x", "density"], zip(grid.nodes, res.density))
    (out / "qsd_meta.json").write_text(json.dumps(
        {"lambda": res.lam, "mean": res.mean, "outer_iterations": res.outer_iterations},
        indent=2, sort_keys=True) + "\n")


def _cmd_bifurcation(cfg: ExperimentConfig, out: Path, threads: int) -> None:
    b = cfg.bifurcation
    lo = float(b.get("gamma_min", 0.0))
    hi = float(b.get("gamma_max", 10.0))
    step = float(b.get("gamma_step", 0.1))
    if step <= 0 or hi < lo:
        raise ConfigError("bifurcation fields need gamma_min <= gamma_max and gamma_step > 0")
    gammas = np.arange(lo, hi + 0.5 * step, step)
    rows = []
    for g in gammas:
        for root in fp.bifurcation_roots(float(g)):
            rows.append((float(g), root))
    write_csv(out / "branches.csv", ["gamma", "root"], rows)


def _cmd_bessel(cfg: ExperimentConfig, out: Path, threads: int) -> None:
    b = cfg.bessel
    params = bessel_mod.BesselParams(
        dimension=int(b.get("dimension", cfg.domain.dim)),
        drift_bound=float(b.get("drift_bound", cfg.drift.bound_b)),
        radius=float(b.get("radius", interior_ball_radius(cfg.domain))))
    table = bessel_mod.simulate_reflected_bessel(
        params, T=float(b.get("T", cfg.t_horizon)), dt=float(b.get("dt", params.radius**2 / 100.0)),
        n_paths=int(b.get("n_paths", 20000)), seed=cfg.seed,
        times=b.get("times"), deltas=b.get("deltas"), threads=threads)
    write_csv(out / "tail.csv", ["t", "delta", "probability", "stderr"],
              ((t, d, table.probs[it, jd], table.stderrs[it, jd])
               for it, t in enumerate(table.times) for jd, d in enumerate(table.deltas)))


def _cmd_compare(cfg: ExperimentConfig, out: Path, threads: int) -> None:
    c = cfg.compare
    ladder = [int(v) for v in c.get("n_ladder", [100, 400, 1600])]
    seeds = [int(s) for s in c.get("seeds", [cfg.seed + k for k in range(5)])]
    t_eval = float(c.get("t_eval", cfg.t_horizon))
    if t_eval > cfg.t_horizon:
        raise ConfigError("compare field 't_eval' must not exceed T")

    grid = _pde_grid(cfg)
    pde_series = fp.evolve_conditional_law(_pde_initial(cfg, grid), cfg.drift,
                                           t_eval, cfg.pde_dt, snapshot_every=t_eval)
    pde_snap = fp.density_snapshot(grid, pde_series.densities[-1])
    j_pde = pde_series.js[-1]

    rows = []
    for n in ladder:
        for seed in seeds:
            ens = ps.init_ensemble(cfg.domain, n, cfg.initial, seed,
                                   bridge_correction=cfg.bridge_correction, threads=threads)
            series, _ = ps.run(ens, cfg.drift, cfg.domain, t_eval, cfg.dt, snapshot_every=t_eval)
            w1 = wasserstein1(MeasureSnapshot.from_points(series.positions[-1]), pde_snap)
            rows.append((n, seed, t_eval, w1, series.js[-1], j_pde))
    write_csv(out / "w1_vs_N.csv", ["N", "seed", "t", "w1", "j_particle", "j_pde"], rows)


_HANDLERS = {
    "simulate": _cmd_simulate,
    "pde": _cmd_pde,
    "qsd": _cmd_qsd,
    "bifurcation": _cmd_bifurcation,
    "bessel": _cmd_bessel,
    "compare": _cmd_compare,
}


def run_subcommand(name: str, config_path: str | Path, out_dir: str | Path,
                   threads: int = 1, seed_override: int | None = None) -> int:
    """Run one experiment; returns the process exit code (0/1/2)."""
    try:
        if name not in SUBCOMMANDS:
            raise ConfigError(f"unknown subcommand {name!r}")
        cfg = load_config(config_path)
        if seed_override is not None:
            cfg.seed = int(seed_override)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        _HANDLERS[name](cfg, out, threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (ps.SimulationError, fp.PdeError, bessel_mod.BesselError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fvsim",
        description="Fleming-Viot particle runs, their deterministic oracles, and comparisons")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="path to the JSON experiment config")
    parser.add_argument("--out", default=".", help="output directory (created if absent)")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads; 0 means one per CPU")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    args = parser.parse_args(argv)
    threads = os.cpu_count() or 1 if args.threads == 0 else max(1, args.threads)
    return run_subcommand(args.subcommand, args.config, args.out, threads, args.seed)


if __name__ == "__main__":
    sys.exit(main())
