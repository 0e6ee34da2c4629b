"""Reflected comparison process bounding particle mass near the boundary.

A particle at distance d(X, boundary) from the wall of a domain with
interior-ball radius r is dominated by the one-dimensional process

    d eta = dW + B dt + (d-1)/(2 eta) dt,   reflected down at r
    (d = 1: reflected up at 0 instead of the singular drift),  eta_0 = r,

in the sense d(X_t, boundary) >= r - eta_t.  Tabulating P(eta_t >= r - delta)
by Monte Carlo therefore yields an upper bound for the fraction of particles
within delta of the wall, checkable against any simulated ensemble.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .estimators import MeasureSnapshot, boundary_mass
from .geometry import DomainSpec, interior_ball_radius

__all__ = [
    "BesselParams",
    "TailTable",
    "DominationReport",
    "simulate_reflected_bessel",
    "domination_check",
]

PATH_BLOCK = 1024       # paths per accumulation block (fixed: thread-count independent)
STEP_SLAB = 4096        # noise draw chunk per path block
ETA_FLOOR_FACTOR = 1e-6


class BesselError(RuntimeError):
    pass


@dataclass(frozen=True)
class BesselParams:
    """Dimension, drift bound and interior-ball radius of the dominated system."""

    dimension: int
    drift_bound: float
    radius: float

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be at least 1")
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if self.drift_bound < 0:
            raise ValueError("drift bound must be nonnegative")


@dataclass
class TailTable:
    """Monte Carlo estimates of P(eta_t >= radius - delta) with standard errors."""

    params: BesselParams
    times: np.ndarray    # (nt,)
    deltas: np.ndarray   # (nd,)
    probs: np.ndarray    # (nt, nd)
    stderrs: np.ndarray  # (nt, nd)
    n_paths: int

    def lookup(self, t: float, delta: float, t_tol: float | None = None) -> tuple[float, float]:
        it = int(np.argmin(np.abs(self.times - t)))
        if t_tol is not None and abs(self.times[it] - t) > t_tol:
            raise BesselError(f"no tabulated time within {t_tol} of t={t}")
        jd = int(np.argmin(np.abs(self.deltas - delta)))
        if abs(self.deltas[jd] - delta) > 1e-9 * max(1.0, abs(delta)):
            raise BesselError(f"delta={delta} is not tabulated")
        return float(self.probs[it, jd]), float(self.stderrs[it, jd])


def _fold(eta: np.ndarray, r: float) -> np.ndarray:
    # symmetrized reflection: overshoot mirrored back across the barrier.
    # The fold at 0 is the d=1 reflection; for d>1 it is only a numerical
    # guard (the singular drift repels the path from 0).
    for _ in range(64):
        over = eta > r
        if over.any():
            eta[over] = 2.0 * r - eta[over]
        under = eta < 0.0
        if under.any():
            eta[under] = -eta[under]
        if not (over.any() or under.any()):
            return eta
    raise BesselError("reflection fold did not terminate; dt far too coarse")


def simulate_reflected_bessel(params: BesselParams, T: float, dt: float, n_paths: int,
                              seed: int, times=None, deltas=None, threads: int = 1,
                              return_paths: bool = False) -> TailTable:
    """Euler scheme with symmetrized reflection for the comparison process.

    The singular drift (d-1)/(2 eta) is evaluated with eta floored at
    1e-6 * r; if the floor fires on more than 1% of all steps the step size
    is rejected as too coarse.  Paths use one counter-based stream each, in
    fixed blocks, so the table is bitwise reproducible for any thread count.
    """
    if dt > params.radius**2 / 100.0:
        raise ValueError(f"dt={dt} too coarse: need dt <= r^2/100 = {params.radius**2 / 100:.3g}")
    if n_paths < 1:
        raise ValueError("need at least one path")
    r, B, d = params.radius, params.drift_bound, params.dimension
    n_steps = int(round(T / dt))
    t_grid = (np.linspace(T / 50.0, T, 50) if times is None
              else np.atleast_1d(np.asarray(times, dtype=float)))
    rec_steps = np.unique(np.clip(np.round(t_grid / dt).astype(int), 1, n_steps))
    t_grid = rec_steps * dt
    d_grid = (np.linspace(r / 20.0, r, 20) if deltas is None
              else np.sort(np.atleast_1d(np.asarray(deltas, dtype=float))))
    thresholds = r - d_grid  # counts of eta >= threshold

    blocks = [(lo, min(lo + PATH_BLOCK, n_paths)) for lo in range(0, n_paths, PATH_BLOCK)]
    eta_floor = ETA_FLOOR_FACTOR * r
    sq = np.sqrt(dt)
    paths_out = np.empty((n_paths, len(rec_steps))) if return_paths else None

    def run_block(lo: int, hi: int):
        m = hi - lo
        gens = [rngmod.stream(seed, p) for p in range(lo, hi)]
        eta = np.full(m, r)
        counts = np.zeros((len(rec_steps), len(d_grid)), dtype=np.int64)
        clamps = 0
        rec_i = 0
        noise = np.empty((m, 0))
        cursor = 0
        for k in range(1, n_steps + 1):
            if cursor >= noise.shape[1]:
                slab = min(STEP_SLAB, n_steps - k + 1)
                noise = np.empty((m, slab))
                for j, g in enumerate(gens):
                    noise[j] = g.standard_normal(slab)
                cursor = 0
            xi = noise[:, cursor]
            cursor += 1
            drift = B * dt
            if d > 1:
                low = eta < eta_floor
                clamps += int(low.sum())
                drift = drift + (d - 1) * dt / (2.0 * np.maximum(eta, eta_floor))
            eta = _fold(eta + drift + sq * xi, r)
            if rec_i < len(rec_steps) and k == rec_steps[rec_i]:
                counts[rec_i] += (eta[:, None] >= thresholds[None, :]).sum(axis=0)
                if return_paths:
                    paths_out[lo:hi, rec_i] = eta
                rec_i += 1
        return counts, clamps

    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda blk: run_block(*blk), blocks))
    else:
        results = [run_block(*blk) for blk in blocks]

    counts = sum(res[0] for res in results)
    clamps = sum(res[1] for res in results)
    if clamps > 0.01 * n_paths * n_steps:
        raise BesselError(
            f"singular-drift floor hit on {clamps} of {n_paths * n_steps} steps: dt too coarse")

    p = counts / n_paths
    table = TailTable(params=params, times=t_grid, deltas=d_grid, probs=p,
                      stderrs=np.sqrt(p * (1.0 - p) / n_paths), n_paths=n_paths)
    if return_paths:
        table.paths = paths_out  # diagnostic only
    return table


@dataclass
class DominationReport:
    passed: bool
    t: float
    delta: float
    empirical_mass: float
    tail_probability: float
    slack: float


def domination_check(tail: TailTable, series, domain: DomainSpec, t: float,
                     delta: float) -> DominationReport:
    """Check boundary mass of the ensemble at time t against the tabulated bound.

    Passes iff mass{d(x, wall) < delta} <= P(eta_t >= r - delta) plus three
    times the combined Monte Carlo and finite-N binomial slack.
    """
    r = interior_ball_radius(domain)
    if abs(r - tail.params.radius) > 1e-12 * max(1.0, r):
        raise ValueError("tail table radius does not match the domain's interior-ball radius")
    gaps = np.diff(series.times)
    t_tol = 0.51 * float(np.median(gaps)) if len(gaps) else 0.0
    snap = series.positions_at(t, tol=t_tol)
    emp = boundary_mass(MeasureSnapshot.from_points(snap), domain, delta)
    p, se = tail.lookup(t, delta, t_tol=t_tol)
    n = series.n_particles
    slack = 3.0 * (se + np.sqrt(max(p * (1.0 - p), 1.0 / n) / n))
    return DominationReport(passed=bool(emp <= p + slack), t=t, delta=delta,
                            empirical_mass=emp, tail_probability=p, slack=float(slack))
