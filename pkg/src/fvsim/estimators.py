"""Observables: empirical measures, transport/TV distances, kill-rate and
stationary-profile estimates, boundary mass, and the exponential-lifetime test.

Measures are immutable snapshots in one of two forms, weighted points or a
histogram.  The 1D Wasserstein-1 distance integrates |F_mu - F_nu| exactly
for either form (and mixtures), under the untruncated ground metric; it
therefore upper-bounds the same distance under any metric d ^ 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import DomainSpec, boundary_distance

__all__ = [
    "MeasureSnapshot",
    "uniform_edges",
    "wasserstein1",
    "tv_histogram",
    "killing_rate",
    "stationary_qsd_estimate",
    "boundary_mass",
    "exp_ks_test",
]

MASS_TOL = 1e-12


@dataclass(frozen=True)
class MeasureSnapshot:
    """A probability measure as weighted points or as a histogram (mass exactly 1)."""

    kind: str                       # "points" | "histogram"
    points: np.ndarray | None = None    # (n, d)
    weights: np.ndarray | None = None   # (n,)
    edges: np.ndarray | None = None     # (k+1,)
    masses: np.ndarray | None = None    # (k,)

    @staticmethod
    def from_points(points, weights=None) -> "MeasureSnapshot":
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.shape[0] == 0:
            raise ValueError("snapshot needs at least one point")
        n = pts.shape[0]
        w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float)
        if w.shape != (n,):
            raise ValueError("weights must match the number of points")
        if np.any(w < 0) or abs(w.sum() - 1.0) > MASS_TOL:
            raise ValueError("weights must be nonnegative with total mass 1")
        pts = pts.copy()
        pts.setflags(write=False)
        w = w.copy()
        w.setflags(write=False)
        return MeasureSnapshot(kind="points", points=pts, weights=w)

    @staticmethod
    def from_histogram(edges, masses) -> "MeasureSnapshot":
        e = np.asarray(edges, dtype=float)
        m = np.asarray(masses, dtype=float)
        if e.ndim != 1 or e.shape[0] < 2 or np.any(np.diff(e) <= 0):
            raise ValueError("edges must be strictly increasing with at least two entries")
        if m.shape != (e.shape[0] - 1,):
            raise ValueError("need one mass per bin")
        if np.any(m < 0) or abs(m.sum() - 1.0) > MASS_TOL:
            raise ValueError("masses must be nonnegative with total mass 1")
        e = e.copy()
        e.setflags(write=False)
        m = m.copy()
        m.setflags(write=False)
        return MeasureSnapshot(kind="histogram", edges=e, masses=m)

    @property
    def dim(self) -> int:
        return 1 if self.kind == "histogram" else self.points.shape[1]

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum() if self.kind == "points" else self.masses.sum())


def uniform_edges(domain: DomainSpec, bins: int = 64) -> np.ndarray:
    if domain.kind != "interval":
        raise ValueError("uniform_edges supports interval domains only")
    return np.linspace(domain.a, domain.b, bins + 1)


def snapshot_histogram(snapshot: MeasureSnapshot, edges: np.ndarray) -> np.ndarray:
    """Bin masses of `snapshot` on `edges`; histogram snapshots must match the edges exactly."""
    edges = np.asarray(edges, dtype=float)
    if snapshot.kind == "histogram":
        if snapshot.edges.shape != edges.shape or not np.array_equal(snapshot.edges, edges):
            raise ValueError("histogram bin edges do not match")
        return snapshot.masses.copy()
    if snapshot.dim != 1:
        raise ValueError("binning needs one-dimensional points")
    xs = snapshot.points[:, 0]
    if np.any(xs < edges[0]) or np.any(xs > edges[-1]):
        raise ValueError("points fall outside the bin range")
    masses, _ = np.histogram(xs, bins=edges, weights=snapshot.weights)
    return masses


def _cdf_pair(snapshot: MeasureSnapshot):
    """Breakpoints plus evaluators for F(x+) and F(x-)."""
    if snapshot.kind == "points":
        order = np.argsort(snapshot.points[:, 0], kind="stable")
        xs = snapshot.points[order, 0]
        cw = np.concatenate(([0.0], np.cumsum(snapshot.weights[order])))

        def right(q):
            return cw[np.searchsorted(xs, q, side="right")]

        def left(q):
            return cw[np.searchsorted(xs, q, side="left")]

        return xs, right, left

    edges, cm = snapshot.edges, np.concatenate(([0.0], np.cumsum(snapshot.masses)))

    def interp(q):
        return np.interp(q, edges, cm)

    return edges, interp, interp


def wasserstein1(mu: MeasureSnapshot, nu: MeasureSnapshot) -> float:
    """Exact 1D Wasserstein-1 distance, the integral of |F_mu - F_nu|.

    Uses the plain |x - y| ground metric, so the value dominates the
    distance under the bounded metric |x - y| ^ 1.
    """
    for s in (mu, nu):
        if s.dim != 1:
            raise ValueError("wasserstein1 is one-dimensional; use tv_histogram")
        if abs(s.total_mass - 1.0) > MASS_TOL:
            raise ValueError("wasserstein1 needs probability measures of mass 1")

    bx_mu, right_mu, left_mu = _cdf_pair(mu)
    bx_nu, right_nu, left_nu = _cdf_pair(nu)
    grid = np.unique(np.concatenate([bx_mu, bx_nu]))
    if grid.shape[0] < 2:
        return 0.0

    u, v = grid[:-1], grid[1:]
    e1 = right_mu(u) - right_nu(u)   # value just right of u
    e2 = left_mu(v) - left_nu(v)     # value just left of v
    h = v - u
    same = e1 * e2 >= 0
    tot = np.where(same, 0.5 * h * (np.abs(e1) + np.abs(e2)),
                   0.5 * h * (e1**2 + e2**2) / np.maximum(np.abs(e1) + np.abs(e2), 1e-300))
    return float(tot.sum())


def tv_histogram(mu: MeasureSnapshot, nu: MeasureSnapshot, edges) -> float:
    """Total-variation distance between the binned measures on common edges."""
    m1 = snapshot_histogram(mu, np.asarray(edges, dtype=float))
    m2 = snapshot_histogram(nu, np.asarray(edges, dtype=float))
    return float(0.5 * np.abs(m1 - m2).sum())


def killing_rate(series, window: tuple[float, float]) -> float:
    """Least-squares slope of the kill exponent J over snapshot times in `window`.

    Invariant under adding a constant to J; needs at least three snapshots
    in the window.
    """
    t0, t1 = window
    if not t1 > t0:
        raise ValueError("window must satisfy t1 > t0")
    times = np.asarray(series.times, dtype=float)
    js = np.asarray(series.js, dtype=float)
    mask = (times >= t0) & (times <= t1)
    if mask.sum() < 3:
        raise ValueError(f"need at least 3 snapshots in window ({t0}, {t1}), found {int(mask.sum())}")
    slope, _ = np.polyfit(times[mask], js[mask], 1)
    return float(slope)


def stationary_qsd_estimate(series, burn_in: float, spacing: float, bins: int = 64) -> MeasureSnapshot:
    """Histogram of the post-burn-in particle positions sampled every `spacing`.

    Pools the selected snapshots with equal weight, which equals averaging
    their individual histograms since every snapshot carries the same
    particle count.
    """
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    times = np.asarray(series.times, dtype=float)
    if times[-1] < burn_in + 10 * spacing:
        raise ValueError(
            f"series ends at t={times[-1]:.6g}, too short for burn_in={burn_in} and spacing={spacing}")
    edges = uniform_edges(series.domain, bins)

    targets = np.arange(burn_in, times[-1] + 1e-12, spacing)
    idx = np.unique(np.searchsorted(times, targets - 1e-9))
    idx = idx[idx < len(times)]
    pooled = np.concatenate([series.positions[i][:, 0] for i in idx])
    masses, _ = np.histogram(pooled, bins=edges)
    return MeasureSnapshot.from_histogram(edges, masses / masses.sum())


def boundary_mass(snapshot: MeasureSnapshot, domain: DomainSpec, delta: float) -> float:
    """Mass sitting within distance `delta` of the boundary."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    if snapshot.kind == "points":
        d = np.array([boundary_distance(domain, p) for p in snapshot.points])
        return float(snapshot.weights[d < delta].sum())
    if domain.kind != "interval":
        raise ValueError("histogram boundary mass supports interval domains only")
    # piecewise-uniform bins: exact overlap with (a, a+delta) u (b-delta, b)
    lo_hi = [(domain.a, min(domain.a + delta, domain.b)),
             (max(domain.b - delta, domain.a), domain.b)]
    e0, e1 = snapshot.edges[:-1], snapshot.edges[1:]
    widths = e1 - e0
    total = 0.0
    covered = np.zeros_like(widths)
    for lo, hi in lo_hi:
        overlap = np.clip(np.minimum(e1, hi) - np.maximum(e0, lo), 0.0, None)
        covered = np.minimum(covered + overlap, widths)  # the two strips may coincide
    total = float((snapshot.masses * covered / widths).sum())
    return total


def exp_ks_test(samples, lam: float) -> float:
    """Kolmogorov-Smirnov statistic of `samples` against Exp(lam)."""
    x = np.sort(np.asarray(samples, dtype=float))
    if x.shape[0] == 0:
        raise ValueError("samples must be nonempty")
    if np.any(x <= 0):
        raise ValueError("killing times must be positive")
    if lam <= 0:
        raise ValueError("lam must be positive")
    n = x.shape[0]
    cdf = 1.0 - np.exp(-lam * x)
    upper = np.arange(1, n + 1) / n - cdf
    lower = cdf - np.arange(0, n) / n
    return float(max(upper.max(), lower.max()))
