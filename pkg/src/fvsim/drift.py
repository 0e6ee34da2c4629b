"""Measure-dependent drift functionals evaluated from empirical-measure summaries.

A drift maps (probability measure, position) -> vector and is globally
bounded; the bound travels with the drift object and is enforced by norm
clamping.  Measures enter only through a cheap immutable summary computed
once per time step, so the same summary can be shared read-only by any
number of particle workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import DomainSpec, diameter

__all__ = [
    "DriftSpec",
    "MeasureSummary",
    "zero_drift",
    "mean_attraction",
    "clamped_linear",
    "kernel_field",
    "drift_from_config",
    "summarize",
    "evaluate_drift",
    "evaluate_drift_batch",
]


@dataclass(frozen=True)
class DriftSpec:
    """A drift functional with its declared global bound and Lipschitz constant.

    variant: "zero" | "mean_attraction" | "clamped_linear" | "kernel_field".
    bound_b: hard magnitude bound, enforced by clamping.
    lipschitz_c: declared Lipschitz constant w.r.t. total variation on
    probability measures (metadata; checked statistically in the tests,
    not proven symbolically).
    """

    variant: str
    gamma: float = 0.0
    clamp: float = 0.0
    bandwidth: float = 0.0
    strength: float = 0.0
    bound_b: float = 0.0
    lipschitz_c: float = 0.0

    def __post_init__(self):
        if self.variant not in ("zero", "mean_attraction", "clamped_linear", "kernel_field"):
            raise ValueError(f"unknown drift variant {self.variant!r}")
        if self.bound_b < 0:
            raise ValueError("bound_b must be nonnegative")


def zero_drift() -> DriftSpec:
    return DriftSpec(variant="zero", bound_b=0.0, lipschitz_c=0.0)


def mean_attraction(gamma: float, domain: DomainSpec, bound_b: float | None = None) -> DriftSpec:
    """Drift gamma * mean(mu), constant in x: attraction toward the ensemble mean.

    The unclamped value is automatically bounded by gamma * diam(U) on a
    bounded domain, which is the default bound, so clamping never fires
    for the canonical interval experiments.
    """
    g = float(gamma)
    bb = g * diameter(domain) if bound_b is None else float(bound_b)
    return DriftSpec(variant="mean_attraction", gamma=g, bound_b=bb,
                     lipschitz_c=g * diameter(domain))


def clamped_linear(gamma: float, clamp: float, domain: DomainSpec) -> DriftSpec:
    """Restoring force gamma * (mean(mu) - x), norm-clamped at `clamp`."""
    g, cl = float(gamma), float(clamp)
    if cl <= 0:
        raise ValueError("clamp must be positive")
    return DriftSpec(variant="clamped_linear", gamma=g, clamp=cl, bound_b=cl,
                     lipschitz_c=g * diameter(domain))


def kernel_field(bandwidth: float, strength: float, domain: DomainSpec,
                 bound_b: float | None = None) -> DriftSpec:
    """Mean-shift drift: strength * (Gaussian-kernel local mean - x), clamped.

    Points the particle toward the local density mode.  Our own testbed
    variant; it has no analytic ground truth and is exercised only by the
    property suite.
    """
    bw, st = float(bandwidth), float(strength)
    if bw <= 0:
        raise ValueError("bandwidth must be positive")
    bb = abs(st) * diameter(domain) if bound_b is None else float(bound_b)
    return DriftSpec(variant="kernel_field", bandwidth=bw, strength=st, bound_b=bb,
                     lipschitz_c=abs(st) * diameter(domain) * (1.0 + diameter(domain) / bw))


def drift_from_config(cfg: dict, domain: DomainSpec) -> DriftSpec:
    """Build a drift from its JSON description, e.g. {"variant": "mean_attraction", "gamma": 8.0}."""
    variant = cfg.get("variant")
    if variant == "zero":
        return zero_drift()
    if variant == "mean_attraction":
        return mean_attraction(cfg["gamma"], domain, cfg.get("bound_b"))
    if variant == "clamped_linear":
        return clamped_linear(cfg["gamma"], cfg["clamp"], domain)
    if variant == "kernel_field":
        return kernel_field(cfg["bandwidth"], cfg["strength"], domain, cfg.get("bound_b"))
    raise ValueError(f"unknown drift variant {variant!r}")


@dataclass(frozen=True)
class MeasureSummary:
    """Immutable summary of a weighted point measure: mean, raw second moment,
    and (for kernel drifts) the support points themselves."""

    mean: np.ndarray          # (d,)
    second_moment: np.ndarray  # (d, d), E[x x^T]
    n: int
    points: np.ndarray        # (n, d), read-only view
    weights: np.ndarray       # (n,), sums to 1

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def summarize(positions, weights=None) -> MeasureSummary:
    """Summary of the empirical measure of `positions` (uniform weights by default)."""
    pts = np.asarray(positions, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.shape[0] == 0:
        raise ValueError("cannot summarize an empty point set")
    n = pts.shape[0]
    if weights is None:
        w = np.full(n, 1.0 / n)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != (n,):
            raise ValueError("weights must match the number of points")
        total = w.sum()
        if total <= 0:
            raise ValueError("weights must have positive total mass")
        w = w / total
    mean = w @ pts
    second = (pts * w[:, None]).T @ pts
    pts = pts.copy()
    pts.setflags(write=False)
    w.setflags(write=False)
    return MeasureSummary(mean=mean, second_moment=second, n=n, points=pts, weights=w)


def _clamp_norm(v: np.ndarray, bound: float) -> np.ndarray:
    # rows of v clamped to euclidean norm <= bound
    norms = np.linalg.norm(v, axis=-1, keepdims=True)
    with np.errstate(invalid="ignore"):
        scale = np.where(norms > bound, bound / np.where(norms > 0, norms, 1.0), 1.0)
    return v * scale


def evaluate_drift_batch(spec: DriftSpec, summary: MeasureSummary, xs: np.ndarray) -> np.ndarray:
    """Drift at each row of xs (shape (m, d)); the workhorse behind evaluate_drift."""
    xs = np.asarray(xs, dtype=float)
    if xs.ndim == 1:
        xs = xs[:, None]
    m, d = xs.shape
    if d != summary.dim:
        raise ValueError(f"point dimension {d} does not match measure dimension {summary.dim}")

    if spec.variant == "zero":
        return np.zeros((m, d))
    if spec.variant == "mean_attraction":
        v = np.broadcast_to(spec.gamma * summary.mean, (m, d)).copy()
        return _clamp_norm(v, spec.bound_b)
    if spec.variant == "clamped_linear":
        v = spec.gamma * (summary.mean[None, :] - xs)
        return _clamp_norm(_clamp_norm(v, spec.clamp), spec.bound_b)

    # kernel_field: Gaussian-weighted local mean displacement (mean shift)
    pts = summary.points
    w = summary.weights
    d2 = ((xs[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
    k = w[None, :] * np.exp(-0.5 * d2 / spec.bandwidth**2)
    denom = k.sum(axis=1, keepdims=True)
    denom = np.where(denom > 0, denom, 1.0)
    local_mean = (k @ pts) / denom
    v = spec.strength * (local_mean - xs)
    return _clamp_norm(v, spec.bound_b)


def evaluate_drift(spec: DriftSpec, summary: MeasureSummary, x) -> np.ndarray:
    """Drift vector b(mu, x); never exceeds spec.bound_b in norm."""
    x1 = np.atleast_1d(np.asarray(x, dtype=float))
    return evaluate_drift_batch(spec, summary, x1[None, :])[0]
