"""Open domains (interval / box / ball) with exact boundary queries.

All three kinds satisfy a uniform interior ball condition by construction
and are convex, so a straight segment started inside leaves the domain at
most once and the exit point has a closed form.  Boundary membership is
decided by exact comparison on those closed forms; tolerance policy (if
any) belongs to callers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DomainSpec",
    "interval",
    "box",
    "ball",
    "domain_from_config",
    "contains",
    "boundary_distance",
    "interior_ball_radius",
    "crossing_fraction",
    "diameter",
]


@dataclass(frozen=True)
class DomainSpec:
    """Geometric description of the open set the particles live in.

    kind: "interval" (a, b), "box" (per-axis (lo, hi) pairs) or "ball"
    (center, radius).  Open, nonempty and bounded in every case.
    """

    kind: str
    a: float = 0.0
    b: float = 0.0
    axes: tuple[tuple[float, float], ...] = ()
    center: tuple[float, ...] = ()
    radius: float = 0.0
    dim: int = field(init=False, default=1)

    def __post_init__(self):
        if self.kind == "interval":
            if not self.a < self.b:
                raise ValueError(f"interval needs a < b, got ({self.a}, {self.b})")
            object.__setattr__(self, "dim", 1)
        elif self.kind == "box":
            if not self.axes:
                raise ValueError("box needs at least one axis")
            for lo, hi in self.axes:
                if not lo < hi:
                    raise ValueError(f"box axis needs lo < hi, got ({lo}, {hi})")
            object.__setattr__(self, "dim", len(self.axes))
        elif self.kind == "ball":
            if self.radius <= 0:
                raise ValueError(f"ball needs radius > 0, got {self.radius}")
            if not self.center:
                raise ValueError("ball needs a center point")
            object.__setattr__(self, "dim", len(self.center))
        else:
            raise ValueError(f"unknown domain kind {self.kind!r}")


def interval(a: float, b: float) -> DomainSpec:
    return DomainSpec(kind="interval", a=float(a), b=float(b))


def box(*axes: tuple[float, float]) -> DomainSpec:
    return DomainSpec(kind="box", axes=tuple((float(lo), float(hi)) for lo, hi in axes))


def ball(center, radius: float) -> DomainSpec:
    c = tuple(float(v) for v in np.atleast_1d(center))
    return DomainSpec(kind="ball", center=c, radius=float(radius))


def domain_from_config(cfg: dict) -> DomainSpec:
    """Build a domain from its JSON description, e.g. {"kind": "interval", "a": -1, "b": 1}."""
    kind = cfg.get("kind")
    if kind == "interval":
        return interval(cfg["a"], cfg["b"])
    if kind == "box":
        return box(*cfg["axes"])
    if kind == "ball":
        return ball(cfg["center"], cfg["radius"])
    raise ValueError(f"unknown domain kind {kind!r}")


def _as_point(domain: DomainSpec, x) -> np.ndarray:
    p = np.atleast_1d(np.asarray(x, dtype=float))
    if p.ndim != 1 or p.shape[0] != domain.dim:
        raise ValueError(f"point of dimension {p.shape} does not match domain dimension {domain.dim}")
    if not np.all(np.isfinite(p)):
        raise ValueError(f"point must be finite, got {p}")
    return p


def contains(domain: DomainSpec, x) -> bool:
    """True iff x lies strictly inside the open set."""
    p = _as_point(domain, x)
    if domain.kind == "interval":
        return bool(domain.a < p[0] < domain.b)
    if domain.kind == "box":
        return all(lo < v < hi for v, (lo, hi) in zip(p, domain.axes))
    r2 = float(np.sum((p - np.asarray(domain.center)) ** 2))
    return r2 < domain.radius**2


def _signed_boundary_distance(domain: DomainSpec, p: np.ndarray) -> float:
    # positive inside, zero on the boundary, negative outside the closure
    if domain.kind == "interval":
        return min(p[0] - domain.a, domain.b - p[0])
    if domain.kind == "box":
        return min(min(v - lo, hi - v) for v, (lo, hi) in zip(p, domain.axes))
    return domain.radius - float(np.linalg.norm(p - np.asarray(domain.center)))


def boundary_distance(domain: DomainSpec, x) -> float:
    """Exact distance d(x, boundary) for x in the closure of the domain."""
    p = _as_point(domain, x)
    d = _signed_boundary_distance(domain, p)
    if d < 0:
        raise ValueError(f"point {p} lies outside the closure of the domain")
    return d


def interior_ball_radius(domain: DomainSpec) -> float:
    """Largest r such that every interior point sits in some ball B(y, r) inside the domain."""
    if domain.kind == "interval":
        return (domain.b - domain.a) / 2.0
    if domain.kind == "box":
        return min(hi - lo for lo, hi in domain.axes) / 2.0
    return domain.radius


def diameter(domain: DomainSpec) -> float:
    if domain.kind == "interval":
        return domain.b - domain.a
    if domain.kind == "box":
        return float(np.sqrt(sum((hi - lo) ** 2 for lo, hi in domain.axes)))
    return 2.0 * domain.radius


def crossing_fraction(domain: DomainSpec, x_prev, x_next) -> float | None:
    """Fraction s in (0, 1] at which the segment x_prev -> x_next first hits the boundary.

    Returns None when the whole segment stays inside.  x_prev must be
    strictly inside; the domains are convex, so the segment exits iff
    x_next is not strictly inside, and the exit point is unique.
    """
    p = _as_point(domain, x_prev)
    q = _as_point(domain, x_next)
    if not contains(domain, p):
        raise ValueError(f"segment start {p} is not inside the domain")
    if contains(domain, q):
        return None

    if domain.kind in ("interval", "box"):
        axes = ((domain.a, domain.b),) if domain.kind == "interval" else domain.axes
        s = np.inf
        for v0, v1, (lo, hi) in zip(p, q, axes):
            dv = v1 - v0
            if v1 >= hi:
                s = min(s, (hi - v0) / dv)
            elif v1 <= lo:
                s = min(s, (lo - v0) / dv)
        return float(s)

    # ball: smallest positive root of |p + s v - c|^2 = R^2
    c = np.asarray(domain.center)
    v = q - p
    w = p - c
    alpha = float(v @ v)
    beta = float(v @ w)
    q0 = float(w @ w) - domain.radius**2  # < 0 since p is inside
    s = (-beta + np.sqrt(beta * beta - alpha * q0)) / alpha
    return float(min(s, 1.0))
