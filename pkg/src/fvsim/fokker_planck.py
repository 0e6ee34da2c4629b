"""Deterministic 1D ground truth for the particle system.

Three solvers on a uniform Dirichlet grid:

* time evolution of the absorbed density u (Crank-Nicolson diffusion +
  explicit upwind drift, drift lagged at the start-of-step normalized
  profile), reporting the conditioned profile m_t = u/mass and the
  cumulative kill exponent J_t = -ln mass;
* the principal eigenpair of the stationary operator for a frozen drift
  field (inverse power iteration on the tridiagonal discretization);
* the self-consistent quasi-stationary solver: freeze drift at the current
  profile, re-solve the eigenproblem, damp-update, iterate to a fixed point.

Plus the transcendental root scan for the mean-attraction stationary means
and quadrature helpers used as independent cross-checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.linalg import solve_banded

from .drift import DriftSpec, evaluate_drift_batch, summarize

__all__ = [
    "Grid1D",
    "PdeState",
    "PdeSeries",
    "QsdResult",
    "PdeError",
    "evolve_conditional_law",
    "principal_eigenpair",
    "solve_qsd_fixed_point",
    "bifurcation_roots",
    "mean_attraction_root_function",
    "brownian_interval_eigenpair",
    "tilted_cosine_density",
    "tilted_cosine_mean_quadrature",
    "self_consistent_tilt",
]

MASS_FLOOR = 1e-300


class PdeError(RuntimeError):
    pass


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid of M interior nodes on (a, b); boundary nodes carry the Dirichlet zeros."""

    a: float
    b: float
    m: int
    dx: float = field(init=False)

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError("grid needs a < b")
        if self.m < 16:
            raise ValueError(f"grid needs at least 16 interior nodes, got {self.m}")
        object.__setattr__(self, "dx", (self.b - self.a) / (self.m + 1))

    @property
    def nodes(self) -> np.ndarray:
        return self.a + self.dx * np.arange(1, self.m + 1)


def grid_mass(grid: Grid1D, u: np.ndarray) -> float:
    # trapezoid with zero boundary values
    return float(grid.dx * u.sum())


@dataclass
class PdeState:
    """Absorbed (sub-probability) density on the interior nodes at time t."""

    grid: Grid1D
    u: np.ndarray
    t: float = 0.0

    @property
    def mass(self) -> float:
        return grid_mass(self.grid, self.u)

    def normalized(self) -> np.ndarray:
        return self.u / self.mass


def state_from_density(grid: Grid1D, density, t: float = 0.0) -> PdeState:
    """Initial state with mass exactly 1; `density` is a callable or node array."""
    u = np.asarray(density(grid.nodes) if callable(density) else density, dtype=float)
    if u.shape != (grid.m,):
        raise ValueError(f"density must have one value per interior node, got shape {u.shape}")
    if np.any(u < 0):
        raise ValueError("density must be nonnegative")
    mass = grid_mass(grid, u)
    if mass <= 0:
        raise ValueError("density must have positive mass")
    return PdeState(grid=grid, u=u / mass, t=t)


@dataclass
class PdeSeries:
    """Snapshots of the conditioned profile and kill exponent along an evolution."""

    grid: Grid1D
    times: np.ndarray      # (k,)
    densities: np.ndarray  # (k, m), each row mass 1
    js: np.ndarray         # (k,)

    def density_at(self, t: float, tol: float | None = None) -> np.ndarray:
        i = int(np.argmin(np.abs(self.times - t)))
        if tol is not None and abs(self.times[i] - t) > tol:
            raise PdeError(f"no snapshot within {tol} of t={t}")
        return self.densities[i]

    def j_at(self, t: float, tol: float | None = None) -> float:
        i = int(np.argmin(np.abs(self.times - t)))
        if tol is not None and abs(self.times[i] - t) > tol:
            raise PdeError(f"no snapshot within {tol} of t={t}")
        return float(self.js[i])


def density_snapshot(grid: Grid1D, density: np.ndarray):
    """Grid density as a histogram measure (per-cell trapezoid masses, renormalized)."""
    from .estimators import MeasureSnapshot

    u = np.asarray(density, dtype=float)
    ue = np.concatenate(([0.0], u, [0.0]))
    cell_mass = 0.5 * (ue[:-1] + ue[1:]) * grid.dx
    edges = grid.a + grid.dx * np.arange(grid.m + 2)
    edges[-1] = grid.b
    return MeasureSnapshot.from_histogram(edges, cell_mass / cell_mass.sum())


def _drift_field(spec: DriftSpec, grid: Grid1D, profile: np.ndarray) -> np.ndarray:
    """Drift at the grid nodes for the measure with node weights ∝ profile."""
    summary = summarize(grid.nodes, weights=profile)
    return evaluate_drift_batch(spec, summary, grid.nodes)[:, 0]


def _upwind_flux_divergence(bf: np.ndarray, u: np.ndarray, dx: float) -> np.ndarray:
    """First-order upwind discretization of (b u)_x with zero boundary values."""
    ue = np.concatenate(([0.0], u, [0.0]))
    be = np.concatenate(([bf[0]], bf, [bf[-1]]))
    b_face = 0.5 * (be[:-1] + be[1:])                     # faces i-1/2, length m+1
    up = np.where(b_face > 0, ue[:-1], ue[1:])            # upwind donor value
    flux = b_face * up
    return (flux[1:] - flux[:-1]) / dx


def _cn_diffusion_bands(grid: Grid1D, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Banded (I - dt/2 L) and tridiagonal stencil of (I + dt/2 L), L = (1/2) d_xx."""
    r = dt / (4.0 * grid.dx**2)
    m = grid.m
    ab = np.zeros((3, m))
    ab[0, 1:] = -r
    ab[1, :] = 1.0 + 2.0 * r
    ab[2, :-1] = -r
    return ab, np.array([r, 1.0 - 2.0 * r, r])


def evolve_conditional_law(
    initial: PdeState,
    drift: DriftSpec,
    T: float,
    dt: float,
    snapshot_every: float | None = None,
) -> PdeSeries:
    """Advance du/dt = (1/2) u_xx - (b(u/|u|, x) u)_x with Dirichlet walls.

    The drift field is frozen at the start-of-step conditioned profile
    (explicit lagging, matching the particle scheme's coupling).  Raises
    PdeError when the drift Courant number dt*max|b|/dx exceeds 1 or the
    surviving mass underflows.  Positivity of the scheme additionally
    requires dt <= 2 dx^2 (Crank-Nicolson monotonicity); runs outside that
    regime remain stable and mass-correct but may dip negative near sharp
    features.
    """
    grid = initial.grid
    if abs(initial.mass - 1.0) > 1e-9:
        raise ValueError("initial state must have mass 1")
    if T < 0 or dt <= 0:
        raise ValueError("need T >= 0 and dt > 0")

    n_steps = int(round(T / dt))
    if n_steps == 0:
        return PdeSeries(grid=grid, times=np.array([initial.t]),
                         densities=initial.normalized()[None, :], js=np.array([0.0]))
    stride = 1 if snapshot_every is None else max(1, int(round(snapshot_every / dt)))

    ab, lo_stencil = _cn_diffusion_bands(grid, dt)
    u = initial.u.copy()
    mass = grid_mass(grid, u)

    times = [initial.t]
    densities = [u / mass]
    js = [0.0]

    for k in range(1, n_steps + 1):
        bf = _drift_field(drift, grid, u)
        courant = dt * np.max(np.abs(bf)) / grid.dx
        if courant > 1.0:
            raise PdeError(f"drift Courant number {courant:.3f} > 1; reduce dt or refine the grid")
        u = u - dt * _upwind_flux_divergence(bf, u, grid.dx)
        rhs = lo_stencil[1] * u
        rhs[:-1] += lo_stencil[2] * u[1:]
        rhs[1:] += lo_stencil[0] * u[:-1]
        u = solve_banded((1, 1), ab, rhs)
        mass = grid_mass(grid, u)
        if mass < MASS_FLOOR:
            raise PdeError(f"surviving mass underflow at t={initial.t + k * dt:.6g}: horizon too long")
        if k % stride == 0 or k == n_steps:
            times.append(initial.t + k * dt)
            densities.append(u / mass)
            js.append(-np.log(mass))

    return PdeSeries(grid=grid, times=np.asarray(times),
                     densities=np.asarray(densities), js=np.asarray(js))


def _stationary_neg_operator_bands(bf: np.ndarray, grid: Grid1D) -> np.ndarray:
    """Banded form of -(A u) where A u = (1/2) u_xx - (b u)_x, central differences."""
    m, dx = grid.m, grid.dx
    ab = np.zeros((3, m))
    ab[1, :] = 1.0 / dx**2
    # column j holds coefficients multiplying u_j
    ab[0, 1:] = -0.5 / dx**2 + bf[1:] / (2.0 * dx)     # row i, col i+1
    ab[2, :-1] = -0.5 / dx**2 - bf[:-1] / (2.0 * dx)   # row i+1, col i
    return ab


def _banded_matvec(ab: np.ndarray, v: np.ndarray) -> np.ndarray:
    out = ab[1] * v
    out[:-1] += ab[0, 1:] * v[1:]
    out[1:] += ab[2, :-1] * v[:-1]
    return out


def principal_eigenpair(frozen_drift: np.ndarray, grid: Grid1D,
                        residual_tol: float = 1e-10, max_iter: int = 100_000,
                        ) -> tuple[np.ndarray, float]:
    """Principal (slowest-decay) eigenpair of (1/2) d_xx - d_x(b .) with Dirichlet walls.

    Returns (phi, lam) with phi >= 0 of mass 1 and lam > 0 the decay rate;
    second-order accurate in dx.  Inverse power iteration, stopped when the
    sup-norm residual of the eigen equation drops below residual_tol.
    """
    bf = np.asarray(frozen_drift, dtype=float)
    if bf.shape != (grid.m,):
        raise ValueError("frozen_drift must have one value per interior node")
    ab = _stationary_neg_operator_bands(bf, grid)

    v = np.sin(np.pi * (grid.nodes - grid.a) / (grid.b - grid.a))
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = solve_banded((1, 1), ab, v)
        w /= np.linalg.norm(w)
        av = _banded_matvec(ab, w)
        lam = float(w @ av)
        if np.max(np.abs(av - lam * w)) < residual_tol * max(1.0, abs(lam)):
            v = w
            break
        v = w
    else:
        raise PdeError(f"eigen iteration did not converge within {max_iter} iterations")

    if v.sum() < 0:
        v = -v
    if np.min(v) < -1e-10 * np.max(v):
        raise PdeError("principal eigenvector is not positive; grid too coarse for this drift")
    phi = np.maximum(v, 0.0)
    phi /= grid_mass(grid, phi)
    return phi, lam


@dataclass
class QsdResult:
    """A quasi-stationary profile with its kill rate and mean."""

    grid: Grid1D
    density: np.ndarray
    lam: float
    mean: float
    outer_iterations: int

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("kill rate must be positive")
        if abs(grid_mass(self.grid, self.density) - 1.0) > 1e-10:
            raise ValueError("stationary density must have mass 1")


def solve_qsd_fixed_point(
    drift: DriftSpec,
    grid: Grid1D,
    tol: float = 1e-9,
    initial_guess: np.ndarray | None = None,
    damping: float = 0.5,
    max_outer: int = 1000,
) -> QsdResult:
    """Self-consistent stationary profile: freeze drift, eigensolve, damp, repeat.

    Which fixed point is reached depends on the initial guess; that basin
    dependence is intentional and mirrors the nonuniqueness of the
    stationary profiles for supercritical mean attraction.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if initial_guess is None:
        pi = np.ones(grid.m)
    else:
        pi = np.asarray(initial_guess, dtype=float).copy()
        if pi.shape != (grid.m,):
            raise ValueError("initial_guess must have one value per interior node")
        if np.any(pi < 0):
            raise ValueError("initial_guess must be nonnegative")
    pi /= grid_mass(grid, pi)

    phi, lam = pi, 0.0
    for it in range(1, max_outer + 1):
        bf = _drift_field(drift, grid, pi)
        phi, lam = principal_eigenpair(bf, grid)
        update_tv = 0.5 * grid.dx * np.sum(np.abs(phi - pi)) * damping
        pi = (1.0 - damping) * pi + damping * phi
        if update_tv < tol:
            mean = float(grid.dx * np.sum(grid.nodes * phi))
            return QsdResult(grid=grid, density=phi, lam=lam, mean=mean, outer_iterations=it)
    raise PdeError(f"no stable fixed point reached from this guess in {max_outer} outer iterations")


def mean_attraction_root_function(gamma: float, b: np.ndarray | float):
    """tanh(gamma b) - 8 gamma b / (4 gamma^2 b^2 + pi^2) - b, whose zeros are the stationary means."""
    b = np.asarray(b, dtype=float)
    return np.tanh(gamma * b) - 8.0 * gamma * b / (4.0 * gamma**2 * b**2 + np.pi**2) - b


def bifurcation_roots(gamma: float, scan_points: int = 10_000, tol: float = 1e-12) -> list[float]:
    """All stationary means in [-1, 1] for mean attraction of strength gamma.

    Sign-change scan on a uniform grid followed by bisection; 0 is always a
    root and is returned exactly.
    """
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    xs = np.linspace(-1.0, 1.0, scan_points)
    fs = mean_attraction_root_function(gamma, xs)

    roots: list[float] = [0.0]
    for i in range(scan_points - 1):
        f0, f1 = fs[i], fs[i + 1]
        if f0 == 0.0:
            roots.append(float(xs[i]))
            continue
        if f0 * f1 < 0:
            lo, hi, flo = xs[i], xs[i + 1], f0
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                fm = float(mean_attraction_root_function(gamma, mid))
                if fm == 0.0:
                    lo = hi = mid
                    break
                if flo * fm < 0:
                    hi = mid
                else:
                    lo, flo = mid, fm
            roots.append(0.5 * (lo + hi))
    if fs[-1] == 0.0:
        roots.append(float(xs[-1]))

    roots = [0.0 if abs(r) < 10 * tol else r for r in roots]
    roots.sort()
    deduped: list[float] = []
    for r in roots:
        if not deduped or abs(r - deduped[-1]) > 10 * tol:
            deduped.append(r)
    return deduped


def brownian_interval_eigenpair(a: float, b: float):
    """Analytic principal Dirichlet pair for (1/2) d_xx on (a, b): (density callable, rate)."""
    length = b - a

    def density(x):
        return (np.pi / (2.0 * length)) * np.sin(np.pi * (np.asarray(x) - a) / length)

    return density, np.pi**2 / (2.0 * length**2)


def tilted_cosine_density(c: float):
    """Density A e^{c x} cos(pi x / 2) on (-1, 1), normalized to mass 1 exactly."""
    amplitude = (c**2 + np.pi**2 / 4.0) / (np.pi * np.cosh(c))

    def density(x):
        x = np.asarray(x)
        return amplitude * np.exp(c * x) * np.cos(np.pi * x / 2.0)

    return density


def tilted_cosine_mean_quadrature(c: float) -> float:
    """Mean of the tilted cosine profile by adaptive quadrature (independent of any closed form)."""
    num = quad(lambda x: x * np.exp(c * x) * np.cos(np.pi * x / 2.0), -1.0, 1.0, epsabs=1e-13)[0]
    den = quad(lambda x: np.exp(c * x) * np.cos(np.pi * x / 2.0), -1.0, 1.0, epsabs=1e-13)[0]
    return num / den


def self_consistent_tilt(gamma: float, tol: float = 1e-12) -> float:
    """Positive tilt c solving c = gamma * mean(tilted density c), by bisection on quadrature.

    Returns 0.0 when no positive solution exists (subcritical attraction).
    """
    def g(c):
        return gamma * tilted_cosine_mean_quadrature(c) - c

    lo, hi = 1e-6, max(2.0 * gamma, 1.0)
    if g(lo) <= 0:
        return 0.0
    while g(hi) > 0:
        hi *= 2.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
