"""Time-discretized Fleming-Viot particle system with mean-field drift.

Euler-Maruyama proposals with boundary-crossing detection; a particle whose
move exits the domain is respawned at another particle's position chosen
uniformly at random, and the normalized jump counter J accumulates 1/N per
respawn.  Simultaneous discrete crossings (a dt artifact; the continuous
system almost surely has none) are resolved sequentially in a uniformly
random order: the respawn target is drawn uniformly from the other N-1
indices, landing on the target's resolved end-of-step position, or on its
last interior position when the target is itself a not-yet-resolved crosser.

Randomness: particle i consumes only its own counter-based stream (plus a
dedicated per-particle stream for the optional bridge-kill uniforms), and
all respawn decisions come from one extra stream, so results are bitwise
reproducible for a given seed regardless of chunking or worker threads.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .drift import DriftSpec, evaluate_drift_batch, summarize
from .geometry import DomainSpec, contains, crossing_fraction

__all__ = [
    "ParticleEnsemble",
    "EventRecord",
    "EventLog",
    "TrajectorySeries",
    "SimulationError",
    "StepTooCoarseError",
    "init_ensemble",
    "step",
    "run",
    "reconstruct_dhp",
    "sample_initial",
    "absorbed_lifetimes",
]

NOISE_CHUNK = 1024          # steps of pre-drawn noise per particle
BRIDGE_STREAM_TAG = 1 << 33


class SimulationError(RuntimeError):
    pass


class StepTooCoarseError(SimulationError):
    pass


@dataclass(frozen=True)
class EventRecord:
    """One kill-and-respawn: at `time`, particle `dying` (its `death_ordinal`-th
    death) jumped onto particle `target`, landing at `landing`."""

    time: float
    dying: int
    death_ordinal: int
    target: int
    landing: np.ndarray


class EventLog:
    """Respawn records in resolution order (chronological; ties broken by the
    random resolution order within a step)."""

    def __init__(self, records: list[EventRecord] | None = None):
        self.records: list[EventRecord] = records if records is not None else []

    def append(self, rec: EventRecord) -> None:
        self.records.append(rec)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]


@dataclass
class TrajectorySeries:
    """Snapshots of a run: particle positions and the normalized jump counter."""

    domain: DomainSpec
    times: np.ndarray      # (k,)
    positions: np.ndarray  # (k, N, d)
    js: np.ndarray         # (k,)

    @property
    def n_particles(self) -> int:
        return self.positions.shape[1]

    def positions_at(self, t: float, tol: float | None = None) -> np.ndarray:
        i = int(np.argmin(np.abs(self.times - t)))
        if tol is not None and abs(self.times[i] - t) > tol:
            raise SimulationError(f"no snapshot within {tol} of t={t}")
        return self.positions[i]


def _inside_mask(domain: DomainSpec, pts: np.ndarray) -> np.ndarray:
    if domain.kind == "interval":
        x = pts[:, 0]
        return (x > domain.a) & (x < domain.b)
    if domain.kind == "box":
        lo = np.array([ax[0] for ax in domain.axes])
        hi = np.array([ax[1] for ax in domain.axes])
        return np.all((pts > lo) & (pts < hi), axis=1)
    c = np.asarray(domain.center)
    return np.sum((pts - c) ** 2, axis=1) < domain.radius**2


def _boundary_distance_batch(domain: DomainSpec, pts: np.ndarray) -> np.ndarray:
    if domain.kind == "interval":
        x = pts[:, 0]
        return np.minimum(x - domain.a, domain.b - x)
    if domain.kind == "box":
        lo = np.array([ax[0] for ax in domain.axes])
        hi = np.array([ax[1] for ax in domain.axes])
        return np.min(np.minimum(pts - lo, hi - pts), axis=1)
    c = np.asarray(domain.center)
    return domain.radius - np.linalg.norm(pts - c, axis=1)


class ParticleEnsemble:
    """Positions, jump counter, clock, and the private random streams of a run."""

    def __init__(self, domain: DomainSpec, positions: np.ndarray, seed: int,
                 bridge_correction: bool = False, threads: int = 1):
        n = positions.shape[0]
        if n < 2:
            raise ValueError("the respawn rule needs at least 2 particles")
        self.domain = domain
        self.positions = positions
        self.seed = int(seed)
        self.jump_count = 0
        self.time = 0.0
        self.death_counts = np.zeros(n, dtype=np.int64)
        self.bridge_correction = bool(bridge_correction)
        self.threads = max(1, int(threads))
        self.streams = rngmod.particle_streams(self.seed, n)
        self.respawn_stream = rngmod.stream(self.seed, rngmod.RESPAWN_STREAM_TAG)
        self.bridge_streams = (
            [rngmod.stream(self.seed, BRIDGE_STREAM_TAG + i) for i in range(n)]
            if bridge_correction else None)
        self._noise = np.empty((n, 0, positions.shape[1]))
        self._bridge_u = np.empty((n, 0))
        self._cursor = 0

    @property
    def n_particles(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def _refill(self) -> None:
        n, d = self.positions.shape
        self._noise = np.empty((n, NOISE_CHUNK, d))
        if self.bridge_correction:
            self._bridge_u = np.empty((n, NOISE_CHUNK))

        def fill(lo, hi):
            for i in range(lo, hi):
                self._noise[i] = self.streams[i].standard_normal((NOISE_CHUNK, d))
                if self.bridge_correction:
                    self._bridge_u[i] = self.bridge_streams[i].random(NOISE_CHUNK)

        # fixed 128-particle chunks so the fill is thread-count independent
        chunks = [(lo, min(lo + 128, n)) for lo in range(0, n, 128)]
        if self.threads > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                list(pool.map(lambda c: fill(*c), chunks))
        else:
            for c in chunks:
                fill(*c)
        self._cursor = 0

    def _next_noise(self):
        if self._cursor >= self._noise.shape[1]:
            self._refill()
        k = self._cursor
        self._cursor += 1
        u = self._bridge_u[:, k] if self.bridge_correction else None
        return self._noise[:, k, :], u


def sample_initial(domain: DomainSpec, sampler: dict, rng: np.random.Generator,
                   n: int = 1) -> np.ndarray:
    """Draw n initial positions inside the domain from a sampler description."""
    kind = sampler.get("sampler", "uniform")
    d = domain.dim
    if kind == "point":
        at = np.atleast_1d(np.asarray(sampler["at"], dtype=float))
        if not contains(domain, at):
            raise ValueError(f"initial point {at} is not inside the domain")
        return np.tile(at, (n, 1))
    if kind == "uniform":
        if domain.kind == "interval":
            lo = sampler.get("low", domain.a)
            hi = sampler.get("high", domain.b)
            if not (domain.a <= lo < hi <= domain.b):
                raise ValueError(f"uniform range ({lo}, {hi}) not inside the domain")
            return lo + (hi - lo) * rng.random((n, 1))
        if domain.kind == "box":
            lo = np.array([ax[0] for ax in domain.axes])
            hi = np.array([ax[1] for ax in domain.axes])
            return lo + (hi - lo) * rng.random((n, d))
        # ball: rejection from the bounding box
        c = np.asarray(domain.center)
        out = np.empty((n, d))
        got = 0
        while got < n:
            cand = c - domain.radius + 2 * domain.radius * rng.random((2 * (n - got), d))
            keep = cand[np.sum((cand - c) ** 2, axis=1) < domain.radius**2]
            take = min(len(keep), n - got)
            out[got:got + take] = keep[:take]
            got += take
        return out
    if kind == "cosine":
        # principal Dirichlet profile on an interval, by inverse CDF
        if domain.kind != "interval":
            raise ValueError("cosine sampler needs an interval domain")
        length = domain.b - domain.a
        u = rng.random((n, 1))
        return domain.a + (length / np.pi) * np.arccos(1.0 - 2.0 * u)
    raise ValueError(f"unknown sampler {kind!r}")


def init_ensemble(domain: DomainSpec, n: int, initial, seed: int,
                  bridge_correction: bool = False, threads: int = 1) -> ParticleEnsemble:
    """Fresh ensemble of n particles; `initial` is explicit positions or a sampler dict.

    Deterministic for a given seed: sampled initial positions are drawn from
    each particle's own stream.
    """
    if n < 2:
        raise ValueError(f"need at least 2 particles, got {n}")
    ens = ParticleEnsemble(domain, np.zeros((n, domain.dim)), seed,
                           bridge_correction=bridge_correction, threads=threads)
    if isinstance(initial, dict):
        pos = np.vstack([sample_initial(domain, initial, ens.streams[i], 1) for i in range(n)])
    else:
        pos = np.asarray(initial, dtype=float)
        if pos.ndim == 1:
            pos = pos[:, None]
        if pos.shape != (n, domain.dim):
            raise ValueError(f"expected {n} positions of dimension {domain.dim}, got {pos.shape}")
        for p in pos:
            if not contains(domain, p):
                raise ValueError(f"initial position {p} is not inside the domain")
    ens.positions = pos.astype(float)
    return ens


def step(ensemble: ParticleEnsemble, drift: DriftSpec, domain: DomainSpec,
         dt: float) -> tuple[ParticleEnsemble, list[EventRecord]]:
    """Advance one Euler step of size dt, resolving kills by respawn.

    The drift is frozen at the start-of-step empirical measure.  Returns the
    ensemble (advanced in place) and the step's respawn events.  Raises
    StepTooCoarseError when more than half the particles cross at once.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    n, d = ensemble.positions.shape
    start = ensemble.positions

    summary = summarize(start)
    bvec = evaluate_drift_batch(drift, summary, start)
    noise, bridge_u = ensemble._next_noise()
    proposals = start + bvec * dt + np.sqrt(dt) * noise

    crossed = ~_inside_mask(domain, proposals)
    if ensemble.bridge_correction:
        interior = ~crossed
        if interior.any():
            d1 = _boundary_distance_batch(domain, start[interior])
            d2 = _boundary_distance_batch(domain, proposals[interior])
            p_exit = np.exp(-2.0 * d1 * d2 / dt)
            kills = bridge_u[interior] < p_exit
            idx = np.flatnonzero(interior)[kills]
            crossed[idx] = True

    n_cross = int(crossed.sum())
    if n_cross > n / 2:
        raise StepTooCoarseError(
            f"{n_cross} of {n} particles crossed in one step: step too coarse")

    new_time = ensemble.time + dt
    events: list[EventRecord] = []
    new_pos = proposals
    if n_cross > 0:
        new_pos = proposals.copy()
        crosser_idx = np.flatnonzero(crossed)
        order = ensemble.respawn_stream.permutation(n_cross)
        resolved = ~crossed
        for i in crosser_idx[order]:
            j = int(ensemble.respawn_stream.integers(0, n - 1))
            if j >= i:
                j += 1
            landing = new_pos[j] if resolved[j] else start[j]
            new_pos[i] = landing
            resolved[i] = True
            ensemble.death_counts[i] += 1
            events.append(EventRecord(time=new_time, dying=int(i),
                                      death_ordinal=int(ensemble.death_counts[i]),
                                      target=j, landing=landing.copy()))
        ensemble.jump_count += n_cross

    ensemble.positions = new_pos
    ensemble.time = new_time
    return ensemble, events


def run(ensemble: ParticleEnsemble, drift: DriftSpec, domain: DomainSpec,
        T: float, dt: float, snapshot_every: float) -> tuple[TrajectorySeries, EventLog]:
    """Iterate `step` to horizon T, recording snapshots every `snapshot_every`."""
    if T <= 0:
        raise ValueError("T must be positive")
    if snapshot_every < dt:
        raise ValueError("snapshot_every must be at least dt")
    n_steps = int(round(T / dt))
    stride = max(1, int(round(snapshot_every / dt)))
    n = ensemble.n_particles

    log = EventLog()
    times = [ensemble.time]
    positions = [ensemble.positions.copy()]
    js = [ensemble.jump_count / n]
    for k in range(1, n_steps + 1):
        _, events = step(ensemble, drift, domain, dt)
        for e in events:
            log.append(e)
        if k % stride == 0 or k == n_steps:
            times.append(ensemble.time)
            positions.append(ensemble.positions.copy())
            js.append(ensemble.jump_count / n)

    series = TrajectorySeries(domain=domain, times=np.asarray(times),
                              positions=np.asarray(positions), js=np.asarray(js))
    return series, log


def _interp_particle(series: TrajectorySeries, idx: int, t: float) -> np.ndarray:
    times = series.times
    k = int(np.searchsorted(times, t, side="right")) - 1
    k = max(0, min(k, len(times) - 1))
    if k == len(times) - 1 or times[k] == t:
        return series.positions[k, idx].copy()
    t0, t1 = times[k], times[k + 1]
    w = (t - t0) / (t1 - t0)
    return (1 - w) * series.positions[k, idx] + w * series.positions[k + 1, idx]


def reconstruct_dhp(log: EventLog, series: TrajectorySeries, i: int, t: float
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Ancestral path ending at particle i at time t.

    Walks the event log backward from (i, t): each death of the currently
    followed particle transfers the path onto the particle it jumped onto,
    down to time 0.  Read forward the path is continuous across transfers:
    the recorded landing equals the target's position at the transfer.
    Returns (times, points) sampled at snapshot times and transfer times.
    """
    n = series.n_particles
    if not 0 <= i < n:
        raise IndexError(f"particle index {i} out of range for N={n}")
    if t > series.times[-1] + 1e-12:
        raise ValueError(f"t={t} beyond the end of the series ({series.times[-1]})")

    # transfers, oldest first (log order is resolution order; scan newest-first)
    transfers: list[EventRecord] = []
    cur = i
    for rec in reversed(log.records):
        if rec.time > t:
            continue
        if rec.dying == cur:
            transfers.append(rec)
            cur = rec.target
    transfers.reverse()

    seg_bounds = [series.times[0]] + [rec.time for rec in transfers] + [t]
    seg_particle = [cur] + [rec.dying for rec in transfers]
    seg_start_point = [series.positions[0, cur].copy()] + [rec.landing for rec in transfers]

    out_t: list[float] = []
    out_x: list[np.ndarray] = []
    snap_times = series.times
    for k, who in enumerate(seg_particle):
        s0, s1 = seg_bounds[k], seg_bounds[k + 1]
        out_t.append(s0)
        out_x.append(np.asarray(seg_start_point[k], dtype=float))
        inside = snap_times[(snap_times > s0) & (snap_times < s1)]
        for s in inside:
            out_t.append(float(s))
            out_x.append(series.positions[int(np.searchsorted(snap_times, s)), who])
    out_t.append(float(t))
    out_x.append(_interp_particle(series, seg_particle[-1], t))
    return np.asarray(out_t), np.asarray(out_x)


def absorbed_lifetimes(domain: DomainSpec, n: int, dt: float, seed: int,
                       initial: dict | None = None, t_max: float = 50.0,
                       bridge_correction: bool = False) -> np.ndarray:
    """Lifetimes of n independent driftless diffusions killed at the boundary.

    Walkers start from `initial` (default: the cosine profile) and move by
    Euler increments until their segment crosses the boundary; the crossing
    fraction refines the recorded death time inside the step.  Raises if any
    walker survives past t_max.
    """
    gen = rngmod.stream(seed, 0)
    sampler = initial if initial is not None else {"sampler": "cosine"}
    pos = sample_initial(domain, sampler, gen, n)
    alive = np.arange(n)
    taus = np.full(n, np.nan)
    sqdt = np.sqrt(dt)
    n_steps = int(np.ceil(t_max / dt))
    for k in range(1, n_steps + 1):
        props = pos + sqdt * gen.standard_normal(pos.shape)
        dead = ~_inside_mask(domain, props)
        if bridge_correction:
            live = ~dead
            if live.any():
                d1 = _boundary_distance_batch(domain, pos[live])
                d2 = _boundary_distance_batch(domain, props[live])
                kills = gen.random(int(live.sum())) < np.exp(-2.0 * d1 * d2 / dt)
                dd = np.flatnonzero(live)[kills]
                dead[dd] = True
        if dead.any():
            for local in np.flatnonzero(dead):
                s = crossing_fraction(domain, pos[local], props[local])
                s = 1.0 if s is None else s  # bridge kill: no geometric crossing
                taus[alive[local]] = (k - 1 + s) * dt
            keep = ~dead
            pos, alive = props[keep], alive[keep]
        else:
            pos = props
        if alive.size == 0:
            return taus
    raise SimulationError(f"{alive.size} walkers still alive at t_max={t_max}")
