"""Experiment configuration: one JSON document per run, validated up front.

Invalid configs raise ConfigError with a message naming the offending
field; the CLI maps that to exit code 1 before any computation starts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .drift import DriftSpec, drift_from_config
from .geometry import DomainSpec, domain_from_config

__all__ = ["ConfigError", "ExperimentConfig", "load_config"]


class ConfigError(ValueError):
    pass


def _require(cfg: dict, name: str, kind, where: str = "config"):
    if name not in cfg:
        raise ConfigError(f"{where} is missing required field {name!r}")
    v = cfg[name]
    if kind is float and isinstance(v, int) and not isinstance(v, bool):
        v = float(v)
    if not isinstance(v, kind):
        raise ConfigError(f"{where} field {name!r} must be of type {kind.__name__}, got {type(v).__name__}")
    return v


@dataclass
class ExperimentConfig:
    """Validated bundle of everything an experiment needs."""

    domain: DomainSpec
    drift: DriftSpec
    n_particles: int
    dt: float
    t_horizon: float
    snapshot_every: float
    seed: int
    bridge_correction: bool
    initial: dict
    bins: int
    burn_in: float
    spacing: float
    pde_nodes: int
    pde_dt: float
    qsd: dict = field(default_factory=dict)
    bifurcation: dict = field(default_factory=dict)
    bessel: dict = field(default_factory=dict)
    compare: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)


def parse_config(cfg: dict) -> ExperimentConfig:
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    try:
        domain = domain_from_config(_require(cfg, "domain", dict))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"config field 'domain' is invalid: {exc}") from exc
    try:
        drift = drift_from_config(_require(cfg, "drift", dict), domain)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"config field 'drift' is invalid: {exc}") from exc

    n = _require(cfg, "N", int)
    if n < 2:
        raise ConfigError("config field 'N' must be at least 2")
    dt = _require(cfg, "dt", float)
    t_horizon = _require(cfg, "T", float)
    if dt <= 0 or t_horizon <= 0:
        raise ConfigError("config fields 'dt' and 'T' must be positive")
    snapshot_every = float(cfg.get("snapshot_every", max(dt, t_horizon / 100.0)))
    if snapshot_every < dt:
        raise ConfigError("config field 'snapshot_every' must be at least dt")
    seed = _require(cfg, "seed", int)
    if not 0 <= seed < 2**64:
        raise ConfigError("config field 'seed' must be a 64-bit unsigned integer")

    initial = cfg.get("initial", {"sampler": "uniform"})
    if not isinstance(initial, dict):
        raise ConfigError("config field 'initial' must be an object")

    est = cfg.get("estimators", {})
    bins = int(est.get("bins", 64))
    if bins < 1:
        raise ConfigError("estimators field 'bins' must be positive")
    burn_in = float(est.get("burn_in", t_horizon / 3.0))
    spacing = float(est.get("spacing", snapshot_every))

    pde = cfg.get("pde", {})
    pde_nodes = int(pde.get("m", 799))
    pde_dt = float(pde.get("dt", dt))

    return ExperimentConfig(
        domain=domain, drift=drift, n_particles=n, dt=dt, t_horizon=t_horizon,
        snapshot_every=snapshot_every, seed=seed,
        bridge_correction=bool(cfg.get("bridge_correction", False)),
        initial=initial, bins=bins, burn_in=burn_in, spacing=spacing,
        pde_nodes=pde_nodes, pde_dt=pde_dt,
        qsd=cfg.get("qsd", {}), bifurcation=cfg.get("bifurcation", {}),
        bessel=cfg.get("bessel", {}), compare=cfg.get("compare", {}), raw=cfg)


def load_config(path: str | Path) -> ExperimentConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {p} does not exist")
    try:
        cfg = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {p} is not valid JSON: {exc}") from exc
    return parse_config(cfg)
