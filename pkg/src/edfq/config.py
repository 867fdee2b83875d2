"""INI-file configuration for the command-line tools.

A config file carries five optional sections; every key has a default, so
an empty (or absent) file is a complete configuration describing the
near-critical base case used throughout the package:

    [primitives]
    interarrival = exponential rate=0.5
    service = exponential rate=0.510204081632653
    lead = uniform lo=5 hi=20

    [run]
    seed = 1
    count = 100000
    policy = edf_reneging
    samples = 0
    rational = false

    [sweep]
    lead_lo = 5
    lead_hi = 20 50 100 200
    count = 1000000
    seed = 1
    warmup = 0.05
    batches = 32

    [diffusion]
    gamma = 0 0.25 0.5 1
    sigma2 = 1.0
    h0 = 1.0
    t_end = 200
    dt = 1e-4
    paths = 100
    seed = 0
    bins = 200

    [audit]
    streams = 20
    customers = 200
    seed = 7
    tolerance = 1e-9
    exact_every = 4

    [output]
    dir = out

``[run]`` accepts ``horizon`` instead of ``count`` (exactly one of the
two).  List-valued keys are whitespace-separated.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .primitives import DistributionSpec, LeadTimeSpec, PrimitivesError
from .simulator import PolicyKind


class ConfigError(ValueError):
    """Raised when a configuration file cannot be interpreted."""


@dataclass(frozen=True)
class RunSection:
    seed: int = 1
    count: Optional[int] = 100_000
    horizon: Optional[float] = None
    policy: PolicyKind = PolicyKind.EDF_RENEGING
    samples: int = 0
    rational: bool = False


@dataclass(frozen=True)
class SweepSection:
    lead_lo: float = 5.0
    lead_hi: tuple = (20.0, 50.0, 100.0, 200.0)
    count: int = 1_000_000
    seed: int = 1
    warmup: float = 0.05
    batches: int = 32


@dataclass(frozen=True)
class DiffusionSection:
    gamma: tuple = (0.0, 0.25, 0.5, 1.0)
    sigma2: float = 1.0
    h0: float = 1.0
    t_end: float = 200.0
    dt: float = 1e-4
    paths: int = 100
    seed: int = 0
    bins: int = 200


@dataclass(frozen=True)
class AuditSection:
    streams: int = 20
    customers: int = 200
    seed: int = 7
    tolerance: float = 1e-9
    exact_every: int = 4


@dataclass(frozen=True)
class Settings:
    interarrival: DistributionSpec = field(
        default_factory=lambda: DistributionSpec.exponential(0.5))
    service: DistributionSpec = field(
        default_factory=lambda: DistributionSpec.exponential(
            0.510204081632653))
    lead: LeadTimeSpec = field(
        default_factory=lambda: LeadTimeSpec.parse("uniform lo=5 hi=20"))
    run: RunSection = field(default_factory=RunSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    diffusion: DiffusionSection = field(default_factory=DiffusionSection)
    audit: AuditSection = field(default_factory=AuditSection)
    output_dir: Path = Path("out")


def _get(parser, section, key, cast, default):
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key)
    try:
        return cast(raw)
    except (ValueError, PrimitivesError) as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from exc


def _floats(raw: str) -> tuple:
    vals = tuple(float(tok) for tok in raw.split())
    if not vals:
        raise ValueError("expected at least one number")
    return vals


def _bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


_SECTIONS = ("primitives", "run", "sweep", "diffusion", "audit", "output")


def load_settings(path: Optional[str] = None) -> Settings:
    """Read a config file (``None`` means all defaults)."""
    parser = configparser.ConfigParser()
    if path is not None:
        found = parser.read(path)
        if not found:
            raise ConfigError(f"config file not found: {path}")
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
    base = Settings()

    interarrival = _get(parser, "primitives", "interarrival",
                        DistributionSpec.parse, base.interarrival)
    service = _get(parser, "primitives", "service",
                   DistributionSpec.parse, base.service)
    lead = _get(parser, "primitives", "lead", LeadTimeSpec.parse, base.lead)

    count = _get(parser, "run", "count", int, None)
    horizon = _get(parser, "run", "horizon", float, None)
    if count is not None and horizon is not None:
        raise ConfigError("[run] supply count or horizon, not both")
    if count is None and horizon is None:
        count = RunSection.count
    run = RunSection(
        seed=_get(parser, "run", "seed", int, RunSection.seed),
        count=count,
        horizon=horizon,
        policy=_get(parser, "run", "policy", PolicyKind, RunSection.policy),
        samples=_get(parser, "run", "samples", int, RunSection.samples),
        rational=_get(parser, "run", "rational", _bool, RunSection.rational),
    )
    if run.samples < 0:
        raise ConfigError("[run] samples must be >= 0")

    sweep = SweepSection(
        lead_lo=_get(parser, "sweep", "lead_lo", float, SweepSection.lead_lo),
        lead_hi=_get(parser, "sweep", "lead_hi", _floats,
                     SweepSection.lead_hi),
        count=_get(parser, "sweep", "count", int, SweepSection.count),
        seed=_get(parser, "sweep", "seed", int, SweepSection.seed),
        warmup=_get(parser, "sweep", "warmup", float, SweepSection.warmup),
        batches=_get(parser, "sweep", "batches", int, SweepSection.batches),
    )
    for hi in sweep.lead_hi:
        if hi <= sweep.lead_lo:
            raise ConfigError("[sweep] every lead_hi must exceed lead_lo")
    if sweep.lead_lo <= 0:
        raise ConfigError("[sweep] lead_lo must be positive")

    diffusion = DiffusionSection(
        gamma=_get(parser, "diffusion", "gamma", _floats,
                   DiffusionSection.gamma),
        sigma2=_get(parser, "diffusion", "sigma2", float,
                    DiffusionSection.sigma2),
        h0=_get(parser, "diffusion", "h0", float, DiffusionSection.h0),
        t_end=_get(parser, "diffusion", "t_end", float,
                   DiffusionSection.t_end),
        dt=_get(parser, "diffusion", "dt", float, DiffusionSection.dt),
        paths=_get(parser, "diffusion", "paths", int, DiffusionSection.paths),
        seed=_get(parser, "diffusion", "seed", int, DiffusionSection.seed),
        bins=_get(parser, "diffusion", "bins", int, DiffusionSection.bins),
    )
    if diffusion.sigma2 <= 0 or diffusion.h0 <= 0 or diffusion.dt <= 0 \
            or diffusion.t_end <= diffusion.dt or diffusion.paths < 1:
        raise ConfigError("[diffusion] needs sigma2, h0, dt > 0, "
                          "t_end > dt and paths >= 1")
    if any(g < 0 for g in diffusion.gamma):
        raise ConfigError("[diffusion] gamma values must be >= 0")

    audit = AuditSection(
        streams=_get(parser, "audit", "streams", int, AuditSection.streams),
        customers=_get(parser, "audit", "customers", int,
                       AuditSection.customers),
        seed=_get(parser, "audit", "seed", int, AuditSection.seed),
        tolerance=_get(parser, "audit", "tolerance", float,
                       AuditSection.tolerance),
        exact_every=_get(parser, "audit", "exact_every", int,
                         AuditSection.exact_every),
    )
    if audit.streams < 1 or audit.customers < 1:
        raise ConfigError("[audit] streams and customers must be >= 1")

    output_dir = Path(_get(parser, "output", "dir", str,
                           str(Settings.output_dir)))
    return Settings(interarrival=interarrival, service=service, lead=lead,
                    run=run, sweep=sweep, diffusion=diffusion, audit=audit,
                    output_dir=output_dir)
