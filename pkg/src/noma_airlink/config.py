"""Scenario configuration files (JSON), defaults, validation and sweep expansion.

Angles in configuration files are degrees and powers are dBm; both are
converted to radians and watts when scenarios are built.
"""

from __future__ import annotations

import itertools
import json
import math
import re
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .channel import GainModel, NomaPower, RadioConfig, dbm_to_watt
from .errors import DomainError, ParseError, ValidationError
from .geometry import UserRegion
from .ordering import ALL_STRATEGIES, NomaPair, OrderingStrategy
from .outage import QosTargets, Scenario

MODES = ("analytic", "mc", "both")
ALTITUDE_LIMITS = (10.0, 150.0)


@dataclass(frozen=True)
class RegionSection:
    l1: float = 85.0
    l2: float = 100.0
    delta: float = 5.0
    lam: float = 1.0


@dataclass(frozen=True)
class RadioSection:
    m: int = 100
    p_tx: float = 20.0
    n0: float = -35.0
    gamma: float = 2.0


@dataclass(frozen=True)
class NomaSection:
    j: int = 20
    i: int = 25
    beta_j_sq: float = 0.25
    beta_i_sq: float = 0.75
    rate_j: float = 6.0
    rate_i: float = 0.5
    interference_free_eta_i: bool = False


@dataclass(frozen=True)
class SweepSection:
    h_min: float = 10.0
    h_max: float = 150.0
    h_step: float = 10.0
    h_list: tuple[float, ...] | None = None
    delta_grid: tuple[float, ...] | None = None
    l1_grid: tuple[float, ...] | None = None
    p_tx_grid: tuple[float, ...] | None = None
    pairs: tuple[tuple[int, int], ...] | None = None
    enforce_altitude_limits: bool = True


@dataclass(frozen=True)
class RunSection:
    strategies: tuple[str, ...] = tuple(s.value for s in ALL_STRATEGIES)
    n_trials: int = 100_000
    seed: int = 0
    mode: str = "both"
    gain_model: str = "approx"


@dataclass(frozen=True)
class ScenarioConfig:
    region: RegionSection = field(default_factory=RegionSection)
    radio: RadioSection = field(default_factory=RadioSection)
    noma: NomaSection = field(default_factory=NomaSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    run: RunSection = field(default_factory=RunSection)

    def to_dict(self) -> dict:
        return asdict(self)

    def with_run(self, **changes) -> "ScenarioConfig":
        return replace(self, run=replace(self.run, **changes))


@dataclass(frozen=True)
class SweepPoint:
    """One evaluation point; angles in degrees, power in dBm."""

    h: float
    delta_deg: float
    l1: float
    p_tx_dbm: float
    j: int
    i: int


_SECTION_TYPES = {
    "region": RegionSection,
    "radio": RadioSection,
    "noma": NomaSection,
    "sweep": SweepSection,
    "run": RunSection,
}


def _line_of(text: str, key: str) -> int | None:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _where(text: str, key: str) -> str:
    line = _line_of(text, key)
    return f" (line {line})" if line else ""


def _coerce(section: str, name: str, value, default, text: str):
    where = _where(text, name)
    if isinstance(default, bool) or name in ("interference_free_eta_i", "enforce_altitude_limits"):
        if not isinstance(value, bool):
            raise ParseError(f"{section}.{name} must be true or false{where}")
        return value
    if name in ("h_list", "delta_grid", "l1_grid", "p_tx_grid"):
        if value is None:
            return None
        if not isinstance(value, list) or not value or not all(_is_number(v) for v in value):
            raise ParseError(f"{section}.{name} must be a non-empty list of numbers{where}")
        return tuple(float(v) for v in value)
    if name == "pairs":
        if value is None:
            return None
        ok = isinstance(value, list) and value and all(
            isinstance(p, list) and len(p) == 2 and all(isinstance(x, int) and not isinstance(x, bool) for x in p)
            for p in value
        )
        if not ok:
            raise ParseError(f"{section}.{name} must be a list of [j, i] integer pairs{where}")
        return tuple((int(a), int(b)) for a, b in value)
    if name == "strategies":
        if not isinstance(value, list) or not value or not all(isinstance(v, str) for v in value):
            raise ParseError(f"{section}.{name} must be a non-empty list of strategy names{where}")
        return tuple(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ParseError(f"{section}.{name} must be a string{where}")
        return value
    if isinstance(default, int):
        if not (isinstance(value, int) and not isinstance(value, bool)):
            raise ParseError(f"{section}.{name} must be an integer{where}")
        return value
    if not _is_number(value):
        raise ParseError(f"{section}.{name} must be a number{where}")
    return float(value)


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def config_from_dict(data: dict, text: str = "") -> ScenarioConfig:
    """Build a config from a parsed mapping, filling defaults and rejecting unknown keys."""
    if not isinstance(data, dict):
        raise ParseError("configuration must be a JSON object")
    sections = {}
    for key, body in data.items():
        if key not in _SECTION_TYPES:
            raise ParseError(f"unknown section {key!r}{_where(text, key)}; expected one of {sorted(_SECTION_TYPES)}")
        if not isinstance(body, dict):
            raise ParseError(f"section {key!r} must be an object{_where(text, key)}")
        cls = _SECTION_TYPES[key]
        defaults = cls()
        known = {f.name for f in fields(cls)}
        values = {}
        for name, value in body.items():
            if name not in known:
                raise ParseError(f"unknown key {key}.{name}{_where(text, name)}; expected one of {sorted(known)}")
            values[name] = _coerce(key, name, value, getattr(defaults, name), text)
        sections[key] = cls(**values)
    cfg = ScenarioConfig(**sections)
    validate(cfg)
    return cfg


def parse_config(path) -> ScenarioConfig:
    """Read a JSON scenario file; an empty file yields the default scenario."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    if not text.strip():
        return ScenarioConfig()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return config_from_dict(data, text)


def altitudes(sweep: SweepSection) -> list[float]:
    if sweep.h_list is not None:
        return list(sweep.h_list)
    if sweep.h_step <= 0 or sweep.h_max < sweep.h_min:
        raise ValidationError("altitude sweep needs h_step > 0 and h_max >= h_min")
    n = int(math.floor((sweep.h_max - sweep.h_min) / sweep.h_step + 1e-9)) + 1
    return [float(v) for v in np.round(sweep.h_min + sweep.h_step * np.arange(n), 10)]


def sweep_points(cfg: ScenarioConfig) -> list[SweepPoint]:
    """Cartesian sweep in a fixed order: pair, power, l1, delta, altitude (fastest)."""
    sw = cfg.sweep
    pairs = sw.pairs or ((cfg.noma.j, cfg.noma.i),)
    powers = sw.p_tx_grid or (cfg.radio.p_tx,)
    l1s = sw.l1_grid or (cfg.region.l1,)
    deltas = sw.delta_grid or (cfg.region.delta,)
    return [
        SweepPoint(h, d, l1, p, j, i)
        for (j, i), p, l1, d, h in itertools.product(pairs, powers, l1s, deltas, altitudes(sw))
    ]


def scenario_at(cfg: ScenarioConfig, pt: SweepPoint) -> Scenario:
    r, n = cfg.radio, cfg.noma
    return Scenario(
        region=UserRegion(l1=pt.l1, l2=cfg.region.l2, delta=math.radians(pt.delta_deg), lam=cfg.region.lam),
        radio=RadioConfig(m=r.m, altitude=pt.h, p_tx=dbm_to_watt(pt.p_tx_dbm), n0=dbm_to_watt(r.n0), gamma=r.gamma),
        powers=NomaPower(beta_j_sq=n.beta_j_sq, beta_i_sq=n.beta_i_sq),
        qos=QosTargets(rate_j=n.rate_j, rate_i=n.rate_i),
        pair=NomaPair(j=pt.j, i=pt.i),
        interference_free_eta_i=n.interference_free_eta_i,
    )


def strategies_of(cfg: ScenarioConfig) -> list[OrderingStrategy]:
    return [OrderingStrategy(s) for s in cfg.run.strategies]


def validate(cfg: ScenarioConfig) -> None:
    """Raise :class:`ValidationError` naming the first violated invariant."""
    run = cfg.run
    if run.mode not in MODES:
        raise ValidationError(f"run.mode must be one of {MODES}, got {run.mode!r}")
    try:
        GainModel(run.gain_model)
    except ValueError:
        raise ValidationError(f"run.gain_model must be 'approx' or 'exact', got {run.gain_model!r}") from None
    names = {s.value for s in ALL_STRATEGIES}
    for s in run.strategies:
        if s not in names:
            raise ValidationError(f"unknown strategy {s!r}; expected one of {sorted(names)}")
    if len(set(run.strategies)) != len(run.strategies):
        raise ValidationError("run.strategies contains duplicates")
    if run.n_trials < 1:
        raise ValidationError("run.n_trials must be >= 1")
    if run.seed < 0:
        raise ValidationError("run.seed must be non-negative")
    pts = sweep_points(cfg)
    if cfg.sweep.enforce_altitude_limits:
        lo, hi = ALTITUDE_LIMITS
        bad = [p.h for p in pts if not lo <= p.h <= hi]
        if bad:
            raise ValidationError(f"altitude {bad[0]} m outside [{lo:g}, {hi:g}] m (set sweep.enforce_altitude_limits to false to allow)")
    for pt in {(p.delta_deg, p.l1, p.p_tx_dbm, p.j, p.i): p for p in pts}.values():
        try:
            scenario_at(cfg, pt)
        except DomainError as exc:
            raise ValidationError(str(exc)) from None
    # altitude only enters RadioConfig; check each once
    for h in {p.h for p in pts}:
        try:
            scenario_at(cfg, replace(pts[0], h=h))
        except DomainError as exc:
            raise ValidationError(str(exc)) from None
