"""Run configuration: TOML text <-> validated :class:`RunConfig`.

Layout (every key optional except where noted)::

    system = "A"                     # A, B or cubic

    [grid]
    n_points = 1024
    L = 20.0

    [integrator]
    t_end = 1.0
    cfl = 0.3
    dt_min = 1e-9
    field_cap = 1e6
    sample_interval = 0.1

    [[init.m0]]                      # zero or more profile terms per field
    family = "gaussian"              # gaussian, bump, mollified_peakon, zero
    amplitude = 1.0
    center = -0.5
    width = 1.0                      # mollified_peakon: 5 dx when omitted
    sign = 1

    [characteristics]
    n_seeds = 64
    extra_seeds = []

    [prediction]
    x0 = []                          # extra points for ``predict``

    [outputs]
    directory = ""                   # empty: <output root>/<name>
    snapshot_every = 0               # 0 disables field snapshots
    name = "run"
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import tomli
import tomli_w

from .dynamics import InitSpec, InitTerm, SystemKind
from .integrator import IntegratorConfig
from .spectral_core import Grid1D

__all__ = [
    "ConfigError",
    "GridConfig",
    "CharacteristicsConfig",
    "OutputsConfig",
    "PredictionConfig",
    "RunConfig",
    "parse_config",
    "load_config",
    "serialize_config",
    "config_from_dict",
    "apply_overrides",
]


class ConfigError(ValueError):
    """Malformed or invalid configuration."""


@dataclass(frozen=True)
class GridConfig:
    n_points: int = 1024
    L: float = 20.0

    def build(self) -> Grid1D:
        return Grid1D(self.n_points, self.L)


@dataclass(frozen=True)
class CharacteristicsConfig:
    n_seeds: int = 64
    extra_seeds: tuple[float, ...] = ()


@dataclass(frozen=True)
class OutputsConfig:
    directory: str = ""
    snapshot_every: int = 0
    name: str = "run"


@dataclass(frozen=True)
class PredictionConfig:
    x0: tuple[float, ...] = ()


@dataclass(frozen=True)
class RunConfig:
    system: SystemKind = SystemKind.A
    grid: GridConfig = field(default_factory=GridConfig)
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    m0: InitSpec = field(default_factory=InitSpec)
    n0: InitSpec = field(default_factory=InitSpec)
    characteristics: CharacteristicsConfig = field(default_factory=CharacteristicsConfig)
    prediction: PredictionConfig = field(default_factory=PredictionConfig)
    outputs: OutputsConfig = field(default_factory=OutputsConfig)

    def to_dict(self) -> dict:
        """Complete plain-data form, defaults included."""
        def terms(spec: InitSpec):
            return [{"family": t.family, "amplitude": t.amplitude, "center": t.center,
                     "width": t.width, "sign": t.sign} for t in spec.terms]

        return {
            "system": self.system.value,
            "grid": {"n_points": self.grid.n_points, "L": self.grid.L},
            "integrator": {f.name: getattr(self.integrator, f.name) for f in fields(IntegratorConfig)},
            "init": {"m0": terms(self.m0), "n0": terms(self.n0)},
            "characteristics": {"n_seeds": self.characteristics.n_seeds,
                                "extra_seeds": list(self.characteristics.extra_seeds)},
            "prediction": {"x0": list(self.prediction.x0)},
            "outputs": {"directory": self.outputs.directory,
                        "snapshot_every": self.outputs.snapshot_every,
                        "name": self.outputs.name},
        }


_SECTIONS = {
    "grid": {"n_points", "L"},
    "integrator": {f.name for f in fields(IntegratorConfig)},
    "init": {"m0", "n0"},
    "characteristics": {"n_seeds", "extra_seeds"},
    "prediction": {"x0"},
    "outputs": {"directory", "snapshot_every", "name"},
}
_TERM_KEYS = {"family", "amplitude", "center", "width", "sign"}


def _check_keys(where: str, got, allowed) -> None:
    unknown = sorted(set(got) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key{'s' if len(unknown) > 1 else ''} "
                          f"{', '.join(repr(k) for k in unknown)} in {where}")


def _num(where: str, v, kind=float):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where} must be a number, got {v!r}")
    if kind is int:
        if isinstance(v, float) and not v.is_integer():
            raise ConfigError(f"{where} must be an integer, got {v!r}")
        return int(v)
    v = float(v)
    if not math.isfinite(v):
        raise ConfigError(f"{where} must be finite, got {v!r}")
    return v


def _table(where: str, v) -> dict:
    if not isinstance(v, dict):
        raise ConfigError(f"{where} must be a table")
    return v


def _num_list(where: str, v) -> tuple[float, ...]:
    if not isinstance(v, list):
        raise ConfigError(f"{where} must be an array of numbers")
    return tuple(_num(f"{where}[{i}]", x) for i, x in enumerate(v))


def _default_width(family, dx: float) -> float:
    # peakon mollifiers default to five grid spacings, every other profile to 1
    return 5.0 * dx if family == "mollified_peakon" else 1.0


def _init_spec(where: str, raw, dx: float) -> InitSpec:
    if isinstance(raw, dict):
        raw = [raw]
    if not isinstance(raw, list):
        raise ConfigError(f"{where} must be an array of tables")
    terms = []
    for i, t in enumerate(raw):
        w = f"{where}[{i}]"
        t = _table(w, t)
        _check_keys(w, t, _TERM_KEYS)
        if "family" not in t:
            raise ConfigError(f"{w} needs a 'family'")
        try:
            terms.append(InitTerm(
                family=str(t["family"]),
                amplitude=_num(f"{w}.amplitude", t.get("amplitude", 0.0)),
                center=_num(f"{w}.center", t.get("center", 0.0)),
                width=_num(f"{w}.width", t.get("width", _default_width(t.get("family"), dx))),
                sign=_num(f"{w}.sign", t.get("sign", 1), int),
            ))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{w}: {exc}") from None
    return InitSpec(tuple(terms))


def config_from_dict(raw: dict) -> RunConfig:
    """Validate a plain mapping (as produced by a TOML parser) into a :class:`RunConfig`."""
    _check_keys("the top level", raw, {"system", *_SECTIONS})
    for sec, allowed in _SECTIONS.items():
        if sec in raw:
            _check_keys(f"[{sec}]", _table(f"[{sec}]", raw[sec]), allowed)
    try:
        system = SystemKind.parse(raw.get("system", "A"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    g = raw.get("grid", {})
    try:
        grid = GridConfig(_num("grid.n_points", g.get("n_points", 1024), int),
                          _num("grid.L", g.get("L", 20.0)))
        grid.build()
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"[grid]: {exc}") from None

    it = raw.get("integrator", {})
    defaults = IntegratorConfig()
    try:
        integ = IntegratorConfig(**{f.name: _num(f"integrator.{f.name}", it.get(f.name, getattr(defaults, f.name)))
                                    for f in fields(IntegratorConfig)})
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"[integrator]: {exc}") from None

    init = raw.get("init", {})
    dx = 2.0 * grid.L / grid.n_points
    m0 = _init_spec("init.m0", init.get("m0", []), dx)
    n0 = _init_spec("init.n0", init.get("n0", []), dx)

    ch = raw.get("characteristics", {})
    n_seeds = _num("characteristics.n_seeds", ch.get("n_seeds", 64), int)
    if n_seeds < 0:
        raise ConfigError("characteristics.n_seeds must be non-negative")
    chars = CharacteristicsConfig(n_seeds, _num_list("characteristics.extra_seeds", ch.get("extra_seeds", [])))

    pred = PredictionConfig(_num_list("prediction.x0", raw.get("prediction", {}).get("x0", [])))

    out = raw.get("outputs", {})
    snap = _num("outputs.snapshot_every", out.get("snapshot_every", 0), int)
    if snap < 0:
        raise ConfigError("outputs.snapshot_every must be non-negative")
    directory, name = out.get("directory", ""), out.get("name", "run")
    if not isinstance(directory, str) or not isinstance(name, str) or not name:
        raise ConfigError("outputs.directory and outputs.name must be strings (name non-empty)")
    outputs = OutputsConfig(directory, snap, name)

    cfg = RunConfig(system, grid, integ, m0, n0, chars, pred, outputs)
    _validate_against_grid(cfg)
    return cfg


def _validate_against_grid(cfg: RunConfig) -> None:
    from .dynamics import build_momentum

    grid = cfg.grid.build()
    for name, spec in (("init.m0", cfg.m0), ("init.n0", cfg.n0)):
        try:
            build_momentum(grid, spec)
        except ValueError as exc:
            raise ConfigError(f"{name}: {exc}") from None
    L = grid.half_length
    for x in (*cfg.characteristics.extra_seeds, *cfg.prediction.x0):
        if not -L <= x < L:
            raise ConfigError(f"point {x} lies outside the box [-{L:g}, {L:g})")


def parse_config(text: str) -> RunConfig:
    """Parse TOML text; syntax errors carry line and column."""
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}") from None
    return config_from_dict(raw)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def serialize_config(cfg: RunConfig) -> str:
    return tomli_w.dumps(cfg.to_dict())


def _coerce(text: str):
    try:
        return tomli.loads(f"v = {text}")["v"]
    except tomli.TOMLDecodeError:
        return text


def apply_overrides(cfg: RunConfig, overrides) -> RunConfig:
    """Apply ``section.key=value`` overrides; values use TOML literal syntax."""
    raw = cfg.to_dict()
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, value = item.split("=", 1)
        parts = key.strip().split(".")
        node = raw
        for p in parts[:-1]:
            if p not in node or not isinstance(node[p], dict):
                raise ConfigError(f"unknown override section {key!r}")
            node = node[p]
        if parts[-1] not in node:
            raise ConfigError(f"unknown override key {key!r}")
        node[parts[-1]] = _coerce(value.strip())
    return config_from_dict(raw)


def with_outputs(cfg: RunConfig, **kw) -> RunConfig:
    return replace(cfg, outputs=replace(cfg.outputs, **kw))
