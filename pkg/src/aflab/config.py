"""Experiment configuration: JSON <-> nested dataclasses with validation.

Every error names the offending field as a dotted path (``time.cfl_safety``).
Unknown keys are rejected so that typos do not silently fall back to defaults.
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import Optional

from aflab.grid import PRESETS


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class GridSection:
    nx: int = 128
    ny: int = 128
    lx: float = 1.0
    ly: float = 1.0


@dataclass
class GeometrySection:
    preset: str = "synthetic-bump"
    normalize: bool = True
    kappa_level: float = 1.0
    bump_amplitude: float = 10.0
    g_hat_file: Optional[str] = None
    kappa_file: Optional[str] = None


INITIAL_KINDS = ("constant", "constant-plus-mode", "file", "random-smooth")
SCALINGS = ("none", "u-margin", "mass-fraction")


@dataclass
class InitialSection:
    kind: str = "constant"
    value: float = 1.0
    mode_index: int = 1
    epsilon: float = 0.0
    file: Optional[str] = None
    # "u-margin": min over kappa<0 nodes of e^f / sqrt(alpha'|kappa|/2) equals target
    # (target >= 1 means u >= 0); "mass-fraction": K A0^2 = target * P
    scale: str = "none"
    target: float = 1.0


@dataclass
class TimeSection:
    t_end: float = 1.0
    max_steps: int = 2_000_000
    cfl_safety: float = 0.9
    scheme: str = "rk4"
    dt: Optional[float] = None
    form: str = "ef"
    blowup_eps: float = 1e-4


@dataclass
class SpectralSection:
    k: int = 4
    kernel_tol: Optional[float] = None
    tracked_modes: Optional[list] = None


@dataclass
class OutputSection:
    dir: str = "out"
    sample_every: int = 100
    dump_fields: bool = False


SCENARIOS = ("none", "large-data", "blowup", "medium")


@dataclass
class ScenarioSection:
    kind: str = "none"
    energy_tol: float = 1e-8
    positivity_tol: float = 1e-10
    eta_tol: float = 0.02
    v_tol: float = 1e-3
    curv_tol: float = 0.2
    envelope_inflation: float = 0.01
    fit_window: float = 0.5
    # size t_end from the slowest transient rate min(gap, 2 eta)
    t_end_from_gap: bool = False
    derivative_order: int = 2


@dataclass
class TwinSection:
    t_end: Optional[float] = None
    m_margin: float = 1.25
    m_max: float = 1e6
    match_tol: float = 1e-8


@dataclass
class SpinorialSection:
    resolutions: list = field(default_factory=lambda: [64, 128, 256])
    half_width: float = 1.0
    min_ratio: float = 3.7
    unit_tol: float = 1e-12


@dataclass
class ExperimentConfig:
    grid: GridSection = field(default_factory=GridSection)
    geometry: GeometrySection = field(default_factory=GeometrySection)
    alpha_prime: float = 1.0
    initial: InitialSection = field(default_factory=InitialSection)
    time: TimeSection = field(default_factory=TimeSection)
    spectral: SpectralSection = field(default_factory=SpectralSection)
    output: OutputSection = field(default_factory=OutputSection)
    scenario: ScenarioSection = field(default_factory=ScenarioSection)
    twin: TwinSection = field(default_factory=TwinSection)
    spinorial: SpinorialSection = field(default_factory=SpinorialSection)
    seed: int = 0
    threads: int = 1

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data) -> "ExperimentConfig":
        cfg = _build(cls, data, "")
        validate(cfg)
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("<root>", f"invalid JSON ({exc})") from None
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError("<file>", f"cannot read {path} ({exc.strerror})") from None
        return cls.from_json(text)


def _join(prefix, name):
    return f"{prefix}.{name}" if prefix else name


def _coerce(value, tp, path):
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(path, "expected true or false")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, "expected an integer")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, "expected a number")
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError(path, "must be finite")
        return value
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(path, "expected a string")
        return value
    if tp is list:
        if not isinstance(value, list):
            raise ConfigError(path, "expected a list")
        return list(value)
    raise TypeError(tp)


_TYPES = {"int": int, "float": float, "str": str, "bool": bool, "list": list}


def _field_type(f):
    ann = f.type if isinstance(f.type, str) else f.type.__name__
    optional = ann.startswith("Optional[")
    if optional:
        ann = ann[len("Optional["):-1]
    return ann, optional


def _build(cls, data, prefix):
    if not isinstance(data, dict):
        raise ConfigError(prefix or "<root>", "expected an object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    for key in data:
        if key not in fields:
            raise ConfigError(_join(prefix, key), "unknown field")
    kwargs = {}
    for name, f in fields.items():
        if name not in data:
            continue
        path = _join(prefix, name)
        value = data[name]
        ann, optional = _field_type(f)
        if ann in _TYPES:
            if value is None:
                if not optional:
                    raise ConfigError(path, "must not be null")
                kwargs[name] = None
            else:
                kwargs[name] = _coerce(value, _TYPES[ann], path)
        else:
            kwargs[name] = _build(_SECTIONS[ann], value, path)
    return cls(**kwargs)


_SECTIONS = {c.__name__: c for c in (
    GridSection, GeometrySection, InitialSection, TimeSection, SpectralSection,
    OutputSection, ScenarioSection, TwinSection, SpinorialSection)}


def _need(cond, path, message):
    if not cond:
        raise ConfigError(path, message)


def validate(cfg: ExperimentConfig) -> None:
    g = cfg.grid
    _need(g.nx >= 8, "grid.nx", "must be >= 8")
    _need(g.ny >= 8, "grid.ny", "must be >= 8")
    _need(g.lx > 0, "grid.lx", "must be > 0")
    _need(g.ly > 0, "grid.ly", "must be > 0")
    geo = cfg.geometry
    _need(geo.preset in PRESETS or geo.preset == "file", "geometry.preset",
          f"must be one of {', '.join(PRESETS + ('file',))}")
    if geo.preset == "file":
        _need(geo.g_hat_file is not None, "geometry.g_hat_file", "required for preset 'file'")
        _need(geo.kappa_file is not None, "geometry.kappa_file", "required for preset 'file'")
    _need(cfg.alpha_prime > 0, "alpha_prime", "must be > 0")
    ini = cfg.initial
    _need(ini.kind in INITIAL_KINDS, "initial.kind", f"must be one of {', '.join(INITIAL_KINDS)}")
    _need(ini.scale in SCALINGS, "initial.scale", f"must be one of {', '.join(SCALINGS)}")
    if ini.kind == "file":
        _need(ini.file is not None, "initial.file", "required for kind 'file'")
    if ini.kind in ("constant", "constant-plus-mode", "random-smooth"):
        _need(ini.value > 0, "initial.value", "must be > 0")
    if ini.kind == "random-smooth":
        _need(0 <= ini.epsilon < 1, "initial.epsilon", "must lie in [0, 1) for random-smooth")
    _need(ini.mode_index >= 0, "initial.mode_index", "must be >= 0")
    if ini.kind == "constant-plus-mode":
        _need(ini.mode_index < cfg.spectral.k, "initial.mode_index", "must be < spectral.k")
    if ini.scale != "none":
        _need(ini.target > 0, "initial.target", "must be > 0")
    t = cfg.time
    _need(t.t_end > 0, "time.t_end", "must be > 0")
    _need(t.max_steps >= 1, "time.max_steps", "must be >= 1")
    _need(0 < t.cfl_safety <= 1, "time.cfl_safety", "must lie in (0, 1]")
    _need(t.scheme in ("euler", "rk4"), "time.scheme", "must be 'euler' or 'rk4'")
    _need(t.form in ("ef", "u"), "time.form", "must be 'ef' or 'u'")
    if t.dt is not None:
        _need(t.dt > 0, "time.dt", "must be > 0")
    _need(0 < t.blowup_eps < 1, "time.blowup_eps", "must lie in (0, 1)")
    s = cfg.spectral
    _need(s.k >= 1, "spectral.k", "must be >= 1")
    if s.kernel_tol is not None:
        _need(s.kernel_tol >= 0, "spectral.kernel_tol", "must be >= 0")
    if s.tracked_modes is not None:
        for i, j in enumerate(s.tracked_modes):
            _need(isinstance(j, int) and not isinstance(j, bool) and 0 <= j < s.k,
                  f"spectral.tracked_modes[{i}]", "must be an integer in [0, spectral.k)")
    o = cfg.output
    _need(o.sample_every >= 1, "output.sample_every", "must be >= 1")
    sc = cfg.scenario
    _need(sc.kind in SCENARIOS, "scenario.kind", f"must be one of {', '.join(SCENARIOS)}")
    for name in ("energy_tol", "positivity_tol", "eta_tol", "v_tol", "curv_tol",
                 "envelope_inflation"):
        _need(getattr(sc, name) >= 0, f"scenario.{name}", "must be >= 0")
    _need(0 < sc.fit_window <= 1, "scenario.fit_window", "must lie in (0, 1]")
    _need(sc.derivative_order in (2, 4), "scenario.derivative_order", "must be 2 or 4")
    tw = cfg.twin
    if tw.t_end is not None:
        _need(tw.t_end > 0, "twin.t_end", "must be > 0")
    _need(tw.m_margin >= 1, "twin.m_margin", "must be >= 1")
    _need(tw.m_max > 0, "twin.m_max", "must be > 0")
    sp = cfg.spinorial
    _need(len(sp.resolutions) >= 2, "spinorial.resolutions", "needs at least two entries")
    for i, n in enumerate(sp.resolutions):
        _need(isinstance(n, int) and not isinstance(n, bool) and n >= 8,
              f"spinorial.resolutions[{i}]", "must be an integer >= 8")
    _need(sp.half_width > 0, "spinorial.half_width", "must be > 0")
    _need(cfg.threads >= 1, "threads", "must be >= 1")
