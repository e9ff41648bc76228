"""Sectioned ``key = value`` experiment configuration.

Every default reproduces the 10-DOF numerical study: 2000 kg masses,
2.4e5 N/m springs, 2500 N s/m dampers, 100 Hz for 50 s, ten episodes per
excitation kind.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .oracle import EXCITATION_KINDS, SolverConfig
from .surrogate import KINDS, TrainConfig


class ConfigError(ValueError):
    pass


def _floats(text):
    return tuple(float(x) for x in str(text).split(",") if x.strip())


def _ints(text):
    return tuple(int(x) for x in str(text).split(",") if x.strip())


@dataclass(frozen=True)
class SystemSection:
    dof: int = 10
    mass: float = 2000.0
    stiffness: tuple = (2.4e5,)
    damping: tuple = (2500.0,)
    grounded: bool = True
    spring_types: tuple = (0,)


@dataclass(frozen=True)
class ExcitationSection:
    kinds: tuple = EXCITATION_KINDS
    count: int = 10
    impulse_amplitude: float = 1000.0
    impulse_duration: int = 1
    harmonic_amplitude: float = 500.0
    harmonic_freq_min: float = 0.5
    harmonic_freq_max: float = 5.0
    random_sigma: float = 200.0
    seed: int = 0


@dataclass(frozen=True)
class SolverSection:
    fs: float = 100.0
    duration: float = 50.0
    beta: float = 0.25
    gamma: float = 0.5

    @property
    def steps(self) -> int:
        return int(round(self.duration * self.fs))

    def solver_config(self, duration=None) -> SolverConfig:
        steps = self.steps if duration is None else int(round(duration * self.fs))
        return SolverConfig(1.0 / self.fs, steps, self.beta, self.gamma)


@dataclass(frozen=True)
class ModelSection:
    kind: str = "homogeneous"
    hidden: tuple = (16, 64)
    gat_hidden: int = 8
    gat_layout: str = "auto"


@dataclass(frozen=True)
class TransferSection:
    targets: tuple = (5, 12, 20, 30)
    cases: tuple = (0, 1, 2, 3)
    episodes_per_kind: int = 1
    seed: int = 1


@dataclass(frozen=True)
class ExperimentConfig:
    system: SystemSection = field(default_factory=SystemSection)
    excitation: ExcitationSection = field(default_factory=ExcitationSection)
    solver: SolverSection = field(default_factory=SolverSection)
    training: TrainConfig = field(default_factory=TrainConfig)
    model: ModelSection = field(default_factory=ModelSection)
    transfer: TransferSection = field(default_factory=TransferSection)

    def validate(self) -> "ExperimentConfig":
        if not self.solver.fs > 0 or not self.solver.duration > 0:
            raise ConfigError("fs and duration must be > 0")
        if self.solver.steps < 1:
            raise ConfigError("duration * fs must give at least one step")
        if self.system.dof < 1:
            raise ConfigError("dof must be >= 1")
        if self.model.kind not in KINDS:
            raise ConfigError(f"model kind must be one of {KINDS}")
        if self.model.gat_layout not in ("auto", "homogeneous", "heterogeneous"):
            raise ConfigError("gat_layout must be auto, homogeneous or heterogeneous")
        unknown = set(self.excitation.kinds) - set(EXCITATION_KINDS)
        if unknown:
            raise ConfigError(f"unknown excitation kinds {sorted(unknown)}")
        n_types = max(self.system.spring_types) + 1
        if len(self.system.stiffness) < n_types or len(self.system.damping) < n_types:
            raise ConfigError("stiffness and damping need one value per spring type")
        if self.excitation.harmonic_freq_min <= 0 or \
                self.excitation.harmonic_freq_max < self.excitation.harmonic_freq_min:
            raise ConfigError("harmonic frequency range must be positive and ordered")
        return self


_CONVERTERS = {
    "stiffness": _floats, "damping": _floats, "spring_types": _ints, "hidden": _ints,
    "targets": _ints, "cases": _ints,
    "kinds": lambda s: tuple(x.strip() for x in s.split(",") if x.strip()),
}


def _section(cls, parser, name):
    if not parser.has_section(name):
        return cls()
    known = {f.name: f for f in fields(cls)}
    values = {}
    for key, raw in parser.items(name):
        if key not in known:
            raise ConfigError(f"[{name}] unknown key {key!r}")
        default = getattr(cls(), key)
        try:
            if key in _CONVERTERS:
                values[key] = _CONVERTERS[key](raw)
            elif isinstance(default, bool):
                values[key] = parser.getboolean(name, key)
            elif isinstance(default, int):
                values[key] = int(raw)
            elif isinstance(default, float):
                values[key] = float(raw)
            else:
                values[key] = raw.strip()
        except ValueError as exc:
            raise ConfigError(f"[{name}] {key}: {exc}") from exc
    try:
        return replace(cls(), **values)
    except ValueError as exc:
        raise ConfigError(f"[{name}] {exc}") from exc


SECTIONS = {"system": SystemSection, "excitation": ExcitationSection, "solver": SolverSection,
            "training": TrainConfig, "model": ModelSection, "transfer": TransferSection}


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    extra = set(parser.sections()) - set(SECTIONS)
    if extra:
        raise ConfigError(f"unknown sections {sorted(extra)}")
    return ExperimentConfig(**{n: _section(c, parser, n) for n, c in SECTIONS.items()}).validate()


def load_config(path=None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig().validate()
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {path} not found")
    return parse_config(p.read_text())


def dump_config(config: ExperimentConfig) -> str:
    lines = []
    for name in SECTIONS:
        section = getattr(config, name)
        lines.append(f"[{name}]")
        for f in fields(section):
            value = getattr(section, f.name)
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            lines.append(f"{f.name} = {value}")
        lines.append("")
    return "\n".join(lines)
