"""Line-oriented ``key=value`` experiment configs with a fixed schema."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from hpol_lab.torus import DomainError

EXPERIMENTS = ("flat_baseline", "revolution", "face_witness", "property_suite")
MODELS = ("flat", "revolution", "pinched")


class ConfigError(DomainError):
    pass


def _floats(text):
    return tuple(float(x) for x in text.split(",") if x.strip())


def _ints(text):
    """'4..12' or '3,4,5'."""
    text = text.strip()
    if ".." in text:
        lo, hi = (int(x) for x in text.split(".."))
        return tuple(range(lo, hi + 1))
    return tuple(int(x) for x in text.split(",") if x.strip())


def _fmt(value):
    if isinstance(value, tuple):
        return ",".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    model: str = "flat"
    # flat metric G0 = [[G11, G12], [G12, G22]]
    G11: float = 1.0
    G12: float = 0.0
    G22: float = 1.0
    a: float = 2.0
    b: float = 1.0
    A: float = 0.5
    e: float = 0.5
    eps: tuple = (0.2, 0.1, 0.05, 0.025)
    horizons: tuple = tuple(range(4, 13))  # exponents k of T = 2^k T_unit
    T_unit: float = 1.0
    K: int = 400
    dt: float = 0.02
    dt_sample: float = 0.2
    ensemble: str = "fan"  # fan | shell
    fan_q1: float = 0.1
    fan_q2: float = 0.2
    fan_angle: float = 0.3
    m_range: tuple = (3, 4, 5, 6, 7, 8)
    N: int = 32
    N_lp: int = 32
    M_p: int = 64
    n_samples: int = 64
    seed: int = 0
    threads: int = 1
    plots: bool = True

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; choose from {MODELS}")
        if self.e <= 0:
            raise ConfigError("energy e must be positive")
        if self.K < 1 or self.N < 16 or self.n_samples < 8:
            raise ConfigError("need K >= 1, N >= 16, n_samples >= 8")
        if not self.eps or any(x <= 0 for x in self.eps):
            raise ConfigError("eps ladder must be non-empty and positive")
        if len(self.horizons) < 1 or self.dt <= 0 or self.dt_sample < self.dt:
            raise ConfigError("bad horizon ladder or time steps")
        if any(m < 1 for m in self.m_range):
            raise ConfigError("m_range entries must be >= 1")
        if self.ensemble not in ("fan", "shell"):
            raise ConfigError("ensemble must be 'fan' or 'shell'")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")

    def model_params(self):
        if self.model == "flat":
            return {"model": "flat", "G11": self.G11, "G12": self.G12, "G22": self.G22}
        if self.model == "revolution":
            return {"model": "revolution", "a": self.a, "b": self.b}
        return {"model": "pinched", "A": self.A}

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def serialize(self):
        lines = []
        for f in dataclasses.fields(self):
            lines.append(f"{f.name}={_fmt(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    def save(self, path):
        Path(path).write_text(self.serialize())


_PARSERS = {
    str: str.strip,
    float: float,
    int: int,
    bool: lambda s: {"true": True, "false": False, "1": True, "0": False}[s.strip().lower()],
}


def _field_parser(f):
    if f.name in ("eps",):
        return _floats
    if f.name in ("horizons", "m_range"):
        return _ints
    return _PARSERS[{"str": str, "float": float, "int": int, "bool": bool}[f.type]]


def parse(text):
    """Parse config text; '#' starts a comment, blank lines are ignored."""
    fields = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in fields:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _field_parser(fields[key])(val)
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {val!r}") from exc
    if "experiment" not in values:
        raise ConfigError("config must set 'experiment'")
    return ExperimentConfig(**values)


def load(path):
    return parse(Path(path).read_text())
