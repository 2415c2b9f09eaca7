"""Experiment configuration: flat key = value files with full-default echo."""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from ..dynamics.tasks import DEFAULT_U_MAX, DOMAINS
from ..errors import ConfigError

METHODS = ("safe", "pg", "mtl-unconstrained")


@dataclass
class ExperimentConfig:
    domain: str
    rounds: int
    num_tasks: int = 10
    k: int = 2
    mu1: float = 0.1
    mu2: float = 0.1
    p: float = 0.25
    q: float = 4.0
    zeta: float = 1.0
    c_max: float = 2.0
    sigma: float = 0.1
    n_traj: int = 10
    horizon: int = 150
    dt: float = 0.01
    inner_iters: int = 10
    mode: str = "closed_form"
    eta_mode: str = "theorem"
    eta_value: float = 1.0
    baselines: bool = False
    extra_traj: int = 0
    seed: int = 0
    cost_weighted: bool = False
    u_max: float = -1.0  # negative: resolve to the domain default
    constraint_halfwidth: float = 0.5
    constraint_center_scale: float = 0.3
    n_constrained: int = 2

    def __post_init__(self):
        if self.domain not in DOMAINS:
            raise ConfigError(f"unknown domain {self.domain!r}")
        if self.rounds < 1:
            raise ConfigError("rounds must be >= 1")
        if self.num_tasks < 1 or self.k < 1:
            raise ConfigError("num_tasks and k must be >= 1")
        if not (self.p <= self.zeta ** 2 <= self.q):
            raise ConfigError("need p <= zeta^2 <= q")
        if self.n_traj < 1 or self.extra_traj < 0:
            raise ConfigError("n_traj must be >= 1 and extra_traj >= 0")
        if self.sigma <= 0 or self.dt <= 0 or self.horizon < 1:
            raise ConfigError("sigma, dt must be positive and horizon >= 1")
        if self.mu1 <= 0 or self.mu2 <= 0 or self.c_max <= 0:
            raise ConfigError("mu1, mu2, c_max must be positive")
        if self.mode not in ("closed_form", "eREINFORCE", "eNAC"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.eta_mode not in ("theorem", "explicit"):
            raise ConfigError(f"unknown eta_mode {self.eta_mode!r}")
        if self.eta_mode == "explicit" and self.eta_value <= 0:
            raise ConfigError("explicit eta_value must be positive")
        if self.u_max < 0:
            self.u_max = DEFAULT_U_MAX[self.domain]
        if self.n_constrained < 1:
            raise ConfigError("n_constrained must be >= 1")

    @property
    def eta(self) -> float:
        if self.eta_mode == "theorem":
            return 1.0 / self.rounds ** 0.5
        return self.eta_value


_BOOL_TRUE = {"true", "1", "yes", "on"}
_BOOL_FALSE = {"false", "0", "no", "off"}

_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _convert(key: str, raw: str, lineno: int):
    ftype = _FIELD_TYPES[key]
    try:
        if ftype == "bool":
            low = raw.lower()
            if low in _BOOL_TRUE:
                return True
            if low in _BOOL_FALSE:
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if ftype == "int":
            return int(raw)
        if ftype == "float":
            return float(raw)
        return raw
    except ValueError as err:
        raise ConfigError(f"line {lineno}: bad value for key {key!r}: {err}") from None


def parse_config(path: str | Path) -> ExperimentConfig:
    """Parse a flat key = value file; '#' starts a comment; unknown keys are
    rejected and malformed lines report their line number."""
    values: dict = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {rawline!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _convert(key, raw, lineno)
    if "domain" not in values:
        raise ConfigError("missing required key 'domain'")
    if "rounds" not in values:
        raise ConfigError("missing required key 'rounds'")
    return ExperimentConfig(**values)


def format_config(cfg: ExperimentConfig) -> str:
    """Canonical echo: every field, declaration order, round-trips exactly."""
    lines = []
    for f in fields(ExperimentConfig):
        value = getattr(cfg, f.name)
        if isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        lines.append(f"{f.name} = {text}")
    return "\n".join(lines) + "\n"


def write_config_echo(cfg: ExperimentConfig, path: str | Path) -> None:
    Path(path).write_text(format_config(cfg), encoding="utf-8", newline="\n")
