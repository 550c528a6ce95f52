"""Experiment configuration: one TOML file per experiment."""
from __future__ import annotations

import hashlib
import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from ..errors import ConfigError

# keys that do not change any published number
_NON_SEMANTIC = {"output_dir", "threads"}


@dataclass
class ExperimentConfig:
    beta: float = 2.0
    N: list = field(default_factory=lambda: [10_000])
    kappa: float = 2.0 / 3.0
    kappas: list = field(default_factory=lambda: [0.5, 2.0 / 3.0, 0.9])
    T: float = 5.0
    epsilon_start: float = 0.2
    epsilon_boundary: float = 0.2
    replicas: int = 200
    sde_replicas: int = 10_000
    window_replicas: int = 4000
    seed: int = 0
    gamma: float = 0.1
    gamma_prime: float = 0.25
    eta: float = 0.3
    dt_max: float = 1e-3
    periods: int = 2
    handoff_T: list = field(default_factory=lambda: [3.0, 6.0])
    handoff_epsilon: float = 0.5
    mu_prime_factor: float = 1.2
    budget: int = 2_000_000_000
    output_dir: str = "out"
    threads: int = 1

    def __post_init__(self):
        if isinstance(self.N, (int, float)):
            self.N = [int(self.N)]
        self.N = [int(n) for n in self.N]
        self.kappas = [float(k) for k in self.kappas]
        self.handoff_T = [float(t) for t in self.handoff_T]
        self.validate()

    def validate(self):
        if not self.beta > 1:
            raise ConfigError("beta must exceed 1")
        if not self.kappa > 0 or any(k <= 0 for k in self.kappas):
            raise ConfigError("kappa must be positive")
        if not self.gamma_prime > self.gamma > 0:
            raise ConfigError("need gamma_prime > gamma > 0")
        if not 0 < self.eta < math.pi / 2:
            raise ConfigError("eta must lie in (0, pi/2)")
        if any(n < 2 for n in self.N):
            raise ConfigError("every N must be at least 2")
        if self.replicas < 1 or self.sde_replicas < 1 or self.window_replicas < 1:
            raise ConfigError("replica counts must be positive")
        if not self.T > 0 or not self.epsilon_start > 0 or not self.epsilon_boundary > 0:
            raise ConfigError("T and epsilons must be positive")
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    def to_dict(self) -> dict:
        return asdict(self)

    def semantic_dict(self) -> dict:
        return {k: v for k, v in self.to_dict().items() if k not in _NON_SEMANTIC}

    @property
    def hash(self) -> str:
        blob = json.dumps(self.semantic_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def with_(self, **kw) -> "ExperimentConfig":
        d = self.to_dict()
        d.update({k: v for k, v in kw.items() if v is not None})
        return from_dict(d)


def from_dict(d: dict) -> ExperimentConfig:
    flat = {}
    for k, v in d.items():
        if isinstance(v, dict):
            # sections are namespaces only
            flat.update(v)
        else:
            flat[k] = v
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(flat) - known
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    try:
        return ExperimentConfig(**flat)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def load(path) -> ExperimentConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        with p.open("rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config {p}: {exc}") from exc
    return from_dict(data)


def dumps(cfg: ExperimentConfig) -> str:
    """TOML text for a configuration (flat keys)."""
    lines = []
    for k, v in cfg.to_dict().items():
        lines.append(f"{k} = {json.dumps(v)}")
    return "\n".join(lines) + "\n"
