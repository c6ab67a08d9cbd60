"""Experiment configuration: a flat ``key = value`` text format.

Precedence when combining sources is command-line overrides > config file >
defaults.  Lists are comma separated.  Lines starting with ``#`` are ignored.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field

EXPERIMENT_KINDS = ("ridge_risk", "bias_variance", "representation", "primal_orth", "dual_orth",
                    "full", "marginal", "dual_gaussian", "primal_gaussian", "cv", "loo", "timing")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = "ridge_risk"
    n: int = 1000
    p: int | None = None
    gamma: float = 0.2
    alpha: float = 1.0
    sigma: float = 1.0
    lam: float | None = None
    lam_grid: tuple = ()
    gamma_grid: tuple = ()
    ratios: tuple = ()
    sketch_family: str = "haar"
    replicates: int = 10
    seed: int = 0
    threads: int = 0
    folds: int = 5
    train_fraction: float = 0.8
    test_fraction: float = 0.0
    n_test: int = 500
    proxy_n: int = 400
    probes: int = 20
    repeats: int = 3
    dataset: str = ""
    response: str = ""
    standardize: bool = True
    output: str = ""
    format: str = "csv"

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"kind: unknown experiment kind {self.kind!r}")
        if self.n < 1:
            raise ConfigError(f"n: must be >= 1, got {self.n}")
        if self.p is not None and self.p < 1:
            raise ConfigError(f"p: must be >= 1, got {self.p}")
        if not self.gamma > 0:
            raise ConfigError(f"gamma: must be positive, got {self.gamma}")
        if self.sigma < 0 or self.alpha < 0:
            raise ConfigError("alpha, sigma: must be nonnegative")
        if self.lam is not None and self.lam <= 0:
            raise ConfigError(f"lam: must be positive, got {self.lam}")
        if any(l <= 0 for l in self.lam_grid):
            raise ConfigError("lam_grid: values must be positive")
        if self.replicates < 0:
            raise ConfigError(f"replicates: must be >= 0, got {self.replicates}")
        if self.folds < 2:
            raise ConfigError(f"folds: must be >= 2, got {self.folds}")
        if self.repeats < 1:
            raise ConfigError(f"repeats: must be >= 1, got {self.repeats}")
        if not 0 <= self.test_fraction < 1:
            raise ConfigError(f"test_fraction: must lie in [0, 1), got {self.test_fraction}")
        if not 0 < self.train_fraction < 1:
            raise ConfigError(f"train_fraction: must lie in (0, 1), got {self.train_fraction}")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format: must be csv or json, got {self.format!r}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed: must be an unsigned 64-bit integer")

    @property
    def n_features(self) -> int:
        return self.p if self.p is not None else max(1, int(round(self.gamma * self.n)))

    @property
    def aspect(self) -> float:
        return self.n_features / self.n

    @property
    def worker_count(self) -> int:
        return self.threads if self.threads > 0 else (os.cpu_count() or 1)

    def numeric_dict(self):
        """Fields that determine numeric output (excludes output path, format, threads)."""
        d = dataclasses.asdict(self)
        for key in ("output", "format", "threads"):
            d.pop(key)
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.numeric_dict(), sort_keys=True, default=list)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            if isinstance(value, tuple):
                value = ",".join(repr(float(v)) for v in value)
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_INT = {"n", "p", "replicates", "seed", "threads", "folds", "n_test", "proxy_n", "probes", "repeats"}
_FLOAT = {"gamma", "alpha", "sigma", "lam", "train_fraction", "test_fraction"}
_TUPLE = {"lam_grid", "gamma_grid", "ratios"}
_BOOL = {"standardize"}


def _coerce(key, raw):
    raw = raw.strip()
    if key not in _FIELDS:
        raise ConfigError(f"{key}: unknown configuration key")
    try:
        if key in _INT:
            return None if raw.lower() in ("", "none") else int(raw)
        if key in _FLOAT:
            return None if raw.lower() in ("", "none") else float(raw)
        if key in _TUPLE:
            return tuple(float(v) for v in raw.split(",") if v.strip())
        if key in _BOOL:
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse value {raw!r}") from None
    return raw


def parse_pairs(lines, source="config"):
    out = {}
    for i, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{i}: expected key = value, got {line!r}")
        key, raw = line.split("=", 1)
        key = key.strip()
        out[key] = _coerce(key, raw)
    return out


def from_text(text) -> ExperimentConfig:
    return ExperimentConfig(**parse_pairs(text.splitlines()))


def load_config(path=None, overrides=None, **defaults) -> ExperimentConfig:
    """Merge defaults, an optional config file and ``key=value`` overrides."""
    values = dict(defaults)
    if path:
        with open(path) as fh:
            values.update(parse_pairs(fh.read().splitlines(), source=str(path)))
    if overrides:
        values.update(parse_pairs(overrides, source="--set"))
    return ExperimentConfig(**values)
