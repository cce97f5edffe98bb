"""Experiment configuration: nested dataclasses loaded from YAML.

Every tolerance and acceptance threshold lives here (with the values used by
the shipped configs), never in the experiment code. Parsing is strict:
unknown keys, missing required keys and wrong types raise ``ConfigError``
naming the offending field.
"""
import dataclasses
import hashlib
import json
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import yaml


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


@dataclass
class MapConfig:
    kind: str = "cat"
    contraction: float = 0.1
    radius: float = 0.5

    def validate(self, p):
        if self.kind not in ("cat", "solenoid"):
            raise ConfigError(f"{p}.kind", f"unknown map kind {self.kind!r}")
        if not (0 < self.contraction and self.radius + self.contraction < 1):
            raise ConfigError(f"{p}.contraction", "need 0 < contraction and radius + contraction < 1")


@dataclass
class GridConfig:
    shape: List[int] = field(default_factory=lambda: [128, 128])
    backend: str = "ulam"
    subsamples: List[int] = field(default_factory=lambda: [32, 32])
    shift: float = 0.2

    def validate(self, p):
        if self.backend not in ("ulam", "pointwise"):
            raise ConfigError(f"{p}.backend", "must be 'ulam' or 'pointwise'")
        if any(s < 2 for s in self.shape):
            raise ConfigError(f"{p}.shape", "resolution must be >= 2 per axis")
        if len(self.subsamples) != len(self.shape) or any(s < 1 for s in self.subsamples):
            raise ConfigError(f"{p}.subsamples", "one positive count per axis")
        if not 0 <= self.shift < 1:
            raise ConfigError(f"{p}.shift", "must lie in [0, 1)")


@dataclass
class ChannelConfig:
    kind: str = "von_mises"
    kappa: List[float] = field(default_factory=lambda: [2.0, 2.0])
    observed: List[int] = field(default_factory=lambda: [0, 1])
    sigma: List[float] = field(default_factory=lambda: [0.1, 0.1])
    # relative amplitude of a seed-derived random modulation of G in the cone environment
    G_modulation: float = 0.0

    def validate(self, p):
        if self.kind not in ("von_mises", "wrapped_gaussian"):
            raise ConfigError(f"{p}.kind", f"unknown channel {self.kind!r}")
        if self.kind == "von_mises" and len(self.kappa) != len(self.observed):
            raise ConfigError(f"{p}.kappa", "one kappa per observed coordinate")
        if any(k < 0 for k in self.kappa):
            raise ConfigError(f"{p}.kappa", "must be nonnegative")
        if not 0 <= self.G_modulation < 1:
            raise ConfigError(f"{p}.G_modulation", "must lie in [0, 1)")


@dataclass
class PriorConfig:
    name: str
    # rows (k1, k2, amplitude, phase) of log phi = sum amp cos(2 pi k.x + phase)
    terms: List[List[float]] = field(default_factory=list)

    def validate(self, p):
        for i, t in enumerate(self.terms):
            if len(t) != 4:
                raise ConfigError(f"{p}.terms[{i}]", "expected [k1, k2, amplitude, phase]")


@dataclass
class ExperimentConfig:
    horizon: int = 200
    seeds: List[int] = field(default_factory=lambda: list(range(20)))
    realizations: int = 100
    fit_window: List[int] = field(default_factory=lambda: [20, 200])
    n_ref: int = 80
    pullback_depth: int = 80
    burn_in: int = 0
    stress_function: bool = True

    def validate(self, p):
        if self.horizon < 1:
            raise ConfigError(f"{p}.horizon", "must be >= 1")
        if not self.seeds:
            raise ConfigError(f"{p}.seeds", "need at least one seed")
        if len(self.fit_window) != 2 or self.fit_window[0] >= self.fit_window[1]:
            raise ConfigError(f"{p}.fit_window", "expected [start, stop] with start < stop")
        if self.fit_window[0] < 10:
            raise ConfigError(f"{p}.fit_window", "burn-in must discard at least 10 steps")
        if self.n_ref < 2:
            raise ConfigError(f"{p}.n_ref", "must be >= 2")


@dataclass
class ConeConfig:
    delta: float = 0.9
    mu_hat: float = 0.4
    nu: float = 0.4
    truncation: int = 400
    leaf_half_length: float = 0.1
    leaf_samples: int = 65
    n_pairs: int = 100
    amplitude: List[float] = field(default_factory=lambda: [0.5, 5.0])
    absorption_starts: int = 50
    absorption_log_range: float = 8.0

    def validate(self, p):
        if not 0 < self.delta < 1:
            raise ConfigError(f"{p}.delta", "must lie in (0, 1)")
        if not (0 < self.mu_hat <= 1 and 0 < self.nu <= 1 and self.mu_hat + self.nu <= 1):
            raise ConfigError(f"{p}.mu_hat", "need mu_hat, nu > 0 and mu_hat + nu <= 1")
        if self.truncation < 1:
            raise ConfigError(f"{p}.truncation", "must be >= 1")
        if self.leaf_half_length <= 0:
            raise ConfigError(f"{p}.leaf_half_length", "must be positive")
        if not 2 <= self.leaf_samples <= 512:
            raise ConfigError(f"{p}.leaf_samples", "must lie in [2, 512]")


@dataclass
class ParticleConfig:
    n_particles: int = 100_000
    replicates: int = 50
    steps: int = 30
    resample_threshold: float = 0.5
    seeds: List[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])

    def validate(self, p):
        if self.n_particles < 1 or self.replicates < 2:
            raise ConfigError(f"{p}.replicates", "need >= 1 particle and >= 2 replicates")
        if not 0 <= self.resample_threshold <= 1:
            raise ConfigError(f"{p}.resample_threshold", "must lie in [0, 1]")


@dataclass
class SupportConfig:
    depth: int = 10
    floor: float = 1.0e-14
    n_orbits: int = 20000
    orbit_length: int = 200
    dilate: int = 1


@dataclass
class AcceptanceConfig:
    """Thresholds of the acceptance suite (values are the calibrated ones)."""

    normalization_tol: float = 1.0e-12
    scale_factor: float = 17.0
    duality_shape: List[int] = field(default_factory=lambda: [256, 256])
    duality_pairs: int = 20
    duality_tol: float = 1.0e-6
    toy_steps: int = 10
    toy_tol: float = 1.0e-12
    pf_se_multiplier: float = 3.0
    pf_min_fraction: float = 0.95
    birkhoff_shape: List[int] = field(default_factory=lambda: [64, 64])
    birkhoff_pairs: int = 100
    birkhoff_tol: float = 1.0e-10
    forgetting_min_median_r2: float = 0.8
    cauchy_short: int = 40
    cauchy_long: int = 80
    cauchy_tol: float = 1.0e-6
    covariance_ladder: List[int] = field(default_factory=lambda: [10, 20, 40])
    covariance_tol: float = 1.0e-4
    expectation_z: float = 3.0
    expectation_realizations: int = 100
    expectation_depth: int = 80
    support_shape: List[int] = field(default_factory=lambda: [32, 64, 64])
    support_subsamples: List[int] = field(default_factory=lambda: [4, 4, 4])
    support_kappa: List[float] = field(default_factory=lambda: [2.0])
    support_tol: float = 1.0e-3
    support_ratio_range: List[float] = field(default_factory=lambda: [0.05, 0.3])
    abscont_realizations: int = 20
    abscont_functions: int = 20
    abscont_depth: int = 40
    abscont_recorded_C: float = 50.0
    cone_closed_form_tol: float = 1.0e-12


@dataclass
class Config:
    map: MapConfig = field(default_factory=MapConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    priors: List[PriorConfig] = field(default_factory=lambda: [
        PriorConfig("smooth_a", [[1, 0, 1.0, 0.3], [0, 1, 0.5, 1.0]]),
        PriorConfig("smooth_b", [[1, 1, 1.5, 2.0], [2, 1, 0.3, 0.0]]),
    ])
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)
    cone: ConeConfig = field(default_factory=ConeConfig)
    particle: ParticleConfig = field(default_factory=ParticleConfig)
    support: SupportConfig = field(default_factory=SupportConfig)
    acceptance: AcceptanceConfig = field(default_factory=AcceptanceConfig)

    def validate(self):
        self.map.validate("map")
        dim = 2 if self.map.kind == "cat" else 3
        if len(self.grid.shape) != dim:
            raise ConfigError("grid.shape", f"{self.map.kind} grids need {dim} axes")
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            items = enumerate(v) if isinstance(v, list) else [(None, v)]
            for i, item in items:
                path = f.name if i is None else f"{f.name}[{i}]"
                if hasattr(item, "validate"):
                    item.validate(path)
        if any(c >= dim for c in self.channel.observed):
            raise ConfigError("channel.observed", "coordinate index out of range")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _convert(tp, value, path):
    origin = typing.get_origin(tp)
    if origin is typing.Union:
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if value is None:
            return None
        return _convert(args[0], value, path)
    if origin in (list, List):
        (inner,) = typing.get_args(tp)
        if not isinstance(value, (list, tuple)):
            raise ConfigError(path, f"expected a list, got {type(value).__name__}")
        return [_convert(inner, v, f"{path}[{i}]") for i, v in enumerate(value)]
    if dataclasses.is_dataclass(tp):
        return from_dict(tp, value, path)
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(path, "expected true/false")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    raise ConfigError(path, f"unsupported field type {tp}")


def from_dict(cls, data, path: str = ""):
    if not isinstance(data, dict):
        raise ConfigError(path or "<root>", "expected a mapping")
    hints = typing.get_type_hints(cls)
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"{path}.{key}" if path else key, "unknown field")
    kwargs = {}
    for name, f in known.items():
        sub = f"{path}.{name}" if path else name
        if name in data:
            kwargs[name] = _convert(hints[name], data[name], sub)
        elif f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING:
            raise ConfigError(sub, "missing required field")
    return cls(**kwargs)


REQUIRED_SECTIONS = ("map",)


def parse_config(text: str) -> Config:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ConfigError("", f"invalid YAML: {err}") from None
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a mapping")
    for key in REQUIRED_SECTIONS:
        if key not in data:
            raise ConfigError(key, "missing required section")
    if not isinstance(data["map"], dict) or "kind" not in data["map"]:
        raise ConfigError("map.kind", "missing required field")
    return from_dict(Config, data).validate()


def load_config(path) -> Config:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(str(p))
    return parse_config(p.read_text())
