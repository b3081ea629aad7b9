"""Experiment configuration files.

A config is a YAML (or JSON) mapping with one optional section per
component::

    seed: 20080716
    sim:     {n_runs: 30000, max_steps: 100000, chunk_size: 1000, pre_run: random}
    noise:   {family: gaussian, scale: 1.0, standardized: false}
    chart:   {M: 12, k: 2.31, p0: 0.5, sided: two_sided}
    jumps:   [0, 0.1, 0.25, 0.5]
    design:  {target_arl0: 435, M: 28}            # or candidates + jump
    limit:   {N: [500, 2000], strategy: {kind: linear_fraction, param: 0.5}, ...}
    compare: {target_arl0: 435, M: 150, ...}
    image:   {width: 200, height: 400, shift: 0.5, shift_row: 100, ...}

Output files written by the CLI embed the normalised config, so they can be
passed back through ``--config`` to reproduce themselves.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import yaml

from .rng import DEFAULT_SEED

CONFIG_PREFIX = "# config: "


class ConfigError(ValueError):
    pass


@dataclass
class SimSection:
    n_runs: int = 30_000
    max_steps: int = 100_000
    chunk_size: int = 1_000
    pre_run: str = "random"


@dataclass
class NoiseSection:
    family: str = "gaussian"
    scale: float = 1.0
    standardized: bool = False  # rescale to unit variance; scale is then ignored


@dataclass
class ChartSection:
    M: int = 12
    k: float = 2.31
    p0: float = 0.5
    sided: str = "two_sided"


@dataclass
class DesignSection:
    target_arl0: float = 435.0
    tolerance: float = 0.10
    M: int | None = None
    candidates: list[int] | None = None
    jump: float | None = None
    p0: float = 0.5


@dataclass
class LimitSection:
    N: list[int] = field(default_factory=lambda: [500, 2000])
    strategy: dict = field(default_factory=lambda: {"kind": "linear_fraction", "param": 0.5})
    reference: dict | None = field(default_factory=lambda: {"kind": "linear_fraction", "param": 1.0})
    k: float = 2.0
    G: int = 4096
    n_paths: int = 10_000
    delta: float = 2.0
    theta: float = 0.3
    p0: float = 0.5


@dataclass
class CompareSection:
    target_arl0: float = 435.0
    tolerance: float = 0.10
    charts: list[str] = field(default_factory=lambda: ["binary", "classic_np", "shewhart", "ewma", "cusum"])
    M: int = 150
    N: int = 150
    ewma_lambda: float = 0.1
    cusum_kappa: float = 0.25
    cusum_sided: str = "two_sided"
    jumps: list[float] = field(default_factory=lambda: [0.0, 0.1, 0.25, 0.5, 1.0])


@dataclass
class ImageSection:
    width: int = 200
    height: int = 400
    h: int = 1
    variance: str = "energy"
    shift: float = 0.5
    shift_row: int = 100
    shift_columns: list[int] | str = "all"
    M: int = 28
    k: float = 2.27


SECTIONS = {
    "sim": SimSection, "noise": NoiseSection, "chart": ChartSection,
    "design": DesignSection, "limit": LimitSection, "compare": CompareSection,
    "image": ImageSection,
}
TOP_LEVEL = set(SECTIONS) | {"seed", "jumps", "command"}


def _coerce(section: str, f, value):
    """Check/convert a scalar against its annotation (``int``, ``float``, optional)."""
    ann = str(f.type).replace(" ", "")
    if value is None and ann.endswith("|None"):
        return None
    base = ann.split("|")[0]
    where = f"{section}.{f.name}"
    if base == "float":
        try:
            return float(value)  # also accepts '1.0e9', which YAML 1.1 leaves as a string
        except (TypeError, ValueError):
            raise ConfigError(f"{where} must be a number, got {value!r}") from None
    if base == "int":
        if isinstance(value, bool) or not isinstance(value, (int, float, str)):
            raise ConfigError(f"{where} must be an integer, got {value!r}")
        try:
            as_float = float(value)
        except ValueError:
            raise ConfigError(f"{where} must be an integer, got {value!r}") from None
        if not as_float.is_integer():
            raise ConfigError(f"{where} must be an integer, got {value!r}")
        return int(as_float)
    if base == "bool" and not isinstance(value, bool):
        raise ConfigError(f"{where} must be true or false, got {value!r}")
    if base == "str" and not isinstance(value, str):
        raise ConfigError(f"{where} must be a string, got {value!r}")
    return value


@dataclass
class ExperimentConfig:
    seed: int = DEFAULT_SEED
    jumps: list[float] = field(default_factory=lambda: [0.0])
    sim: SimSection = field(default_factory=SimSection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    chart: ChartSection = field(default_factory=ChartSection)
    design: DesignSection = field(default_factory=DesignSection)
    limit: LimitSection = field(default_factory=LimitSection)
    compare: CompareSection = field(default_factory=CompareSection)
    image: ImageSection = field(default_factory=ImageSection)

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a mapping")
        unknown = set(raw) - TOP_LEVEL
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kw: dict[str, Any] = {}
        for name, section in SECTIONS.items():
            body = raw.get(name) or {}
            if not isinstance(body, dict):
                raise ConfigError(f"section {name!r} must be a mapping")
            allowed = {f.name for f in fields(section)}
            bad = set(body) - allowed
            if bad:
                raise ConfigError(f"unknown keys in section {name!r}: {sorted(bad)}")
            kw[name] = section(**{k: _coerce(name, f, body[k]) for f in fields(section)
                                   for k in (f.name,) if k in body})
        seed = raw.get("seed", DEFAULT_SEED)
        if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2 ** 64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
        jumps = raw.get("jumps", [0.0])
        if not isinstance(jumps, list) or not all(isinstance(j, (int, float)) for j in jumps):
            raise ConfigError("jumps must be a list of numbers")
        return cls(seed=seed, jumps=[float(j) for j in jumps], **kw)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def load_config(path: str | Path) -> ExperimentConfig:
    """Read a YAML/JSON config, or the config embedded in a previous output file."""
    text = Path(path).read_text()
    for line in text.splitlines():
        if line.startswith(CONFIG_PREFIX):
            return ExperimentConfig.from_dict(json.loads(line[len(CONFIG_PREFIX):]))
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if isinstance(raw, dict) and "config" in raw and "results" in raw:
        raw = raw["config"]
    return ExperimentConfig.from_dict(raw or {})
