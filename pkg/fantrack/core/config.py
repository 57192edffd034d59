"""Tracker configuration and its persistence.

Defaults reproduce the published schedules; any value can be overridden from a
TOML (``key = value``, one table per sub-config) or JSON file.
"""
import dataclasses
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from .errors import ConfigError
from .models import Modality, Weighting

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Stage:
    """One coarse-to-fine step of the optimiser."""

    a_reg: float
    l_src: int
    sigma: float
    gamma: float
    lam: float
    search_iters: int


@dataclass(frozen=True)
class OptimizerSchedule:
    a_reg: Tuple[float, ...] = (60.0, 40.0, 20.0, 0.0)
    l_src: Tuple[int, ...] = (73, 43, 23, 13)
    sigma: Tuple[float, ...] = (8.0, 4.0, 2.0, 1.0)
    gamma: Tuple[float, ...] = (0.1, 0.5, 1.5, 2.5)
    lam: Tuple[float, ...] = (0.4, 0.6, 0.8, 0.9)
    search_iters: Tuple[int, ...] = (1, 2, 2, 4)
    gn_iters_per_search: int = 3
    b2: float = 0.2
    lambda_r: float = 5000.0
    lambda_t: float = 500000.0
    max_step_halvings: int = 4

    def __post_init__(self) -> None:
        for name in ("a_reg", "l_src", "sigma", "gamma", "lam", "search_iters"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        n = len(self.a_reg)
        if n == 0 or any(
            len(getattr(self, name)) != n
            for name in ("l_src", "sigma", "gamma", "lam", "search_iters")
        ):
            raise ConfigError("schedule lists must be non-empty and equally long")
        if any(not 0.0 <= v <= 1.0 for v in self.lam) or any(
            b < a for a, b in zip(self.lam, self.lam[1:])
        ):
            raise ConfigError("lambda must lie in [0, 1] and be nondecreasing")
        if any(b >= a for a, b in zip(self.sigma, self.sigma[1:])):
            raise ConfigError("sigma schedule must be decreasing")
        if any(b >= a for a, b in zip(self.l_src, self.l_src[1:])):
            raise ConfigError("search line length schedule must be decreasing")
        if any(l % 2 == 0 or l < 1 for l in self.l_src):
            raise ConfigError("search line lengths must be odd")
        if self.gn_iters_per_search < 1 or any(k < 1 for k in self.search_iters):
            raise ConfigError("iteration counts must be positive")
        if self.max_step_halvings < 0:
            raise ConfigError("max_step_halvings must be >= 0")
        if self.lambda_r < 0 or self.lambda_t < 0 or self.b2 < 0:
            raise ConfigError("b2 and regularisers must be nonnegative")

    @property
    def stages(self) -> List[Stage]:
        return [
            Stage(float(a), int(l), float(s), float(g), float(lm), int(k))
            for a, l, s, g, lm, k in zip(
                self.a_reg, self.l_src, self.sigma, self.gamma, self.lam, self.search_iters
            )
        ]

    @property
    def total_gn_iterations(self) -> int:
        return sum(self.search_iters) * self.gn_iters_per_search


@dataclass(frozen=True)
class FanSearchParams:
    a_int: float = 10.0
    a_reg: float = 60.0
    l_src: int = 73
    candidate_threshold: float = 0.0

    def __post_init__(self) -> None:
        if self.a_int <= 0 or self.a_int % 10.0 != 0.0:
            raise ConfigError("a_int must be a positive multiple of the 10 degree direction table")
        if self.a_reg < 0 or self.a_reg % self.a_int != 0.0:
            raise ConfigError("a_reg must be a nonnegative multiple of a_int")
        if self.l_src < 1 or self.l_src % 2 == 0:
            raise ConfigError("l_src must be odd")

    @property
    def n_sam(self) -> int:
        return int(round(self.a_reg / self.a_int)) + 1

    def with_stage(self, a_reg: float, l_src: int) -> "FanSearchParams":
        return dataclasses.replace(self, a_reg=a_reg, l_src=l_src)


@dataclass(frozen=True)
class FlowParams:
    finest_scale: int = 1
    patch_size: int = 8
    patch_stride: int = 4
    inverse_search_iters: int = 12
    spatial_propagation: bool = True
    confidence_patch: int = 3
    eta_i: float = 40.0
    eta_g: float = 40.0
    eta_s: float = 80.0

    def __post_init__(self) -> None:
        if self.finest_scale < 0:
            raise ConfigError("finest_scale must be >= 0")
        if not 0 < self.patch_stride <= self.patch_size:
            raise ConfigError("patch_stride must be in (0, patch_size]")
        if self.confidence_patch < 1 or self.confidence_patch % 2 == 0:
            raise ConfigError("confidence_patch must be odd")


@dataclass(frozen=True)
class ColorParams:
    bins: int = 32
    learn_rate_f: float = 0.1
    learn_rate_b: float = 0.2
    boundary_margin: int = 4

    def __post_init__(self) -> None:
        if self.bins < 1 or 256 % self.bins != 0:
            raise ConfigError("bins must divide 256")
        if not (0.0 <= self.learn_rate_f <= 1.0 and 0.0 <= self.learn_rate_b <= 1.0):
            raise ConfigError("learn rates must lie in [0, 1]")
        if self.boundary_margin < 0:
            raise ConfigError("boundary_margin must be >= 0")


@dataclass(frozen=True)
class TemplateParams:
    subdivision_level: int = 3
    radius_factor: float = 2.5
    image_width: int = 640
    image_height: int = 512
    focal: float = 500.0
    normal_window: int = 3

    def __post_init__(self) -> None:
        if self.subdivision_level < 0:
            raise ConfigError("subdivision_level must be >= 0")
        if self.radius_factor <= 0 or self.focal <= 0:
            raise ConfigError("radius_factor and focal must be positive")


@dataclass(frozen=True)
class TrackerConfig:
    schedule: OptimizerSchedule = field(default_factory=OptimizerSchedule)
    fan: FanSearchParams = field(default_factory=FanSearchParams)
    flow: FlowParams = field(default_factory=FlowParams)
    color: ColorParams = field(default_factory=ColorParams)
    templates: TemplateParams = field(default_factory=TemplateParams)
    n_cnt: int = 200
    n_in: int = 200
    roi_margin: int = 40
    variance_cutoff: float = 600.0
    min_valid_contours: int = 10
    modality: Modality = Modality.JOINT
    weighting: Weighting = Weighting.MIXTURE

    def __post_init__(self) -> None:
        if self.roi_margin < 0:
            raise ConfigError("roi_margin must be >= 0")
        if self.n_cnt < 1 or self.n_in < 0:
            raise ConfigError("n_cnt must be positive and n_in nonnegative")
        if self.variance_cutoff <= 0:
            raise ConfigError("variance_cutoff must be positive")
        for stage in self.schedule.stages:
            if stage.a_reg % self.fan.a_int != 0.0:
                raise ConfigError(f"stage a_reg {stage.a_reg} is not a multiple of a_int")

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        data["modality"] = self.modality.value
        data["weighting"] = self.weighting.value
        for name, value in data["schedule"].items():
            if isinstance(value, tuple):
                data["schedule"][name] = list(value)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrackerConfig":
        """Overlay a (possibly partial) nested dict on the defaults."""
        return _overlay(cls(), data, "")


def _overlay(base: Any, data: Dict[str, Any], prefix: str) -> Any:
    known = {f.name: f for f in dataclasses.fields(base)}
    changes: Dict[str, Any] = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"unknown config key: {prefix}{key}")
        current = getattr(base, key)
        if dataclasses.is_dataclass(current):
            if not isinstance(value, dict):
                raise ConfigError(f"{prefix}{key} must be a table")
            changes[key] = _overlay(current, value, f"{prefix}{key}.")
        elif isinstance(current, (Modality, Weighting)):
            try:
                changes[key] = type(current)(value)
            except ValueError as e:
                raise ConfigError(f"{prefix}{key}: {e}") from e
        elif isinstance(current, tuple):
            changes[key] = tuple(type(current[0])(v) for v in value)
        elif isinstance(current, bool):
            changes[key] = bool(value)
        else:
            changes[key] = type(current)(value)
    try:
        return dataclasses.replace(base, **changes)
    except TypeError as e:
        raise ConfigError(str(e)) from e


class ConfigManager:
    """Manages configuration persistence and loading."""

    def __init__(self, config_file: Optional[Union[str, Path]] = None):
        self.config_file = Path(config_file) if config_file else None

    def load(self) -> TrackerConfig:
        """Defaults overlaid with the file, if one was given."""
        if self.config_file is None:
            return TrackerConfig()
        if not self.config_file.exists():
            raise FileNotFoundError(f"Config file does not exist: {self.config_file}")

        try:
            if self.config_file.suffix == ".json":
                with open(self.config_file, "r") as f:
                    data = json.load(f)
            else:
                with open(self.config_file, "rb") as f:
                    data = tomllib.load(f)
        except (json.JSONDecodeError, tomllib.TOMLDecodeError) as e:
            raise ConfigError(f"cannot parse {self.config_file}: {e}") from e

        logger.debug(f"Loaded config overrides from {self.config_file}: {sorted(data)}")
        return TrackerConfig.from_dict(data)

    def save(self, config: TrackerConfig) -> None:
        """Save configuration to file as JSON."""
        if self.config_file is None:
            raise ConfigError("no config file path set")
        self.config_file.parent.mkdir(parents=True, exist_ok=True)
        with open(self.config_file, "w") as f:
            json.dump(config.to_dict(), f, indent=4)
