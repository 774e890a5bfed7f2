"""Run configuration: flat key = value config files plus flag overrides.

The config file format is deliberately simple (one ``key = value`` per
line, ``#`` comments, dotted keys for grouping) so a run's exact
parameters can be committed next to its outputs. Flags always win over
file values, file values over defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .enhance import StretchConfig
from .errors import ConfigError
from .terrain import TerrainThresholds

_TERRAIN_KEYS = (
    "ocean_fraction",
    "sea_level",
    "high_relief",
    "low_relief",
    "highland_mean",
    "hill_relief",
)


def parse_kv_file(path) -> dict:
    """Parse a flat key = value config file into {dotted_key: scalar}."""
    values: dict[str, object] = {}
    try:
        with open(path, "r", encoding="utf-8") as f:
            lines = f.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, line in enumerate(lines, 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line.rstrip()!r}")
        key, _, raw = stripped.partition("=")
        values[key.strip()] = _parse_scalar(raw.strip())
    return values


def _parse_scalar(raw: str):
    if raw.startswith('"') and raw.endswith('"') and len(raw) >= 2:
        return raw[1:-1]
    lowered = raw.lower()
    if lowered == "true":
        return True
    if lowered == "false":
        return False
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw


@dataclass
class PipelineConfig:
    """Everything a pipeline run needs beyond its input/output paths."""

    stretch: StretchConfig = field(default_factory=StretchConfig)
    terrain: TerrainThresholds = field(default_factory=TerrainThresholds)
    outlier_window: int = 5
    outlier_z: float = 5.0
    eval_offset: float = 1.0
    eval_split: str = "test"
    schedule_steps: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02
    seed: int = 0
    jobs: int | None = None  # None = all available cores


def build_config(values: dict) -> PipelineConfig:
    """Materialize a PipelineConfig from dotted key/value pairs."""
    try:
        stretch = StretchConfig(
            p_low=float(values.get("stretch.low", 1.0)),
            p_high=float(values.get("stretch.high", 99.0)),
        )
        terrain_kwargs = {
            key: float(values[f"terrain.{key}"])
            for key in _TERRAIN_KEYS
            if f"terrain.{key}" in values
        }
        cfg = PipelineConfig(
            stretch=stretch,
            terrain=TerrainThresholds(**terrain_kwargs),
            outlier_window=int(values.get("outlier.window", 5)),
            outlier_z=float(values.get("outlier.z", 5.0)),
            eval_offset=float(values.get("eval.offset", 1.0)),
            eval_split=str(values.get("eval.split", "test")),
            schedule_steps=int(values.get("schedule.steps", 1000)),
            beta_start=float(values.get("schedule.beta_start", 1e-4)),
            beta_end=float(values.get("schedule.beta_end", 0.02)),
            seed=int(values.get("seed", 0)),
            jobs=int(values["jobs"]) if "jobs" in values else None,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad config value: {exc}") from exc
    if cfg.outlier_window < 3 or cfg.outlier_window % 2 == 0:
        raise ConfigError("outlier.window must be an odd integer >= 3")
    if cfg.outlier_z <= 0:
        raise ConfigError("outlier.z must be positive")
    if cfg.eval_split not in ("train", "val", "test"):
        raise ConfigError("eval.split must be train, val or test")
    return cfg
