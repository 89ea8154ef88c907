"""Run configuration: a plain-text key=value file plus CLI flag overrides.

Every flag has a config-file equivalent under the same dotted key; flags win
over file values. The effective configuration is echoed to the output
directory so runs are reproducible from the artifacts alone.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigError
from .matc import MatcParams
from .model import ModelConfig
from .training import TrainConfig

ENV_OUTPUT_ROOT = "POLYCLASS_OUTPUT_ROOT"


@dataclass
class DatasetSpec:
    kind: str = "folder"  # 'idx' or 'folder'
    images: str = ""
    labels: str = ""
    root: str = ""
    limit: int = 0  # 0 = all samples


@dataclass
class RunConfig:
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    representation: str = "dominant-points"
    matc: MatcParams = field(default_factory=MatcParams)
    train: TrainConfig = field(default_factory=TrainConfig)
    model_d_model: int = 64
    model_num_heads: int = 4
    model_conv_channels: tuple[int, ...] = (64, 128, 256, 512, 1024)
    model_kernel_size: int = 3
    model_max_len: int = 2048
    output_dir: str = "runs/out"
    seed: int = 0

    def model_config(self, num_classes: int) -> ModelConfig:
        return ModelConfig(
            num_classes=num_classes,
            d_model=self.model_d_model,
            num_heads=self.model_num_heads,
            conv_channels=self.model_conv_channels,
            kernel_size=self.model_kernel_size,
            dropout_rate=self.train.dropout,
            max_len=self.model_max_len,
        )

    def resolved_output_dir(self) -> Path:
        root = os.environ.get(ENV_OUTPUT_ROOT)
        if root:
            return Path(root) / self.output_dir
        return Path(self.output_dir)


def parse_config_file(path) -> dict[str, str]:
    """'key = value' lines; '#' starts a comment; blank lines ignored."""
    values: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, value = stripped.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def _coerce(raw: str, like):
    if isinstance(like, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"cannot parse boolean from {raw!r}")
    if isinstance(like, int):
        return int(raw)
    if isinstance(like, float):
        return float(raw)
    if isinstance(like, tuple):
        parts = [p for p in raw.replace(",", " ").split() if p]
        elem = like[0] if like else 1.0
        return tuple(type(elem)(p) for p in parts)
    if like is None or isinstance(like, str):
        return raw
    raise ConfigError(f"unsupported config value type for {raw!r}")


def _known_keys(cfg: RunConfig) -> dict[str, tuple]:
    keys = {}
    for f in fields(DatasetSpec):
        keys[f"dataset.{f.name}"] = (cfg.dataset, f.name)
    for f in fields(MatcParams):
        keys[f"matc.{f.name}"] = (cfg.matc, f.name)
    for f in fields(TrainConfig):
        keys[f"train.{f.name}"] = (cfg.train, f.name)
    for name in ("d_model", "num_heads", "conv_channels", "kernel_size", "max_len"):
        keys[f"model.{name}"] = (cfg, f"model_{name}")
    for name in ("representation", "output_dir", "seed"):
        keys[name] = (cfg, name)
    return keys


def apply_values(cfg: RunConfig, values: dict[str, str]) -> RunConfig:
    keys = _known_keys(cfg)
    for key, raw in values.items():
        if key not in keys:
            raise ConfigError(f"unknown config key {key!r}")
        obj, attr = keys[key]
        current = getattr(obj, attr)
        coerced = _coerce(raw, current) if raw is not None else current
        setattr(obj, attr, coerced)
    return cfg


def build_run_config(config_path=None, overrides: dict[str, str] | None = None) -> RunConfig:
    """File values first, then overrides (typically from CLI flags)."""
    cfg = RunConfig()
    if config_path is not None:
        apply_values(cfg, parse_config_file(config_path))
    if overrides:
        apply_values(cfg, {k: v for k, v in overrides.items() if v is not None})
    if cfg.representation not in (
        "dominant-points",
        "contours-none",
        "contours-simple",
        "contours-tc89l1",
        "contours-tc89kcos",
    ):
        raise ConfigError(f"unknown representation {cfg.representation!r}")
    # the global seed also seeds training unless train.seed was set explicitly
    if overrides and "seed" in overrides and "train.seed" not in (overrides or {}):
        cfg.train.seed = cfg.seed
    return cfg


def effective_config_text(cfg: RunConfig) -> str:
    """Deterministic key=value dump of every setting."""
    lines = []
    keys = _known_keys(cfg)
    for key in sorted(keys):
        obj, attr = keys[key]
        value = getattr(obj, attr)
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def echo_effective_config(cfg: RunConfig, out_dir: Path) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "effective_config.txt"
    path.write_text(effective_config_text(cfg), encoding="utf-8")
    return path
