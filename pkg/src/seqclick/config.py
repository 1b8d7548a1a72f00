"""Dataclass configs and the flat dotted-key JSON config format.

A config file is a single JSON object whose keys are ``section.field``
(e.g. ``"model.dim": 64``). CLI overrides use the same keys and win over
the file. Unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path


class ConfigurationError(RuntimeError):
    """Missing or inconsistent run configuration (checkpoints, datasets, keys)."""


@dataclass
class ModelConfig:
    image_size: int = 64
    patch: int = 8
    dim: int = 64
    depth: int = 4
    spt_depth: int = 2
    heads: int = 4
    mlp_ratio: float = 4.0
    max_seq_len: int = 11  # prompts + test item
    msh_hidden: int = 24
    click_radius: int = 5

    @property
    def grid(self) -> tuple[int, int]:
        g = self.image_size // self.patch
        return (g, g)

    @property
    def tokens_per_image(self) -> int:
        g = self.image_size // self.patch
        return g * g


@dataclass
class DataConfig:
    out_dir: str = "dataset"
    image_size: int = 64
    categories: tuple[str, ...] = (
        "vehicle_window",
        "vehicle_wheel",
        "house_door",
        "house_window",
        "mug_handle",
        "bed_pillow",
        "tree_crown",
    )
    train_per_category: int = 120
    eval_per_category: int = 30
    seed: int = 0


@dataclass
class TrainConfig:
    epochs: int = 55
    steps_per_epoch: int = 40
    batch_size: int = 2
    lr_initial: float = 5e-4
    lr_final: float = 5e-6
    lr_drop_frac: float = 50.0 / 55.0  # schedule boundary as a fraction of epochs
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    prompt_len: int = 5
    prompt_len_jitter: bool = True  # per-step prompt count ~ U{0..prompt_len}
    max_clicks: int = 3  # simulated clicks per item, sampled 1..max
    iou_stop: float = 0.90
    seed: int = 0
    checkpoint_every: int = 0  # epochs between periodic checkpoints; 0 = final only
    augment: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigurationError("epochs must be >= 1")
        if self.prompt_len < 0:
            raise ConfigurationError("prompt_len must be >= 0")

    def lr_at(self, epoch: int) -> float:
        """5e-4 until the scaled 50/55 boundary, then 5e-6 (0-based epochs)."""
        boundary = self.lr_drop_frac * self.epochs
        return self.lr_initial if epoch < boundary else self.lr_final


@dataclass
class EvalProtocol:
    selection: str = "tps"  # tps | random | none
    prompt_len: int = 5
    max_clicks: int = 20
    iou_target: float = 0.95  # interaction stop; >= the NoC thresholds below
    noc_thresholds: tuple[float, float] = (0.85, 0.90)
    miou_clicks: int = 5
    scenes_per_category: int = 0  # 0 = all eval scenes
    seed: int = 0

    def __post_init__(self):
        if self.selection not in ("tps", "random", "none"):
            raise ConfigurationError(f"unknown selection protocol {self.selection!r}")


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    data: DataConfig = field(default_factory=DataConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalProtocol = field(default_factory=EvalProtocol)


def _coerce(value, target_type):
    if target_type is bool and isinstance(value, str):
        if value.lower() in ("true", "1", "yes"):
            return True
        if value.lower() in ("false", "0", "no"):
            return False
        raise ConfigurationError(f"cannot parse boolean from {value!r}")
    if isinstance(target_type, type) and issubclass(target_type, tuple):
        return tuple(value)
    try:
        return target_type(value)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"cannot coerce {value!r} to {target_type}") from exc


def apply_flat_keys(cfg: RunConfig, flat: dict[str, object]) -> RunConfig:
    """Apply ``section.field`` entries onto a RunConfig; unknown keys reject."""
    sections = {f.name: getattr(cfg, f.name) for f in dataclasses.fields(cfg)}
    for key, value in flat.items():
        if "." not in key:
            raise ConfigurationError(f"config key {key!r} is not of the form section.field")
        section_name, field_name = key.split(".", 1)
        if section_name not in sections:
            raise ConfigurationError(f"unknown config section {section_name!r}")
        section = sections[section_name]
        fields = {f.name: f for f in dataclasses.fields(section)}
        if field_name not in fields:
            raise ConfigurationError(f"unknown config key {key!r}")
        target = type(getattr(section, field_name))
        setattr(section, field_name, _coerce(value, target))
    # re-validate invariants that __post_init__ guards
    for section in sections.values():
        post = getattr(section, "__post_init__", None)
        if post is not None:
            post()
    return cfg


def load_config(path: str | Path | None, overrides: dict[str, object] | None = None) -> RunConfig:
    cfg = RunConfig()
    if path is not None:
        raw = json.loads(Path(path).read_text())
        if not isinstance(raw, dict):
            raise ConfigurationError("config file must hold a JSON object")
        apply_flat_keys(cfg, raw)
    if overrides:
        apply_flat_keys(cfg, overrides)
    return cfg


def parse_override(text: str) -> tuple[str, str]:
    """Parse one ``key=value`` CLI override."""
    if "=" not in text:
        raise ConfigurationError(f"override {text!r} is not of the form key=value")
    key, value = text.split("=", 1)
    return key.strip(), value.strip()
