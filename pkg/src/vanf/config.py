"""Run configuration: nested dataclasses serialized as JSON.

Loading is strict: unknown keys are rejected rather than ignored, so a typo
in a config file fails fast instead of silently training with defaults.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ValidationError


@dataclass
class ModelSection:
    d_t: int = 16
    d_g: int = 16
    n_freqs: int = 4
    hidden: int = 64
    w_init: float = 0.1
    seed: int = 3
    use_nearest: bool = True
    use_mirrored: bool = True
    fusion_visibility: bool = True
    disc_dual_head: bool = True
    disc_base: int = 32


@dataclass
class RenderSection:
    n_coarse: int = 16
    n_fine: int = 32
    patch_size: int = 32
    background: tuple = (0.0, 0.0, 0.0)


@dataclass
class DataSection:
    root: str = "data"
    n_train: int = 64
    n_test: int = 8
    image_size: int = 64
    n_cameras: int = 4
    seed: int = 1000
    touching_fraction: float = 0.5
    radius_factor: float = 1.5  # view-sphere radius = factor x scene scale
    fov_deg: float = 40.0
    elevation_lo: float = -30.0
    elevation_hi: float = 45.0


@dataclass
class TrainSection:
    steps: int = 2000
    batch_size: int = 2
    lr: float = 1e-3
    milestone_fractions: tuple = (0.10, 0.25, 0.50, 0.75)
    seed: int = 7
    log_every: int = 10
    checkpoint_every: int = 500
    run_dir: str = "runs/default"
    lambda_rgb: float = 10.0
    lambda_perc: float = 1.0
    lambda_adv: float = 0.1
    lambda_vis: float = 0.1


@dataclass
class EvalSection:
    split: str = "test"
    occlusion_ratios: tuple = (0.1, 0.2, 0.3)
    yaw_threshold_deg: float = 30.0
    seed: int = 99


@dataclass
class RunConfig:
    model: ModelSection = field(default_factory=ModelSection)
    render: RenderSection = field(default_factory=RenderSection)
    data: DataSection = field(default_factory=DataSection)
    train: TrainSection = field(default_factory=TrainSection)
    eval: EvalSection = field(default_factory=EvalSection)


def _from_dict(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ValidationError(f"config section {path or 'root'} must be an object")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ValidationError(f"unknown config key(s) {sorted(unknown)} in {path or 'root'}")
    hints = typing.get_type_hints(cls)
    kwargs = {}
    for name in known:
        if name not in data:
            continue
        value = data[name]
        hint = hints.get(name)
        if isinstance(hint, type) and dataclasses.is_dataclass(hint):
            kwargs[name] = _from_dict(hint, value, f"{path}.{name}" if path else name)
        elif isinstance(value, list):
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = value
    return cls(**kwargs)


def config_from_dict(data: dict) -> RunConfig:
    return _from_dict(RunConfig, data, "")


def config_to_dict(cfg: RunConfig) -> dict:
    def conv(obj):
        if dataclasses.is_dataclass(obj):
            return {f.name: conv(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
        if isinstance(obj, tuple):
            return [conv(v) for v in obj]
        return obj

    return conv(cfg)


def load_config(path) -> RunConfig:
    try:
        raw = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(data)


def save_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(cfg), indent=2, sort_keys=True) + "\n")


def apply_override(cfg: RunConfig, spec: str) -> None:
    """In-place ``section.key=value`` override; value parsed as JSON when possible."""
    if "=" not in spec:
        raise ValidationError(f"override {spec!r} must look like key=value")
    dotted, raw = spec.split("=", 1)
    parts = dotted.strip().split(".")
    obj = cfg
    for part in parts[:-1]:
        if not dataclasses.is_dataclass(obj) or part not in {f.name for f in dataclasses.fields(obj)}:
            raise ValidationError(f"unknown config path {dotted!r}")
        obj = getattr(obj, part)
    leaf = parts[-1]
    if not dataclasses.is_dataclass(obj) or leaf not in {f.name for f in dataclasses.fields(obj)}:
        raise ValidationError(f"unknown config path {dotted!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    if isinstance(value, list):
        value = tuple(value)
    current = getattr(obj, leaf)
    if isinstance(current, bool) and not isinstance(value, bool):
        raise ValidationError(f"override {dotted!r} expects true/false")
    if isinstance(current, bool) is not isinstance(value, bool) or (
        isinstance(current, (int, float)) and not isinstance(value, (int, float))
    ):
        raise ValidationError(f"override {dotted!r} expects a number, got {raw!r}")
    if isinstance(current, int) and isinstance(value, float) and not value.is_integer():
        raise ValidationError(f"override {dotted!r} expects an integer, got {raw!r}")
    if isinstance(current, int) and not isinstance(current, bool):
        value = int(value) if isinstance(value, float) else value
    setattr(obj, leaf, value)


def model_hash(cfg: RunConfig) -> bytes:
    """Digest of the checkpoint-compatibility subtree (model shapes only)."""
    payload = json.dumps(config_to_dict(cfg)["model"], sort_keys=True).encode()
    return hashlib.sha256(payload).digest()
