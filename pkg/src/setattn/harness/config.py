"""Experiment configuration files (YAML, nested sections, unknown keys rejected)."""
from __future__ import annotations

import os
from pathlib import Path
from typing import List, Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from setattn.encoder import EncoderSpec
from setattn.envs import default_encoder_spec
from setattn.ppo.trainer import TrainConfig

OUTPUT_DIR_ENV = "SETATTN_OUTPUT_DIR"


class ConfigError(ValueError):
    def __init__(self, path, message):
        super().__init__(f"{path}: {message}" if path else message)
        self.field_path = path
        self.detail = message


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class EncoderSection(_Strict):
    hidden: List[int] = Field(default_factory=lambda: [64])
    abstract_dims: Optional[List[int]] = None

    @field_validator("hidden", "abstract_dims")
    @classmethod
    def _positive(cls, v):
        if v is not None and any(x < 1 for x in v):
            raise ValueError("all entries must be >= 1")
        return v


class TrainSection(_Strict):
    epochs: int = Field(1000, ge=0)
    steps_per_epoch: int = Field(1000, ge=1)
    minibatch: int = Field(256, ge=1)
    clip: float = Field(0.1, gt=0)
    gamma: float = Field(0.99, gt=0, le=1)
    lam: float = Field(0.9, ge=0, le=1)
    entropy_coef: float = 0.0
    lr: float = Field(3e-4, gt=0)
    update_passes: int = Field(4, ge=1)
    value_coef: float = Field(0.5, ge=0)
    num_envs: int = Field(8, ge=1)
    log_std_init: float = -0.5
    action_gain: float = Field(3.0, gt=0)
    hidden: List[int] = Field(default_factory=lambda: [64, 64, 64, 64])
    slope: float = Field(0.01, gt=0, lt=1)
    normalize_advantages: bool = True
    checkpoint_every: int = Field(0, ge=0)

    @field_validator("entropy_coef")
    @classmethod
    def _no_entropy(cls, v):
        if v != 0.0:
            raise ValueError("entropy bonus is not supported; must be 0")
        return v

    @model_validator(mode="after")
    def _divisible(self):
        if self.steps_per_epoch % self.num_envs:
            raise ValueError("steps_per_epoch must be a multiple of num_envs")
        return self

    def to_train_config(self, seed: int) -> TrainConfig:
        data = self.model_dump()
        data["hidden"] = tuple(data["hidden"])
        return TrainConfig(seed=seed, **data)


class ExperimentConfig(_Strict):
    task: Literal["scavenger1", "scavenger2", "convoy"]
    m: int = Field(1, ge=1)
    representation: Literal["baseline", "encoder"] = "encoder"
    name: Optional[str] = None
    encoder: EncoderSection = Field(default_factory=EncoderSection)
    train: TrainSection = Field(default_factory=TrainSection)
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4])
    output_dir: str = "runs"
    threshold: float = Field(0.8, gt=0, le=1)
    window: int = Field(50, ge=1)
    greedy_episodes: int = Field(500, ge=1)
    greedy_seed: int = 0

    @field_validator("seeds")
    @classmethod
    def _seeds(cls, v):
        if not v:
            raise ValueError("at least one seed is required")
        if len(set(v)) != len(v):
            raise ValueError("seeds must be distinct")
        return v

    @property
    def run_name(self):
        return self.name or f"{self.task}_m{self.m}_{self.representation}"

    def encoder_spec(self) -> EncoderSpec | None:
        if self.representation != "encoder":
            return None
        return default_encoder_spec(self.task, self.m, tuple(self.encoder.hidden), self.encoder.abstract_dims)

    def resolved_output_dir(self) -> Path:
        return Path(os.environ.get(OUTPUT_DIR_ENV) or self.output_dir)


def _from_mapping(data, source=""):
    if not isinstance(data, dict):
        raise ConfigError(source, "config must be a mapping at the top level")
    try:
        cfg = ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        path = ".".join(str(p) for p in err["loc"])
        raise ConfigError(path, err["msg"]) from None
    try:
        cfg.encoder_spec()
    except ValueError as exc:
        raise ConfigError("encoder.abstract_dims", str(exc)) from None
    return cfg


def parse_config(text: str, source="") -> ExperimentConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(source, f"invalid YAML: {exc}") from None
    return _from_mapping(data, source)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config: {exc.strerror}") from None
    return parse_config(text, str(path))


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.model_dump(), sort_keys=True)
