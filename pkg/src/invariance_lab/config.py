"""Strict JSON experiment configuration.

Unknown keys are rejected at every level. ``seed`` drives a single
:class:`numpy.random.SeedSequence`, spawned into two streams in fixed order:

0. the signal / template source
1. experiment-specific randomness (random banks, layers, datasets, bases,
   group parameters)
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

EXPERIMENTS = ("stone", "stability", "commutation", "pooling", "discover", "frame")
SIGNAL_PRESETS = ("impulse", "gaussian-bump", "chirp", "white-noise")
DATASET_PRESETS = ("shift-orbit", "transposition-orbit", "white-noise")
BANK_CHOICES = ("identity", "duplicated", "haar_pair", "half_band", "oriented4", "random")


class ConfigError(ValueError):
    """Invalid configuration (CLI exit code 2)."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GroupConfig(_Strict):
    kind: Literal["translation", "frequency_transposition", "dilation"] = "translation"
    axis: str = "u"
    direction: Optional[float] = None


class SignalConfig(_Strict):
    preset: Optional[Literal["impulse", "gaussian-bump", "chirp", "white-noise"]] = None
    path: Optional[str] = None
    position: int = 0
    center: Optional[float] = None
    width: Optional[float] = None
    f0: float = 0.02
    f1: float = 0.12
    complex: bool = False

    @model_validator(mode="after")
    def _one_source(self):
        if (self.preset is None) == (self.path is None):
            raise ValueError("signal needs exactly one of 'preset' or 'path'")
        return self


Coefficient = Union[float, tuple[float, float]]


class BankConfig(_Strict):
    preset: Optional[Literal["identity", "duplicated", "haar_pair", "half_band", "oriented4", "random"]] = None
    filters: Optional[list[list[Coefficient]]] = None
    axis: str = "u"
    new_axis: Optional[str] = None
    count: int = Field(4, ge=1)
    taps: int = Field(3, ge=1)

    @model_validator(mode="after")
    def _one_source(self):
        if (self.preset is None) == (self.filters is None):
            raise ValueError("bank needs exactly one of 'preset' or 'filters'")
        return self


class PoolingConfig(_Strict):
    axes: dict[str, int]
    alpha: float = Field(1.0, ge=0.0, le=1.0)
    kernel: Literal["average", "max"] = "average"


class LayerConfig(_Strict):
    bank: BankConfig
    nonlinearity: Literal["modulus", "relu", "none"] = "modulus"
    pooling: Optional[PoolingConfig] = None


class DatasetConfig(_Strict):
    preset: Optional[Literal["shift-orbit", "transposition-orbit", "white-noise"]] = None
    path: Optional[str] = None
    samples: int = Field(512, ge=1)

    @model_validator(mode="after")
    def _one_source(self):
        if (self.preset is None) == (self.path is None):
            raise ValueError("dataset needs exactly one of 'preset' or 'path'")
        return self


class ExperimentConfig(_Strict):
    experiment: Literal["stone", "stability", "commutation", "pooling", "discover", "frame"]
    seed: int = Field(0, ge=0, lt=2**64)
    n: Optional[int] = Field(None, ge=1)
    signal: Optional[SignalConfig] = None
    group: Optional[GroupConfig] = None
    signals: int = Field(20, ge=1)
    cascade: Optional[list[LayerConfig]] = None
    pool_j: int = Field(3, ge=0)
    amplitudes: list[float] = [0.25, 0.5, 1.0, 2.0]
    channels: list[int] = [4, 8, 16]
    taps: int = Field(3, ge=1)
    shift: int = 1
    scales: list[int] = [1, 2, 3, 4]
    dataset: Optional[DatasetConfig] = None
    tol: float = Field(1e-6, gt=0)
    center: bool = False
    random_bases: int = Field(100, ge=0)
    banks: list[Literal["identity", "duplicated", "haar_pair", "half_band", "oriented4", "random"]] = list(BANK_CHOICES)
    trials: int = Field(100, ge=1)


def _describe(err: ValidationError) -> str:
    parts = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        if e["type"] == "extra_forbidden":
            parts.append(f"unknown key {loc!r}")
        else:
            parts.append(f"{loc}: {e['msg']}")
    return "; ".join(parts)


def parse_config(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid config: {_describe(e)}") from None


def load_config_file(path: str | Path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return data


def streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """``(signal_rng, experiment_rng)`` in the documented stream order."""
    children = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(children[0]), np.random.default_rng(children[1])
