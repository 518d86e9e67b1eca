"""Run configuration: an INI file holding every training and simulation
default, overridable by CLI flags. Unknown keys are rejected so typos fail
loudly.
"""
from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DataFormatError
from .forecasters import (infection_train_config, mobility_train_config,
                          unemployment_train_config)
from .nn.training import TrainConfig
from .seir import IncubationDist
from .simulate import JointConfig, RollingConfig

_TRAIN_KEYS = {
    "learning_rate": float, "weight_decay": float, "lr_decay_factor": float,
    "lr_decay_period": int, "patience": int, "max_epochs": int,
    "noise_sigma": float, "validation_fraction": float, "seed": int,
    "early_stop": lambda s: s.strip().lower() in ("1", "true", "yes"),
}


@dataclass
class RunConfig:
    joint: JointConfig = field(default_factory=JointConfig)
    rolling: RollingConfig = field(default_factory=RollingConfig)
    seed: int = 0
    policy_horizon: int = 14
    workers: int = 1

    def reseed(self, seed: int) -> None:
        self.seed = seed
        self.joint.seed = seed
        self.joint.mobility = self.joint.mobility.replace(seed=seed + 1)
        self.joint.unemployment = self.joint.unemployment.replace(seed=seed + 2)
        self.joint.infection = self.joint.infection.replace(seed=seed + 3)
        self.rolling.joint = self.joint


def _apply_train_section(base: TrainConfig, section) -> TrainConfig:
    overrides = {}
    for key, value in section.items():
        if key not in _TRAIN_KEYS:
            raise DataFormatError(f"unknown training key {key!r}")
        overrides[key] = _TRAIN_KEYS[key](value)
    return base.replace(**overrides)


def load_run_config(path=None) -> RunConfig:
    """Build the run configuration; sections [mobility], [unemployment],
    [infection] override per-module training settings, [joint], [rolling],
    [simulation] the loop parameters."""
    joint = JointConfig(
        mobility=mobility_train_config(),
        unemployment=unemployment_train_config(),
        infection=infection_train_config(),
    )
    cfg = RunConfig(joint=joint, rolling=RollingConfig(joint=joint))
    if path is None:
        return cfg
    parser = configparser.ConfigParser()
    read = parser.read(str(path))
    if not read:
        raise DataFormatError(f"config file {path} not found or unreadable")

    if parser.has_section("mobility"):
        cfg.joint.mobility = _apply_train_section(cfg.joint.mobility, parser["mobility"])
    if parser.has_section("unemployment"):
        cfg.joint.unemployment = _apply_train_section(cfg.joint.unemployment,
                                                      parser["unemployment"])
    if parser.has_section("infection"):
        cfg.joint.infection = _apply_train_section(cfg.joint.infection, parser["infection"])
    if parser.has_section("joint"):
        sec = parser["joint"]
        for key, cast in (("hidden_size", int), ("demo_features", int),
                          ("inner_features", int), ("validation_fraction", float),
                          ("outer_patience", int), ("max_sweeps", int), ("seed", int)):
            if key in sec:
                setattr(cfg.joint, key, cast(sec[key]))
        if "incubation_shape" in sec or "incubation_scale" in sec:
            cfg.joint.incubation = IncubationDist(
                float(sec.get("incubation_shape", 2.0)),
                float(sec.get("incubation_scale", 7.9)))
    if parser.has_section("rolling"):
        sec = parser["rolling"]
        for key, cast in (("train_weeks", int), ("test_weeks", int),
                          ("forecast_horizon", int)):
            if key in sec:
                setattr(cfg.rolling, key, cast(sec[key]))
        if "warm_start" in sec:
            cfg.rolling.warm_start = sec.getboolean("warm_start")
    if parser.has_section("simulation"):
        sec = parser["simulation"]
        if "policy_horizon" in sec:
            cfg.policy_horizon = int(sec["policy_horizon"])
        if "workers" in sec:
            cfg.workers = int(sec["workers"])
        if "seed" in sec:
            cfg.seed = int(sec["seed"])
    cfg.rolling.joint = cfg.joint
    return cfg


def git_blob_hash(path) -> str:
    """Git-style content hash (sha1 over a blob header plus the bytes),
    stamped into reports for provenance."""
    data = Path(path).read_bytes()
    h = hashlib.sha1()
    h.update(f"blob {len(data)}\0".encode())
    h.update(data)
    return h.hexdigest()
