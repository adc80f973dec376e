"""Versioned JSON tool configuration."""

from __future__ import annotations

import json
import os
from collections.abc import Mapping
from dataclasses import dataclass, field

from .losses import LossWeights, MultiResConfig
from .metrics import MetricConfig
from .pipeline import DistortionConfig
from .restore import RestoreConfig

SCHEMA_VERSION = 1
THREADS_ENV = "RESTORELAB_THREADS"


@dataclass(frozen=True)
class ToolConfig:
    distortion: DistortionConfig = field(default_factory=DistortionConfig)
    multires: MultiResConfig = field(default_factory=MultiResConfig)
    weights: LossWeights = field(default_factory=LossWeights)
    metrics: MetricConfig = field(default_factory=MetricConfig)
    restore: RestoreConfig = field(default_factory=RestoreConfig)
    workers: int = 1
    seed: int = 0
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.schema_version != SCHEMA_VERSION:
            raise ValueError(f"unsupported config schema_version {self.schema_version}; "
                             f"this build reads version {SCHEMA_VERSION}")

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "seed": self.seed,
            "workers": self.workers,
            "distortion": self.distortion.to_dict(),
            "multires": self.multires.to_dict(),
            "weights": self.weights.to_dict(),
            "metrics": self.metrics.to_dict(),
            "restore": self.restore.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: Mapping) -> "ToolConfig":
        known = {"schema_version", "seed", "workers", "distortion", "multires", "weights",
                 "metrics", "restore"}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config sections: {sorted(extra)}")
        if "schema_version" not in d:
            raise ValueError("config is missing schema_version")
        return cls(
            distortion=DistortionConfig.from_dict(d.get("distortion", {})),
            multires=MultiResConfig.from_dict(d.get("multires", {})),
            weights=LossWeights.from_dict(d.get("weights", {})),
            metrics=MetricConfig(**d.get("metrics", {})),
            restore=RestoreConfig(**d.get("restore", {})),
            workers=int(d.get("workers", 1)),
            seed=int(d.get("seed", 0)),
            schema_version=int(d["schema_version"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "ToolConfig":
        return cls.from_dict(json.loads(text))


def load_config(path=None, environ: Mapping | None = None) -> ToolConfig:
    """Read ``path`` (defaults if None) and apply the thread-count override."""
    if path is None:
        cfg = ToolConfig()
    else:
        with open(path, encoding="utf-8") as fh:
            cfg = ToolConfig.from_json(fh.read())
    env = os.environ if environ is None else environ
    threads = env.get(THREADS_ENV)
    if threads:
        try:
            workers = int(threads)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {threads!r}") from None
        d = cfg.to_dict()
        d["workers"] = workers
        cfg = ToolConfig.from_dict(d)
    return cfg
