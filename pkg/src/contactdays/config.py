from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from ._io import dumps, sha256_text
from .errors import ConfigError
from .extraction.models import ARCHITECTURES, BackendConfig


@dataclass
class PipelineConfig:
    suite_seed: int = 42
    suite_size: int = 20
    suite_dir: str = "suite"
    input_dir: str | None = None
    experiments_dir: str = "experiments"
    experiment: str = "default"
    architecture: str = "vanilla"
    runs_per_protocol: int = 3
    concurrency: int = 4
    backend: BackendConfig = field(default_factory=BackendConfig)

    def validate(self):
        if self.runs_per_protocol < 1:
            raise ConfigError("runs_per_protocol must be >= 1")
        if self.concurrency < 1:
            raise ConfigError("concurrency must be >= 1")
        if self.architecture not in ARCHITECTURES:
            raise ConfigError(f"architecture must be one of {ARCHITECTURES}")
        if not self.experiment or "/" in self.experiment or self.experiment.startswith("."):
            raise ConfigError(f"invalid experiment name {self.experiment!r}")
        self.backend.validate()
        return self

    @property
    def experiment_dir(self) -> Path:
        return Path(self.experiments_dir) / self.experiment

    def to_dict(self) -> dict:
        return asdict(self)

    def snapshot_hash(self) -> str:
        return sha256_text(dumps(self.to_dict()))

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        d = dict(d or {})
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        backend = d.pop("backend", None) or {}
        bknown = {f.name for f in fields(BackendConfig)}
        bad = set(backend) - bknown
        if bad:
            raise ConfigError(f"unknown backend config keys: {sorted(bad)}")
        return cls(backend=BackendConfig(**backend), **d)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        """Read a YAML or JSON config file."""
        try:
            with open(path, encoding="utf-8") as fh:
                data = yaml.safe_load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from exc
        if data is not None and not isinstance(data, dict):
            raise ConfigError(f"config {path} must be a mapping")
        return cls.from_dict(data or {})
