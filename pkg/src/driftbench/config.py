"""Declarative experiment configuration (JSON or TOML) with documented defaults."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from .errors import ConfigurationError
from .federation import FederationConfig
from .model import ACTIVATIONS, OPTIMIZERS, ArchitectureSpec, OptimizerHyper
from .schedule import PARADIGMS

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib


@dataclass
class DatasetConfig:
    source: str = "synthetic"  # synthetic | csv | binary_cifar
    path: Optional[str] = None
    label_mode: str = "coarse"
    num_classes: int = 8
    per_class: int = 250
    feature_dim: int = 16
    class_separation: float = 0.5
    noise: float = 1.0
    seed: int = 0


@dataclass
class PartitionConfig:
    alpha: float = 0.5
    test_fraction: float = 0.2
    seed: int = 0


@dataclass
class ScheduleConfig:
    permutation_count: int = 8
    paradigms: List[str] = field(default_factory=lambda: list(PARADIGMS))
    seed: int = 0


@dataclass
class FederationSettings:
    client_counts: List[int] = field(default_factory=lambda: [1, 2, 5, 10])
    rounds_per_phase: int = 5
    local_epochs: int = 2
    batch_size: int = 4
    seed: int = 0

    def for_clients(self, n: int) -> FederationConfig:
        return FederationConfig(n, self.rounds_per_phase, self.local_epochs, self.batch_size)


@dataclass
class ModelConfig:
    hidden_dims: List[int] = field(default_factory=lambda: [64, 64])
    activation: str = "relu"
    optimizer: str = "adam"
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0

    def hyper(self) -> OptimizerHyper:
        return OptimizerHyper(self.learning_rate, self.beta1, self.beta2, self.epsilon)


@dataclass
class AttackConfig:
    per_side_cap: int = 1000
    matching: str = "class"  # class | none
    nonmembers: str = "all_test"  # all_test | phase_test
    seed: int = 0


@dataclass
class ExperimentConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    coarsen: Optional[Any] = None  # null, "cifar100", a list indexed by fine label, or a dict
    partition: PartitionConfig = field(default_factory=PartitionConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    federation: FederationSettings = field(default_factory=FederationSettings)
    model: ModelConfig = field(default_factory=ModelConfig)
    attack: AttackConfig = field(default_factory=AttackConfig)
    output_dir: str = "results"

    def validate(self) -> "ExperimentConfig":
        d = self.dataset
        if d.source not in ("synthetic", "csv", "binary_cifar"):
            raise ConfigurationError(f"unknown dataset source {d.source!r}")
        if d.source != "synthetic" and not d.path:
            raise ConfigurationError(f"dataset source {d.source!r} needs a path")
        if not self.schedule.paradigms or any(p not in PARADIGMS for p in self.schedule.paradigms):
            raise ConfigurationError(f"paradigms must be a nonempty subset of {PARADIGMS}")
        if not 1 <= self.schedule.permutation_count <= 24:
            raise ConfigurationError("permutation_count must lie in [1, 24]")
        counts = self.federation.client_counts
        if not counts or any(int(c) < 1 for c in counts):
            raise ConfigurationError("client_counts must be a nonempty list of integers >= 1")
        self.federation.for_clients(1)
        if self.model.activation not in ACTIVATIONS or self.model.optimizer not in OPTIMIZERS:
            raise ConfigurationError("unknown activation or optimizer")
        self.model.hyper()
        if self.attack.per_side_cap < 1 or self.attack.matching not in ("class", "none"):
            raise ConfigurationError("attack.per_side_cap must be >= 1 and matching 'class' or 'none'")
        if self.attack.nonmembers not in ("all_test", "phase_test"):
            raise ConfigurationError("attack.nonmembers must be 'all_test' or 'phase_test'")
        return self

    def arch(self, input_dim: int, num_classes: int) -> ArchitectureSpec:
        return ArchitectureSpec(input_dim, tuple(self.model.hidden_dims), num_classes, self.model.activation)

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        """Hash of everything that affects results; the output location does not."""
        doc = self.to_dict()
        doc.pop("output_dir", None)
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_seed(self, seed: int) -> "ExperimentConfig":
        """Copy with every seed field set to ``seed``."""
        doc = self.to_dict()
        for section in doc.values():
            if isinstance(section, dict) and "seed" in section:
                section["seed"] = int(seed)
        return config_from_dict(doc)


def _build(cls, doc, where):
    if not isinstance(doc, dict):
        raise ConfigurationError(f"{where}: expected a table, got {type(doc).__name__}")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(doc) - set(known))
    if unknown:
        raise ConfigurationError(f"{where}: unknown keys {unknown}")
    kwargs = {}
    for name, value in doc.items():
        sub = _SECTIONS.get(name) if cls is ExperimentConfig else None
        kwargs[name] = _build(sub, value, f"{where}.{name}") if sub else value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigurationError(f"{where}: {exc}") from None


_SECTIONS = {
    "dataset": DatasetConfig,
    "partition": PartitionConfig,
    "schedule": ScheduleConfig,
    "federation": FederationSettings,
    "model": ModelConfig,
    "attack": AttackConfig,
}


def config_from_dict(doc: Dict[str, Any]) -> ExperimentConfig:
    return _build(ExperimentConfig, doc, "config").validate()


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    try:
        doc = tomllib.loads(text) if path.suffix.lower() == ".toml" else json.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigurationError(f"cannot parse config {path}: {exc}") from None
    return config_from_dict(doc)
