"""Pipeline configuration: YAML file plus command-line overrides."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .gateway import BackendConfig
from .planner.params import PlannerParams
from .translate import DEFAULT_STOP_THRESHOLD


class ConfigError(Exception):
    """The pipeline configuration is invalid."""


@dataclass(frozen=True)
class SplitSpec:
    train: int
    val: int
    test: int = 0

    def total(self) -> int:
        return self.train + self.val + self.test


@dataclass(frozen=True)
class PipelineConfig:
    map_path: str
    backend: BackendConfig
    n_samples: int
    split: SplitSpec
    paraphrases: int = 0
    planner: PlannerParams = field(default_factory=PlannerParams)
    stop_threshold: float = DEFAULT_STOP_THRESHOLD
    seed: int = 0
    out_dir: str = "out"
    paraphrase_backend: BackendConfig | None = None
    workers: int = 4

    def __post_init__(self) -> None:
        if self.n_samples < 1:
            raise ConfigError("n_samples must be >= 1")
        if self.paraphrases < 0:
            raise ConfigError("paraphrases must be >= 0")
        if self.split.total() != self.n_samples:
            raise ConfigError(
                f"split counts {self.split.total()} do not sum to n_samples {self.n_samples}"
            )
        if self.stop_threshold <= 0:
            raise ConfigError("stop_threshold must be positive")

    def to_dict(self) -> dict[str, Any]:
        backend = {k: v for k, v in vars(self.backend).items() if v is not None}
        doc: dict[str, Any] = {
            "map_path": self.map_path,
            "backend": backend,
            "n_samples": self.n_samples,
            "split": {"train": self.split.train, "val": self.split.val, "test": self.split.test},
            "paraphrases": self.paraphrases,
            "planner": self.planner.to_dict(),
            "stop_threshold": self.stop_threshold,
            "seed": self.seed,
            "out_dir": self.out_dir,
            "workers": self.workers,
        }
        if self.paraphrase_backend is not None:
            doc["paraphrase_backend"] = {
                k: v for k, v in vars(self.paraphrase_backend).items() if v is not None
            }
        return doc

    def config_hash(self) -> str:
        """Stable digest of everything that affects the output bytes."""
        doc = self.to_dict()
        doc.pop("out_dir", None)
        doc.pop("workers", None)
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode("utf-8")).hexdigest()[:16]


def _split_from_doc(doc: Any, n_samples: int) -> SplitSpec:
    if isinstance(doc, Mapping):
        return SplitSpec(
            train=int(doc.get("train", 0)),
            val=int(doc.get("val", 0)),
            test=int(doc.get("test", 0)),
        )
    if isinstance(doc, (int, float)) and 0 < float(doc) <= 1:
        train = round(n_samples * float(doc))
        return SplitSpec(train=train, val=n_samples - train)
    raise ConfigError("split must be {train, val[, test]} counts or a train fraction")


def _backend_from_doc(doc: Mapping[str, Any]) -> BackendConfig:
    try:
        return BackendConfig(**doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid backend config: {exc}") from None


def load_config(path: str | Path, overrides: Mapping[str, Any] | None = None) -> PipelineConfig:
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh) or {}
    if overrides:
        doc.update({k: v for k, v in overrides.items() if v is not None})
    return config_from_dict(doc)


def config_from_dict(doc: Mapping[str, Any]) -> PipelineConfig:
    try:
        n_samples = int(doc["n_samples"])
        map_path = str(doc["map_path"])
        backend = _backend_from_doc(doc["backend"])
    except KeyError as exc:
        raise ConfigError(f"missing config field {exc}") from None
    split = _split_from_doc(doc.get("split", 0.8), n_samples)
    planner_doc = doc.get("planner", {})
    try:
        planner = PlannerParams.from_dict(planner_doc) if planner_doc else PlannerParams()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid planner params: {exc}") from None
    paraphrase_backend = None
    if doc.get("paraphrase_backend"):
        paraphrase_backend = _backend_from_doc(doc["paraphrase_backend"])
    return PipelineConfig(
        map_path=map_path,
        backend=backend,
        n_samples=n_samples,
        split=split,
        paraphrases=int(doc.get("paraphrases", 0)),
        planner=planner,
        stop_threshold=float(doc.get("stop_threshold", DEFAULT_STOP_THRESHOLD)),
        seed=int(doc.get("seed", 0)),
        out_dir=str(doc.get("out_dir", "out")),
        paraphrase_backend=paraphrase_backend,
        workers=int(doc.get("workers", 4)),
    )
