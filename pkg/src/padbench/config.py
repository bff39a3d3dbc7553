"""Experiment configuration (JSON or YAML file, with CLI overrides)."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

from .errors import PadBenchError


@dataclass
class ClassifierConfig:
    C: float = 1.0
    gamma: Optional[float] = None  # None -> 1 / n_features
    tol: float = 1e-3
    max_iter: Optional[int] = None


@dataclass
class ExperimentConfig:
    manifests: list = field(default_factory=list)
    data_root: str = "."
    extractor: str = "color_lbp"
    extractor_params: dict = field(default_factory=dict)
    protocol: str = "grandtest"
    protocol_file: Optional[str] = None
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    seed: int = 0
    frame_stride: int = 1
    out: str = "runs"
    workers: int = 1
    cache_dir: Optional[str] = None

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise PadBenchError(f"unknown config keys: {sorted(unknown)}")
        doc = dict(doc)
        if isinstance(doc.get("classifier"), dict):
            doc["classifier"] = ClassifierConfig(**doc["classifier"])
        return cls(**doc)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        if not path.is_file():
            raise PadBenchError(f"config file not found: {path}")
        text = path.read_text()
        if path.suffix in (".yaml", ".yml"):
            import yaml

            doc = yaml.safe_load(text) or {}
        else:
            doc = json.loads(text)
        cfg = cls.from_dict(doc)
        # relative paths in a config file are relative to the file
        base = path.parent
        cfg.manifests = [str(base / m) if not Path(m).is_absolute() else m for m in cfg.manifests]
        if not Path(cfg.data_root).is_absolute():
            cfg.data_root = str(base / cfg.data_root)
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)

    def override(self, **values) -> "ExperimentConfig":
        for k, v in values.items():
            if v is not None:
                setattr(self, k, v)
        return self


def digest_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def experiment_hash(cfg: ExperimentConfig, protocol_doc: dict, extractor_hash: str) -> str:
    """Hash of everything that determines results: manifest contents, the
    extractor config, the resolved protocol, classifier settings and seed."""
    doc = {
        "manifests": sorted(digest_file(m) for m in cfg.manifests),
        "extractor": extractor_hash,
        "protocol": protocol_doc,
        "classifier": asdict(cfg.classifier),
        "seed": cfg.seed,
        "frame_stride": cfg.frame_stride,
    }
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()
