"""Pipeline orchestration: ingest -> extract (cached) -> filter -> train ->
threshold on dev -> test metrics -> persisted report.

Each protocol run writes ``model.bin``, ``scores.csv``, ``det.csv``,
``report.json`` and ``report.txt`` into ``<out>/<protocol>/``.
"""

from __future__ import annotations

import csv
import logging
import re
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import classifier, metrics
from .config import ExperimentConfig, experiment_hash
from .features import FeatureCache, config_hash, crop_face, load_frame, make_config, video_feature
from .protocols import ProtocolSpec, apply_protocol, build_protocol, family_members, load_protocol_config
from .registry import Registry, Sample, load_registry
from .report import EvaluationReport, format_detail, format_table

logger = logging.getLogger(__name__)


def sample_crops(sample: Sample, data_root, stride: int = 1) -> list:
    crops = []
    for k in range(0, len(sample.frame_refs), stride):
        frame = load_frame(Path(data_root) / sample.frame_refs[k])
        bbox = sample.bboxes[k] if k < len(sample.bboxes) else None
        crops.append(crop_face(frame, bbox))
    return crops


def _extract_one(args) -> np.ndarray:
    sample, data_root, stride, cfg = args
    return video_feature(sample_crops(sample, data_root, stride), cfg).astype(np.float32)


def extract_features(samples, data_root, ext_cfg, cache: Optional[FeatureCache], stride: int = 1,
                     workers: int = 1) -> dict:
    """Feature vector per sample id, read from or written to the cache.

    Vectors are stored as float32 either way, so cached and fresh runs agree
    bit for bit.
    """
    samples = sorted(samples, key=lambda s: s.sample_id)
    h = config_hash(ext_cfg)
    out: dict[str, np.ndarray] = {}
    todo = []
    for s in samples:
        hit = None if cache is None else cache.get(s.dataset_id, s.sample_id, ext_cfg.extractor_id, h)
        if hit is None:
            todo.append(s)
        else:
            out[s.sample_id] = hit
    if todo:
        logger.info("extracting %s features for %d videos (%d cached)", ext_cfg.extractor_id, len(todo), len(out))
        jobs = [(s, str(data_root), stride, ext_cfg) for s in todo]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                vectors = list(pool.map(_extract_one, jobs, chunksize=8))
        else:
            vectors = [_extract_one(j) for j in jobs]
        for s, vec in zip(todo, vectors):
            out[s.sample_id] = vec
            if cache is not None:
                cache.put(s.dataset_id, s.sample_id, ext_cfg.extractor_id, h, vec)
    return {k: out[k].astype(np.float64) for k in sorted(out)}


def _score_set(samples, scores) -> metrics.ScoreSet:
    return metrics.ScoreSet([
        metrics.ScoreEntry(s.sample_id, float(v), not s.is_attack, s.pai.kind.value if s.is_attack else None)
        for s, v in zip(samples, scores)
    ])


def safe_name(protocol: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", protocol)


@dataclass
class Context:
    """Everything shared by the protocol runs of one experiment."""

    cfg: ExperimentConfig
    registry: Registry
    ext_cfg: object
    features: dict


def prepare(cfg: ExperimentConfig) -> Context:
    registry = load_registry(cfg.manifests, seed=cfg.seed)
    ext_cfg = make_config(cfg.extractor, cfg.extractor_params)
    cache = FeatureCache(cfg.cache_dir)
    feats = extract_features(registry.samples.values(), cfg.data_root, ext_cfg, cache, cfg.frame_stride, cfg.workers)
    return Context(cfg, registry, ext_cfg, feats)


def evaluate_protocol(ctx: Context, spec: ProtocolSpec, out_dir: Optional[Path] = None) -> EvaluationReport:
    cfg = ctx.cfg
    split = apply_protocol(ctx.registry, spec)
    report = EvaluationReport(
        protocol=spec.name,
        extractor=ctx.ext_cfg.extractor_id,
        config_hash=experiment_hash(cfg, spec.to_json(), config_hash(ctx.ext_cfg)),
        cardinalities=split.cardinalities(),
        warnings=list(split.warnings),
    )
    counts = split.cardinalities()

    def matrix(items):
        return np.stack([ctx.features[s.sample_id] for s in items]) if items else np.zeros((0, 1))

    run_dir = None
    if out_dir is not None:
        run_dir = Path(out_dir) / safe_name(spec.name)
        run_dir.mkdir(parents=True, exist_ok=True)

    if counts["train"]["bona_fide"] == 0 or counts["train"]["attack"] == 0:
        report.warnings.append(f"{spec.name}: cannot train without both classes; no metrics")
        return _finish(report, run_dir)
    cc = cfg.classifier
    model = classifier.train(
        matrix(split.train), [not s.is_attack for s in split.train], C=cc.C, gamma=cc.gamma, tol=cc.tol,
        max_iter=cc.max_iter,
    )
    dev_scores = model.decision_function(matrix(split.dev)) if split.dev else np.zeros(0)
    test_scores = model.decision_function(matrix(split.test)) if split.test else np.zeros(0)
    dev_set = _score_set(split.dev, dev_scores)
    test_set = _score_set(split.test, test_scores)
    if run_dir is not None:
        model.save(run_dir / "model.bin")
        _write_scores(run_dir / "scores.csv", [("dev", split.dev, dev_scores), ("test", split.test, test_scores)])

    if counts["dev"]["bona_fide"] == 0 or counts["dev"]["attack"] == 0:
        report.warnings.append(f"{spec.name}: no EER threshold without both classes in dev; no metrics")
        return _finish(report, run_dir)
    threshold, eer = metrics.eer_threshold(dev_set)
    report.threshold, report.dev_eer = threshold, eer
    if run_dir is not None:
        _write_det(run_dir / "det.csv", metrics.det_points(dev_set))
    if counts["test"]["bona_fide"] == 0:
        report.warnings.append(f"{spec.name}: test subset has no bona fide; no metrics")
        return _finish(report, run_dir)
    report.test = metrics.test_metrics(test_set, threshold)
    return _finish(report, run_dir)


def _finish(report: EvaluationReport, run_dir: Optional[Path]) -> EvaluationReport:
    for w in report.warnings:
        logger.warning(w)
    if run_dir is not None:
        report.save(run_dir / "report.json")
        (run_dir / "report.txt").write_text(format_detail(report))
    return report


def _write_scores(path, groups) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["subset", "sample_id", "label", "pai", "score"])
        for subset, items, scores in groups:
            for s, v in zip(items, scores):
                w.writerow([subset, s.sample_id, s.label.value, str(s.pai), repr(float(v))])


def _write_det(path, points) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["threshold", "far", "frr"])
        for t, far, frr in points:
            w.writerow([repr(t), repr(far), repr(frr)])


def resolve_protocol(cfg: ExperimentConfig, registry: Registry) -> ProtocolSpec:
    if cfg.protocol_file:
        return load_protocol_config(cfg.protocol_file, registry)
    return build_protocol(cfg.protocol, registry)


def run_experiment(cfg: ExperimentConfig, ctx: Optional[Context] = None) -> EvaluationReport:
    """Run one protocol end to end and persist its artifacts under ``cfg.out``."""
    ctx = ctx or prepare(cfg)
    return evaluate_protocol(ctx, resolve_protocol(cfg, ctx.registry), Path(cfg.out))


def run_protocol_sweep(cfg: ExperimentConfig, family: str, ctx: Optional[Context] = None) -> list:
    """One report per family member present in the registry."""
    ctx = ctx or prepare(cfg)
    specs = [build_protocol(ref, ctx.registry) for ref in family_members(family, ctx.registry)]
    out = Path(cfg.out)
    if cfg.workers > 1 and len(specs) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            reports = list(pool.map(lambda s: evaluate_protocol(ctx, s, out), specs))
    else:
        reports = [evaluate_protocol(ctx, s, out) for s in specs]
    out.mkdir(parents=True, exist_ok=True)
    (out / f"sweep_{family}.txt").write_text(format_table(reports))
    return reports

