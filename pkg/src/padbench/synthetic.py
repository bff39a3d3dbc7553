"""Seeded synthetic PAD datasets: manifests plus frame images on disk.

Faces are designed at 64x64 and upsampled by an integer factor with
nearest-neighbour repetition, so the square bilinear crop used by the
feature stage recovers the design exactly. Class cues:

* bona fide: smooth low-frequency shading, fine skin texture, sensor noise
* print: multiplicative halftone dot grid (stronger for low dpi)
* replay: sinusoidal moire grating and a blue cast (stronger for low res)
* mask: no fine texture, damped noise, material tint

Eye landmarks are placed at exactly the requested interocular distance.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import ndimage

from .errors import PadBenchError
from .taxonomy import (
    CaptureDeviceCategory,
    DeviceKind,
    DeviceQuality,
    FaceResolution,
    Lighting,
    PaiCategory,
    PaiKind,
)

DESIGN = 64
EYE_SPAN = 0.7  # fraction of the face width the eyes may span
MARGIN = 16
DEFAULT_IOD = {"small": 88.0, "medium": 176.0, "large": 264.0}

ALL_ATTACK_PAIS = (
    "print/low", "print/medium", "print/high",
    "replay/low", "replay/medium", "replay/high",
    "mask/paper", "mask/rigid", "mask/silicone",
)


@dataclass(frozen=True)
class Cell:
    dataset_id: str
    pai: str  # "none" for bona fide
    device: str  # "kind/quality"
    lighting: str
    face_resolution: str
    count: int = 1


@dataclass
class SyntheticSpec:
    cells: list
    datasets: dict  # dataset_id -> split policy
    subjects_per_dataset: int = 12
    frames_per_video: int = 2
    seed: int = 0
    noise_sigma: dict = field(default_factory=lambda: {"high": 3.0, "low": 6.0})
    iod_targets: dict = field(default_factory=lambda: dict(DEFAULT_IOD))

    def validate(self) -> None:
        if not self.cells or all(c.count <= 0 for c in self.cells):
            raise PadBenchError("synthetic spec has no samples")
        live = [c for c in self.cells if c.count > 0]
        if not any(c.pai == "none" for c in live) or all(c.pai == "none" for c in live):
            raise PadBenchError("synthetic spec needs at least one bona fide and one attack cell")
        for c in live:
            if c.dataset_id not in self.datasets:
                raise PadBenchError(f"cell references undeclared dataset {c.dataset_id!r}")
            PaiCategory.parse(c.pai)
            CaptureDeviceCategory.parse(c.device)
            Lighting(c.lighting)
            FaceResolution(c.face_resolution)
        if self.subjects_per_dataset < 3:
            raise PadBenchError("need at least 3 subjects per dataset")


def default_spec(seed: int = 0, per_cell: int = 2, datasets: Optional[dict] = None) -> SyntheticSpec:
    """Balanced design: every (device, lighting, face size) combination gets
    ``per_cell`` bona fide and ``per_cell`` attack videos per dataset, with
    the nine attack subtypes cycled across combinations."""
    datasets = datasets or {"synth_a": "predefined", "synth_b": "train_dev", "synth_c": "three_way"}
    devices = [f"{k.value}/{q.value}" for k in DeviceKind for q in DeviceQuality]
    combos = list(itertools.product(devices, [l.value for l in Lighting], [f.value for f in FaceResolution]))
    cells = []
    for d_index, ds in enumerate(sorted(datasets)):
        for c_index, (dev, light, res) in enumerate(combos):
            cells.append(Cell(ds, "none", dev, light, res, per_cell))
            for rep in range(per_cell):
                pai = ALL_ATTACK_PAIS[(c_index * per_cell + rep + d_index) % len(ALL_ATTACK_PAIS)]
                cells.append(Cell(ds, pai, dev, light, res, 1))
    return SyntheticSpec(cells=cells, datasets=dict(datasets), seed=seed)


def _smooth_field(rng, sigma: float, amplitude: float) -> np.ndarray:
    f = ndimage.gaussian_filter(rng.standard_normal((DESIGN, DESIGN)), sigma, mode="wrap")
    f /= f.std() + 1e-12
    return amplitude * f


def _base_face(subject_rng) -> tuple[np.ndarray, np.ndarray]:
    tone = np.array([182.0, 134.0, 112.0]) + subject_rng.uniform(-18, 18, size=3)
    shading = _smooth_field(subject_rng, 9.0, 14.0)
    return tone, shading


def render_face(subject_seed, video_rng, pai: PaiCategory, device: CaptureDeviceCategory,
                lighting: Lighting, noise_sigma: dict) -> np.ndarray:
    """One 64x64 RGB uint8 design frame."""
    tone, shading = _base_face(np.random.default_rng(subject_seed))
    img = tone[None, None, :] + shading[:, :, None]
    yy, xx = np.mgrid[0:DESIGN, 0:DESIGN].astype(np.float64)
    sigma = noise_sigma[device.quality.value]
    kind = pai.kind
    if kind is not PaiKind.MASK:
        img = img + _smooth_field(video_rng, 0.8, 7.0)[:, :, None]
    if kind is PaiKind.PRINT:
        strength = {"low": 0.28, "medium": 0.22, "high": 0.16}[pai.subtype]
        dots = (np.cos(2 * math.pi * xx / 3.0) * np.cos(2 * math.pi * yy / 3.0) + 1.0) / 2.0
        img = img * (1.0 - strength * dots[:, :, None])
        img = img.mean(axis=2, keepdims=True) * 0.3 + img * 0.7
    elif kind is PaiKind.REPLAY:
        amp = {"low": 16.0, "medium": 12.0, "high": 9.0}[pai.subtype]
        theta = video_rng.uniform(0.2, 1.2)
        grating = np.sin(2 * math.pi * (xx * math.cos(theta) + yy * math.sin(theta)) / 2.6)
        img = img + amp * grating[:, :, None] + np.array([-6.0, 0.0, 10.0])
    elif kind is PaiKind.MASK:
        tint = {"paper": [-10.0, -5.0, 5.0], "rigid": [20.0, 22.0, 24.0], "silicone": [8.0, -14.0, -6.0]}
        img = ndimage.gaussian_filter(img, (2.0, 2.0, 0)) + np.array(tint[pai.subtype])
        sigma *= 0.35
    if lighting is Lighting.ADVERSE:
        img = img * (0.55 + 0.35 * xx / DESIGN)[:, :, None]
    elif lighting is Lighting.NO_INFO:
        img = img * 0.9
    img = img + video_rng.normal(0.0, sigma, size=img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def upsample_factor(iod: float) -> int:
    return max(1, math.ceil(iod / (EYE_SPAN * DESIGN)))


def place_in_frame(face: np.ndarray, factor: int, background: int) -> tuple[np.ndarray, tuple]:
    big = np.repeat(np.repeat(face, factor, axis=0), factor, axis=1)
    side = big.shape[0]
    frame = np.full((side + 2 * MARGIN, side + 2 * MARGIN, 3), background, dtype=np.uint8)
    frame[MARGIN:MARGIN + side, MARGIN:MARGIN + side] = big
    return frame, (MARGIN, MARGIN, side, side)


def eye_landmarks(bbox: tuple, iod: float) -> list[float]:
    x, y, w, h = bbox
    cx, ey = x + w / 2.0, y + 0.4 * h
    return [cx - iod / 2.0, ey, cx + iod / 2.0, ey]


def _subject_subsets(subjects: list[str], policy: str) -> dict:
    n = len(subjects)
    if policy == "predefined":
        n_train, n_dev = (4 * n + 5) // 10, (3 * n + 5) // 10
        return {s: "train" if i < n_train else "dev" if i < n_train + n_dev else "test" for i, s in enumerate(subjects)}
    if policy == "train_dev":
        n_train = (6 * n + 5) // 10
        return {s: "train" if i < n_train else "test" for i, s in enumerate(subjects)}
    return {}


def generate_synthetic(spec: SyntheticSpec, out_dir) -> list[Path]:
    """Write frames and one manifest per dataset under ``out_dir``.

    Returns the manifest paths (sorted by dataset id). Frame paths inside the
    manifests are relative to ``out_dir``.
    """
    from PIL import Image

    spec.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifests = []
    for d_index, ds in enumerate(sorted(spec.datasets)):
        policy = spec.datasets[ds]
        subjects = [f"{ds}_s{k:02d}" for k in range(spec.subjects_per_dataset)]
        subset_of = _subject_subsets(subjects, policy)
        records = []
        ds_cells = [c for c in spec.cells if c.dataset_id == ds]
        n_videos = sum(max(c.count, 0) for c in ds_cells)
        # seeded permutation keeps subjects balanced and uncorrelated with cell order
        subject_of = np.random.default_rng([spec.seed, d_index]).permutation(n_videos) % len(subjects)
        video = 0
        for cell in ds_cells:
            pai = PaiCategory.parse(cell.pai)
            device = CaptureDeviceCategory.parse(cell.device)
            lighting = Lighting(cell.lighting)
            iod = float(spec.iod_targets[cell.face_resolution])
            factor = upsample_factor(iod)
            for _ in range(cell.count):
                subject_idx = int(subject_of[video])
                subject = subjects[subject_idx]
                sample_id = f"{ds}_v{video:04d}"
                rng = np.random.default_rng([spec.seed, d_index, video])
                background = int(rng.integers(30, 90))
                frames, eyes, boxes = [], [], []
                for f in range(spec.frames_per_video):
                    face = render_face([spec.seed, d_index, subject_idx], rng, pai, device, lighting, spec.noise_sigma)
                    frame, bbox = place_in_frame(face, factor, background)
                    rel = Path(ds) / sample_id / f"f{f:02d}.png"
                    (out_dir / rel).parent.mkdir(parents=True, exist_ok=True)
                    Image.fromarray(frame).save(out_dir / rel, compress_level=1)
                    frames.append(rel.as_posix())
                    eyes.append(eye_landmarks(bbox, iod))
                    boxes.append(list(bbox))
                rec = {
                    "sample_id": sample_id,
                    "subject_id": subject,
                    "label": "bona_fide" if not pai.is_attack else "attack",
                    "pai_kind": pai.kind.value,
                    "pai_subtype": pai.subtype,
                    "device_kind": device.kind.value,
                    "device_quality": device.quality.value,
                    "lighting": lighting.value,
                    "frames": frames,
                    "eyes": eyes,
                    "bboxes": boxes,
                }
                if subject in subset_of:
                    rec["subset"] = subset_of[subject]
                records.append(rec)
                video += 1
        doc = {"dataset_id": ds, "name": ds, "year": None, "split_policy": policy, "seed": spec.seed,
               "records": records}
        path = out_dir / f"{ds}.json"
        path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
        manifests.append(path)
    return manifests


def spec_to_json(spec: SyntheticSpec) -> dict:
    return {
        "cells": [vars(c) for c in spec.cells],
        "datasets": spec.datasets,
        "subjects_per_dataset": spec.subjects_per_dataset,
        "frames_per_video": spec.frames_per_video,
        "seed": spec.seed,
        "noise_sigma": spec.noise_sigma,
        "iod_targets": spec.iod_targets,
    }


def spec_from_json(doc: dict) -> SyntheticSpec:
    cells = [Cell(**c) for c in doc["cells"]]
    extra = {k: doc[k] for k in ("subjects_per_dataset", "frames_per_video", "seed", "noise_sigma", "iod_targets")
             if k in doc}
    return SyntheticSpec(cells=cells, datasets=dict(doc["datasets"]), **extra)
