"""Manifest ingestion into an aggregated, categorized sample registry.

A manifest is one JSON file per dataset. It is either a bare array of records
(the dataset id is then the file stem) or an object::

    {"dataset_id": "casia-fasd", "name": "CASIA-FASD", "year": 2012,
     "split_policy": "train_dev", "records": [...]}

Each record carries ``sample_id, subject_id, label, pai_kind, pai_subtype,
device_kind, device_quality, lighting, subset?, frames, eyes`` and optionally
``bboxes`` (``[x, y, w, h]`` per frame), ``pai_dpi`` or ``pai_screen_res``
(raw metadata from which the PAI subtype is derived).

Split policies:

``predefined``
    every record names its subset.
``train_dev``
    records name their *original* subset (``train`` or ``test``); original
    train subjects are re-split 80/20 into train/dev, test is kept as is.
``three_way``
    no subsets given; subjects are split 40/30/30.
"""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import InvalidMetadataError, ManifestError, MissingAnnotationError, SplitError
from .taxonomy import (
    CaptureDeviceCategory,
    DeviceKind,
    DeviceQuality,
    FaceResolution,
    Label,
    Lighting,
    PaiCategory,
    PaiKind,
    categorize_face_resolution,
    categorize_print,
    categorize_replay,
    parse_enum,
    parse_lighting,
)

logger = logging.getLogger(__name__)

SUBSETS = ("train", "dev", "test")
SPLIT_POLICIES = ("predefined", "train_dev", "three_way")

EyePair = tuple[float, float, float, float]
BBox = tuple[float, float, float, float]


@dataclass(frozen=True)
class Sample:
    sample_id: str
    dataset_id: str
    subject_id: str
    label: Label
    pai: PaiCategory
    device: CaptureDeviceCategory
    lighting: Lighting
    face_resolution: Optional[FaceResolution]
    frame_refs: tuple[str, ...]
    eye_landmarks: tuple[Optional[EyePair], ...]
    subset: str
    bboxes: tuple[Optional[BBox], ...] = ()
    mean_iod: Optional[float] = None

    @property
    def is_attack(self) -> bool:
        return self.label is Label.ATTACK

    def to_record(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "dataset_id": self.dataset_id,
            "subject_id": self.subject_id,
            "label": self.label.value,
            "pai": str(self.pai),
            "device": str(self.device),
            "lighting": self.lighting.value,
            "face_resolution": None if self.face_resolution is None else self.face_resolution.value,
            "mean_iod": self.mean_iod,
            "subset": self.subset,
            "frames": list(self.frame_refs),
        }


@dataclass(frozen=True)
class DatasetInfo:
    dataset_id: str
    name: str
    year: Optional[int]
    split_policy: str
    source: str = ""


@dataclass
class Registry:
    samples: dict[str, Sample] = field(default_factory=dict)
    datasets: dict[str, DatasetInfo] = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples[k] for k in sorted(self.samples))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Registry):
            return NotImplemented
        return set(self.samples.values()) == set(other.samples.values()) and self.datasets == other.datasets

    def validate(self) -> None:
        for sid, s in self.samples.items():
            if sid != s.sample_id:
                raise ManifestError(f"registry key {sid!r} does not match sample id {s.sample_id!r}")
            if s.dataset_id not in self.datasets:
                raise ManifestError(f"sample {sid!r} references unknown dataset {s.dataset_id!r}")
        check_identity_disjoint(self.samples.values())

    def merge(self, other: "Registry") -> "Registry":
        clash = self.samples.keys() & other.samples.keys()
        if clash:
            raise ManifestError(f"duplicate sample ids across manifests: {sorted(clash)[:5]}")
        ds_clash = self.datasets.keys() & other.datasets.keys()
        if ds_clash:
            raise ManifestError(f"dataset ids loaded twice: {sorted(ds_clash)}")
        return Registry({**self.samples, **other.samples}, {**self.datasets, **other.datasets})

    def dataset_ids(self) -> list[str]:
        return sorted(self.datasets)

    def to_json(self) -> dict:
        return {
            "datasets": [vars(self.datasets[d]) for d in self.dataset_ids()],
            "samples": [s.to_record() for s in self],
        }


def check_identity_disjoint(samples: Iterable[Sample]) -> None:
    seen: dict[tuple[str, str], str] = {}
    for s in samples:
        key = (s.dataset_id, s.subject_id)
        prev = seen.setdefault(key, s.subset)
        if prev != s.subset:
            raise SplitError(
                f"subject {s.subject_id!r} of dataset {s.dataset_id!r} appears in both {prev!r} and {s.subset!r}"
            )


def _round_half_up(numerator: int, n: int, denominator: int = 10) -> int:
    # floor(numerator/denominator * n + 0.5) in exact integer arithmetic
    return (2 * numerator * n + denominator) // (2 * denominator)


def _shuffled(subjects: Iterable[str], seed: int) -> list[str]:
    order = sorted(set(subjects))
    random.Random(seed).shuffle(order)
    return order


def split_train_dev(subjects: Iterable[str], seed: int) -> tuple[frozenset, frozenset]:
    """Split subject ids 80/20 into (train, dev) by a seeded shuffle.

    ``|train| = floor(0.8 N + 0.5)``, clamped so that both parts keep at
    least one subject (2 subjects give 1/1).
    """
    order = _shuffled(subjects, seed)
    n = len(order)
    if n < 2:
        raise SplitError(f"train/dev split needs at least 2 subjects, got {n}")
    n_train = min(max(_round_half_up(8, n), 1), n - 1)
    return frozenset(order[:n_train]), frozenset(order[n_train:])


def split_three_way(subjects: Iterable[str], seed: int) -> tuple[frozenset, frozenset, frozenset]:
    """Split subject ids 40/30/30 into (train, dev, test).

    Train and dev sizes are ``floor(ratio N + 0.5)``; test takes the rest.
    """
    order = _shuffled(subjects, seed)
    n = len(order)
    if n < 3:
        raise SplitError(f"three-way split needs at least 3 subjects, got {n}")
    n_train = max(_round_half_up(4, n), 1)
    n_dev = max(_round_half_up(3, n), 1)
    if n_train + n_dev >= n:
        n_dev = n - n_train - 1
    return (
        frozenset(order[:n_train]),
        frozenset(order[n_train:n_train + n_dev]),
        frozenset(order[n_train + n_dev:]),
    )


def mean_iod(landmarks: Sequence[Optional[Sequence[float]]]) -> float:
    """Mean Euclidean eye distance over frames that have both eyes annotated."""
    rows = [lm for lm in landmarks if lm is not None]
    if not rows:
        raise MissingAnnotationError("no frame has eye landmarks")
    arr = np.asarray(rows, dtype=np.float64).reshape(-1, 4)
    dists = np.hypot(arr[:, 2] - arr[:, 0], arr[:, 3] - arr[:, 1])
    return float(dists.mean())


def _field(rec: Mapping, name: str, where: str, required: bool = True):
    if name not in rec or rec[name] is None:
        if required:
            raise ManifestError(f"{where}: missing field {name!r}")
        return None
    return rec[name]


def _quad_list(values, n_frames: int, name: str, where: str):
    if values is None:
        return (None,) * n_frames
    if not isinstance(values, list) or len(values) != n_frames:
        raise ManifestError(f"{where}: field {name!r} must list one entry per frame ({n_frames})")
    out = []
    for i, v in enumerate(values):
        if v is None:
            out.append(None)
            continue
        if not isinstance(v, (list, tuple)) or len(v) != 4:
            raise ManifestError(f"{where}: field {name!r}[{i}] must be 4 numbers or null")
        try:
            quad = tuple(float(x) for x in v)
        except (TypeError, ValueError):
            raise ManifestError(f"{where}: field {name!r}[{i}] is not numeric") from None
        if not all(math.isfinite(x) for x in quad):
            raise ManifestError(f"{where}: field {name!r}[{i}] is not finite")
        out.append(quad)
    return tuple(out)


def _parse_pai(rec: Mapping, label: Label, where: str) -> PaiCategory:
    kind = parse_enum(PaiKind, rec.get("pai_kind", "none"), "pai_kind")
    subtype = rec.get("pai_subtype")
    if subtype is None and kind is PaiKind.PRINT and rec.get("pai_dpi") is not None:
        subtype = categorize_print(rec["pai_dpi"]).value
    if subtype is None and kind is PaiKind.REPLAY and rec.get("pai_screen_res") is not None:
        subtype = categorize_replay(rec["pai_screen_res"]).value
    pai = PaiCategory(kind, subtype)
    if (label is Label.BONA_FIDE) != (kind is PaiKind.NONE):
        raise InvalidMetadataError(f"{where}: label {label.value!r} inconsistent with pai {str(pai)!r}")
    return pai


def _parse_record(rec: Mapping, dataset_id: str, where: str) -> dict:
    if not isinstance(rec, Mapping):
        raise ManifestError(f"{where}: record must be an object")
    try:
        label = parse_enum(Label, _field(rec, "label", where), "label")
        pai = _parse_pai(rec, label, where)
        device = CaptureDeviceCategory(
            parse_enum(DeviceKind, _field(rec, "device_kind", where), "device_kind"),
            parse_enum(DeviceQuality, _field(rec, "device_quality", where), "device_quality"),
        )
        lighting = parse_lighting(rec.get("lighting"))
    except InvalidMetadataError as exc:
        if str(exc).startswith(where):
            raise
        raise InvalidMetadataError(f"{where}: {exc}") from None
    frames = _field(rec, "frames", where)
    if not isinstance(frames, list) or not all(isinstance(f, str) for f in frames):
        raise ManifestError(f"{where}: field 'frames' must be a list of paths")
    eyes = _quad_list(rec.get("eyes"), len(frames), "eyes", where)
    bboxes = _quad_list(rec.get("bboxes"), len(frames), "bboxes", where)
    subset = rec.get("subset")
    if subset is not None and subset not in SUBSETS:
        raise ManifestError(f"{where}: field 'subset' must be one of {SUBSETS}, got {subset!r}")
    iod = None
    resolution = None
    if any(e is not None for e in eyes):
        iod = mean_iod(eyes)
        resolution = categorize_face_resolution(iod)
    else:
        logger.debug("%s: no eye landmarks, face resolution missing", where)
    return dict(
        sample_id=str(_field(rec, "sample_id", where)),
        dataset_id=dataset_id,
        subject_id=str(_field(rec, "subject_id", where)),
        label=label,
        pai=pai,
        device=device,
        lighting=lighting,
        face_resolution=resolution,
        frame_refs=tuple(frames),
        eye_landmarks=eyes,
        bboxes=bboxes,
        mean_iod=iod,
        subset=subset,
    )


def _assign_subsets(rows: list[dict], policy: str, seed: int, source: str) -> None:
    if policy == "predefined":
        missing = [r["sample_id"] for r in rows if r["subset"] is None]
        if missing:
            raise ManifestError(f"{source}: predefined split but records lack 'subset': {missing[:5]}")
    elif policy == "train_dev":
        bad = [r["sample_id"] for r in rows if r["subset"] not in ("train", "test")]
        if bad:
            raise ManifestError(f"{source}: train_dev policy needs original subset train/test: {bad[:5]}")
        train, _ = split_train_dev({r["subject_id"] for r in rows if r["subset"] == "train"}, seed)
        for r in rows:
            if r["subset"] == "train":
                r["subset"] = "train" if r["subject_id"] in train else "dev"
    elif policy == "three_way":
        train, dev, _ = split_three_way({r["subject_id"] for r in rows}, seed)
        for r in rows:
            r["subset"] = "train" if r["subject_id"] in train else "dev" if r["subject_id"] in dev else "test"
    else:
        raise ManifestError(f"{source}: unknown split_policy {policy!r} (allowed: {SPLIT_POLICIES})")


def parse_manifest(doc, dataset_id: str, seed: int = 0, source: str = "<manifest>") -> Registry:
    """Build a registry fragment from an already-decoded manifest document."""
    header: Mapping = {}
    if isinstance(doc, Mapping):
        header = doc
        records = doc.get("records")
        dataset_id = str(doc.get("dataset_id", dataset_id))
    else:
        records = doc
    if not isinstance(records, list):
        raise ManifestError(f"{source}: manifest must be an array of records or an object with 'records'")
    rows = [_parse_record(rec, dataset_id, f"{source}: record {i}") for i, rec in enumerate(records)]
    policy = header.get("split_policy")
    if policy is None:
        policy = "predefined" if all(r["subset"] is not None for r in rows) else "three_way"
    _assign_subsets(rows, policy, int(header.get("seed", seed)), source)
    samples: dict[str, Sample] = {}
    for r in rows:
        if r["sample_id"] in samples:
            raise ManifestError(f"{source}: duplicate sample_id {r['sample_id']!r}")
        samples[r["sample_id"]] = Sample(**r)
    info = DatasetInfo(
        dataset_id=dataset_id,
        name=str(header.get("name", dataset_id)),
        year=header.get("year"),
        split_policy=policy,
        source=Path(source).name,
    )
    return Registry(samples, {dataset_id: info})


def load_manifest(path, seed: int = 0) -> Registry:
    """Load one dataset manifest file into a registry fragment."""
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: invalid JSON: {exc}") from None
    return parse_manifest(doc, path.stem, seed=seed, source=str(path))


def load_registry(paths: Iterable, seed: int = 0) -> Registry:
    """Load and merge several manifests; fails on duplicate ids."""
    registry = Registry()
    for p in paths:
        registry = registry.merge(load_manifest(p, seed=seed))
    return registry
