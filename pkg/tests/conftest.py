import random

import pytest

from padbench.registry import DatasetInfo, Registry, Sample
from padbench.taxonomy import (
    CaptureDeviceCategory,
    DeviceKind,
    DeviceQuality,
    FaceResolution,
    Label,
    Lighting,
    PaiCategory,
    PaiKind,
)

PAI_CHOICES = [
    PaiCategory(PaiKind.NONE),
    *(PaiCategory(PaiKind.PRINT, t) for t in ("low", "medium", "high")),
    *(PaiCategory(PaiKind.REPLAY, t) for t in ("low", "medium", "high")),
    *(PaiCategory(PaiKind.MASK, t) for t in ("paper", "rigid", "silicone")),
]


def make_sample(sample_id, dataset_id="ds", subject_id="s0", pai=PaiCategory(PaiKind.NONE),
                device=CaptureDeviceCategory(DeviceKind.WEBCAM, DeviceQuality.HIGH),
                lighting=Lighting.CONTROLLED, face_resolution=FaceResolution.MEDIUM, subset="train"):
    return Sample(
        sample_id=sample_id,
        dataset_id=dataset_id,
        subject_id=subject_id,
        label=Label.ATTACK if pai.is_attack else Label.BONA_FIDE,
        pai=pai,
        device=device,
        lighting=lighting,
        face_resolution=face_resolution,
        frame_refs=("f0.png",),
        eye_landmarks=(None,),
        subset=subset,
    )


def random_registry(seed: int, n_samples: int, n_datasets: int = 4, n_subjects: int = 20) -> Registry:
    """Random registry with identity-disjoint subsets; half the samples bona fide."""
    rng = random.Random(seed)
    datasets = [f"ds{k}" for k in range(n_datasets)]
    subject_subset = {}
    samples = {}
    devices = [CaptureDeviceCategory(k, q) for k in DeviceKind for q in DeviceQuality]
    resolutions = [*FaceResolution, None]
    for i in range(n_samples):
        ds = rng.choice(datasets)
        subj = f"{ds}_s{rng.randrange(n_subjects)}"
        subset = subject_subset.setdefault((ds, subj), rng.choice(["train", "dev", "test"]))
        pai = PAI_CHOICES[0] if rng.random() < 0.5 else rng.choice(PAI_CHOICES[1:])
        sid = f"smp{i:06d}"
        samples[sid] = make_sample(
            sid, ds, subj, pai, rng.choice(devices), rng.choice(list(Lighting)), rng.choice(resolutions), subset
        )
    infos = {d: DatasetInfo(d, d, None, "predefined") for d in datasets}
    return Registry(samples, infos)


@pytest.fixture
def small_registry():
    return random_registry(7, 400)


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record and print one PASS/FAIL line for an acceptance criterion."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def record(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
