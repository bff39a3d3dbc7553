import json

import numpy as np
import pytest

from padbench import cli, runner
from padbench.config import ExperimentConfig
from padbench.errors import PadBenchError
from padbench.registry import load_registry
from padbench.report import EvaluationReport
from padbench.synthetic import (
    Cell,
    SyntheticSpec,
    default_spec,
    generate_synthetic,
    spec_from_json,
    spec_to_json,
    upsample_factor,
)
from padbench.taxonomy import FaceResolution, categorize_face_resolution

ATTACKS = ["print/low", "replay/high", "mask/rigid"]


def small_spec(seed=0, datasets=("tiny_a", "tiny_b")):
    cells = []
    for ds in datasets:
        for res in ("small", "large"):
            for light in ("controlled", "adverse"):
                cells.append(Cell(ds, "none", "mobile_tablet/high", light, res, 3))
                for pai in ATTACKS:
                    cells.append(Cell(ds, pai, "webcam/low", light, res, 2))
    return SyntheticSpec(cells=cells, datasets={ds: "three_way" for ds in datasets}, subjects_per_dataset=10,
                         frames_per_video=1, seed=seed)


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("synth")
    manifests = generate_synthetic(small_spec(), root)
    return root, manifests


def make_cfg(synth_dir, tmp_path, **kw):
    root, manifests = synth_dir
    cfg = ExperimentConfig(manifests=[str(m) for m in manifests], data_root=str(root), out=str(tmp_path / "out"),
                           cache_dir=str(tmp_path / "cache"))
    return cfg.override(**kw)


class TestSynthetic:
    @pytest.mark.parametrize("iod,expected", [(88, "small"), (100, "small"), (176, "medium"), (264, "large")])
    def test_iod_targets_categorize(self, tmp_path, iod, expected):
        spec = small_spec(datasets=("d",))
        spec.iod_targets = {"small": iod, "large": iod}
        generate_synthetic(spec, tmp_path)
        reg = load_registry([tmp_path / "d.json"])
        assert {s.face_resolution for s in reg} == {FaceResolution(expected)}
        assert categorize_face_resolution(iod) is FaceResolution(expected)

    def test_upsample_covers_iod(self):
        for iod in (1, 44.8, 88, 176, 264, 500):
            assert upsample_factor(iod) * 64 * 0.7 >= iod

    def test_same_seed_identical_files(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        ma = generate_synthetic(small_spec(seed=3, datasets=("d",)), a)
        generate_synthetic(small_spec(seed=3, datasets=("d",)), b)
        files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
        assert len(files) > 1
        for rel in files:
            assert (a / rel).read_bytes() == (b / rel).read_bytes()
        assert ma[0].name == "d.json"

    def test_different_seed_differs(self, tmp_path):
        generate_synthetic(small_spec(seed=1, datasets=("d",)), tmp_path / "a")
        generate_synthetic(small_spec(seed=2, datasets=("d",)), tmp_path / "b")
        assert (tmp_path / "a/d.json").read_bytes() != (tmp_path / "b/d.json").read_bytes()

    def test_cell_counts_survive_reload(self, synth_dir):
        root, manifests = synth_dir
        reg = load_registry(manifests)
        spec = small_spec()
        for cell in spec.cells:
            got = [s for s in reg if s.dataset_id == cell.dataset_id and str(s.pai) == cell.pai
                   and str(s.device) == cell.device and s.lighting.value == cell.lighting
                   and s.face_resolution.value == cell.face_resolution]
            assert len(got) == cell.count

    def test_default_design_size(self):
        spec = default_spec()
        assert sum(c.count for c in spec.cells) == 648
        attacks = {c.pai for c in spec.cells if c.pai != "none"}
        assert len(attacks) == 9

    def test_spec_json_round_trip(self):
        spec = small_spec()
        assert spec_from_json(json.loads(json.dumps(spec_to_json(spec)))) == spec

    @pytest.mark.parametrize("mutate", [
        lambda s: setattr(s, "cells", []),
        lambda s: setattr(s, "cells", [c for c in s.cells if c.pai == "none"]),
        lambda s: setattr(s, "cells", [c for c in s.cells if c.pai != "none"]),
        lambda s: setattr(s, "datasets", {}),
        lambda s: setattr(s, "subjects_per_dataset", 2),
        lambda s: s.cells.append(Cell("tiny_a", "print/ultra", "mobile_tablet/high", "controlled", "small", 1)),
    ])
    def test_invalid_spec(self, mutate):
        spec = small_spec()
        mutate(spec)
        with pytest.raises((PadBenchError, ValueError)):
            spec.validate()


class TestRunner:
    def test_grandtest_report(self, synth_dir, tmp_path):
        report = runner.run_experiment(make_cfg(synth_dir, tmp_path))
        assert not report.degenerate and report.test is not None
        assert report.identities_hold()
        run_dir = tmp_path / "out" / "grandtest"
        for name in ("model.bin", "scores.csv", "det.csv", "report.json", "report.txt"):
            assert (run_dir / name).is_file()
        assert EvaluationReport.load(run_dir / "report.json") == report

    def test_deterministic(self, synth_dir, tmp_path):
        r1 = runner.run_experiment(make_cfg(synth_dir, tmp_path / "one"))
        r2 = runner.run_experiment(make_cfg(synth_dir, tmp_path / "two"))
        assert (tmp_path / "one/out/grandtest/report.json").read_bytes() == \
            (tmp_path / "two/out/grandtest/report.json").read_bytes()
        assert r1 == r2

    def test_cache_reuse_matches_fresh(self, synth_dir, tmp_path):
        cfg = make_cfg(synth_dir, tmp_path)
        fresh = runner.prepare(cfg).features
        cached = runner.prepare(cfg).features
        assert fresh.keys() == cached.keys()
        assert all(np.array_equal(fresh[k], cached[k]) for k in fresh)

    def test_missing_manifest_names_path(self, synth_dir, tmp_path):
        cfg = make_cfg(synth_dir, tmp_path)
        cfg.manifests.append(str(tmp_path / "nowhere.json"))
        with pytest.raises(PadBenchError, match="nowhere.json"):
            runner.run_experiment(cfg)

    def test_sweep_equals_individual_runs(self, synth_dir, tmp_path):
        cfg = make_cfg(synth_dir, tmp_path)
        ctx = runner.prepare(cfg)
        swept = runner.run_protocol_sweep(cfg, "unseen_attack", ctx)
        assert sorted(r.protocol for r in swept) == ["unseen_attack:mask", "unseen_attack:print", "unseen_attack:replay"]
        for r in swept:
            single = runner.run_experiment(make_cfg(synth_dir, tmp_path / "single", protocol=r.protocol), ctx)
            assert single.to_json() == r.to_json()
        assert (tmp_path / "out" / "sweep_unseen_attack.txt").is_file()

    def test_threaded_sweep_matches_serial(self, synth_dir, tmp_path):
        cfg = make_cfg(synth_dir, tmp_path)
        ctx = runner.prepare(cfg)
        serial = runner.run_protocol_sweep(cfg, "cross_conditions", ctx)
        threaded = runner.run_protocol_sweep(make_cfg(synth_dir, tmp_path, workers=3), "cross_conditions", ctx)
        assert [r.to_json() for r in serial] == [r.to_json() for r in threaded]

    def test_single_dataset_cross_dataset_is_degenerate(self, synth_dir, tmp_path):
        root, manifests = synth_dir
        cfg = make_cfg(synth_dir, tmp_path, manifests=[str(manifests[0])])
        reports = runner.run_protocol_sweep(cfg, "cross_dataset")
        assert len(reports) == 1
        assert reports[0].degenerate and reports[0].test is None
        assert reports[0].warnings

    def test_identities_on_every_family(self, synth_dir, tmp_path):
        cfg = make_cfg(synth_dir, tmp_path)
        ctx = runner.prepare(cfg)
        for fam in ("grandtest", "one_pai", "unseen_attack", "cross_face_resolution"):
            for r in runner.run_protocol_sweep(cfg, fam, ctx):
                assert r.degenerate or r.identities_hold()


class TestCli:
    def run(self, capsys, *argv):
        code = cli.main([str(a) for a in argv])
        out = capsys.readouterr()
        return code, out.out, out.err

    def test_synth_then_evaluate_and_report(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("PADBENCH_CACHE_DIR", str(tmp_path / "envcache"))
        spec_file = tmp_path / "spec.json"
        spec_file.write_text(json.dumps(spec_to_json(small_spec(datasets=("d",)))))
        code, out, _ = self.run(capsys, "synth", "--out", tmp_path / "data", "--spec", spec_file)
        assert code == 0 and "d.json" in out
        cfg = tmp_path / "data" / "experiment.json"
        code, out, _ = self.run(capsys, "evaluate", "--config", cfg, "--out", tmp_path / "runs")
        assert code == 0 and "grandtest" in out
        assert any((tmp_path / "envcache").rglob("*")), "cache dir from environment unused"
        code, out, _ = self.run(capsys, "report", tmp_path / "runs")
        assert code == 0 and "grandtest" in out

        code, out, _ = self.run(capsys, "evaluate", "--config", cfg, "--out", tmp_path / "runs",
                                "--protocol", "cross_dataset:d")
        assert code == 2
        code, _, _ = self.run(capsys, "report", tmp_path / "runs")
        assert code == 2

        code, out, _ = self.run(capsys, "ingest", "--config", cfg, "--out", tmp_path / "ing")
        assert code == 0 and (tmp_path / "ing" / "registry.json").is_file()
        code, out, _ = self.run(capsys, "extract", "--config", cfg)
        assert code == 0 and "17346" in out

    def test_sweep_command(self, synth_dir, tmp_path, capsys):
        root, manifests = synth_dir
        argv = ["sweep", "--family", "one_pai", "--data-root", root, "--out", tmp_path / "o",
                "--cache-dir", tmp_path / "c"]
        for m in manifests:
            argv += ["--manifest", m]
        code, out, _ = self.run(capsys, *argv)
        assert code == 0
        assert "one_pai:mask" in out and "one_pai:print" in out

    def test_errors_exit_one(self, tmp_path, capsys):
        code, _, err = self.run(capsys, "evaluate", "--manifest", tmp_path / "missing.json",
                                "--cache-dir", tmp_path)
        assert code == 1 and "missing.json" in err
        code, _, err = self.run(capsys, "evaluate")
        assert code == 1 and "manifest" in err
        code, _, _ = self.run(capsys, "evaluate", "--config", tmp_path / "nope.yaml")
        assert code == 1
