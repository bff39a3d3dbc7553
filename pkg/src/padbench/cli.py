"""Command line entry point: ``padbench <command> [options]``.

Exit codes: 0 success, 2 degenerate protocol (partial report written),
1 error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import runner
from .config import ExperimentConfig
from .errors import PadBenchError
from .protocols import FAMILIES
from .registry import load_registry
from .report import EvaluationReport, format_table
from .synthetic import default_spec, generate_synthetic, spec_from_json

EXIT_OK, EXIT_ERROR, EXIT_DEGENERATE = 0, 1, 2

log = logging.getLogger("padbench")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="experiment config file (JSON or YAML)")
    p.add_argument("--manifest", action="append", dest="manifests", help="dataset manifest (repeatable)")
    p.add_argument("--data-root", help="directory frame paths are relative to")
    p.add_argument("--protocol", help="built-in protocol name[:param]")
    p.add_argument("--protocol-file", help="protocol config file")
    p.add_argument("--extractor", choices=["color_lbp", "iqm"])
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--cache-dir", help="feature cache directory (default $PADBENCH_CACHE_DIR)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="padbench", description="Face PAD generalization benchmark")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    for name, text in [
        ("ingest", "load manifests and write the categorized registry"),
        ("extract", "extract and cache features for every registry sample"),
        ("evaluate", "run one protocol"),
        ("sweep", "run every member of a protocol family"),
    ]:
        p = sub.add_parser(name, help=text)
        _common(p)
        if name == "sweep":
            p.add_argument("--family", required=True, choices=[*FAMILIES, "all"])

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--per-cell", type=int, default=2)
    p.add_argument("--frames", type=int, default=2)
    p.add_argument("--spec", help="synthetic spec JSON (overrides --per-cell)")

    p = sub.add_parser("report", help="tabulate report.json files")
    p.add_argument("paths", nargs="+", help="report files or directories searched recursively")
    return parser


def load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    cfg.override(
        manifests=args.manifests,
        data_root=args.data_root,
        protocol=args.protocol,
        protocol_file=args.protocol_file,
        extractor=args.extractor,
        seed=args.seed,
        workers=args.workers,
        out=args.out,
        cache_dir=args.cache_dir,
    )
    if not cfg.manifests:
        raise PadBenchError("no manifests given (use --manifest or a config file)")
    return cfg


def cmd_ingest(args) -> int:
    cfg = load_config(args)
    registry = load_registry(cfg.manifests, seed=cfg.seed)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "registry.json").write_text(json.dumps(registry.to_json(), indent=1, sort_keys=True) + "\n")
    for ds in registry.dataset_ids():
        items = [s for s in registry if s.dataset_id == ds]
        by_subset = {k: sum(1 for s in items if s.subset == k) for k in ("train", "dev", "test")}
        print(f"{ds}: {len(items)} samples {by_subset}")
    return EXIT_OK


def cmd_extract(args) -> int:
    ctx = runner.prepare(load_config(args))
    print(f"{len(ctx.features)} feature vectors ({ctx.ext_cfg.extractor_id}, dim {ctx.ext_cfg.dim})")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    report = runner.run_experiment(load_config(args))
    print(format_table([report]), end="")
    return EXIT_DEGENERATE if report.degenerate else EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args)
    ctx = runner.prepare(cfg)
    families = FAMILIES if args.family == "all" else (args.family,)
    reports = []
    for fam in families:
        reports.extend(runner.run_protocol_sweep(cfg, fam, ctx))
    print(format_table(reports), end="")
    return EXIT_DEGENERATE if any(r.degenerate for r in reports) else EXIT_OK


def cmd_synth(args) -> int:
    if args.spec:
        spec = spec_from_json(json.loads(Path(args.spec).read_text()))
    else:
        spec = default_spec(seed=args.seed, per_cell=args.per_cell)
        spec.frames_per_video = args.frames
    manifests = generate_synthetic(spec, args.out)
    config = {"manifests": [m.name for m in manifests], "data_root": ".", "seed": spec.seed}
    (Path(args.out) / "experiment.json").write_text(json.dumps(config, indent=2) + "\n")
    for m in manifests:
        print(m)
    return EXIT_OK


def cmd_report(args) -> int:
    files = []
    for p in map(Path, args.paths):
        files.extend(sorted(p.rglob("report.json")) if p.is_dir() else [p])
    reports = [EvaluationReport.load(f) for f in files]
    print(format_table(reports), end="")
    return EXIT_DEGENERATE if any(r.degenerate for r in reports) else EXIT_OK


COMMANDS = {
    "ingest": cmd_ingest,
    "extract": cmd_extract,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "synth": cmd_synth,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except PadBenchError as exc:
        print(f"error [{exc.stage}]: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
