"""Command-line driver.

Exit codes: 0 success, 1 unexpected error, 2 configuration error,
3 missing artifact, 4 ingest/recognizer error, 5 classifier error,
6 numerical error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import pipeline
from .errors import ConfigError, NewsBiasError
from .synthetic import SyntheticSpec, generate_synthetic

log = logging.getLogger("newsbias")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="JSON config file mirroring PipelineConfig")
    p.add_argument("--out", help="output directory for stage artifacts")
    p.add_argument("--seed", type=int)
    p.add_argument("--k", type=int, help="number of clusters")
    p.add_argument("--classifier", choices=("mock", "remote"))
    p.add_argument("--months", help="month range YYYY-MM[:YYYY-MM]")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="newsbias", description="Cable-news program bias clustering pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="parse transcripts into transcripts.jsonl")
    p.add_argument("inputs", nargs="*", help="transcript files or directories")
    for stage in ("extract", "stance", "networks", "cluster", "report"):
        sub.add_parser(stage, parents=[common], help=f"run the {stage} stage")
    p = sub.add_parser("run-all", parents=[common], help="run every stage in order")
    p.add_argument("inputs", nargs="*")

    p = sub.add_parser("synth", parents=[common], help="generate a planted-bias synthetic corpus")
    p.add_argument("--spec", help="JSON file with SyntheticSpec fields")
    p.add_argument("--noise", type=float, help="noise rate override")
    p.add_argument("--matched-valence", action="store_true")
    return parser


def config_from_args(args) -> pipeline.PipelineConfig:
    overrides = {}
    if args.out:
        overrides["out_dir"] = args.out
    for name in ("seed", "k", "classifier", "months"):
        if getattr(args, name, None) is not None:
            overrides[name] = getattr(args, name)
    if getattr(args, "inputs", None):
        overrides["inputs"] = list(args.inputs)
    if args.config:
        return pipeline.PipelineConfig.from_file(args.config, **overrides)
    return pipeline.PipelineConfig.from_dict(overrides)


def _synth(args) -> dict:
    data = {}
    if args.spec:
        try:
            data = json.loads(Path(args.spec).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read synthetic spec {args.spec}: {exc}") from exc
    if args.seed is not None:
        data["seed"] = args.seed
    if args.noise is not None:
        data["noise_rate"] = args.noise
    if args.matched_valence:
        data["matched_valence"] = True
    spec = SyntheticSpec.from_dict(data)
    out = generate_synthetic(spec, args.out or "corpus")
    return {"corpus": str(out), "networks": spec.network_names()}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "synth":
            summary = _synth(args)
        else:
            cfg = config_from_args(args)
            if args.command == "run-all":
                summary = pipeline.run_all(cfg)
            else:
                summary = pipeline.run_stage(args.command, cfg)
    except NewsBiasError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
