"""Command-line entry point.

Exit codes: 0 when the stage passes, 1 when it fails, 2 on usage, parse
or I/O errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

from .data_checks import DataStageConfig, run_data_stage
from .errors import MockcheckError
from .findings import WARNING
from .mocks import MockDataConfig, generate_mock_data, mock_model_recipe, mock_model_spec
from .model_checks import ModelStageConfig, run_model_stage
from .pipeline import load_dataset, parse_data_interface, parse_model_interface, parse_model_spec
from .report import render_report

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
DEFAULT_SEED = 42
SEED_ENV = "MOCKCHECK_SEED"
MAX_SEED = 2**64 - 1


class UsageError(Exception):
    pass


def _seed(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= value <= MAX_SEED:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2**64 - 1]")
    return value


def _odd_runs(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"runs must be an integer, got {text!r}") from None
    if value < 1 or value % 2 == 0:
        raise argparse.ArgumentTypeError("runs must be a positive odd number")
    return value


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return DEFAULT_SEED
    try:
        return _seed(raw)
    except argparse.ArgumentTypeError as exc:
        raise UsageError(f"{SEED_ENV}: {exc}") from None


def _read_text(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from None


def apply_overrides(base, overrides: dict, where: str):
    """A copy of dataclass ``base`` with ``overrides`` applied; nested
    dataclass fields take nested objects.  Unknown keys are rejected."""
    if not isinstance(overrides, dict):
        raise UsageError(f"config section {where!r} must be an object")
    known = {f.name: f for f in dataclasses.fields(base)}
    changes = {}
    for key, value in overrides.items():
        if key not in known:
            raise UsageError(f"unknown config key {where}.{key}")
        current = getattr(base, key)
        if dataclasses.is_dataclass(current):
            changes[key] = apply_overrides(current, value, f"{where}.{key}")
        else:
            changes[key] = value
    try:
        return dataclasses.replace(base, **changes)
    except (TypeError, MockcheckError) as exc:
        raise UsageError(f"invalid config section {where!r}: {exc}") from None


def load_config_file(path) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or set(doc) - {"data", "model"}:
        raise UsageError('config must be an object with optional "data" and "model" sections')
    return doc


def _emit(payload: bytes, output) -> None:
    if output:
        try:
            Path(output).write_bytes(payload)
        except OSError as exc:
            raise UsageError(f"cannot write {output}: {exc.strerror or exc}") from None
    else:
        sys.stdout.flush()
        sys.stdout.buffer.write(payload)
        sys.stdout.buffer.flush()


def _finish(report, args) -> int:
    _emit(render_report(report, args.format), args.output)
    if args.figures:
        from .plotting import write_figures

        write_figures(report, args.figures)
    if not report.passed:
        return EXIT_FAIL
    if args.fail_on_warning and any(f.severity == WARNING for f in report.findings):
        return EXIT_FAIL
    return EXIT_PASS


def cmd_check_data(args) -> int:
    di = parse_data_interface(_read_text(args.data_interface))
    mi = parse_model_interface(_read_text(args.model_interface))
    label = int(args.label) if args.label.isdigit() else args.label
    dataset = load_dataset(args.data, label)
    overrides = load_config_file(args.config).get("data", {})
    config = apply_overrides(DataStageConfig(), overrides, "data")
    config = dataclasses.replace(config, seed=args.seed, runs=args.runs,
                                 force_learnability=args.force_learnability or config.force_learnability)
    return _finish(run_data_stage(dataset, di, mi, config), args)


def cmd_check_model(args) -> int:
    spec = parse_model_spec(_read_text(args.model))
    di = parse_data_interface(_read_text(args.data_interface))
    overrides = load_config_file(args.config).get("model", {})
    config = apply_overrides(ModelStageConfig(), overrides, "model")
    strictness = "strict" if args.strict_binary_output else config.binary_output_strictness
    config = dataclasses.replace(config, seed=args.seed, runs=args.runs, binary_output_strictness=strictness)
    return _finish(run_model_stage(spec, di, config), args)


def cmd_gen_mock_data(args) -> int:
    di = parse_data_interface(_read_text(args.data_interface))
    dataset = generate_mock_data(di, MockDataConfig(seed=args.seed))
    try:
        dataset.to_csv(args.out)
    except OSError as exc:
        raise UsageError(f"cannot write {args.out}: {exc.strerror or exc}") from None
    return EXIT_PASS


def cmd_gen_mock_model(args) -> int:
    di = parse_data_interface(_read_text(args.data_interface))
    mi = parse_model_interface(_read_text(args.model_interface))
    recipe = mock_model_recipe(mi, di.num_features, di.num_classes)
    spec = mock_model_spec(recipe, di.num_features)
    _emit((spec.to_json() + "\n").encode("utf-8"), args.output)
    return EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mockcheck",
        description="Test the data preparation and model design stages of a tabular "
                    "deep-learning pipeline in isolation, using mock models and mock data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--seed", type=_seed, default=None,
                        help=f"base seed; run i uses seed+i (default {DEFAULT_SEED}, or ${SEED_ENV})")
    shared.add_argument("--runs", type=_odd_runs, default=3, help="repeated runs for majority voting")
    shared.add_argument("--format", choices=("text", "json"), default="text")
    shared.add_argument("--config", help="JSON file with threshold overrides in 'data'/'model' sections")
    shared.add_argument("--strict-binary-output", action="store_true",
                        help="require exactly 1 sigmoid unit for binary tasks")
    shared.add_argument("--output", help="write the report here instead of stdout")
    shared.add_argument("--figures", metavar="DIR", help="write per-run loss curves and traces.csv to DIR")
    shared.add_argument("--fail-on-warning", action="store_true", help="exit 1 on warnings as well")

    p = sub.add_parser("check-data", parents=[shared], help="run the data preparation stage checks")
    p.add_argument("--data", required=True, help="CSV file with a header row")
    p.add_argument("--label", required=True, help="label column name or 0-based index")
    p.add_argument("--data-interface", required=True)
    p.add_argument("--model-interface", required=True)
    p.add_argument("--force-learnability", action="store_true",
                   help="train the mock model even when structural checks failed")
    p.set_defaults(func=cmd_check_data)

    p = sub.add_parser("check-model", parents=[shared], help="run the model design stage checks")
    p.add_argument("--model", required=True, help="model spec JSON")
    p.add_argument("--data-interface", required=True)
    p.set_defaults(func=cmd_check_model)

    p = sub.add_parser("gen-mock-data", help="write mock data for a data interface as CSV")
    p.add_argument("--data-interface", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=_seed, default=None)
    p.set_defaults(func=cmd_gen_mock_data)

    p = sub.add_parser("gen-mock-model", help="print the mock model spec as JSON")
    p.add_argument("--data-interface", required=True)
    p.add_argument("--model-interface", required=True)
    p.add_argument("--output")
    p.set_defaults(func=cmd_gen_mock_model)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if getattr(args, "seed", 0) is None:
            args.seed = default_seed()
        return args.func(args)
    except (UsageError, MockcheckError) as exc:
        print(f"mockcheck: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
