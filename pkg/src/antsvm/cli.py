"""Command-line front end.

Three subcommands: `tune` runs the full colony experiment and writes the
report/trail files, `cv` scores a single (C, sigma) point with k-fold CV
plus a held-out test evaluation, `inspect` prints dataset statistics.

Option precedence is CLI flag > --config JSON file > built-in defaults.
Exit codes: 0 success, 2 configuration error, 3 data error, 4 solver
failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path
from typing import Any, Sequence

from .data import ParseError
from .experiment import (
    RunConfig,
    canonical_json,
    dataset_summary,
    emit_trails,
    load_dataset,
    run_experiment,
    run_single_point,
)
from .svm import SolverError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_SOLVER = 4


class ConfigError(ValueError):
    pass


def _add_common_options(sub: argparse.ArgumentParser) -> None:
    # every default is None so explicit flags can be told apart from
    # omissions when merging with a config file
    sub.add_argument("--config", type=str, help="JSON file with option defaults")
    sub.add_argument("--data", dest="data_path", type=str, help="dataset file")
    sub.add_argument(
        "--format", dest="data_format", choices=("libsvm", "csv"), help="dataset format"
    )
    sub.add_argument("--label-column", type=int, help="CSV label column (default 0)")
    sub.add_argument(
        "--csv-header",
        dest="csv_header",
        action="store_true",
        default=None,
        help="skip the first CSV row",
    )
    sub.add_argument("--train-count", type=int, help="samples in the training split")
    sub.add_argument("--cv-k", type=int, help="number of cross-validation folds")
    sub.add_argument("--seed", type=int, help="run seed")
    sub.add_argument("--workers", type=int, help="max concurrent evaluations")
    sub.add_argument("--kkt-tol", dest="kkt_tolerance", type=float)
    sub.add_argument("--max-passes", type=int)


def _add_colony_options(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--ants", type=int, help="colony size")
    sub.add_argument("--iters", dest="iters", type=int, help="max iterations")
    sub.add_argument("--rho", type=float, help="pheromone persistence factor")
    sub.add_argument("--q", type=float, help="deposit constant")
    sub.add_argument("--alpha", type=float, help="pheromone exponent")
    sub.add_argument("--beta", type=float, help="heuristic exponent")
    sub.add_argument("--eta", type=float, help="heuristic desirability")
    sub.add_argument("--tau0", type=float, help="initial pheromone")
    sub.add_argument("--epsilon-acc", type=float, help="deposit divergence guard")
    sub.add_argument("--convergence-fraction", type=float)
    sub.add_argument("--c-digits", type=int)
    sub.add_argument("--c-high-power", type=int)
    sub.add_argument("--sigma-digits", type=int)
    sub.add_argument("--sigma-high-power", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="antsvm",
        description="Ant-colony search for RBF-SVM hyperparameters",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    tune = commands.add_parser("tune", help="run the full tuning experiment")
    _add_common_options(tune)
    _add_colony_options(tune)
    tune.add_argument("--out", type=str, help="output directory (required)")

    cv = commands.add_parser("cv", help="score one (C, sigma) point")
    _add_common_options(cv)
    cv.add_argument("--c", type=float, help="box constraint C")
    cv.add_argument("--sigma", type=float, help="kernel width sigma")
    cv.add_argument("--out", type=str, help="optional directory for cv_report.json")

    inspect = commands.add_parser("inspect", help="print dataset statistics")
    _add_common_options(inspect)
    return parser


_RUN_FIELDS = {f.name for f in dataclasses.fields(RunConfig)}


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge defaults, config file and explicit flags into a RunConfig."""
    merged: dict[str, Any] = {}
    if args.config is not None:
        try:
            loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(loaded) - _RUN_FIELDS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        merged.update(loaded)
    for name in _RUN_FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            merged[name] = value
    if "data_path" not in merged:
        raise ConfigError("a dataset is required (--data or config file)")
    try:
        return RunConfig(**merged)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _fail(stage: str, exc: Exception, code: int) -> int:
    print(json.dumps({"stage": stage, "error": str(exc)}), file=sys.stderr)
    return code


def _cmd_tune(args: argparse.Namespace) -> int:
    try:
        cfg = resolve_config(args)
        if args.out is None:
            raise ConfigError("tune requires --out DIR")
    except ConfigError as exc:
        return _fail("config", exc, EXIT_CONFIG)
    try:
        load_dataset(cfg)  # fail on data problems before any heavy work
    except (OSError, ParseError) as exc:
        return _fail("data", exc, EXIT_DATA)
    try:
        report = run_experiment(cfg)
    except SolverError as exc:
        return _fail("solver", exc, EXIT_SOLVER)
    except ValueError as exc:
        return _fail("solver", exc, EXIT_SOLVER)
    try:
        written = emit_trails(report, args.out)
    except OSError as exc:
        return _fail("write", exc, EXIT_DATA)
    opt = report.optimization
    print(
        f"best: C={opt.best_point.c} sigma={opt.best_point.sigma} "
        f"cv_accuracy={opt.best_accuracy:.6f} (iteration {opt.best_iteration})"
    )
    print(
        f"converged: C={opt.converged_point.c} sigma={opt.converged_point.sigma} "
        f"after {opt.n_iterations} iterations "
        f"(modal fraction {opt.final_modal_fraction:.3f}, converged={opt.converged})"
    )
    print(
        f"test accuracy: best={report.test_best[0]:.6f} "
        f"converged={report.test_converged[0]:.6f}"
    )
    for name, path in written.items():
        print(f"wrote {path}")
    return EXIT_OK


def _cmd_cv(args: argparse.Namespace) -> int:
    try:
        cfg = resolve_config(args)
        if args.c is None or args.sigma is None:
            raise ConfigError("cv requires --c and --sigma")
    except ConfigError as exc:
        return _fail("config", exc, EXIT_CONFIG)
    try:
        load_dataset(cfg)
    except (OSError, ParseError) as exc:
        return _fail("data", exc, EXIT_DATA)
    try:
        payload = run_single_point(cfg, args.c, args.sigma)
    except SolverError as exc:
        return _fail("solver", exc, EXIT_SOLVER)
    except ValueError as exc:
        return _fail("solver", exc, EXIT_SOLVER)
    text = canonical_json(payload)
    sys.stdout.write(text)
    if args.out is not None:
        try:
            out_dir = Path(args.out)
            out_dir.mkdir(parents=True, exist_ok=True)
            (out_dir / "cv_report.json").write_text(text, encoding="utf-8")
        except OSError as exc:
            return _fail("write", exc, EXIT_DATA)
    return EXIT_OK


def _cmd_inspect(args: argparse.Namespace) -> int:
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        return _fail("config", exc, EXIT_CONFIG)
    try:
        ds = load_dataset(cfg)
    except (OSError, ParseError) as exc:
        return _fail("data", exc, EXIT_DATA)
    sys.stdout.write(canonical_json(dataset_summary(ds, cfg)))
    return EXIT_OK


_COMMANDS = {"tune": _cmd_tune, "cv": _cmd_cv, "inspect": _cmd_inspect}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return _COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
