"""Command-line interface: ``trps <command> ...``.

Exit codes:
    0   success
    1   --replay run did not reproduce the saved report
    2   usage error
    3   file not found / unreadable
    4   parse error
    5   other validation error (weights, structures, configs)
    6   alignment error (team sets or rank structures differ)
    7   solver did not converge
    10  prediction column-sum violation
    11  prediction row-sum violation
    12  prediction entry out of [0, 1] or NaN
    13  prediction shape mismatch
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .ensemble import SolverError, TournamentHistory, combine, fit_weights, objective
from .io import (
    FIXTURES,
    ParseError,
    dump_json,
    fixture_path,
    format_prediction,
    read_numbers,
    read_outcome,
    read_prediction,
    read_prediction_dir,
    read_structure,
    rows_to_csv,
)
from .scoring import (
    DEFAULT_FLOOR,
    FIFA2018_LOGLOSS_WEIGHTS,
    collapse,
    doubling_relative_weights,
    inverse_capacity_relative_weights,
    log_loss,
    mapping_by_capacity,
    normalize_relative_weights,
    trps,
    wtrps,
)
from .simulate import (
    FLAT_CURVE_KINDS,
    FORMATS,
    SimulationConfig,
    TournamentFormat,
    default_workers,
    flat_curve,
    run_experiment,
    valid_team_counts,
)
from .structures import AlignmentError, PredictionError, RankStructure, TRPSError

EXIT_IO = 3
EXIT_PARSE = 4
EXIT_INVALID = 5
EXIT_ALIGNMENT = 6
EXIT_SOLVER = 7
EXIT_VIOLATION = {"column_sum": 10, "row_sum": 11, "range": 12, "nan": 12, "shape": 13}

FORMAT_ALIASES = {"knockout": "knockout", "single-rr": "single_round_robin", "double-rr": "double_round_robin"}
FORMAT_ALIASES.update({f: f for f in FORMATS})

TABLE1_TEAMS = (8, 16, 32)
TABLE1_SIGMAS = (1.0, 2.0, 3.0)
FULL_SCALE = 10_000

SIM_COLUMNS = ("kind", "n_teams", "sigma", "tsp_mean", "tsp_sd", "flat", "cp_mean", "cp_sd",
               "p_tsp_lt_fp", "p_tsp_lt_cp", "replicates", "inner_samples", "seed")


def _emit(args, text: str = "", record=None) -> None:
    if getattr(args, "json", False) and record is not None:
        print(dump_json(record))
    elif text:
        print(text, end="" if text.endswith("\n") else "\n")


def _load_prediction(path, args):
    return read_prediction(path, tol=args.tolerance, renormalize=args.renormalize)


def _maybe_collapse(X, structure_path):
    if structure_path is None:
        return X
    coarse = read_structure(structure_path)
    if X.structure.same_shape(coarse):
        return X
    return collapse(X, coarse, mapping_by_capacity(X.structure, coarse))


# -- weights -----------------------------------------------------------------

def rank_weight_values(scheme: str, structure: RankStructure, full: bool) -> list[float]:
    """Relative weights for ``scheme``; R values if ``full`` (log loss) else R-1."""
    R = structure.n_categories
    n = R if full else R - 1
    if scheme == "ones":
        return [1.0] * n
    if scheme == "doubling":
        vals = doubling_relative_weights(structure) + [1.0]
    elif scheme == "inverse-capacity":
        vals = inverse_capacity_relative_weights(structure) + [1.0 / structure.capacities[-1]]
    elif scheme == "fifa2018":
        if R != len(FIFA2018_LOGLOSS_WEIGHTS):
            raise TRPSError(f"fifa2018 weights need 7 rank categories, structure has {R}")
        vals = list(FIFA2018_LOGLOSS_WEIGHTS)
    elif scheme.startswith("file:"):
        vals = read_numbers(scheme[5:])
        if len(vals) != n:
            raise TRPSError(f"weights file gives {len(vals)} values, expected {n}")
        return vals
    else:
        raise TRPSError(f"unknown weights {scheme!r}; use ones, doubling, inverse-capacity, fifa2018 or file:<path>")
    return vals[:n]


# -- commands ------------------------------------------------------------------

def cmd_validate(args) -> int:
    X = _load_prediction(args.prediction, args)
    record = {
        "file": str(args.prediction),
        "valid": True,
        "categories": X.structure.n_categories,
        "teams": X.n_teams,
        "capacities": list(X.structure.capacities),
        "renormalized": bool(args.renormalize),
    }
    _emit(args, f"valid: {X.structure.n_categories} categories x {X.n_teams} teams", record)
    return 0


def cmd_score(args) -> int:
    X = _maybe_collapse(_load_prediction(args.prediction, args), args.structure)
    O = read_outcome(args.outcome, X.structure)
    metrics = ("trps", "wtrps", "logloss") if args.metric == "all" else (args.metric,)
    record = {"prediction": str(args.prediction), "outcome": str(args.outcome)}
    lines = []
    for m in metrics:
        if m == "trps":
            value = trps(O, X)
        elif m == "wtrps":
            w = normalize_relative_weights(rank_weight_values(args.weights or "ones", X.structure, full=False))
            value = wtrps(O, X, w)
            record["wtrps_weights"] = list(w.values)
        else:
            w = rank_weight_values(args.weights or "ones", X.structure, full=True)
            value, clamped = log_loss(O, X, w, floor=args.floor, return_clamped=True)
            record.update(logloss_weights=w, floor=args.floor, clamped=clamped)
        record[m] = value
        lines.append(f"{m} {value:.6f}")
    if "clamped" in record and record["clamped"]:
        lines.append(f"# {record['clamped']} observed probabilities clamped to {args.floor:g}")
    _emit(args, "\n".join(lines), record)
    return 0


def cmd_collapse(args) -> int:
    X = _load_prediction(args.prediction, args)
    out = _maybe_collapse(X, args.structure)
    text = format_prediction(out)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _resolve_seed(seed) -> int:
    if seed is not None:
        return int(seed)
    env = os.environ.get("TRPS_SEED")
    if env:
        return int(env)
    return int(np.random.SeedSequence().entropy % (2 ** 63))


def _configs(args, seed: int) -> list[SimulationConfig]:
    reps = FULL_SCALE if args.full_scale else args.replicates
    inner = FULL_SCALE if args.full_scale else args.inner_samples
    if args.grid:
        combos = [(k, t, s) for k in FORMATS for t in TABLE1_TEAMS for s in TABLE1_SIGMAS]
    else:
        if args.format is None or args.teams is None or args.sigma is None:
            raise TRPSError("--format, --teams and --sigma are required unless --grid is given")
        combos = [(FORMAT_ALIASES[args.format], args.teams, args.sigma)]
    return [SimulationConfig(TournamentFormat(k, t), s, reps, inner, seed) for k, t, s in combos]


def run_report(configs, workers: int) -> dict:
    rows = [run_experiment(c, workers=workers).as_dict() for c in configs]
    return {
        "tool": "trps",
        "version": __version__,
        "seed": configs[0].seed,
        "config": {"replicates": configs[0].replicates, "inner_samples": configs[0].inner_samples,
                   "experiments": [{"format": c.format.kind, "teams": c.format.n_teams, "sigma": c.sigma}
                                   for c in configs]},
        "rows": rows,
    }


def _report_configs(report: dict) -> list[SimulationConfig]:
    cfg = report["config"]
    return [SimulationConfig(TournamentFormat(e["format"], e["teams"]), e["sigma"], cfg["replicates"],
                             cfg["inner_samples"], report["seed"]) for e in cfg["experiments"]]


def cmd_simulate(args) -> int:
    workers = args.workers or default_workers()
    if args.replay:
        old = json.loads(Path(args.replay).read_text(encoding="utf-8"))
        new = run_report(_report_configs(old), workers)
        same = new["rows"] == old["rows"]
        print(f"seed {old['seed']}: {'reproduced' if same else 'MISMATCH'}", file=sys.stderr)
        return 0 if same else 1
    seed = _resolve_seed(args.seed)
    print(f"# seed {seed}", file=sys.stderr)
    report = run_report(_configs(args, seed), workers)
    if args.out:
        Path(args.out).write_text(dump_json(report) + "\n", encoding="utf-8")
    table = rows_to_csv(SIM_COLUMNS, [[r[c] for c in SIM_COLUMNS] for r in report["rows"]])
    _emit(args, table, report)
    return 0


def cmd_flat_curve(args) -> int:
    counts = valid_team_counts(args.kind, args.max_teams, args.min_teams)
    curve = flat_curve(args.kind, counts)
    record = {"kind": args.kind, "points": [{"teams": t, "trps": v} for t, v in curve]}
    _emit(args, rows_to_csv(("teams", "trps"), [(t, f"{v:.9f}") for t, v in curve]), record)
    return 0


def cmd_ensemble_fit(args) -> int:
    histories, models = [], None
    for outcome_path, pred_dir in args.tournament:
        preds = read_prediction_dir(pred_dir)
        if models is None:
            models = list(preds)
        elif list(preds) != models:
            raise TRPSError(f"{pred_dir} holds models {list(preds)}, expected {models}")
        first = next(iter(preds.values()))
        O = read_outcome(outcome_path, first.structure)
        histories.append(TournamentHistory(O, tuple(preds[m] for m in models)))
    w = fit_weights(histories)
    record = {
        "models": models,
        "weights": list(w.omega),
        "objective": objective(histories, w),
        "single_model_objectives": {m: objective(histories, np.eye(len(models))[k])
                                    for k, m in enumerate(models)},
        "tournaments": len(histories),
    }
    text = dump_json(record)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    lines = [f"{m} {x:.6f}" for m, x in zip(models, w.omega)] + [f"objective {record['objective']:.6f}"]
    _emit(args, "\n".join(lines), record)
    return 0


def cmd_ensemble_predict(args) -> int:
    saved = json.loads(Path(args.weights).read_text(encoding="utf-8"))
    preds = read_prediction_dir(args.predictions)
    missing = [m for m in saved["models"] if m not in preds]
    if missing:
        raise TRPSError(f"no prediction files for models {missing} in {args.predictions}")
    X = combine([preds[m] for m in saved["models"]], saved["weights"])
    text = format_prediction(X)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_fixture(args) -> int:
    if args.name is None:
        print("\n".join(FIXTURES))
        return 0
    sys.stdout.write(fixture_path(args.name).read_text(encoding="utf-8"))
    return 0


# -- parser --------------------------------------------------------------------

def _add_tolerance(p):
    p.add_argument("--tolerance", type=float, default=1e-9,
                   help="absolute tolerance on row/column sums (default 1e-9)")
    p.add_argument("--renormalize", action="store_true",
                   help="rescale columns to sum to 1 before checking row sums")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trps", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"trps {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a prediction CSV")
    p.add_argument("prediction")
    _add_tolerance(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("score", help="score a prediction against an outcome")
    p.add_argument("prediction")
    p.add_argument("outcome")
    p.add_argument("--metric", choices=("trps", "wtrps", "logloss", "all"), default="trps")
    p.add_argument("--weights", help="ones | doubling | inverse-capacity | fifa2018 | file:<path>")
    p.add_argument("--floor", type=float, default=DEFAULT_FLOOR, help="log-loss probability floor")
    p.add_argument("--structure", help="rank structure CSV to collapse the prediction into first")
    _add_tolerance(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("collapse", help="merge prediction rows into a coarser rank structure")
    p.add_argument("prediction")
    p.add_argument("--structure", required=True, help="target rank structure CSV")
    p.add_argument("--out")
    _add_tolerance(p)
    p.set_defaults(func=cmd_collapse)

    p = sub.add_parser("simulate", help="Bradley-Terry simulation study")
    p.add_argument("--format", choices=sorted(FORMAT_ALIASES))
    p.add_argument("--teams", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--replicates", type=int, default=1000)
    p.add_argument("--inner-samples", type=int, default=2000)
    p.add_argument("--seed", type=int, help="default: $TRPS_SEED, else random (always echoed)")
    p.add_argument("--workers", type=int, default=0, help="worker processes (default: CPU count, max 8)")
    p.add_argument("--grid", action="store_true", help="run every format x {8,16,32} teams x sigma {1,2,3}")
    p.add_argument("--full-scale", action="store_true", help="10000 replicates x 10000 inner simulations")
    p.add_argument("--out", help="write the JSON report here")
    p.add_argument("--replay", help="rerun a saved JSON report and check it reproduces")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("flat-curve", help="flat-prediction TRPS by number of teams")
    p.add_argument("--kind", choices=FLAT_CURVE_KINDS, default="full_ranking")
    p.add_argument("--max-teams", type=int, default=64)
    p.add_argument("--min-teams", type=int, default=2)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_flat_curve)

    p = sub.add_parser("ensemble", help="fit or apply ensemble weights")
    esub = p.add_subparsers(dest="ensemble_command", required=True)
    q = esub.add_parser("fit", help="fit weights minimizing average TRPS over past tournaments")
    q.add_argument("--tournament", nargs=2, action="append", required=True, metavar=("OUTCOME", "PRED_DIR"),
                   help="outcome CSV and a directory of model prediction CSVs; repeat per tournament")
    q.add_argument("--out", help="write the weights JSON here")
    q.add_argument("--json", action="store_true")
    q.set_defaults(func=cmd_ensemble_fit)
    q = esub.add_parser("predict", help="combine predictions with fitted weights")
    q.add_argument("--weights", required=True, help="weights JSON from 'ensemble fit'")
    q.add_argument("predictions", help="directory of model prediction CSVs")
    q.add_argument("--out")
    q.set_defaults(func=cmd_ensemble_predict)

    p = sub.add_parser("fixture", help="print a bundled example file (or list them)")
    p.add_argument("name", nargs="?")
    p.set_defaults(func=cmd_fixture)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, IsADirectoryError, PermissionError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except ParseError as e:
        print(f"parse error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except PredictionError as e:
        for v in e.violations:
            print(f"violation: {v}", file=sys.stderr)
        return EXIT_VIOLATION.get(e.violations[0].kind, EXIT_INVALID)
    except AlignmentError as e:
        print(f"alignment error: {e}", file=sys.stderr)
        return EXIT_ALIGNMENT
    except SolverError as e:
        print(f"solver error: {e}", file=sys.stderr)
        return EXIT_SOLVER
    except TRPSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
