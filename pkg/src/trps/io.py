"""CSV/JSON file formats.

Prediction file::

    rank_label,capacity,<team1>,<team2>,...
    1,1,0.7,0.1,...          # one row per rank category, best first

Outcome file::

    team,rank_label
    team1,1

Rank order in a prediction file is positional; labels are opaque strings.
"""

from __future__ import annotations

import csv
import io
import json
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .structures import (
    SUM_TOL,
    Outcome,
    PredictionMatrix,
    RankStructure,
    TRPSError,
    validate_prediction,
)

FIXTURES = (
    "example1_x1.csv",
    "example1_x2.csv",
    "example1_outcome.csv",
    "example1_outcome_swapped.csv",
    "example2_x3.csv",
    "example2_x4.csv",
    "example2_outcome.csv",
    "example2_outcome_swapped.csv",
    "wc2018_structure.csv",
    "wc2018_flat.csv",
    "wc2018_outcome.csv",
)


class ParseError(TRPSError):
    """A file could not be parsed into the expected layout."""


def _rows(source) -> list[list[str]]:
    text = source.read() if hasattr(source, "read") else Path(source).read_text(encoding="utf-8-sig")
    rows = [[c.strip() for c in row] for row in csv.reader(io.StringIO(text))]
    return [r for r in rows if r and any(r) and not r[0].startswith("#")]


def _float(cell: str, where: str) -> float:
    try:
        return float(cell)
    except ValueError:
        raise ParseError(f"{where}: {cell!r} is not a number") from None


def read_structure(source) -> RankStructure:
    """``rank_label,capacity`` rows (header optional)."""
    rows = _rows(source)
    if rows and rows[0][:2] == ["rank_label", "capacity"]:
        rows = rows[1:]
    try:
        return RankStructure(tuple(r[0] for r in rows), tuple(int(r[1]) for r in rows))
    except (IndexError, ValueError) as e:
        raise ParseError(f"bad rank structure file: {e}") from None


def read_prediction(source, tol: float = SUM_TOL, renormalize: bool = False) -> PredictionMatrix:
    rows = _rows(source)
    if not rows or rows[0][:2] != ["rank_label", "capacity"]:
        raise ParseError("prediction file must start with a 'rank_label,capacity,<teams...>' header")
    teams = rows[0][2:]
    if not teams:
        raise ParseError("prediction file names no teams")
    if len(set(teams)) != len(teams):
        raise ParseError("duplicate team labels in header")
    labels, caps, probs = [], [], []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(teams) + 2:
            raise ParseError(f"line {i}: expected {len(teams) + 2} cells, got {len(row)}")
        labels.append(row[0])
        try:
            caps.append(int(row[1]))
        except ValueError:
            raise ParseError(f"line {i}: capacity {row[1]!r} is not an integer") from None
        probs.append([_float(c, f"line {i}") for c in row[2:]])
    structure = RankStructure(tuple(labels), tuple(caps))
    return validate_prediction(np.array(probs), structure, teams, tol=tol, renormalize=renormalize)


def format_prediction(X: PredictionMatrix) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rank_label", "capacity", *X.team_labels])
    for label, cap, row in zip(X.structure.labels, X.structure.capacities, X.probs):
        w.writerow([label, cap, *(repr(float(p)) for p in row)])
    return buf.getvalue()


def write_prediction(X: PredictionMatrix, path) -> None:
    Path(path).write_text(format_prediction(X), encoding="utf-8")


def read_outcome(source, structure: RankStructure) -> Outcome:
    rows = _rows(source)
    if rows and rows[0][:2] == ["team", "rank_label"]:
        rows = rows[1:]
    assignment = {}
    for i, row in enumerate(rows, start=1):
        if len(row) < 2:
            raise ParseError(f"outcome row {i}: expected 'team,rank_label'")
        team, label = row[0], row[1]
        if team in assignment:
            raise ParseError(f"team {team!r} listed twice")
        assignment[team] = structure.index(label)
    return Outcome(structure, assignment)


def format_outcome(O: Outcome) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["team", "rank_label"])
    for team, cat in O.assignment.items():
        w.writerow([team, O.structure.labels[cat]])
    return buf.getvalue()


def read_numbers(source) -> list[float]:
    """Numbers separated by commas, whitespace or newlines."""
    text = source.read() if hasattr(source, "read") else Path(source).read_text(encoding="utf-8")
    cells = [c for line in text.splitlines() if not line.lstrip().startswith("#")
             for c in line.replace(",", " ").split()]
    return [_float(c, str(source)) for c in cells]


def read_prediction_dir(directory) -> dict[str, PredictionMatrix]:
    """All ``*.csv`` prediction files in a directory, keyed by file stem."""
    d = Path(directory)
    if not d.is_dir():
        raise FileNotFoundError(f"not a directory: {d}")
    out = {p.stem: read_prediction(p) for p in sorted(d.glob("*.csv"))}
    if not out:
        raise ParseError(f"no prediction files in {d}")
    return out


def rows_to_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False)


def fixture_path(name: str) -> Path:
    if name not in FIXTURES:
        raise TRPSError(f"unknown fixture {name!r}; available: {', '.join(FIXTURES)}")
    return Path(str(resources.files("trps") / "data" / name))


def load_fixture_prediction(name: str) -> PredictionMatrix:
    return read_prediction(fixture_path(name))


def load_fixture_outcome(name: str, structure: RankStructure) -> Outcome:
    return read_outcome(fixture_path(name), structure)
