"""CSV loading and validation for the wormsim output schemas.

The renderer is a pure consumer of the four CSV files an experiment run
emits; this module parses them into typed rows and maps (topology, mac)
pairs onto the series labels used in figure legends.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

SCHEMAS = {
    "prevalence.csv": [
        "name", "N", "topology", "mac", "lambda", "graph_replica",
        "prevalence_mean", "prevalence_conditional", "susceptibility",
        "std_error", "runs",
    ],
    "timeseries.csv": ["name", "N", "topology", "mac", "lambda", "t", "mean_i_frac", "mean_r_frac"],
    "thresholds.csv": [
        "name", "N", "topology", "mac", "method", "lambda_c", "uncertainty",
        "kappa_c", "mean_degree", "mean_field_lambda_c",
    ],
    "metrics.csv": [
        "name", "N", "topology", "graph_replica", "mean_degree", "clustering",
        "connected", "giant_frac",
    ],
}

_INT_COLUMNS = {"N", "graph_replica", "runs", "t"}
_STR_COLUMNS = {"name", "topology", "mac", "method", "connected"}

RG = "RG"
RGG = "RGG"
RGG_MAC = "RGG+MAC"
ALL_SERIES = (RG, RGG, RGG_MAC)


class DataError(ValueError):
    """Input CSVs are missing, malformed, or lack a required series."""


def series_label(topology: str, mac: str) -> str:
    if topology == "er-matched":
        return RG
    return RGG_MAC if mac == "on" else RGG


@dataclass
class Dataset:
    """Parsed rows of the CSV files a figure needs."""

    input_dir: Path
    tables: dict[str, list[dict]] = field(default_factory=dict)

    def rows(self, table: str) -> list[dict]:
        return self.tables[table]


def load_dataset(input_dir, needed: tuple[str, ...]) -> Dataset:
    """Read and validate the named CSV files from an output directory."""
    root = Path(input_dir)
    ds = Dataset(input_dir=root)
    for fname in needed:
        path = root / fname
        if not path.exists():
            raise DataError(f"missing input file: {path}")
        ds.tables[fname] = _read_table(path, fname)
    return ds


def _read_table(path: Path, fname: str) -> list[dict]:
    expected = SCHEMAS[fname]
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if header != expected:
            missing = [c for c in expected if c not in header]
            raise DataError(
                f"{path}: header mismatch; missing columns {missing}" if missing
                else f"{path}: header order differs from the schema"
            )
        rows = []
        for lineno, values in enumerate(reader, start=2):
            if len(values) != len(expected):
                raise DataError(f"{path}:{lineno}: expected {len(expected)} fields")
            row: dict = {}
            for key, value in zip(expected, values):
                if key in _STR_COLUMNS:
                    row[key] = value
                elif key in _INT_COLUMNS:
                    try:
                        row[key] = int(value)
                    except ValueError:
                        raise DataError(f"{path}:{lineno}: {key} is not an integer: {value!r}") from None
                else:
                    try:
                        row[key] = float(value)
                    except ValueError:
                        raise DataError(f"{path}:{lineno}: {key} is not a number: {value!r}") from None
            row["series"] = series_label(row.get("topology", ""), row.get("mac", ""))
            rows.append(row)
    return rows


def mean_degree_by_graph(metrics_rows: list[dict]) -> dict[tuple[str, int], float]:
    """Replica-averaged measured mean degree per (name, N)."""
    acc: dict[tuple[str, int], list[float]] = {}
    for row in metrics_rows:
        acc.setdefault((row["name"], row["N"]), []).append(row["mean_degree"])
    return {key: sum(vals) / len(vals) for key, vals in acc.items()}
