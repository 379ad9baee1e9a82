"""Versioned CSV/JSON file formats used by the CLI.

Data CSVs are long format (id, time, value) with optional ``row``/
``col`` lattice columns and an optional numeric ``index`` column; the
first line is a ``# schema_version: MAJOR.MINOR`` comment.  JSON files
carry a top-level ``schema_version`` field.  Readers reject unknown
major versions.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import DataError
from .model import Curve, LongitudinalDataset
from .simgen import SimulationTruth

SCHEMA_VERSION = "1.0"

__all__ = ["SCHEMA_VERSION", "write_dataset_csv", "read_dataset_csv",
           "write_truth_json", "read_truth_json", "write_result_json",
           "read_result_json"]


def _check_version(version: str, source: str) -> None:
    major = str(version).split(".")[0]
    if major != SCHEMA_VERSION.split(".")[0]:
        raise DataError(
            f"{source}: unsupported schema_version {version!r} "
            f"(this reader handles major version {SCHEMA_VERSION.split('.')[0]})"
        )


def write_dataset_csv(data: LongitudinalDataset, path) -> None:
    rows = []
    for c in data.curves:
        for t, y in zip(c.times, c.values):
            row = {"id": c.id, "time": t, "value": y}
            if data.coordinates is not None:
                row["row"], row["col"] = data.coordinates[c.id]
            if data.indices is not None:
                row["index"] = data.indices[c.id]
            rows.append(row)
    df = pd.DataFrame(rows)
    with open(path, "w") as fh:
        fh.write(f"# schema_version: {SCHEMA_VERSION}\n")
        df.to_csv(fh, index=False)


def read_dataset_csv(path) -> LongitudinalDataset:
    path = Path(path)
    with open(path) as fh:
        first = fh.readline()
    if first.startswith("# schema_version:"):
        _check_version(first.split(":", 1)[1].strip(), str(path))
    df = pd.read_csv(path, comment="#", dtype={"id": str})
    for col in ("id", "time", "value"):
        if col not in df.columns:
            raise DataError(f"{path}: missing required column {col!r}")
    bad = df.index[~np.isfinite(df["time"]) | ~np.isfinite(df["value"])]
    if len(bad):
        raise DataError(f"{path}: non-numeric data in row {bad[0] + 2}")
    out_of_range = df.index[(df["time"] < 0) | (df["time"] > 1)]
    if len(out_of_range):
        raise DataError(
            f"{path}: time outside [0, 1] in row {out_of_range[0] + 2}")

    curves = []
    coordinates = {} if {"row", "col"} <= set(df.columns) else None
    indices = {} if "index" in df.columns else None
    for cid, g in df.groupby("id", sort=False):
        g = g.sort_values("time")
        curves.append(Curve(id=str(cid), times=g["time"].to_numpy(),
                            values=g["value"].to_numpy()))
        if coordinates is not None:
            coordinates[str(cid)] = (int(g["row"].iloc[0]),
                                     int(g["col"].iloc[0]))
        if indices is not None:
            indices[str(cid)] = float(g["index"].iloc[0])
    return LongitudinalDataset(curves=curves, coordinates=coordinates,
                               indices=indices)


def write_truth_json(truth: SimulationTruth, generator: dict, path) -> None:
    payload = {
        "schema_version": SCHEMA_VERSION,
        "partition": truth.partition,
        "mean_values": {k: list(map(float, v))
                        for k, v in truth.mean_values.items()},
        "generator": generator,
    }
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True))


def read_truth_json(path) -> dict:
    payload = json.loads(Path(path).read_text())
    _check_version(payload.get("schema_version", "?"), str(path))
    return payload


def write_result_json(payload: dict, path) -> None:
    payload = dict(payload)
    payload["schema_version"] = SCHEMA_VERSION
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True))


def read_result_json(path) -> dict:
    payload = json.loads(Path(path).read_text())
    _check_version(payload.get("schema_version", "?"), str(path))
    return payload
