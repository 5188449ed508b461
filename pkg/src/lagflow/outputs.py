"""Bit-stable writers and readers for series, checkpoints and reports."""

from __future__ import annotations

import dataclasses
import json
import math
from pathlib import Path

import numpy as np

from lagflow import geom, lagrangian as lg

FLOAT = "%.17g"


def series_columns(series: dict) -> list:
    return list(series)


def write_series(path, series: dict):
    cols = list(series)
    rows = np.column_stack([np.asarray(series[c], dtype=float) for c in cols]) if cols else np.empty((0, 0))
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            fh.write(",".join(FLOAT % v for v in row) + "\n")


def read_series(path) -> dict:
    with open(path) as fh:
        cols = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return {c: data[:, i] for i, c in enumerate(cols)}


def write_checkpoint(path, state):
    cfg = state.config
    lines = [f"# variant: {cfg.kind}", f"# t: {FLOAT % state.t}", f"# steps: {state.steps}"]
    if isinstance(cfg, lg.Equivariant):
        lines.append(f"# origin_tol: {FLOAT % cfg.origin_tol}")
    for i, c in enumerate(cfg.curves):
        lines.append(f"# curve {i + 1} closed={'true' if c.closed else 'false'} n={len(c)}")
        lines.extend(f"{FLOAT % p} {FLOAT % q}" for p, q in c.points)
    Path(path).write_text("\n".join(lines) + "\n")


def read_checkpoint(path):
    """Return ``(t, steps, config)`` from a checkpoint file."""
    header, curves, current = {}, [], None
    for line in Path(path).read_text().splitlines():
        if line.startswith("# curve"):
            parts = dict(tok.split("=") for tok in line.split()[3:])
            current = {"closed": parts["closed"] == "true", "n": int(parts["n"]), "pts": []}
            curves.append(current)
        elif line.startswith("#"):
            key, _, val = line[1:].partition(":")
            header[key.strip()] = val.strip()
        elif line.strip():
            current["pts"].append([float(x) for x in line.split()])
    built = []
    for c in curves:
        if len(c["pts"]) != c["n"]:
            raise ValueError(f"{path}: curve has {len(c['pts'])} points, header says {c['n']}")
        built.append(geom.DiscreteCurve(np.array(c["pts"]), c["closed"]))
    kind = header["variant"]
    if kind == "planar":
        cfg = lg.Planar(built[0])
    elif kind == "product":
        cfg = lg.Product(tuple(built))
    elif kind == "equivariant":
        cfg = lg.Equivariant(built[0], float(header.get("origin_tol", 1e-6)))
    else:
        raise ValueError(f"{path}: unknown variant {kind!r}")
    return float(header["t"]), int(header.get("steps", 0)), cfg


def to_jsonable(obj):
    if isinstance(obj, lg.CycleId):
        return obj.name
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, obj):
    Path(path).write_text(json.dumps(to_jsonable(obj), indent=2, sort_keys=False, allow_nan=False) + "\n")
