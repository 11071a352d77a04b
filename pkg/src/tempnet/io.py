"""Run outputs on disk and full-state snapshots.

A run directory holds ``series.csv`` (one row per step, columns in
:func:`tempnet.engine.series_columns` order), ``summary.json``,
``ecf.json``, ``degree_strata.json`` and ``effective_config.json``.
JSON is written with sorted keys so identical runs give identical bytes.
"""

from __future__ import annotations

import csv
import io
import json
import os
from pathlib import Path
from typing import Union

import numpy as np

from .config import ConfigError, SimConfig, dump_config, from_dict, parse_config
from .diagnostics import RunOutput
from .engine import Recorder, SimState
from .sampling import SampleState
from .spatial import Groups
from .state import Edges, Population

SNAPSHOT_FORMAT = "tempnet-snapshot"
SNAPSHOT_VERSION = 1

PathLike = Union[str, os.PathLike]


class SnapshotError(ValueError):
    pass


class OutputError(OSError):
    pass


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _write_text(path: Path, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _read_text(path: Path) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc.strerror or exc}") from exc


# -- series CSV -----------------------------------------------------------------

def series_csv(run: RunOutput) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(run.columns)
    for row in zip(*(run.series[c] for c in run.columns)):
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _parse_cell(s: str):
    try:
        return int(s)
    except ValueError:
        return float(s)


def parse_series_csv(text: str) -> tuple[list[str], dict[str, list]]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ValueError("empty series file")
    header = rows[0]
    series = {c: [] for c in header}
    for k, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ValueError(f"line {k}: expected {len(header)} fields, got {len(row)}")
        for c, v in zip(header, row):
            series[c].append(_parse_cell(v))
    return header, series


# -- run directories --------------------------------------------------------------

def write_outputs(run: RunOutput, out_dir: PathLike) -> list[Path]:
    """Write one run's files into ``out_dir`` (created if needed). Returns the paths written."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create {out}: {exc.strerror or exc}") from exc
    files = {
        "series.csv": series_csv(run),
        "summary.json": _dumps({"seed": run.seed, "horizon": run.horizon, **run.summary}),
        "ecf.json": _dumps(run.ecf),
        "degree_strata.json": _dumps(run.degree_strata),
        "effective_config.json": dump_config(from_dict(run.config)) if run.config else _dumps({}),
    }
    paths = []
    for name, text in files.items():
        _write_text(out / name, text)
        paths.append(out / name)
    return paths


def read_run(run_dir: PathLike) -> RunOutput:
    d = Path(run_dir)
    try:
        columns, series = parse_series_csv(_read_text(d / "series.csv"))
    except ValueError as exc:
        raise OutputError(f"{d / 'series.csv'}: {exc}") from exc
    summary = json.loads(_read_text(d / "summary.json")) if (d / "summary.json").exists() else {}
    config = json.loads(_read_text(d / "effective_config.json")) if (d / "effective_config.json").exists() else {}
    return RunOutput(seed=int(summary.get("seed", -1)), columns=columns, series=series,
                     summary=summary, config=config)


def read_runs(path: PathLike) -> list[RunOutput]:
    """A single run directory, or a directory of replicate subdirectories (sorted by name)."""
    p = Path(path)
    if not p.is_dir():
        raise OutputError(f"not a directory: {p}")
    if (p / "series.csv").exists():
        return [read_run(p)]
    subs = sorted(q for q in p.iterdir() if (q / "series.csv").exists())
    if not subs:
        raise OutputError(f"no run directories under {p}")
    return [read_run(q) for q in subs]


def load_config(path: PathLike, scenario=None) -> SimConfig:
    return parse_config(_read_text(Path(path)), scenario)


# -- snapshots ----------------------------------------------------------------------

def snapshot_dict(state: SimState) -> dict:
    return {
        "format": SNAPSHOT_FORMAT,
        "version": SNAPSHOT_VERSION,
        "config": state.config.to_dict(),
        "t": state.t,
        "seeded": state.seeded,
        "rng": state.rng.bit_generator.state,
        "population": state.pop.to_dict(),
        "groups": state.groups.to_dict(),
        "edges": state.edges.to_dict(),
        "samples": [s.to_dict() for s in state.samples],
        "recorder": state.recorder.to_dict(),
    }


def dumps_snapshot(state: SimState) -> str:
    return _dumps(snapshot_dict(state))


def loads_snapshot(text: str) -> SimState:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SnapshotError(f"snapshot parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(d, dict) or d.get("format") != SNAPSHOT_FORMAT:
        raise SnapshotError("not a snapshot document")
    if d.get("version") != SNAPSHOT_VERSION:
        raise SnapshotError(f"snapshot version {d.get('version')!r} is not supported "
                            f"(this build reads version {SNAPSHOT_VERSION})")
    try:
        config = from_dict(d["config"]).validate()
        rng = np.random.Generator(getattr(np.random, d["rng"]["bit_generator"])())
        rng.bit_generator.state = d["rng"]
        return SimState(
            config=config, t=int(d["t"]), pop=Population.from_dict(d["population"]),
            groups=Groups.from_dict(d["groups"]), edges=Edges.from_dict(d["edges"]),
            samples=[SampleState.from_dict(c, s) for c, s in zip(config.designs, d["samples"])],
            rng=rng, recorder=Recorder.from_dict(config, d["recorder"]), seeded=bool(d["seeded"]))
    except (KeyError, TypeError, AttributeError) as exc:
        raise SnapshotError(f"snapshot is missing or has malformed field: {exc}") from exc
    except ConfigError as exc:
        raise SnapshotError(f"snapshot config invalid: {exc}") from exc


def save_snapshot(state: SimState, path: PathLike) -> None:
    _write_text(Path(path), dumps_snapshot(state))


def load_snapshot(path: PathLike) -> SimState:
    return loads_snapshot(_read_text(Path(path)))
