"""Serialization of trajectories, reports and sweeps, plus obliquity ingestion.

Floats are written with 17 significant digits so that a CSV read back with
:func:`read_trajectory_csv` reproduces the in-memory arrays bit for bit.
Metadata (seed, model, parameters) goes into ``#`` comment lines ahead of
the header row.
"""
from __future__ import annotations

import csv
import io as _io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, TextIO

import numpy as np

from .core import ForcingSpec, ParameterError, Trajectory

__all__ = [
    "IngestionError",
    "ObliquitySeries",
    "TAU_PER_KYR",
    "fmt_float",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "trajectory_to_json",
    "trajectory_from_json",
    "SWEEP_COLUMNS",
    "FORCED_COLUMNS",
    "write_sweep_csv",
    "sweep_to_json",
    "write_forced_csv",
    "ingest_obliquity",
]

# one 41 kyr obliquity cycle maps to the forcing period 2 pi / (pi / 270) = 540
TAU_PER_KYR = 540.0 / 41.0

SWEEP_COLUMNS = ("lambda", "y_eq", "mu_eq", "eq_class", "cycle_kind",
                 "period", "y_min", "y_max", "mu_min", "mu_max")
FORCED_COLUMNS = ("tau", "y", "mu", "A_tau", "lambda_tau", "psi")


class IngestionError(ValueError):
    """Malformed input file; ``line`` is 1-based when known."""

    def __init__(self, msg: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


def fmt_float(v) -> str:
    if v is None:
        return ""
    v = float(v)
    if math.isnan(v):
        return ""
    return format(v, ".17g")


def _meta_lines(meta: Mapping) -> list[str]:
    return [f"# {k}={json.dumps(v, sort_keys=True)}\n" for k, v in meta.items()]


def _writer(out: TextIO):
    return csv.writer(out, lineterminator="\n")


# -- trajectories -----------------------------------------------------------

def write_trajectory_csv(out: TextIO, traj: Trajectory, columns: Iterable[str],
                         meta: Mapping | None = None) -> None:
    columns = list(columns)
    if len(columns) != traj.dim:
        raise ValueError(f"{len(columns)} column names for a {traj.dim}-dimensional trajectory")
    out.writelines(_meta_lines(meta or {}))
    w = _writer(out)
    w.writerow(["tau", *columns, "event"])
    mask = traj.event_mask()
    for t, row, ev in zip(traj.times, traj.states, mask):
        w.writerow([fmt_float(t), *map(fmt_float, row), "" if ev < 0 else str(ev)])


def read_trajectory_csv(source) -> tuple[Trajectory, list[str], dict]:
    """Inverse of :func:`write_trajectory_csv`.

    Event directions are not stored in CSV, so recovered events carry
    direction 0.
    """
    text = Path(source).read_text() if not hasattr(source, "read") else source.read()
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            meta[key] = json.loads(val) if val else None
        elif line:
            body.append(line)
    rows = list(csv.reader(body))
    if not rows or rows[0][0] != "tau" or rows[0][-1] != "event":
        raise IngestionError("missing 'tau,...,event' header row")
    columns = rows[0][1:-1]
    times, states, events = [], [], []
    for r in rows[1:]:
        t = float(r[0])
        times.append(t)
        states.append([float(v) for v in r[1:-1]])
        if r[-1]:
            events.append((t, int(r[-1]), 0))
    traj = Trajectory(np.array(times), np.array(states).reshape(len(times), len(columns)), events)
    return traj, columns, meta


def trajectory_to_json(traj: Trajectory, columns: Iterable[str], meta: Mapping | None = None) -> str:
    doc = dict(meta or {})
    doc.update(
        columns=list(columns),
        times=traj.times.tolist(),
        states=traj.states.tolist(),
        events=[[float(t), int(j), int(d)] for t, j, d in traj.events],
    )
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def trajectory_from_json(text: str) -> tuple[Trajectory, list[str], dict]:
    doc = json.loads(text)
    traj = Trajectory(np.array(doc.pop("times")), np.array(doc.pop("states")),
                      [tuple(e) for e in doc.pop("events")])
    return traj, doc.pop("columns"), doc


# -- sweeps and forced runs -------------------------------------------------

def _sweep_rows(diagram):
    for k, (lam, eq, cyc) in enumerate(zip(diagram.lambda_grid, diagram.equilibria, diagram.cycles)):
        if cyc is None or k in diagram.errors:
            cyc_cells = ["", "", "", "", "", ""]
        else:
            cyc_cells = [cyc.kind, *(fmt_float(v) for v in
                                     (cyc.period, cyc.y_min, cyc.y_max, cyc.mu_min, cyc.mu_max))]
        yield [fmt_float(lam), fmt_float(eq.y0), fmt_float(eq.mu0), eq.eq_class, *cyc_cells]


def write_sweep_csv(out: TextIO, diagram, meta: Mapping | None = None) -> None:
    out.writelines(_meta_lines(meta or {}))
    w = _writer(out)
    w.writerow(SWEEP_COLUMNS)
    w.writerows(_sweep_rows(diagram))


def sweep_to_json(diagram, meta: Mapping | None = None) -> str:
    rows = []
    for cells in _sweep_rows(diagram):
        row = dict(zip(SWEEP_COLUMNS, cells))
        for k in ("lambda", "y_eq", "mu_eq", "period", "y_min", "y_max", "mu_min", "mu_max"):
            row[k] = float(row[k]) if row[k] else None
        row["cycle_kind"] = row["cycle_kind"] or None
        rows.append(row)
    errors = {fmt_float(diagram.lambda_grid[k]): v for k, v in diagram.errors.items()}
    doc = dict(meta or {}, rows=rows, errors=errors)
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def write_forced_csv(out: TextIO, run, meta: Mapping | None = None) -> None:
    out.writelines(_meta_lines(meta or {}))
    w = _writer(out)
    w.writerow(FORCED_COLUMNS)
    cols = (run.times, run.states[:, 0], run.states[:, 1], run.A_tau, run.lambda_tau, run.psi)
    for vals in zip(*cols):
        w.writerow([fmt_float(v) for v in vals])


# -- obliquity --------------------------------------------------------------

@dataclass(frozen=True)
class ObliquitySeries:
    """Obliquity record: ``time_kyr`` (kyr before present) and degrees."""

    time_kyr: np.ndarray
    obliquity_deg: np.ndarray

    def scaled_A(self, A_bar: float, p: float) -> np.ndarray:
        lo, hi = self.obliquity_deg.min(), self.obliquity_deg.max()
        return A_bar + p * (2 * (self.obliquity_deg - lo) / (hi - lo) - 1)

    def forcing(self, base: ForcingSpec | None = None, *, A_bar: float | None = None,
                p: float | None = None, tau_per_kyr: float = TAU_PER_KYR) -> ForcingSpec:
        """A ForcingSpec whose A(tau) interpolates the scaled record.

        ``tau = time_kyr * tau_per_kyr``; rows are sorted by tau.
        """
        base = base or ForcingSpec()
        A_bar = base.A_bar if A_bar is None else A_bar
        p = base.p if p is None else p
        if not tau_per_kyr > 0:
            raise ParameterError("tau_per_kyr must be positive")
        tau = self.time_kyr * tau_per_kyr
        order = np.argsort(tau)
        table = tuple(zip(tau[order].tolist(), self.scaled_A(A_bar, p)[order].tolist()))
        return ForcingSpec(A_bar=A_bar, p=p, lambda_bar=base.lambda_bar, q=base.q,
                           omega=base.omega, theta=base.theta, table=table)


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def ingest_obliquity(source, bounds: tuple[float, float] = (20.0, 26.0)) -> ObliquitySeries:
    """Parse a two-column ``time_kyr, obliquity_deg`` CSV.

    A non-numeric first row is taken as a header.  Times must be strictly
    monotone (either direction) and obliquity inside ``bounds``.
    """
    text = Path(source).read_text() if not hasattr(source, "read") else source.read()
    rows = [(i, r) for i, r in enumerate(csv.reader(_io.StringIO(text)), start=1)
            if r and any(c.strip() for c in r)]
    if rows and not all(_is_number(c) for c in rows[0][1]):
        rows = rows[1:]
    times, obl = [], []
    for line, r in rows:
        if len(r) != 2:
            raise IngestionError(f"expected 2 columns, got {len(r)}", line)
        try:
            t, o = float(r[0]), float(r[1])
        except ValueError:
            raise IngestionError(f"non-numeric cell in {r!r}", line) from None
        if not (math.isfinite(t) and math.isfinite(o)):
            raise IngestionError("non-finite value", line)
        if not bounds[0] <= o <= bounds[1]:
            raise IngestionError(f"obliquity {o} outside [{bounds[0]}, {bounds[1]}]", line)
        if len(times) >= 2 and (t - times[-1]) * (times[1] - times[0]) <= 0:
            raise IngestionError("time column is not strictly monotone", line)
        if len(times) == 1 and t == times[0]:
            raise IngestionError("time column is not strictly monotone", line)
        times.append(t)
        obl.append(o)
    if len(times) < 2:
        raise IngestionError("need at least two data rows")
    obl_arr = np.array(obl)
    if obl_arr.max() == obl_arr.min():
        raise IngestionError("obliquity column is constant")
    return ObliquitySeries(np.array(times), obl_arr)
