"""Simulation trace records and lossless CSV round-tripping.

Column layout (exact header): t,mu,k,blocked,mu_bar,norm_x,y_1..y_m,x_1..x_n
with floats printed at 17 significant digits so a written trace re-reads
bit for bit.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import TraceFormatError

__all__ = ["TraceRecord", "SimulationTrace"]


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


@dataclass(frozen=True)
class TraceRecord:
    """State of the closed loop at one realized time point.

    mu is the graininess applied at this point (0 on dense samples);
    blocked marks scattered sampling; mu_bar is the policy ceiling at
    the record's gain.
    """

    t: float
    mu: float
    k: float
    blocked: bool
    mu_bar: float
    y: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float).reshape(-1))
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float).reshape(-1))

    @property
    def norm_x(self) -> float:
        return float(np.linalg.norm(self.x))


class SimulationTrace:
    """Ordered trace records plus column access and CSV (de)serialization."""

    def __init__(self, records: Sequence[TraceRecord]):
        if len(records) == 0:
            raise TraceFormatError("trace has no records")
        m = len(records[0].y)
        n = len(records[0].x)
        for rec in records:
            if len(rec.y) != m or len(rec.x) != n:
                raise TraceFormatError("inconsistent record dimensions")
        self.records = list(records)
        self.m = m
        self.n = n

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterable[TraceRecord]:
        return iter(self.records)

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.records])

    @property
    def mus(self) -> np.ndarray:
        return np.array([r.mu for r in self.records])

    @property
    def gains(self) -> np.ndarray:
        return np.array([r.k for r in self.records])

    @property
    def norms(self) -> np.ndarray:
        return np.array([r.norm_x for r in self.records])

    @property
    def outputs(self) -> np.ndarray:
        return np.array([r.y for r in self.records])

    def validate(self):
        """Raise TraceFormatError on any record-invariant violation."""
        prev_t = -np.inf
        prev_k = -np.inf
        for i, rec in enumerate(self.records):
            if rec.t <= prev_t:
                raise TraceFormatError(f"record {i}: time {rec.t} not strictly increasing")
            if rec.k < prev_k:
                raise TraceFormatError(f"record {i}: gain {rec.k} decreased")
            if rec.mu < 0:
                raise TraceFormatError(f"record {i}: negative graininess {rec.mu}")
            if rec.blocked and rec.mu > rec.mu_bar * (1 + 1e-12):
                raise TraceFormatError(
                    f"record {i}: blocked graininess {rec.mu} exceeds ceiling {rec.mu_bar}"
                )
            prev_t, prev_k = rec.t, rec.k

    def y_squared_delta_integral(self, t_from: float | None = None) -> float:
        """Delta integral of ||y||^2 over the trace (from t_from if given).

        Scattered records contribute mu * ||y||^2; consecutive dense
        samples are integrated with the trapezoid rule.
        """
        total = 0.0
        recs = self.records
        for i in range(len(recs) - 1):
            rec = recs[i]
            if t_from is not None and rec.t < t_from:
                continue
            y2 = float(rec.y @ rec.y)
            if rec.mu > 0:
                total += rec.mu * y2
            else:
                nxt = recs[i + 1]
                y2_next = float(nxt.y @ nxt.y)
                total += 0.5 * (nxt.t - rec.t) * (y2 + y2_next)
        return total

    def header(self) -> list:
        return (
            ["t", "mu", "k", "blocked", "mu_bar", "norm_x"]
            + [f"y_{j + 1}" for j in range(self.m)]
            + [f"x_{j + 1}" for j in range(self.n)]
        )

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.header())
            for rec in self.records:
                row = [
                    _fmt(rec.t),
                    _fmt(rec.mu),
                    _fmt(rec.k),
                    "1" if rec.blocked else "0",
                    _fmt(rec.mu_bar),
                    _fmt(rec.norm_x),
                ]
                row += [_fmt(v) for v in rec.y]
                row += [_fmt(v) for v in rec.x]
                writer.writerow(row)

    @classmethod
    def read_csv(cls, path) -> "SimulationTrace":
        try:
            with open(path, newline="") as fh:
                reader = csv.reader(fh)
                header = next(reader, None)
                if header is None:
                    raise TraceFormatError(f"{path}: empty file")
                m = sum(1 for name in header if name.startswith("y_"))
                n = sum(1 for name in header if name.startswith("x_"))
                expected = ["t", "mu", "k", "blocked", "mu_bar", "norm_x"] + [
                    f"y_{j + 1}" for j in range(m)
                ] + [f"x_{j + 1}" for j in range(n)]
                if header != expected or m == 0 or n == 0:
                    raise TraceFormatError(f"{path}: unexpected header {header}")
                records = []
                for lineno, row in enumerate(reader, start=2):
                    if len(row) != len(header):
                        raise TraceFormatError(
                            f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}"
                        )
                    try:
                        values = [float(v) for v in row]
                    except ValueError as exc:
                        raise TraceFormatError(f"{path}:{lineno}: {exc}") from exc
                    records.append(
                        TraceRecord(
                            t=values[0],
                            mu=values[1],
                            k=values[2],
                            blocked=values[3] != 0.0,
                            mu_bar=values[4],
                            y=np.array(values[6 : 6 + m]),
                            x=np.array(values[6 + m : 6 + m + n]),
                        )
                    )
        except OSError as exc:
            raise TraceFormatError(f"cannot read trace: {exc}") from exc
        if not records:
            raise TraceFormatError(f"{path}: no data rows")
        return cls(records)
