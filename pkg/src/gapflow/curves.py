"""Sampled gap-probability curves and their CSV/JSON serialisation."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .ensembles import EnsembleSpec

METHODS = ("fredholm", "tw-ode", "painleve", "mc")
COLUMN_ORDER = ("s", "E2", "sigma", "q", "p", "u", "v", "w", "R", "stderr")


def fmt(x) -> str:
    """17 significant digits, locale independent."""
    return format(float(x), ".17g")


@dataclass
class GapCurve:
    """E_2 and auxiliary quantities sampled at strictly monotone ``s``."""

    method: str
    spec: EnsembleSpec
    columns: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        self.columns = {k: np.asarray(v, dtype=float) for k, v in self.columns.items()}
        s = self.columns["s"]
        if s.size > 1:
            d = np.diff(s)
            if not (np.all(d > 0) or np.all(d < 0)):
                raise ValueError("s must be strictly monotone within a curve")
        if "E2" in self.columns:
            e = self.columns["E2"]
            if np.any(e < -1e-12) or np.any(e > 1 + 1e-12):
                raise ValueError("E2 outside [0, 1]")

    @property
    def s(self) -> np.ndarray:
        return self.columns["s"]

    @property
    def E2(self) -> np.ndarray:
        return self.columns["E2"]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    def __len__(self) -> int:
        return len(self.s)

    def header(self) -> list[str]:
        known = [c for c in COLUMN_ORDER if c in self.columns]
        return known + sorted(c for c in self.columns if c not in COLUMN_ORDER)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        cols = self.header()
        writer.writerow(cols)
        for i in range(len(self)):
            writer.writerow([fmt(self.columns[c][i]) for c in cols])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(
            {
                "method": self.method,
                "ensemble": self.spec.as_dict(),
                "meta": self.meta,
                "columns": self.header(),
                "rows": [[float(self.columns[c][i]) for c in self.header()] for i in range(len(self))],
            },
            indent=2,
        )


def read_csv(text: str) -> dict[str, np.ndarray]:
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    data = np.array([[float(v) for v in r] for r in body]) if body else np.empty((0, len(header)))
    return {h: data[:, i] for i, h in enumerate(header)}
