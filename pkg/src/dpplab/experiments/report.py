"""Convergence reports: CSV with a one-line JSON metadata header."""

from __future__ import annotations

import csv
import io
import json
import math
import platform
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

ERROR_RTOL = 1e-12


class ReportIntegrityError(ValueError):
    """A stored report fails its recomputed error column."""


def software_versions() -> dict:
    from .. import __version__

    return {"dpplab": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


@dataclass
class ConvergenceReport:
    """Rows of per-n values. Rows with ``value`` and ``limit`` columns carry ``error = |value - limit|``."""

    scenario: str
    columns: list[str]
    rows: list[dict] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add(self, **row) -> None:
        if "value" in row and "limit" in row and "error" not in row:
            row["error"] = abs(row["value"] - row["limit"])
        self.rows.append(row)

    def column(self, name: str) -> np.ndarray:
        return np.array([r.get(name, np.nan) for r in self.rows], dtype=float)

    def errors_decreasing(self, name: str = "error") -> bool:
        e = self.column(name)
        return bool(np.all(np.diff(e) < 0))

    def validate(self) -> None:
        for i, r in enumerate(self.rows):
            if {"value", "limit", "error"} <= set(r):
                expect = abs(float(r["value"]) - float(r["limit"]))
                if not math.isclose(float(r["error"]), expect, rel_tol=ERROR_RTOL, abs_tol=1e-300):
                    raise ReportIntegrityError(f"row {i}: stored error {r['error']!r} != recomputed {expect!r}")

    def to_csv(self) -> str:
        self.validate()
        buf = io.StringIO()
        buf.write("# " + json.dumps({"scenario": self.scenario, **self.metadata}, sort_keys=True, default=str) + "\n")
        w = csv.DictWriter(buf, fieldnames=self.columns, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in r.items()})
        return buf.getvalue()

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def from_csv(cls, text: str, expected_hash: str | None = None) -> "ConvergenceReport":
        head, _, body = text.partition("\n")
        if not head.startswith("# "):
            raise ReportIntegrityError("missing JSON metadata header")
        meta = json.loads(head[2:])
        scenario = meta.pop("scenario")
        reader = csv.DictReader(io.StringIO(body))
        rows = []
        for raw in reader:
            row = {}
            for k, v in raw.items():
                try:
                    row[k] = float(v) if k != "label" else v
                except (TypeError, ValueError):
                    row[k] = v
            rows.append(row)
        rep = cls(scenario, list(reader.fieldnames or []), rows, meta)
        rep.validate()
        if expected_hash is not None and meta.get("config_hash") != expected_hash:
            raise ReportIntegrityError("config hash mismatch")
        return rep

    @classmethod
    def load(cls, path: str | Path, expected_hash: str | None = None) -> "ConvergenceReport":
        return cls.from_csv(Path(path).read_text(), expected_hash)

    def table(self) -> str:
        """Plain-text rendering for the terminal."""
        lines = ["  ".join(f"{c:>14s}" for c in self.columns)]
        for r in self.rows:
            cells = []
            for c in self.columns:
                v = r.get(c, "")
                cells.append(f"{v:14.6e}" if isinstance(v, (float, np.floating)) else f"{str(v):>14s}")
            lines.append("  ".join(cells))
        return "\n".join(lines)
