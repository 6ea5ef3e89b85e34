"""Columnar experiment output with a reproducibility header."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParameterError


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def _fmt_param(v) -> str:
    if v is None:
        return "auto"
    if isinstance(v, (list, tuple, np.ndarray)):
        return ",".join(_fmt_param(x) for x in v)
    if isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool):
        return _fmt(v)
    return str(v)


@dataclass
class ResultTable:
    """Rectangular numeric table plus the parameters that produced it.

    Rows are tuples of numbers; ``params`` is written verbatim into a single
    ``# params:`` header line so every CSV is self-describing.
    """

    columns: list[str]
    rows: list[tuple] = field(default_factory=list)
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.columns = list(self.columns)
        for r in self.rows:
            if len(r) != len(self.columns):
                raise ParameterError(
                    f"row of length {len(r)} does not match {len(self.columns)} columns"
                )

    def append(self, *values):
        if len(values) != len(self.columns):
            raise ParameterError(
                f"row of length {len(values)} does not match {len(self.columns)} columns"
            )
        self.rows.append(tuple(values))

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise KeyError(name)
        j = self.columns.index(name)
        return np.array([float(r[j]) for r in self.rows])

    def to_csv(self) -> str:
        buf = io.StringIO()
        header = "; ".join(f"{k}={_fmt_param(v)}" for k, v in self.params.items())
        buf.write(f"# params: {header}\n")
        buf.write(",".join(self.columns) + "\n")
        for r in self.rows:
            buf.write(",".join(_fmt(v) for v in r) + "\n")
        return buf.getvalue()

    def write_csv(self, path) -> Path:
        path = Path(path)
        with open(path, "w", newline="\n") as fh:
            fh.write(self.to_csv())
        return path

    @classmethod
    def from_csv(cls, text: str) -> "ResultTable":
        params = {}
        lines = text.splitlines()
        body = []
        for line in lines:
            if line.startswith("# params:"):
                for item in line[len("# params:"):].split(";"):
                    item = item.strip()
                    if item:
                        k, _, v = item.partition("=")
                        params[k.strip()] = v.strip()
            elif line.startswith("#") or not line.strip():
                continue
            else:
                body.append(line)
        if not body:
            raise ParameterError("CSV has no header row")
        columns = body[0].split(",")
        rows = [tuple(float(x) for x in line.split(",")) for line in body[1:]]
        return cls(columns, rows, params)

    @classmethod
    def read_csv(cls, path) -> "ResultTable":
        return cls.from_csv(Path(path).read_text())
