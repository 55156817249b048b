"""Balanced region-by-month index panel and its CSV form."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .ingest import InputError, TimeGrid, parse_month


@dataclass
class IndexPanel:
    """``T x p`` matrix of log index values, one region per column.

    The anchor month is row 0, where every column is 0 (index level 1).
    """

    grid: TimeGrid
    region_codes: list[str]
    F: np.ndarray

    def __post_init__(self):
        self.F = np.asarray(self.F, dtype=float)
        if self.F.shape != (self.grid.T, len(self.region_codes)):
            raise ValueError(
                f"panel shape {self.F.shape} does not match "
                f"T={self.grid.T}, p={len(self.region_codes)}"
            )

    @property
    def T(self) -> int:
        return self.F.shape[0]

    @property
    def p(self) -> int:
        return self.F.shape[1]

    def column(self, code: str) -> np.ndarray:
        return self.F[:, self.region_codes.index(code)]

    def levels(self) -> np.ndarray:
        return np.exp(self.F)

    def to_csv(self) -> str:
        """Index levels (``exp`` of the log panel) with a leading ``month`` column."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["month", *self.region_codes])
        for label, row in zip(self.grid.labels(), self.levels()):
            w.writerow([label, *(repr(float(v)) for v in row)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text_or_stream) -> "IndexPanel":
        stream = io.StringIO(text_or_stream) if isinstance(text_or_stream, str) else text_or_stream
        rows = list(csv.reader(stream))
        if not rows or rows[0][:1] != ["month"]:
            raise InputError("panel CSV must start with a 'month' column")
        header, body = rows[0], [r for r in rows[1:] if r]
        if len(body) < 2:
            raise InputError("panel CSV needs at least two months")
        grid = TimeGrid.from_window(body[0][0], body[-1][0])
        if grid.labels() != [r[0] for r in body]:
            raise InputError("panel months are not a contiguous monthly sequence")
        try:
            levels = np.array([[float(v) for v in r[1:]] for r in body])
        except ValueError as exc:
            raise InputError(f"non-numeric panel value: {exc}") from exc
        if np.any(levels <= 0) or not np.all(np.isfinite(levels)):
            raise InputError("panel index levels must be positive and finite")
        return cls(grid, header[1:], np.log(levels))

    @classmethod
    def read(cls, path) -> "IndexPanel":
        try:
            with open(path, newline="", encoding="utf-8") as fh:
                return cls.from_csv(fh)
        except OSError as exc:
            raise InputError(f"cannot read panel file {path}: {exc}") from exc


__all__ = ["IndexPanel", "parse_month"]
