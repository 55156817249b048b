"""Small constructors shared by the test modules."""
import numpy as np

from rsindex.ingest import TimeGrid, parse_month
from rsindex.panel import IndexPanel


def make_panel(F, start="2000-01", codes=None):
    F = np.asarray(F, dtype=float)
    T, p = F.shape
    codes = codes if codes is not None else [f"R{i}" for i in range(p)]
    return IndexPanel(TimeGrid(parse_month(start), T), list(codes), F)


def random_panel(rng, T, p):
    F = np.cumsum(rng.normal(0, 0.02, size=(T, p)), axis=0)
    return F - F[0]
