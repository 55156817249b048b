"""Sales record parsing and repeat-sale pairing.

Sales CSV layout::

    property_id,price,sale_date,sa2_code,sa4_code[,lat,lon]

Dates are ISO ``YYYY-MM-DD``. Rows that fail validation are collected in a
rejects list (``row_number,reason``) instead of being dropped silently.
"""
from __future__ import annotations

import csv
import datetime as dt
import io
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, TextIO

DEFAULT_SCHEMA = {
    "property_id": "property_id",
    "price": "price",
    "sale_date": "sale_date",
    "region_code": "sa2_code",
    "parent_region_code": "sa4_code",
    "latitude": "lat",
    "longitude": "lon",
}
REQUIRED_FIELDS = ("property_id", "price", "sale_date", "region_code", "parent_region_code")


class InputError(ValueError):
    """Raised when an input file or stream cannot be used at all."""


@dataclass(frozen=True)
class SalesRecord:
    property_id: str
    price: float
    sale_date: dt.date
    region_code: str
    parent_region_code: str
    latitude: float | None = None
    longitude: float | None = None


@dataclass(frozen=True)
class RepeatSalePair:
    region_index: int
    first_time: int
    second_time: int
    log_return: float


@dataclass(frozen=True)
class Reject:
    row_number: int
    reason: str


@dataclass(frozen=True)
class TimeGrid:
    """Monthly grid of ``n_months`` months starting at ``start_month``.

    ``start_month`` is normalised to the first day of its month.
    """

    start_month: dt.date
    n_months: int

    def __post_init__(self):
        if self.n_months < 2:
            raise ValueError(f"time grid needs at least 2 months, got {self.n_months}")
        object.__setattr__(self, "start_month", self.start_month.replace(day=1))

    @classmethod
    def from_window(cls, first: str, last: str) -> "TimeGrid":
        """Grid covering the inclusive month window ``first``..``last`` (``YYYY-MM``)."""
        start = parse_month(first)
        end = parse_month(last)
        n = (end.year - start.year) * 12 + end.month - start.month + 1
        return cls(start, n)

    @property
    def T(self) -> int:
        return self.n_months

    def month_index(self, day: dt.date) -> int:
        """Month offset of ``day`` from the grid start; may fall outside ``[0, T)``."""
        return (day.year - self.start_month.year) * 12 + day.month - self.start_month.month

    def contains(self, day: dt.date) -> bool:
        return 0 <= self.month_index(day) < self.n_months

    def month(self, index: int) -> dt.date:
        y, m = divmod(self.start_month.month - 1 + index, 12)
        return dt.date(self.start_month.year + y, m + 1, 1)

    def labels(self) -> list[str]:
        return [self.month(t).strftime("%Y-%m") for t in range(self.n_months)]


def parse_month(text: str) -> dt.date:
    text = text.strip()
    try:
        return dt.datetime.strptime(text[:7], "%Y-%m").date()
    except ValueError as exc:
        raise ValueError(f"cannot parse month {text!r}, expected YYYY-MM") from exc


@dataclass
class ParseResult:
    records: list[SalesRecord]
    rejects: list[Reject] = field(default_factory=list)

    def rejects_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["row_number", "reason"])
        for r in self.rejects:
            w.writerow([r.row_number, r.reason])
        return buf.getvalue()


def _optional_float(value: str | None) -> float | None:
    if value is None or value.strip() == "":
        return None
    try:
        return float(value)
    except ValueError:
        return None


def parse_sales(
    source: TextIO | Iterable[str],
    schema: Mapping[str, str] | None = None,
    grid: TimeGrid | None = None,
) -> ParseResult:
    """Parse a delimited sales stream into validated :class:`SalesRecord` objects.

    Parameters
    ----------
    source : text stream or iterable of lines
        Must start with a header row.
    schema : mapping, optional
        Maps record field names to column names; defaults to :data:`DEFAULT_SCHEMA`.
    grid : TimeGrid, optional
        If given, sales outside the grid window are rejected.

    Returns
    -------
    ParseResult
        Valid records plus one :class:`Reject` per bad row. Row numbers count
        the header as row 1, so the first data row is row 2.
    """
    cols = dict(DEFAULT_SCHEMA)
    if schema:
        cols.update(schema)
    try:
        reader = csv.DictReader(source)
        header = reader.fieldnames
    except (OSError, UnicodeDecodeError, csv.Error) as exc:
        raise InputError(f"unreadable sales stream: {exc}") from exc
    if not header:
        raise InputError("sales stream is empty or has no header row")
    missing = [cols[f] for f in REQUIRED_FIELDS if cols[f] not in header]
    if missing:
        raise InputError(f"sales header lacks required columns: {', '.join(missing)}")

    records: list[SalesRecord] = []
    rejects: list[Reject] = []
    try:
        for i, row in enumerate(reader, start=2):
            rec = _parse_row(row, cols, grid)
            if isinstance(rec, str):
                rejects.append(Reject(i, rec))
            else:
                records.append(rec)
    except (OSError, UnicodeDecodeError, csv.Error) as exc:
        raise InputError(f"unreadable sales stream: {exc}") from exc
    return ParseResult(records, rejects)


def _parse_row(row: dict, cols: Mapping[str, str], grid: TimeGrid | None) -> SalesRecord | str:
    pid = (row.get(cols["property_id"]) or "").strip()
    if not pid:
        return "missing property_id"
    raw_price = (row.get(cols["price"]) or "").strip()
    try:
        price = float(raw_price)
    except ValueError:
        return "unparseable price"
    if not math.isfinite(price):
        return "unparseable price"
    if price <= 0:
        return "non-positive price"
    raw_date = (row.get(cols["sale_date"]) or "").strip()
    try:
        day = dt.date.fromisoformat(raw_date)
    except ValueError:
        return "unparseable date"
    region = (row.get(cols["region_code"]) or "").strip()
    if not region:
        return "missing region code"
    parent = (row.get(cols["parent_region_code"]) or "").strip()
    if not parent:
        return "missing parent region code"
    if grid is not None and not grid.contains(day):
        return "outside index window"
    return SalesRecord(
        pid,
        price,
        day,
        region,
        parent,
        _optional_float(row.get(cols["latitude"])),
        _optional_float(row.get(cols["longitude"])),
    )


def read_sales(path, schema=None, grid=None) -> ParseResult:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            return parse_sales(fh, schema, grid)
    except OSError as exc:
        raise InputError(f"cannot read sales file {path}: {exc}") from exc


@dataclass
class PairingResult:
    pairs: list[RepeatSalePair]
    region_codes: list[str]
    n_properties: int = 0
    dropped_same_month: int = 0
    dropped_region_change: int = 0

    @property
    def region_lookup(self) -> dict[str, int]:
        return {c: i for i, c in enumerate(self.region_codes)}


def pair_repeat_sales(
    records: Sequence[SalesRecord],
    grid: TimeGrid,
    region_codes: Sequence[str] | None = None,
) -> PairingResult:
    """Consecutive same-property repeat-sale pairs on a monthly grid.

    Sales of one property are ordered by date (input order breaks ties) and
    sale ``i`` is paired with sale ``i + 1``. Pairs inside a single month are
    dropped. A property whose sales carry more than one region code is dropped
    entirely; the number of pairs it would have produced is added to
    ``dropped_region_change``.

    ``region_codes`` fixes the region order; by default the sorted set of codes
    in ``records`` is used.
    """
    if region_codes is None:
        region_codes = sorted({r.region_code for r in records})
    lookup = {c: i for i, c in enumerate(region_codes)}

    by_property: dict[str, list[SalesRecord]] = defaultdict(list)
    for rec in records:
        by_property[rec.property_id].append(rec)

    pairs: list[RepeatSalePair] = []
    same_month = region_change = 0
    for pid in sorted(by_property):
        sales = sorted(by_property[pid], key=lambda r: r.sale_date)
        if len(sales) < 2:
            continue
        if len({s.region_code for s in sales}) > 1:
            region_change += len(sales) - 1
            continue
        code = sales[0].region_code
        if code not in lookup:
            raise KeyError(f"region code {code!r} not in region universe")
        r = lookup[code]
        for a, b in zip(sales, sales[1:]):
            ta, tb = grid.month_index(a.sale_date), grid.month_index(b.sale_date)
            if not (0 <= ta < grid.T and 0 <= tb < grid.T):
                raise ValueError(f"sale of property {pid!r} falls outside the time grid")
            if ta == tb:
                same_month += 1
                continue
            pairs.append(RepeatSalePair(r, ta, tb, math.log(b.price) - math.log(a.price)))
    return PairingResult(pairs, list(region_codes), len(by_property), same_month, region_change)


def sales_volume(records: Iterable[SalesRecord]) -> dict[str, int]:
    counts: dict[str, int] = defaultdict(int)
    for rec in records:
        counts[rec.region_code] += 1
    return dict(counts)
