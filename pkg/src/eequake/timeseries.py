"""OHLC price series: CSV ingestion, validation, featurization and scaling.

Default column names follow the Yahoo Finance CSV export
(``Date,Open,High,Low,Close,Adj Close,Volume``). Timestamps are kept as
opaque labels; they are only used for ordering.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass
from datetime import datetime
from os import PathLike
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from .errors import BarInvariantError, DataError, MissingColumnError

logger = logging.getLogger(__name__)

DEFAULT_SCHEMA: dict[str, str] = {
    "date": "Date",
    "open": "Open",
    "high": "High",
    "low": "Low",
    "close": "Close",
    "volume": "Volume",
}
REQUIRED_FIELDS = ("date", "open", "high", "low", "close")
PRICE_FIELDS = ("open", "high", "low", "close")
_BLANK = {"", "null", "nan", "none", "na", "n/a", "-"}

FEATURE_MODES = ("close", "ohlc")


@dataclass(frozen=True)
class PriceBar:
    timestamp: str
    open: float
    high: float
    low: float
    close: float
    volume: float | None = None


def _check_bar(row: int, o: float, h: float, lo: float, c: float, v: float | None) -> None:
    for name, x in (("open", o), ("high", h), ("low", lo), ("close", c)):
        if not math.isfinite(x) or x <= 0:
            raise BarInvariantError(row, f"{name}={x!r} is not a finite positive price")
    if lo > min(o, c):
        raise BarInvariantError(row, f"low={lo} exceeds min(open, close)={min(o, c)}")
    if h < max(o, c):
        raise BarInvariantError(row, f"high={h} is below max(open, close)={max(o, c)}")
    if v is not None and (not math.isfinite(v) or v < 0):
        raise BarInvariantError(row, f"volume={v!r} is negative or non-finite")


@dataclass(frozen=True, eq=False)
class PriceSeries:
    """Column-oriented OHLC series with strictly increasing timestamps.

    ``dropped`` counts input rows skipped because of blank or unparseable
    prices.
    """

    timestamps: tuple[str, ...]
    open: np.ndarray
    high: np.ndarray
    low: np.ndarray
    close: np.ndarray
    volume: np.ndarray | None = None
    interval: str = "daily"
    name: str = ""
    dropped: int = 0

    def __post_init__(self) -> None:
        n = len(self.timestamps)
        cols = {}
        for key in PRICE_FIELDS:
            arr = np.asarray(getattr(self, key), dtype=np.float64)
            if arr.shape != (n,):
                raise DataError(f"{key} column has shape {arr.shape}, expected ({n},)")
            arr.setflags(write=False)
            cols[key] = arr
        vol = None
        if self.volume is not None:
            vol = np.asarray(self.volume, dtype=np.float64)
            if vol.shape != (n,):
                raise DataError(f"volume column has shape {vol.shape}, expected ({n},)")
            vol.setflags(write=False)
        for key, arr in cols.items():
            object.__setattr__(self, key, arr)
        object.__setattr__(self, "volume", vol)
        object.__setattr__(self, "timestamps", tuple(self.timestamps))

        if n < 2:
            raise DataError(f"price series needs at least 2 bars, got {n}")
        for i in range(n):
            _check_bar(
                i,
                float(cols["open"][i]),
                float(cols["high"][i]),
                float(cols["low"][i]),
                float(cols["close"][i]),
                None if vol is None else float(vol[i]),
            )
        keys = _sort_keys(self.timestamps)
        if any(b <= a for a, b in zip(keys, keys[1:])):
            raise DataError("timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.timestamps)

    @property
    def bars(self) -> list[PriceBar]:
        vol = self.volume
        return [
            PriceBar(
                self.timestamps[i],
                float(self.open[i]),
                float(self.high[i]),
                float(self.low[i]),
                float(self.close[i]),
                None if vol is None else float(vol[i]),
            )
            for i in range(len(self))
        ]

    @classmethod
    def from_bars(cls, bars: Sequence[PriceBar], interval: str = "daily", name: str = "") -> "PriceSeries":
        has_vol = all(b.volume is not None for b in bars)
        return cls(
            timestamps=tuple(b.timestamp for b in bars),
            open=np.array([b.open for b in bars], dtype=float),
            high=np.array([b.high for b in bars], dtype=float),
            low=np.array([b.low for b in bars], dtype=float),
            close=np.array([b.close for b in bars], dtype=float),
            volume=np.array([b.volume for b in bars], dtype=float) if has_vol and bars else None,
            interval=interval,
            name=name,
        )

    @classmethod
    def from_close(cls, close: Iterable[float], interval: str = "bar", name: str = "") -> "PriceSeries":
        """Build a series whose open/high/low all equal the close.

        Timestamps are zero-padded bar indices so they sort correctly.
        """
        c = np.asarray(list(close), dtype=float)
        width = max(6, len(str(len(c))))
        ts = tuple(str(i).zfill(width) for i in range(len(c)))
        return cls(ts, c, c, c, c, interval=interval, name=name)

    def slice(self, start: int, stop: int) -> "PriceSeries":
        vol = None if self.volume is None else self.volume[start:stop]
        return PriceSeries(
            self.timestamps[start:stop],
            self.open[start:stop],
            self.high[start:stop],
            self.low[start:stop],
            self.close[start:stop],
            vol,
            interval=self.interval,
            name=self.name,
        )

    def ohlc(self) -> np.ndarray:
        return np.column_stack([self.open, self.high, self.low, self.close])


def _parse_time(s: str) -> datetime | None:
    try:
        return datetime.fromisoformat(s.strip().replace("Z", "+00:00"))
    except ValueError:
        return None


def _sort_keys(timestamps: Sequence[str]) -> list:
    """Chronological keys when every label parses as ISO-8601, else the raw strings."""
    parsed = [_parse_time(t) for t in timestamps]
    if parsed and all(p is not None for p in parsed):
        aware = {p.tzinfo is not None for p in parsed}
        if len(aware) == 1:
            return parsed
    return list(timestamps)


def _parse_price(raw: str | None) -> float | None:
    if raw is None or raw.strip().lower() in _BLANK:
        return None
    try:
        x = float(raw)
    except ValueError:
        return None
    return x if math.isfinite(x) else None


def parse_csv(
    source: str | PathLike | bytes | IO,
    schema: Mapping[str, str] | None = None,
    interval: str = "daily",
    name: str = "",
) -> PriceSeries:
    """Read an OHLC(V) CSV into a validated :class:`PriceSeries`.

    ``source`` may be a path, raw bytes, or a binary/text stream. ``schema``
    maps the logical fields ``date, open, high, low, close, volume`` to
    header names; unspecified fields keep the Yahoo defaults. Rows with a
    blank or unparseable price are dropped (counted in ``dropped``);
    bars that violate the OHLC ordering raise :class:`BarInvariantError`
    with the 1-based data row number.
    """
    cols = dict(DEFAULT_SCHEMA)
    if schema:
        unknown = set(schema) - set(DEFAULT_SCHEMA)
        if unknown:
            raise DataError(f"unknown schema fields: {sorted(unknown)}")
        cols.update(schema)

    text = _read_text(source)
    reader = csv.DictReader(io.StringIO(text))
    header = [h.strip() for h in (reader.fieldnames or [])]
    reader.fieldnames = header
    for key in REQUIRED_FIELDS:
        if cols[key] not in header:
            raise MissingColumnError(cols[key])
    has_volume = cols["volume"] in header

    records: list[tuple[str, float, float, float, float, float | None, int]] = []
    dropped = 0
    for rownum, row in enumerate(reader, start=1):
        ts = (row.get(cols["date"]) or "").strip()
        prices = [_parse_price(row.get(cols[k])) for k in PRICE_FIELDS]
        if not ts or any(p is None for p in prices):
            dropped += 1
            continue
        vol = _parse_price(row.get(cols["volume"])) if has_volume else None
        o, h, lo, c = prices
        _check_bar(rownum, o, h, lo, c, vol)
        records.append((ts, o, h, lo, c, vol, rownum))

    if dropped:
        logger.warning("dropped %d row(s) with blank or unparseable prices", dropped)
    if len(records) < 2:
        raise DataError(f"need at least 2 valid rows, got {len(records)}")

    keys = _sort_keys([r[0] for r in records])
    order = sorted(range(len(records)), key=lambda i: keys[i])
    for a, b in zip(order, order[1:]):
        if keys[a] == keys[b]:
            raise DataError(
                f"duplicate timestamp {records[b][0]!r} at rows {records[a][6]} and {records[b][6]}"
            )
    records = [records[i] for i in order]

    volume = None
    if has_volume and all(r[5] is not None for r in records):
        volume = np.array([r[5] for r in records], dtype=float)
    return PriceSeries(
        timestamps=tuple(r[0] for r in records),
        open=np.array([r[1] for r in records]),
        high=np.array([r[2] for r in records]),
        low=np.array([r[3] for r in records]),
        close=np.array([r[4] for r in records]),
        volume=volume,
        interval=interval,
        name=name,
        dropped=dropped,
    )


def _read_text(source) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8-sig")
    if isinstance(source, (str, PathLike)):
        with open(source, "rb") as fh:
            return fh.read().decode("utf-8-sig")
    data = source.read()
    if isinstance(data, bytes):
        return data.decode("utf-8-sig")
    return data.lstrip("\ufeff")


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    rows: np.ndarray
    targets: np.ndarray
    horizon: int
    mode: str

    def __len__(self) -> int:
        return len(self.targets)


def to_features(series: PriceSeries, mode: str = "close", horizon: int = 1) -> FeatureMatrix:
    """Pair the features of bar ``i`` with the close of bar ``i + horizon``."""
    if mode not in FEATURE_MODES:
        raise ValueError(f"mode must be one of {FEATURE_MODES}, got {mode!r}")
    if horizon not in (1, 2):
        raise ValueError(f"horizon must be 1 or 2, got {horizon}")
    n = len(series)
    if n <= horizon:
        raise DataError(f"series of length {n} too short for horizon {horizon}")
    full = series.close[:, None] if mode == "close" else series.ohlc()
    rows = np.array(full[: n - horizon], dtype=float)
    targets = np.array(series.close[horizon:], dtype=float)
    return FeatureMatrix(rows, targets, horizon, mode)


@dataclass(frozen=True, eq=False)
class Scaler:
    """Per-feature min-max scaler. Constant features map to 0."""

    minimum: np.ndarray
    maximum: np.ndarray

    @property
    def span(self) -> np.ndarray:
        span = self.maximum - self.minimum
        return np.where(span > 0, span, 1.0)

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != self.minimum.shape:
            raise ValueError(f"dimension mismatch: expected {self.minimum.shape[0]}, got {x.shape[-1:]}")
        return x

    def apply(self, x) -> np.ndarray:
        x = self._check(x)
        return (x - self.minimum) / self.span

    def invert(self, z) -> np.ndarray:
        z = self._check(z)
        return z * self.span + self.minimum

    def to_dict(self) -> dict:
        return {"min": self.minimum.tolist(), "max": self.maximum.tolist()}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Scaler":
        return cls(np.asarray(d["min"], dtype=float), np.asarray(d["max"], dtype=float))


def fit_scaler(rows) -> Scaler:
    x = np.asarray(rows, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("fit_scaler needs a non-empty 2-D row set")
    return Scaler(x.min(axis=0), x.max(axis=0))


def apply(scaler: Scaler, row) -> np.ndarray:
    return scaler.apply(row)


def invert(scaler: Scaler, row) -> np.ndarray:
    return scaler.invert(row)
