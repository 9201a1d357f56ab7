"""Extreme-event detection by thresholding instantaneous energy at ``mean + b * std``."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Any

import numpy as np

from .errors import DataError, DegenerateEnergyError
from .hht import EnergySeries

POSITIVE, NEGATIVE, UNDETERMINED = "positive", "negative", "undetermined"
DEFAULT_B = 4.0
DEFAULT_MIN_GAP = 2
DEFAULT_POLARITY_WINDOW = 3
POLARITY_TOLERANCE = 1e-3
_TIE_ULPS = 64


def _values(energy, scale: str) -> np.ndarray:
    if isinstance(energy, EnergySeries):
        if scale == "normalized":
            return energy.ie_norm
        if scale == "raw":
            return energy.ie
        raise ValueError(f"scale must be 'normalized' or 'raw', got {scale!r}")
    x = np.asarray(energy, dtype=float)
    if x.ndim != 1 or len(x) == 0:
        raise DataError("energy must be a non-empty 1-D vector")
    return x


@dataclass(frozen=True)
class Threshold:
    b: float
    e_mu: float
    sigma: float
    e_th: float
    scale: str = "normalized"

    @property
    def degenerate(self) -> bool:
        return self.sigma == 0.0


def threshold(energy, b: float = DEFAULT_B, scale: str = "normalized") -> Threshold:
    """``E_th = E_mu + b * sigma`` with population standard deviation.

    ``scale`` picks ``IE_N`` or raw ``IE`` when given an :class:`EnergySeries`;
    plain arrays are used as they are. Zero spread yields a degenerate
    threshold for which :func:`detect` reports nothing.
    """
    x = _values(energy, scale)
    mu = float(np.mean(x))
    sigma = float(np.std(x))
    return Threshold(float(b), mu, sigma, mu + b * sigma, scale)


@dataclass(frozen=True)
class ExtremeEvent:
    start: int
    peak: int
    end: int
    peak_energy_norm: float
    ratio: float
    polarity: str = UNDETERMINED

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def detect(energy, th: Threshold, min_gap: int = DEFAULT_MIN_GAP) -> list[ExtremeEvent]:
    """Group bars with energy above ``th.e_th`` into events.

    Runs separated by fewer than ``min_gap`` sub-threshold bars are merged.
    The peak is the first bar holding the run's maximum energy. Bars within
    rounding noise of the threshold do not count, so ties cannot flip with
    the energy's scale.
    """
    x = _values(energy, th.scale)
    if th.degenerate:
        return []
    slack = _TIE_ULPS * np.finfo(float).eps * float(np.max(np.abs(x)))
    above = np.flatnonzero(x - th.e_th > slack)
    if above.size == 0:
        return []
    spans: list[list[int]] = [[int(above[0]), int(above[0])]]
    for i in above[1:]:
        i = int(i)
        if i - spans[-1][1] - 1 < min_gap:
            spans[-1][1] = i
        else:
            spans.append([i, i])

    peak_all = float(np.max(x))
    events = []
    for start, end in spans:
        seg = x[start : end + 1]
        peak = start + int(np.argmax(seg))
        events.append(
            ExtremeEvent(
                start=start,
                peak=peak,
                end=end,
                peak_energy_norm=float(x[peak] / peak_all),
                ratio=(float(x[peak]) - th.e_mu) / th.sigma,
            )
        )
    return events


def classify_polarity(series, event, window: int = DEFAULT_POLARITY_WINDOW) -> str:
    """Compare mean close after the peak with mean close before it.

    ``series`` is a :class:`PriceSeries` or a vector of closes; ``event`` an
    :class:`ExtremeEvent` or a peak index. A relative change under 0.1% is
    undetermined.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    close = np.asarray(getattr(series, "close", series), dtype=float)
    peak = event.peak if isinstance(event, ExtremeEvent) else int(event)
    if not 0 <= peak < len(close):
        raise DataError(f"event peak {peak} outside series of length {len(close)}")
    before = close[max(0, peak - window) : peak]
    after = close[peak + 1 : peak + 1 + window]
    if before.size == 0 or after.size == 0:
        raise DataError(f"event at bar {peak} has no bars on one side for polarity")
    pre, post = float(before.mean()), float(after.mean())
    rel = (post - pre) / abs(pre)
    if abs(rel) < POLARITY_TOLERANCE:
        return UNDETERMINED
    return POSITIVE if rel > 0 else NEGATIVE


def energy_ratio(energy, scale: str = "raw") -> float:
    """``(max IE - E_mu) / sigma``; unchanged by rescaling the energy."""
    x = _values(energy, scale)
    sigma = float(np.std(x))
    if sigma == 0.0:
        raise DegenerateEnergyError("energy has zero standard deviation")
    return (float(np.max(x)) - float(np.mean(x))) / sigma


@dataclass(frozen=True)
class DetectionReport:
    events: tuple[ExtremeEvent, ...]
    threshold: Threshold
    series_id: str = ""
    config: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "series_id": self.series_id,
            "threshold": asdict(self.threshold),
            "config": dict(self.config),
            "events": [e.to_dict() for e in self.events],
        }


def detect_events(
    energy: EnergySeries,
    series=None,
    b: float = DEFAULT_B,
    min_gap: int = DEFAULT_MIN_GAP,
    window: int = DEFAULT_POLARITY_WINDOW,
    series_id: str = "",
) -> DetectionReport:
    """Threshold, detect, and (when prices are given) label each event's polarity."""
    th = threshold(energy, b)
    events = detect(energy, th, min_gap)
    if series is not None:
        labelled = []
        for ev in events:
            try:
                pol = classify_polarity(series, ev, window)
            except DataError:
                pol = UNDETERMINED
            labelled.append(replace(ev, polarity=pol))
        events = labelled
    cfg = {"b": float(b), "min_gap": int(min_gap), "polarity_window": int(window), "scale": th.scale}
    return DetectionReport(tuple(events), th, series_id, cfg)
