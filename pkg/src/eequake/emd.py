"""Empirical mode decomposition by envelope sifting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DataError, TooFewExtremaError

BOUNDARIES = ("odd", "mirror", "clamp")


@dataclass(frozen=True)
class SiftConfig:
    """Sifting controls.

    ``max_imfs=None`` resolves to ``ceil(log2 n) + 2`` for a signal of
    length ``n``.
    """

    sd_threshold: float = 0.2
    max_sift_iterations: int = 100
    max_imfs: int | None = None
    boundary: str = "odd"
    mean_tolerance: float = 0.05

    def __post_init__(self) -> None:
        if self.sd_threshold <= 0:
            raise ValueError("sd_threshold must be positive")
        if self.max_sift_iterations < 1:
            raise ValueError("max_sift_iterations must be >= 1")
        if self.max_imfs is not None and self.max_imfs < 1:
            raise ValueError("max_imfs must be >= 1")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}")

    def imf_cap(self, n: int) -> int:
        if self.max_imfs is not None:
            return self.max_imfs
        return int(math.ceil(math.log2(n))) + 2


@dataclass(frozen=True, eq=False)
class Imf:
    values: np.ndarray
    index: int
    converged: bool = True
    iterations: int = 0

    @property
    def flagged(self) -> bool:
        return not self.converged


@dataclass(frozen=True, eq=False)
class Decomposition:
    imfs: tuple[Imf, ...]
    residue: np.ndarray
    input_length: int
    config: SiftConfig = field(default_factory=SiftConfig, repr=False)

    def __len__(self) -> int:
        return len(self.imfs)

    @property
    def matrix(self) -> np.ndarray:
        """IMFs stacked as rows, shape ``(n_imfs, n)``."""
        if not self.imfs:
            return np.zeros((0, self.input_length))
        return np.vstack([imf.values for imf in self.imfs])

    def reconstruct(self) -> np.ndarray:
        return self.matrix.sum(axis=0) + self.residue

    @classmethod
    def from_arrays(cls, imfs, residue=None) -> "Decomposition":
        """Wrap precomputed modes, e.g. analytic test signals."""
        rows = [np.asarray(v, dtype=float) for v in imfs]
        n = len(rows[0]) if rows else len(residue)
        res = np.zeros(n) if residue is None else np.asarray(residue, dtype=float)
        return cls(tuple(Imf(v, i + 1) for i, v in enumerate(rows)), res, n)


def find_extrema(signal) -> tuple[np.ndarray, np.ndarray]:
    """Indices of strict interior local maxima and minima.

    A flat run of equal samples bounded by lower (higher) neighbours on both
    sides counts as one maximum (minimum) at its middle index.
    """
    x = np.asarray(signal, dtype=float)
    n = len(x)
    if n < 3:
        return np.array([], dtype=int), np.array([], dtype=int)
    # collapse runs of equal values
    change = np.flatnonzero(np.diff(x) != 0) + 1
    starts = np.concatenate(([0], change))
    ends = np.concatenate((change - 1, [n - 1]))
    vals = x[starts]
    if len(vals) < 3:
        return np.array([], dtype=int), np.array([], dtype=int)
    mid = (starts[1:-1] + ends[1:-1]) // 2
    left, centre, right = vals[:-2], vals[1:-1], vals[2:]
    maxima = mid[(centre > left) & (centre > right)]
    minima = mid[(centre < left) & (centre < right)]
    return maxima.astype(int), minima.astype(int)


def count_zero_crossings(signal) -> int:
    s = np.sign(np.asarray(signal, dtype=float))
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def _extend(x: np.ndarray, own: np.ndarray, other: np.ndarray, boundary: str):
    """Knots for one envelope, padded past both ends of the grid.

    ``mirror`` reflects the two nearest extrema of the same kind about each
    endpoint. ``odd`` reflects the two nearest extrema of the opposite kind
    through the endpoint sample (``x(-t) = 2 x(0) - x(t)``), which keeps the
    local slope of a trend. ``clamp`` pins the envelope at the end
    samples' positions to the nearest extremum value.
    """
    n = len(x)
    if boundary == "clamp":
        t = np.concatenate(([0], own, [n - 1])).astype(float)
        v = np.concatenate((x[own[:1]], x[own], x[own[-1:]]))
        if own[0] == 0 or own[-1] == n - 1:
            keep = np.concatenate(([True], np.diff(t) > 0))
            t, v = t[keep], v[keep]
        return t, v
    src = own if boundary == "mirror" else other
    k = min(2, len(src))
    left, right = src[:k][::-1], src[-k:][::-1]
    if boundary == "mirror":
        lv, rv = x[left], x[right]
    else:
        lv, rv = 2 * x[0] - x[left], 2 * x[-1] - x[right]
    t = np.concatenate((-left, own, 2 * (n - 1) - right)).astype(float)
    v = np.concatenate((lv, x[own], rv))
    return t, v


def envelopes(signal, maxima, minima, boundary: str = "odd") -> tuple[np.ndarray, np.ndarray]:
    """Natural cubic spline envelopes through the maxima and the minima.

    Raises :class:`TooFewExtremaError` when either extremum set is empty.
    """
    x = np.asarray(signal, dtype=float)
    maxima = np.asarray(maxima, dtype=int)
    minima = np.asarray(minima, dtype=int)
    if len(maxima) < 1 or len(minima) < 1:
        raise TooFewExtremaError(
            f"need at least one maximum and one minimum, got {len(maxima)} and {len(minima)}"
        )
    n = len(x)
    grid = np.arange(n, dtype=float)
    out = []
    for own, other in ((maxima, minima), (minima, maxima)):
        t, v = _extend(x, own, other, boundary)
        out.append(CubicSpline(t, v, bc_type="natural")(grid))
    return out[0], out[1]


def _envelope_mean(h: np.ndarray, boundary: str) -> np.ndarray:
    mx, mn = find_extrema(h)
    upper, lower = envelopes(h, mx, mn, boundary)
    return 0.5 * (upper + lower)


def sift_once(signal, config: SiftConfig | None = None) -> np.ndarray:
    config = config or SiftConfig()
    x = np.asarray(signal, dtype=float)
    return x - _envelope_mean(x, config.boundary)


def is_imf(candidate, envelope_mean, tolerance: float = 0.05) -> bool:
    """Both IMF criteria: extrema vs zero-crossing count, and near-zero envelope mean."""
    mx, mn = find_extrema(candidate)
    n_ext = len(mx) + len(mn)
    if abs(n_ext - count_zero_crossings(candidate)) > 1:
        return False
    rng = np.ptp(candidate)
    return bool(np.max(np.abs(envelope_mean)) < tolerance * rng)


def extract_imf(signal, config: SiftConfig | None = None, index: int = 1) -> Imf:
    """Sift until the Cauchy-type SD criterion and both IMF criteria hold.

    Returns the last candidate with ``converged=False`` if the iteration cap
    is reached first.
    """
    config = config or SiftConfig()
    h = np.asarray(signal, dtype=float).copy()
    prev = None
    for it in range(config.max_sift_iterations + 1):
        try:
            mean = _envelope_mean(h, config.boundary)
        except TooFewExtremaError:
            if prev is None:
                raise
            return Imf(h, index, converged=False, iterations=it)
        if prev is not None:
            denom = float(prev @ prev)
            sd = float(np.sum((prev - h) ** 2)) / denom if denom > 0 else 0.0
            if sd < config.sd_threshold and is_imf(h, mean, config.mean_tolerance):
                return Imf(h, index, converged=True, iterations=it)
        if it == config.max_sift_iterations:
            break
        prev = h
        h = h - mean
    return Imf(h, index, converged=False, iterations=config.max_sift_iterations)


def _n_extrema(x: np.ndarray) -> int:
    mx, mn = find_extrema(x)
    return len(mx) + len(mn)


def decompose(signal, config: SiftConfig | None = None) -> Decomposition:
    """Peel IMFs off the running remainder until it is monotone-like.

    The remainder counts as a residue once it has fewer than two interior
    extrema or the IMF cap is reached. ``sum(imfs) + residue`` reproduces
    the input up to floating-point rounding.
    """
    config = config or SiftConfig()
    x = np.asarray(signal, dtype=float)
    if x.ndim != 1:
        raise DataError("signal must be 1-D")
    if len(x) < 8:
        raise DataError(f"signal of length {len(x)} too short for EMD (need >= 8)")
    if not np.all(np.isfinite(x)):
        raise DataError("signal contains non-finite values")

    cap = config.imf_cap(len(x))
    remainder = x.copy()
    imfs: list[Imf] = []
    while len(imfs) < cap and _n_extrema(remainder) >= 2:
        try:
            imf = extract_imf(remainder, config, index=len(imfs) + 1)
        except TooFewExtremaError:
            break
        imfs.append(imf)
        remainder = remainder - imf.values
    return Decomposition(tuple(imfs), remainder, len(x), config)
