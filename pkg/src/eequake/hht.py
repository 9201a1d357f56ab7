"""Hilbert spectral analysis of IMFs: analytic signal, spectrum, energy."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .emd import Decomposition
from .errors import DataError, DegenerateEnergyError, EEQuakeError

DEFAULT_FREQ_BINS = 128


@dataclass(frozen=True, eq=False)
class AnalyticSignal:
    amplitude: np.ndarray
    phase: np.ndarray
    frequency: np.ndarray


def hilbert_analytic(x) -> np.ndarray:
    """Discrete analytic signal: keep DC (and Nyquist), double positive bins, drop negative ones."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    spec = np.fft.fft(x)
    gain = np.zeros(n)
    gain[0] = 1.0
    if n % 2 == 0:
        gain[n // 2] = 1.0
        gain[1 : n // 2] = 2.0
    else:
        gain[1 : (n + 1) // 2] = 2.0
    return np.fft.ifft(spec * gain)


def analytic_signal(imf) -> AnalyticSignal:
    """Instantaneous amplitude, unwrapped phase and frequency (rad/bar) of one mode.

    Frequency is the centred difference of the phase (one-sided at the
    ends), clamped to ``[0, pi]``.
    """
    x = np.asarray(imf, dtype=float)
    if x.ndim != 1 or len(x) < 8:
        raise DataError("analytic_signal needs a 1-D signal of length >= 8")
    if not np.all(np.isfinite(x)):
        raise DataError("signal contains non-finite values")
    z = hilbert_analytic(x)
    amplitude = np.abs(z)
    phase = np.unwrap(np.angle(z))
    freq = np.clip(np.gradient(phase), 0.0, math.pi)
    return AnalyticSignal(amplitude, phase, freq)


@dataclass(frozen=True, eq=False)
class HilbertSpectrum:
    """Time-frequency amplitude distribution built from IMF ridges.

    ``amplitude[t, k]`` holds the summed amplitude deposited in frequency bin
    ``k`` at bar ``t``. ``ridge_bins`` and ``ridge_amplitude`` keep the
    per-IMF deposit (shape ``(n_imfs, n)``) so the sparse cell list can be
    recovered exactly.
    """

    amplitude: np.ndarray
    freq_edges: np.ndarray
    ridge_bins: np.ndarray
    ridge_amplitude: np.ndarray
    ridge_frequency: np.ndarray

    @property
    def n_time(self) -> int:
        return self.amplitude.shape[0]

    @property
    def n_bins(self) -> int:
        return self.amplitude.shape[1]

    @property
    def delta_omega(self) -> float:
        return float(self.freq_edges[1] - self.freq_edges[0])

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.freq_edges[:-1] + self.freq_edges[1:])

    @property
    def time_bins(self) -> np.ndarray:
        return np.arange(self.n_time)

    def cells(self) -> list[tuple[int, int, float]]:
        """Non-zero ``(t, bin, amplitude)`` triples in time-major order."""
        t_idx, b_idx = np.nonzero(self.amplitude)
        return [(int(t), int(b), float(self.amplitude[t, b])) for t, b in zip(t_idx, b_idx)]


def frequency_bin(omega, n_bins: int) -> np.ndarray:
    idx = np.floor(np.asarray(omega) / (math.pi / n_bins)).astype(int)
    return np.clip(idx, 0, n_bins - 1)


def _selected(decomposition: Decomposition, imf_mask) -> list[np.ndarray]:
    if len(decomposition.imfs) == 0:
        raise EEQuakeError("decomposition has no IMFs")
    modes = [imf.values for imf in decomposition.imfs]
    if imf_mask is not None:
        mask = list(imf_mask)
        if len(mask) != len(modes):
            raise ValueError(f"imf_mask has {len(mask)} entries for {len(modes)} IMFs")
        modes = [m for m, keep in zip(modes, mask) if keep]
        if not modes:
            raise EEQuakeError("imf_mask selects no IMFs")
    return modes


def spectrum(decomposition: Decomposition, n_freq_bins: int = DEFAULT_FREQ_BINS, imf_mask=None) -> HilbertSpectrum:
    """Deposit each IMF's instantaneous amplitude into its frequency bin, bar by bar.

    The residue is never included.
    """
    if n_freq_bins < 8:
        raise ValueError("n_freq_bins must be >= 8")
    modes = _selected(decomposition, imf_mask)
    n = decomposition.input_length
    H = np.zeros((n, n_freq_bins))
    bins = np.empty((len(modes), n), dtype=int)
    amps = np.empty((len(modes), n))
    freqs = np.empty((len(modes), n))
    rows = np.arange(n)
    for i, mode in enumerate(modes):
        a = analytic_signal(mode)
        b = frequency_bin(a.frequency, n_freq_bins)
        np.add.at(H, (rows, b), a.amplitude)
        bins[i], amps[i], freqs[i] = b, a.amplitude, a.frequency
    edges = np.linspace(0.0, math.pi, n_freq_bins + 1)
    return HilbertSpectrum(H, edges, bins, amps, freqs)


def marginal(spec: HilbertSpectrum) -> np.ndarray:
    """Time-averaged amplitude per frequency bin."""
    return spec.amplitude.mean(axis=0)


@dataclass(frozen=True, eq=False)
class EnergySeries:
    ie: np.ndarray
    ie_norm: np.ndarray
    mean: float
    stdev: float

    def __len__(self) -> int:
        return len(self.ie)

    @classmethod
    def from_values(cls, ie) -> "EnergySeries":
        ie = np.asarray(ie, dtype=float)
        if ie.ndim != 1 or len(ie) == 0:
            raise DataError("energy series must be a non-empty 1-D vector")
        if np.any(ie < 0) or not np.all(np.isfinite(ie)):
            raise DataError("energy must be finite and nonnegative")
        peak = float(ie.max())
        if peak <= 0:
            raise DegenerateEnergyError("all-zero energy cannot be normalized")
        return cls(ie, ie / peak, float(ie.mean()), float(ie.std()))


ENERGY_MODES = ("separate", "joint")


def instantaneous_energy(decomposition: Decomposition, imf_mask=None, mode: str = "separate") -> EnergySeries:
    """Instantaneous energy of the selected IMFs (residue excluded).

    ``separate``: ``IE(t) = sum_i M_i(t)**2``, one analytic signal per IMF.
    ``joint``: the selected IMFs are summed first and ``IE(t)`` is the squared
    amplitude of that single combined mode. The joint form keeps the sharp
    amplitude spike a price step leaves in the combined mode, which the
    per-IMF sum spreads over the slow modes.
    """
    if mode not in ENERGY_MODES:
        raise ValueError(f"mode must be one of {ENERGY_MODES}, got {mode!r}")
    modes = _selected(decomposition, imf_mask)
    if mode == "joint":
        ie = analytic_signal(np.sum(modes, axis=0)).amplitude ** 2
    else:
        ie = np.zeros(decomposition.input_length)
        for m in modes:
            ie += analytic_signal(m).amplitude ** 2
    return EnergySeries.from_values(ie)
