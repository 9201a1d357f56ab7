"""Extreme-event detection in price series with EMD/Hilbert energy, and SVR forecasting around events."""

from .detector import DetectionReport, ExtremeEvent, Threshold, detect, detect_events, energy_ratio, threshold
from .emd import Decomposition, Imf, SiftConfig, decompose
from .errors import DataError, EEQuakeError, PipelineError
from .hht import EnergySeries, HilbertSpectrum, analytic_signal, instantaneous_energy, spectrum
from .pipeline import RunConfig, SyntheticSpec, run_detect, run_full, run_predict, run_predict_detect, synthetic_series
from .stationarity import AdfResult, AdfSpec, adf_test, dns
from .svr import GridSpec, Hyperparams, SvrModel, grid_search, mape, train
from .timeseries import PriceBar, PriceSeries, parse_csv, to_features

__version__ = "0.1.0"

__all__ = [
    "AdfResult", "AdfSpec", "DataError", "Decomposition", "DetectionReport", "EEQuakeError",
    "EnergySeries", "ExtremeEvent", "GridSpec", "HilbertSpectrum", "Hyperparams", "Imf",
    "PipelineError", "PriceBar", "PriceSeries", "RunConfig", "SiftConfig", "SvrModel",
    "SyntheticSpec", "Threshold", "adf_test", "analytic_signal", "decompose", "detect",
    "detect_events", "dns", "energy_ratio", "grid_search", "instantaneous_energy", "mape",
    "parse_csv", "run_detect", "run_full", "run_predict", "run_predict_detect", "spectrum",
    "synthetic_series", "threshold", "to_features", "train",
]
