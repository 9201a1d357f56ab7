"""End-to-end runs: stationarity, decomposition, detection, prediction and evaluation."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from . import detector, emd, hht, stationarity, svr
from .errors import EEQuakeError, PipelineError
from .timeseries import PriceSeries, parse_csv, to_features

logger = logging.getLogger(__name__)

DEFAULT_BLOCKS = (30, 5, 1)
REDETECT_TOLERANCE = 3

mape = svr.mape


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a generated OHLC series: AR(1) noise around a level plus one step.

    ``jump`` is measured in units of the noise process's stationary
    standard deviation; a negative value makes a crash.
    """

    n: int = 600
    level: float = 100.0
    noise: float = 1.0
    phi: float = 0.9
    jump_at: int | None = 585
    jump: float = 8.0
    seed: int = 0

    def to_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)


def synthetic_series(spec: SyntheticSpec | None = None, **overrides) -> PriceSeries:
    spec = spec or SyntheticSpec()
    if overrides:
        spec = SyntheticSpec(**{**spec.to_dict(), **overrides})
    if not -1.0 < spec.phi < 1.0:
        raise ValueError("phi must lie in (-1, 1)")
    rng = np.random.default_rng(spec.seed)
    shocks = rng.standard_normal(spec.n) * spec.noise
    x = np.empty(spec.n)
    sd = spec.noise / np.sqrt(1.0 - spec.phi**2)
    x[0] = shocks[0] / np.sqrt(1.0 - spec.phi**2)
    for t in range(1, spec.n):
        x[t] = spec.phi * x[t - 1] + shocks[t]
    close = spec.level + x
    if spec.jump_at is not None:
        if not 0 < spec.jump_at < spec.n:
            raise ValueError("jump_at must fall strictly inside the series")
        close[spec.jump_at :] += spec.jump * sd
    if np.any(close <= 0):
        raise ValueError("synthetic prices must stay positive; raise level or lower noise")
    wick = np.abs(rng.standard_normal((2, spec.n))) * 0.1 * spec.noise
    open_ = np.concatenate(([close[0]], close[:-1]))
    high = np.maximum(open_, close) + wick[0]
    low = np.maximum(np.minimum(open_, close) - wick[1], 1e-9)
    width = max(6, len(str(spec.n)))
    ts = tuple(str(i).zfill(width) for i in range(spec.n))
    return PriceSeries(ts, open_, high, low, close, interval="bar", name=f"synthetic-{spec.seed}")


@dataclass(frozen=True)
class RunConfig:
    input: str | None = None
    schema: Mapping[str, str] | None = None
    features: str = "close"
    horizon: int = 1
    train_size: int = 570
    test_size: int = 30
    blocks: tuple[int, ...] = DEFAULT_BLOCKS
    b: float = detector.DEFAULT_B
    min_gap: int = detector.DEFAULT_MIN_GAP
    polarity_window: int = detector.DEFAULT_POLARITY_WINDOW
    grid: svr.GridSpec = field(default_factory=svr.GridSpec)
    epsilon: float = svr.DEFAULT_EPSILON
    deterministic: str = "constant"
    n_freq_bins: int = hht.DEFAULT_FREQ_BINS
    energy_mode: str = "joint"
    sift: emd.SiftConfig = field(default_factory=emd.SiftConfig)
    ee_index: int | None = None
    out: str | None = None
    seed: int = 0
    synthetic: SyntheticSpec | None = None

    def __post_init__(self) -> None:
        if self.features not in ("close", "ohlc"):
            raise ValueError("features must be 'close' or 'ohlc'")
        if self.horizon not in (1, 2):
            raise ValueError("horizon must be 1 or 2")
        if self.train_size < 1 or self.test_size < 1:
            raise ValueError("train_size and test_size must be positive")
        if self.energy_mode not in hht.ENERGY_MODES:
            raise ValueError(f"energy_mode must be one of {hht.ENERGY_MODES}")
        if any(not 1 <= k <= self.test_size for k in self.blocks):
            raise ValueError("every block size must lie within the test span")

    def to_dict(self) -> dict[str, Any]:
        return {
            "input": self.input,
            "schema": dict(self.schema) if self.schema else None,
            "features": self.features,
            "horizon": self.horizon,
            "train_size": self.train_size,
            "test_size": self.test_size,
            "blocks": list(self.blocks),
            "b": self.b,
            "min_gap": self.min_gap,
            "polarity_window": self.polarity_window,
            "grid": {"c": list(self.grid.c), "gamma": list(self.grid.gamma), "cv_folds": self.grid.cv_folds},
            "epsilon": self.epsilon,
            "deterministic": self.deterministic,
            "n_freq_bins": self.n_freq_bins,
            "energy_mode": self.energy_mode,
            "sift": dict(self.sift.__dict__),
            "ee_index": self.ee_index,
            "seed": self.seed,
            "synthetic": self.synthetic.to_dict() if self.synthetic else None,
        }


def load_series(config: RunConfig) -> PriceSeries:
    """Read ``config.input``, or generate the synthetic series seeded by ``config.seed``."""
    try:
        if config.input is not None:
            return parse_csv(config.input, config.schema)
        spec = config.synthetic or SyntheticSpec(seed=config.seed)
        return synthetic_series(spec)
    except (OSError, EEQuakeError, ValueError) as exc:
        raise PipelineError("input", str(exc)) from exc


# ---------------------------------------------------------------- analysis


@dataclass(frozen=True, eq=False)
class Analysis:
    decomposition: emd.Decomposition
    spectrum: hht.HilbertSpectrum
    energy: hht.EnergySeries
    report: detector.DetectionReport


def analyse(close, config: RunConfig, series_id: str = "") -> Analysis:
    """EMD, Hilbert spectrum, energy and detection on one close vector."""
    close = np.asarray(close, dtype=float)
    try:
        dec = emd.decompose(close, config.sift)
    except EEQuakeError as exc:
        raise PipelineError("emd", str(exc)) from exc
    if len(dec) == 0:
        raise PipelineError("emd", "no oscillatory modes: the series is monotone or too smooth to sift")
    try:
        spec = hht.spectrum(dec, config.n_freq_bins)
        energy = hht.instantaneous_energy(dec, mode=config.energy_mode)
    except EEQuakeError as exc:
        raise PipelineError("hht", str(exc)) from exc
    report = detector.detect_events(
        energy, close, b=config.b, min_gap=config.min_gap, window=config.polarity_window, series_id=series_id
    )
    return Analysis(dec, spec, energy, report)


def stationarity_summary(close, config: RunConfig, spec: hht.HilbertSpectrum | None = None) -> dict[str, Any]:
    out: dict[str, Any] = {}
    try:
        out["adf"] = stationarity.adf_test(close, stationarity.AdfSpec(config.deterministic)).to_dict()
    except EEQuakeError as exc:
        out["adf"] = {"error": str(exc)}
    if spec is not None:
        try:
            curve = stationarity.dns(spec)
            out["dns"] = {"flatness": curve.flatness, "populated_bins": int(len(curve.bins))}
        except EEQuakeError as exc:
            out["dns"] = {"error": str(exc)}
    return out


@dataclass(frozen=True, eq=False)
class DetectResult:
    series: PriceSeries
    analysis: Analysis
    stationarity: dict[str, Any]

    @property
    def report(self) -> detector.DetectionReport:
        return self.analysis.report


def run_detect(config: RunConfig, series: PriceSeries | None = None) -> DetectResult:
    series = series if series is not None else load_series(config)
    if len(series) < 64:
        raise PipelineError("input", f"need at least 64 bars for detection, got {len(series)}")
    analysis = analyse(series.close, config, series.name)
    stat = stationarity_summary(series.close, config, analysis.spectrum)
    result = DetectResult(series, analysis, stat)
    if config.out:
        write_detect_artifacts(Path(config.out), result)
    return result


# ---------------------------------------------------------------- prediction


@dataclass(frozen=True)
class BlockScore:
    size: int
    start: int
    end: int
    mape: float
    accuracy: float

    def to_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)


@dataclass(frozen=True)
class EvalReport:
    blocks: tuple[BlockScore, ...]
    horizon: int
    features: str
    ee_index: int
    ee_offset: int
    hyperparams: dict[str, float]

    def block(self, size: int) -> BlockScore:
        for b in self.blocks:
            if b.size == size:
                return b
        raise KeyError(size)

    def to_dict(self) -> dict[str, Any]:
        return {
            "blocks": [b.to_dict() for b in self.blocks],
            "horizon": self.horizon,
            "features": self.features,
            "ee_index": self.ee_index,
            "ee_offset": self.ee_offset,
            "hyperparams": dict(self.hyperparams),
        }


def block_span(size: int, ee: int, test_start: int, test_end: int) -> tuple[int, int]:
    """Half-open window of ``size`` bars ending at the event, shifted right if it would leave the test span."""
    start = max(ee - size + 1, test_start)
    end = start + size
    if end > test_end:
        end = test_end
        start = max(test_start, end - size)
    return start, end


def score_block(actual, predicted, size: int, start: int, end: int) -> BlockScore:
    m = svr.mape(actual[start:end], predicted[start:end])
    return BlockScore(size, start, end, m, 100.0 - m)


@dataclass(frozen=True, eq=False)
class PredictResult:
    """Model outputs aligned to the bars of the input series.

    ``predicted[t]`` is NaN for bars that no feature row targets.
    """

    report: EvalReport
    actual: np.ndarray
    predicted: np.ndarray
    model: svr.SvrModel
    grid: svr.GridResult
    train_start: int
    test_start: int
    first_fitted: int

    def assembled(self) -> np.ndarray:
        """Fitted and forecast values where available, actual closes before the first fitted bar."""
        out = self.actual.copy()
        out[self.first_fitted :] = self.predicted[self.first_fitted :]
        return out


def _split(n: int, config: RunConfig) -> tuple[int, int]:
    if config.train_size + config.test_size > n:
        raise PipelineError(
            "predict", f"train_size + test_size = {config.train_size + config.test_size} exceeds series length {n}"
        )
    test_start = n - config.test_size
    return test_start - config.train_size, test_start


def pick_event(report: detector.DetectionReport, test_start: int, test_end: int) -> detector.ExtremeEvent | None:
    """Strongest detected event whose peak falls in the test span."""
    inside = [e for e in report.events if test_start <= e.peak < test_end]
    if not inside:
        return None
    return max(inside, key=lambda e: (e.ratio, -e.peak))


def run_predict(config: RunConfig, series: PriceSeries | None = None, ee_index: int | None = None) -> PredictResult:
    """Grid-search, train on the training span, forecast the test span and score the blocks.

    The event bar comes from ``ee_index``, then ``config.ee_index``, then
    detection on the series itself.
    """
    series = series if series is not None else load_series(config)
    n = len(series)
    train_start, test_start = _split(n, config)
    h = config.horizon

    ee = ee_index if ee_index is not None else config.ee_index
    if ee is None:
        found = pick_event(run_detect(_no_out(config), series).report, test_start, n)
        if found is None:
            raise PipelineError("predict", "no extreme event detected inside the test span; pass an explicit event index")
        ee = found.peak
    if not test_start <= ee < n:
        raise PipelineError("predict", f"event index {ee} lies outside the test span [{test_start}, {n})")

    try:
        fm = to_features(series, config.features, h)
    except EEQuakeError as exc:
        raise PipelineError("features", str(exc)) from exc
    # row i predicts bar i + h
    first_row = train_start
    last_train_row = test_start - h
    if last_train_row - first_row < 2 * (config.grid.cv_folds + 1):
        raise PipelineError("predict", "training span too short for the cross-validation scheme")
    x_train = fm.rows[first_row:last_train_row]
    y_train = fm.targets[first_row:last_train_row]
    try:
        grid = svr.grid_search(x_train, y_train, config.grid, config.epsilon)
        model = svr.train(x_train, y_train, grid.best)
    except EEQuakeError as exc:
        raise PipelineError("svr", str(exc)) from exc

    predicted = np.full(n, np.nan)
    rows = fm.rows[first_row:]
    predicted[first_row + h :] = model.predict(rows)
    actual = np.asarray(series.close, dtype=float).copy()

    blocks = []
    for size in config.blocks:
        start, end = block_span(size, ee, test_start, n)
        try:
            blocks.append(score_block(actual, predicted, size, start, end))
        except EEQuakeError as exc:
            raise PipelineError("evaluate", str(exc)) from exc
    hp = {"c": grid.best.c, "gamma": grid.best.gamma, "epsilon": grid.best.epsilon}
    report = EvalReport(tuple(blocks), h, config.features, int(ee), int(ee - test_start), hp)
    result = PredictResult(report, actual, predicted, model, grid, train_start, test_start, first_row + h)
    if config.out:
        write_predict_artifacts(Path(config.out), result)
    return result


@dataclass(frozen=True, eq=False)
class RedetectResult:
    report: detector.DetectionReport
    reference: detector.ExtremeEvent | None
    match: detector.ExtremeEvent | None

    @property
    def found(self) -> bool:
        return self.match is not None

    def to_dict(self) -> dict[str, Any]:
        return {
            "reference": None if self.reference is None else self.reference.to_dict(),
            "match": None if self.match is None else self.match.to_dict(),
            "found": self.found,
            "tolerance": REDETECT_TOLERANCE,
            "detection": self.report.to_dict(),
        }


def run_predict_detect(
    config: RunConfig, predicted: PredictResult, reference: detector.ExtremeEvent | None = None
) -> RedetectResult:
    """Detect events on the assembled predicted series and match them to the reference event.

    A match peaks within ``REDETECT_TOLERANCE`` bars of the reference peak
    with the same polarity; the closest such event wins.
    """
    series = predicted.assembled()
    analysis = analyse(series, config, "predicted")
    match = None
    if reference is not None:
        near = [
            e
            for e in analysis.report.events
            if abs(e.peak - reference.peak) <= REDETECT_TOLERANCE and e.polarity == reference.polarity
        ]
        if near:
            match = min(near, key=lambda e: (abs(e.peak - reference.peak), e.peak))
    return RedetectResult(analysis.report, reference, match)


@dataclass(frozen=True, eq=False)
class FullResult:
    detect: DetectResult
    predict: PredictResult
    redetect: RedetectResult


def run_full(config: RunConfig) -> FullResult:
    series = load_series(config)
    det = run_detect(config, series)
    n = len(series)
    _, test_start = _split(n, config)
    if config.ee_index is not None:
        ref = next((e for e in det.report.events if e.peak == config.ee_index), None)
        ee = config.ee_index
    else:
        ref = pick_event(det.report, test_start, n)
        if ref is None:
            raise PipelineError("predict", "no extreme event detected inside the test span; pass an explicit event index")
        ee = ref.peak
    pred = run_predict(config, series, ee)
    again = run_predict_detect(config, pred, ref)
    if config.out:
        out = Path(config.out)
        _write_json(out / "redetect.json", again.to_dict())
        _write_json(out / "run.json", {"config": config.to_dict(), "bars": n})
    return FullResult(det, pred, again)


def _no_out(config: RunConfig) -> RunConfig:
    return replace(config, out=None)


# ---------------------------------------------------------------- artifacts


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return str(x)


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(jsonable(payload), fh, sort_keys=True, indent=2, allow_nan=False)
        fh.write("\n")


def write_stationarity(out: Path, summary: Mapping[str, Any]) -> None:
    _write_json(out / "stationarity.json", summary)


def write_dns(out: Path, curve: stationarity.DnsCurve) -> None:
    _write_csv(out / "dns.csv", ("bin", "omega", "dns"), zip(curve.bins, curve.frequencies, curve.values))


def write_imfs(out: Path, dec: emd.Decomposition) -> None:
    k = len(dec)
    header = ["t"] + [f"imf{i + 1}" for i in range(k)] + ["residue"]
    m = dec.matrix
    rows = ([t] + [m[i, t] for i in range(k)] + [dec.residue[t]] for t in range(dec.input_length))
    _write_csv(out / "imfs.csv", header, rows)


def write_spectrum(out: Path, spec: hht.HilbertSpectrum) -> None:
    centers = spec.bin_centers
    _write_csv(out / "spectrum.csv", ("t", "omega", "amplitude"), ((t, centers[b], a) for t, b, a in spec.cells()))


def write_energy(out: Path, energy: hht.EnergySeries) -> None:
    _write_csv(out / "energy.csv", ("t", "IE", "IE_N"), ((t, energy.ie[t], energy.ie_norm[t]) for t in range(len(energy))))


def write_detect_artifacts(out: Path, result: DetectResult) -> None:
    a = result.analysis
    write_stationarity(out, result.stationarity)
    try:
        write_dns(out, stationarity.dns(a.spectrum))
    except EEQuakeError:
        pass
    write_imfs(out, a.decomposition)
    write_spectrum(out, a.spectrum)
    write_energy(out, a.energy)
    _write_json(out / "events.json", a.report.to_dict())
    e_th = a.report.threshold.e_th
    _write_csv(out / "overlay.csv", ("t", "IE_N", "E_th"), ((t, a.energy.ie_norm[t], e_th) for t in range(len(a.energy))))


def write_predict_artifacts(out: Path, result: PredictResult) -> None:
    rows = (
        (t, result.actual[t], result.predicted[t])
        for t in range(result.first_fitted, len(result.actual))
    )
    _write_csv(out / "predictions.csv", ("t", "actual", "predicted"), rows)
    _write_json(out / "report.json", result.report.to_dict())
    _write_json(out / "grid.json", result.grid.to_dict())
    _write_json(out / "model.json", result.model.to_dict())
