"""Stationarity diagnostics: augmented Dickey-Fuller and degree of nonstationarity."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np
from scipy.stats import norm

from .errors import DataError, EmptySpectrumError, RankDeficientError

if TYPE_CHECKING:
    from .hht import HilbertSpectrum

LEVELS = ("1%", "5%", "10%")

_DETERMINISTIC_ALIASES = {
    "n": "n",
    "none": "n",
    "nc": "n",
    "c": "c",
    "constant": "c",
    "ct": "ct",
    "trend": "ct",
    "constant+trend": "ct",
}

# MacKinnon (2010) response surfaces, one unit root:
# crit(T) = b0 + b1/T + b2/T**2 + b3/T**3, rows ordered 1%, 5%, 10%.
_CRIT_SURFACE = {
    "n": np.array([
        [-2.56574, -2.2358, -3.627, 0.0],
        [-1.94100, -0.2686, -3.365, 31.223],
        [-1.61682, 0.2656, -2.714, 25.364],
    ]),
    "c": np.array([
        [-3.43035, -6.5393, -16.786, -79.433],
        [-2.86154, -2.8903, -4.234, -40.040],
        [-2.56677, -1.5384, -2.809, 0.0],
    ]),
    "ct": np.array([
        [-3.95877, -9.0531, -28.428, -134.155],
        [-3.41049, -4.3904, -9.036, -45.374],
        [-3.12705, -2.5856, -3.925, -22.380],
    ]),
}

# MacKinnon (1994) asymptotic p-value polynomials: p = Phi(sum_k c_k tau**k).
_P_SMALL = {
    "n": [0.6344, 1.2378, 3.2496e-2],
    "c": [2.1659, 1.4412, 3.8269e-2],
    "ct": [3.2512, 1.6047, 4.9588e-2],
}
_P_LARGE = {
    "n": [0.4797, 0.93557, -0.06999, 0.033066],
    "c": [1.7339, 0.93202, -0.12745, -0.010368],
    "ct": [2.5261, 0.61654, -0.37956, -0.060285],
}
_TAU_STAR = {"n": -1.04, "c": -1.61, "ct": -2.89}
_TAU_MIN = {"n": -19.04, "c": -18.83, "ct": -16.18}
_TAU_MAX = {"n": math.inf, "c": 2.74, "ct": 0.70}


def _det(deterministic: str) -> str:
    try:
        return _DETERMINISTIC_ALIASES[deterministic.lower()]
    except KeyError:
        raise ValueError(
            f"unknown deterministic spec {deterministic!r}; use none, constant or constant+trend"
        ) from None


@dataclass(frozen=True)
class AdfSpec:
    deterministic: str = "constant"
    lags: int | str = "auto"
    max_lags: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "deterministic", _det(self.deterministic))
        if isinstance(self.lags, str):
            if self.lags != "auto":
                raise ValueError(f"lags must be a nonnegative int or 'auto', got {self.lags!r}")
        elif self.lags < 0:
            raise ValueError("lags must be nonnegative")


@dataclass(frozen=True)
class AdfResult:
    t_statistic: float
    critical_values: dict[str, float]
    p_value: float
    alpha_hat: float
    se_alpha: float
    lags_used: int
    nobs: int
    deterministic: str
    reject_unit_root_at: str | None

    def to_dict(self) -> dict:
        return {
            "t_statistic": self.t_statistic,
            "critical_values": dict(self.critical_values),
            "p_value": self.p_value,
            "alpha_hat": self.alpha_hat,
            "se_alpha": self.se_alpha,
            "lags_used": self.lags_used,
            "nobs": self.nobs,
            "deterministic": self.deterministic,
            "reject_unit_root_at": self.reject_unit_root_at,
        }


@dataclass(frozen=True)
class OlsFit:
    params: np.ndarray
    bse: np.ndarray
    resid: np.ndarray

    @property
    def ssr(self) -> float:
        return float(self.resid @ self.resid)

    @property
    def nobs(self) -> int:
        return len(self.resid)


def ols_fit(design, target) -> OlsFit:
    """Least squares via a thin QR factorization.

    Standard errors use the unbiased residual variance ``SSR / (n - k)``.
    """
    X = np.asarray(design, dtype=float)
    y = np.asarray(target, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, k = X.shape
    if y.shape != (n,):
        raise ValueError(f"target length {y.shape} does not match design rows {n}")
    if n < k + 1:
        raise DataError(f"need at least {k + 1} rows for {k} regressors, got {n}")
    if np.linalg.matrix_rank(X) < k:
        raise RankDeficientError(f"design matrix ({n}x{k}) is rank deficient")
    q, r = np.linalg.qr(X)
    params = np.linalg.solve(r, q.T @ y)
    resid = y - X @ params
    sigma2 = float(resid @ resid) / (n - k)
    r_inv = np.linalg.inv(r)
    bse = np.sqrt(sigma2 * np.sum(r_inv**2, axis=1))
    return OlsFit(params, bse, resid)


def mackinnon_critical(n: float, deterministic: str = "constant", level: str | float = "1%") -> float:
    """Finite-sample ADF critical value from the MacKinnon response surface.

    ``n`` may be ``math.inf`` for the asymptotic value.
    """
    det = _det(deterministic)
    key = level if isinstance(level, str) else f"{level:g}%"
    if key not in LEVELS:
        raise ValueError(f"unsupported level {level!r}; choose one of {LEVELS}")
    b = _CRIT_SURFACE[det][LEVELS.index(key)]
    if math.isinf(n):
        return float(b[0])
    if n <= 0:
        raise ValueError("sample size must be positive")
    inv = 1.0 / n
    return float(b[0] + b[1] * inv + b[2] * inv**2 + b[3] * inv**3)


def mackinnon_pvalue(tau: float, deterministic: str = "constant") -> float:
    det = _det(deterministic)
    if tau > _TAU_MAX[det]:
        return 1.0
    if tau < _TAU_MIN[det]:
        return 0.0
    coef = _P_SMALL[det] if tau <= _TAU_STAR[det] else _P_LARGE[det]
    return float(norm.cdf(np.polynomial.polynomial.polyval(tau, coef)))


def schwert_max_lags(nobs: int) -> int:
    return int(math.floor(12.0 * (nobs / 100.0) ** 0.25))


def _adf_design(y: np.ndarray, lags: int, det: str, start: int | None = None):
    """Regression of dy_t on y_{t-1}, dy_{t-1..t-lags} and deterministic terms.

    ``start`` fixes the first used difference index so that several lag
    orders can be compared on a common sample.
    """
    dy = np.diff(y)
    first = lags if start is None else start
    target = dy[first:]
    m = len(target)
    cols = [y[first : first + m]]
    for j in range(1, lags + 1):
        cols.append(dy[first - j : first - j + m])
    if det in ("c", "ct"):
        cols.append(np.ones(m))
    if det == "ct":
        cols.append(np.arange(first + 1, first + 1 + m, dtype=float))
    return np.column_stack(cols), target


def _aic(fit: OlsFit, k: int) -> float:
    n = fit.nobs
    llf = -0.5 * n * (math.log(2 * math.pi) + math.log(fit.ssr / n) + 1.0)
    return -2.0 * llf + 2.0 * k


def select_lags(series, max_lags: int | None = None, deterministic: str = "constant") -> int:
    """Lag order in ``0..max_lags`` minimizing AIC on a common estimation sample."""
    y = np.asarray(series, dtype=float)
    det = _det(deterministic)
    if max_lags is None:
        max_lags = schwert_max_lags(len(y) - 1)
    if max_lags < 0:
        raise ValueError("max_lags must be nonnegative")
    max_lags = min(max_lags, max(0, (len(y) - 1) // 3))
    if max_lags == 0:
        return 0
    best, best_ic = 0, math.inf
    for lag in range(max_lags + 1):
        X, t = _adf_design(y, lag, det, start=max_lags)
        ic = _aic(ols_fit(X, t), X.shape[1])
        if ic < best_ic - 1e-12:
            best, best_ic = lag, ic
    return best


def adf_test(series, spec: AdfSpec | None = None) -> AdfResult:
    """Augmented Dickey-Fuller unit-root test.

    The statistic is the t-ratio of the lagged level in the differenced
    regression, identical to ``(alpha_hat - 1) / SE`` in levels form.
    """
    spec = spec or AdfSpec()
    y = np.asarray(series, dtype=float)
    if y.ndim != 1 or not np.all(np.isfinite(y)):
        raise DataError("series must be a finite 1-D vector")
    if np.ptp(y) == 0:
        raise RankDeficientError("constant series: ADF regression is rank deficient")
    det = spec.deterministic
    if spec.lags == "auto":
        lags = select_lags(y, spec.max_lags, det)
    else:
        lags = int(spec.lags)
        if lags > len(y) / 3:
            raise DataError(f"explicit lags={lags} exceeds length/3")
    if len(y) < 20 + lags:
        raise DataError(f"series of length {len(y)} too short for {lags} lags (need {20 + lags})")

    X, target = _adf_design(y, lags, det)
    fit = ols_fit(X, target)
    coef, se = float(fit.params[0]), float(fit.bse[0])
    tau = coef / se
    nobs = len(target)
    crit = {lvl: mackinnon_critical(nobs, det, lvl) for lvl in LEVELS}
    reject = next((lvl for lvl in LEVELS if tau < crit[lvl]), None)
    return AdfResult(
        t_statistic=tau,
        critical_values=crit,
        p_value=mackinnon_pvalue(tau, det),
        alpha_hat=1.0 + coef,
        se_alpha=se,
        lags_used=lags,
        nobs=nobs,
        deterministic=det,
        reject_unit_root_at=reject,
    )


@dataclass(frozen=True, eq=False)
class DnsCurve:
    frequencies: np.ndarray
    values: np.ndarray
    bins: np.ndarray = field(repr=False)

    @property
    def flatness(self) -> float:
        return float(np.max(self.values) - np.min(self.values))

    def value_at_bin(self, b: int) -> float:
        hit = np.flatnonzero(self.bins == b)
        if hit.size == 0:
            raise KeyError(f"bin {b} is not populated")
        return float(self.values[hit[0]])


def dns(spectrum: "HilbertSpectrum", trim: float = 0.0) -> DnsCurve:
    """Degree of nonstationarity per populated frequency bin.

    ``DNS(w) = mean_t (1 - H(t, w) / h(w))**2`` with ``h`` the time-average
    of ``H`` over the evaluation window. ``trim`` drops that fraction of bars
    from each end of the window before averaging.
    """
    H = spectrum.amplitude
    T = H.shape[0]
    cut = int(math.floor(trim * T))
    if cut:
        H = H[cut : T - cut]
    h = H.mean(axis=0)
    populated = np.flatnonzero(h > 0)
    if populated.size == 0:
        raise EmptySpectrumError("spectrum has no populated frequency bins")
    ratio = H[:, populated] / h[populated]
    values = np.mean((1.0 - ratio) ** 2, axis=0)
    return DnsCurve(spectrum.bin_centers[populated], values, populated)
