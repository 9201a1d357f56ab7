"""Epsilon-insensitive support vector regression with an RBF kernel.

The dual is solved by sequential minimal optimization over the stacked
variable ``beta = [alpha; alpha*]`` (length ``2n``) with second-order
working-set selection. The inner loop is compiled with numba.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from os import PathLike
from typing import Any

import numba
import numpy as np

from .errors import DataError, EEQuakeError
from .timeseries import Scaler, fit_scaler

FORMAT_VERSION = 1
DEFAULT_C_GRID = (0.1, 1.0, 10.0, 100.0, 1000.0)
DEFAULT_GAMMA_GRID = (1e-3, 1e-2, 1e-1, 1.0, 10.0)
DEFAULT_EPSILON = 0.1
DEFAULT_TOL = 1e-6
MAX_ITER = 1_000_000
JITTER = 1e-10
_TAU = 1e-12


@dataclass(frozen=True)
class Hyperparams:
    c: float = 1.0
    gamma: float = 0.1
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self) -> None:
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if not self.gamma >= 0:
            raise ValueError(f"gamma must be nonnegative, got {self.gamma}")
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be nonnegative, got {self.epsilon}")


@dataclass(frozen=True)
class GridSpec:
    c: tuple[float, ...] = DEFAULT_C_GRID
    gamma: tuple[float, ...] = DEFAULT_GAMMA_GRID
    cv_folds: int = 3

    def __post_init__(self) -> None:
        object.__setattr__(self, "c", tuple(float(v) for v in self.c))
        object.__setattr__(self, "gamma", tuple(float(v) for v in self.gamma))
        if not self.c or not self.gamma:
            raise ValueError("grid needs at least one value of c and of gamma")
        if self.cv_folds < 2:
            raise ValueError("cv_folds must be >= 2")

    def cells(self) -> list[tuple[float, float]]:
        """Every ``(c, gamma)`` pair in lexicographic order, c outermost."""
        return list(itertools.product(self.c, self.gamma))


def rbf_kernel(x, y, gamma: float) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    d = x - y
    return float(math.exp(-gamma * float(d @ d)))


def gram(a, b, gamma: float) -> np.ndarray:
    """Kernel matrix ``K[i, j] = exp(-gamma * |a_i - b_j|**2)``."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    sq = (
        np.sum(a * a, axis=1)[:, None]
        + np.sum(b * b, axis=1)[None, :]
        - 2.0 * (a @ b.T)
    )
    return np.exp(-gamma * np.maximum(sq, 0.0))


@numba.njit(cache=True, nogil=True)
def _gradient(K, y, eps, beta, G):
    n = K.shape[0]
    for t in range(n):
        acc = 0.0
        for s in range(n):
            acc += K[t, s] * (beta[s] - beta[s + n])
        G[t] = eps - y[t] + acc
        G[t + n] = eps + y[t] - acc


@numba.njit(cache=True, nogil=True)
def _violators(G, beta, c, n, active, n_active):
    """Largest up-set and down-set violations over the active variables."""
    gmax = -np.inf
    gmax2 = -np.inf
    i_sel = -1
    for a in range(n_active):
        t = active[a]
        if t < n:
            if beta[t] < c and -G[t] >= gmax:
                gmax = -G[t]
                i_sel = t
            if beta[t] > 0 and G[t] > gmax2:
                gmax2 = G[t]
        else:
            if beta[t] > 0 and G[t] >= gmax:
                gmax = G[t]
                i_sel = t
            if beta[t] < c and -G[t] > gmax2:
                gmax2 = -G[t]
    return gmax, gmax2, i_sel


@numba.njit(cache=True, nogil=True)
def _smo(K, y, c, eps, tol, max_iter):
    # beta[:n] = alpha (sign +1), beta[n:] = alpha* (sign -1); Q[s, t] = z_s z_t K[s % n, t % n]
    n = K.shape[0]
    m = 2 * n
    beta = np.zeros(m)
    G = np.empty(m)
    for i in range(n):
        G[i] = eps - y[i]
        G[i + n] = eps + y[i]
    active = np.arange(m)
    n_active = m
    unshrunk = False
    period = min(n, 1000)
    countdown = period
    it = 0
    while it < max_iter:
        countdown -= 1
        if countdown == 0:
            countdown = period
            gmax, gmax2, _ = _violators(G, beta, c, n, active, n_active)
            if not unshrunk and gmax + gmax2 <= 10.0 * tol:
                unshrunk = True
                _gradient(K, y, eps, beta, G)
                active = np.arange(m)
                n_active = m
            # drop bounded variables that cannot enter a violating pair
            k = 0
            for a in range(n_active):
                t = active[a]
                g = G[t] if t < n else -G[t]  # z_t * G_t
                if beta[t] >= c:
                    drop = (-g > gmax) if t < n else (g > gmax2)
                elif beta[t] <= 0:
                    drop = (g > gmax2) if t < n else (-g > gmax)
                else:
                    drop = False
                if not drop:
                    active[k] = t
                    k += 1
            n_active = k

        gmax, _, i_sel = _violators(G, beta, c, n, active, n_active)
        ki = i_sel - n if i_sel >= n else i_sel
        si = 1.0 if i_sel < n else -1.0
        gmax2 = -np.inf
        j_sel = -1
        if i_sel >= 0:
            kii = K[ki, ki]
            obj_min = np.inf
            for a in range(n_active):
                t = active[a]
                if t < n:
                    if not beta[t] > 0:
                        continue
                    v = G[t]
                    kt = t
                    zt = 1.0
                else:
                    if not beta[t] < c:
                        continue
                    v = -G[t]
                    kt = t - n
                    zt = -1.0
                if v >= gmax2:
                    gmax2 = v
                b = gmax + v
                if b > 0:
                    q = kii + K[kt, kt] - 2.0 * si * zt * K[ki, kt]
                    if q <= 0:
                        q = _TAU
                    o = -(b * b) / q
                    if o <= obj_min:
                        obj_min = o
                        j_sel = t
        if i_sel < 0 or j_sel < 0 or gmax + gmax2 < tol:
            # optimal on the active set: verify on every variable
            if n_active == m:
                break
            _gradient(K, y, eps, beta, G)
            active = np.arange(m)
            n_active = m
            unshrunk = True
            countdown = period
            gmax, gmax2, _ = _violators(G, beta, c, n, active, n_active)
            if gmax + gmax2 < tol:
                break
            continue
        it += 1
        i = i_sel
        j = j_sel
        kj = j - n if j >= n else j
        zi = si
        zj = 1.0 if j < n else -1.0
        qii = K[ki, ki]
        qjj = K[kj, kj]
        qij = zi * zj * K[ki, kj]
        old_i = beta[i]
        old_j = beta[j]
        if zi != zj:
            quad = qii + qjj + 2.0 * qij
            if quad <= 0:
                quad = _TAU
            delta = (-G[i] - G[j]) / quad
            diff = beta[i] - beta[j]
            beta[i] += delta
            beta[j] += delta
            if diff > 0:
                if beta[j] < 0:
                    beta[j] = 0.0
                    beta[i] = diff
            else:
                if beta[i] < 0:
                    beta[i] = 0.0
                    beta[j] = -diff
            if diff > 0:
                if beta[i] > c:
                    beta[i] = c
                    beta[j] = c - diff
            else:
                if beta[j] > c:
                    beta[j] = c
                    beta[i] = c + diff
        else:
            quad = qii + qjj - 2.0 * qij
            if quad <= 0:
                quad = _TAU
            delta = (G[i] - G[j]) / quad
            total = beta[i] + beta[j]
            beta[i] -= delta
            beta[j] += delta
            if total > c:
                if beta[i] > c:
                    beta[i] = c
                    beta[j] = total - c
            else:
                if beta[j] < 0:
                    beta[j] = 0.0
                    beta[i] = total
            if total > c:
                if beta[j] > c:
                    beta[j] = c
                    beta[i] = total - c
            else:
                if beta[i] < 0:
                    beta[i] = 0.0
                    beta[j] = total
        wi = zi * (beta[i] - old_i)
        wj = zj * (beta[j] - old_j)
        for a in range(n_active):
            t = active[a]
            if t < n:
                G[t] += K[ki, t] * wi + K[kj, t] * wj
            else:
                G[t] -= K[ki, t - n] * wi + K[kj, t - n] * wj

    if n_active < m:
        _gradient(K, y, eps, beta, G)
    # bias: average over free variables, else the midpoint of the feasible interval
    ub = np.inf
    lb = -np.inf
    nfree = 0
    sfree = 0.0
    for t in range(m):
        zt = 1.0 if t < n else -1.0
        yg = zt * G[t]
        if beta[t] >= c:
            if zt < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif beta[t] <= 0:
            if zt > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            nfree += 1
            sfree += yg
    if nfree > 0:
        rho = sfree / nfree
    else:
        rho = 0.5 * (ub + lb)
    return beta, -rho, it


@dataclass(frozen=True, eq=False)
class SvrModel:
    """Kernel expansion ``f(x) = sum_i coef_i K(sv_i, x) + bias`` on scaled inputs.

    ``feature_scaler`` and ``target_scaler`` map raw rows and prices into the
    unit range the solver saw; :meth:`predict` takes and returns raw values.
    """

    support_vectors: np.ndarray
    dual_coef: np.ndarray
    bias: float
    hyperparams: Hyperparams
    feature_scaler: Scaler
    target_scaler: Scaler
    support_indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    iterations: int = 0

    @property
    def dim(self) -> int:
        return int(self.feature_scaler.minimum.shape[0])

    def decision(self, scaled_rows) -> np.ndarray:
        """Expansion evaluated on already-scaled rows (scaled target units)."""
        x = np.atleast_2d(np.asarray(scaled_rows, dtype=float))
        if x.shape[1] != self.dim:
            raise ValueError(f"dimension mismatch: expected {self.dim}, got {x.shape[1]}")
        if len(self.dual_coef) == 0:
            return np.full(len(x), self.bias)
        return gram(x, self.support_vectors, self.hyperparams.gamma) @ self.dual_coef + self.bias

    def predict(self, rows) -> np.ndarray:
        raw = np.asarray(rows, dtype=float)
        if raw.ndim == 1:
            raw = raw[:, None] if self.dim == 1 and raw.size != 1 else raw[None, :]
        scaled = self.feature_scaler.apply(raw)
        out = self.decision(scaled)
        return self.target_scaler.invert(out[:, None])[:, 0]

    def to_dict(self) -> dict[str, Any]:
        return {
            "format_version": FORMAT_VERSION,
            "kernel": "rbf",
            "hyperparams": {"c": self.hyperparams.c, "gamma": self.hyperparams.gamma, "epsilon": self.hyperparams.epsilon},
            "feature_scaler": self.feature_scaler.to_dict(),
            "target_scaler": self.target_scaler.to_dict(),
            "support_indices": [int(i) for i in self.support_indices],
            "support_vectors": self.support_vectors.tolist(),
            "dual_coef": self.dual_coef.tolist(),
            "bias": self.bias,
            "iterations": self.iterations,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SvrModel":
        if d.get("format_version") != FORMAT_VERSION:
            raise EEQuakeError(f"unsupported model format version {d.get('format_version')!r}")
        hp = d["hyperparams"]
        fs = Scaler.from_dict(d["feature_scaler"])
        sv = np.asarray(d["support_vectors"], dtype=float).reshape(-1, fs.minimum.shape[0])
        return cls(
            support_vectors=sv,
            dual_coef=np.asarray(d["dual_coef"], dtype=float),
            bias=float(d["bias"]),
            hyperparams=Hyperparams(float(hp["c"]), float(hp["gamma"]), float(hp["epsilon"])),
            feature_scaler=fs,
            target_scaler=Scaler.from_dict(d["target_scaler"]),
            support_indices=np.asarray(d.get("support_indices", []), dtype=int),
            iterations=int(d.get("iterations", 0)),
        )


def _as_rows(features) -> np.ndarray:
    x = np.asarray(features, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] == 0:
        raise DataError("need a non-empty 2-D feature matrix")
    if not np.all(np.isfinite(x)):
        raise DataError("features contain non-finite values")
    return x


def _as_targets(targets, n: int) -> np.ndarray:
    y = np.asarray(targets, dtype=float).ravel()
    if y.shape != (n,):
        raise DataError(f"{len(y)} targets for {n} rows")
    if not np.all(np.isfinite(y)):
        raise DataError("targets contain non-finite values")
    return y


def solve_dual(K, y, hp: Hyperparams, tol: float = DEFAULT_TOL, max_iter: int = MAX_ITER):
    """Raw solver entry: returns ``(beta, bias, iterations)`` for a precomputed kernel."""
    K = np.ascontiguousarray(K, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    return _smo(K, y, float(hp.c), float(hp.epsilon), float(tol), int(max_iter))


def fit_scaled(x, y, hp: Hyperparams, tol: float = DEFAULT_TOL):
    """Solve on pre-scaled rows and targets; returns ``(coef, bias, beta, iterations)``."""
    K = gram(x, x, hp.gamma)
    K[np.diag_indices_from(K)] += JITTER
    beta, bias, it = solve_dual(K, y, hp, tol)
    n = len(y)
    coef = beta[:n] - beta[n:]
    return coef, float(bias), beta, int(it)


def train(features, targets, hp: Hyperparams | None = None, tol: float = DEFAULT_TOL) -> SvrModel:
    """Fit on raw rows and prices; both are min-max scaled on this training set."""
    hp = hp or Hyperparams()
    x_raw = _as_rows(features)
    y_raw = _as_targets(targets, len(x_raw))
    fs = fit_scaler(x_raw)
    ts = fit_scaler(y_raw)
    x = fs.apply(x_raw)
    y = ts.apply(y_raw[:, None])[:, 0]
    coef, bias, _, it = fit_scaled(x, y, hp, tol)
    keep = np.flatnonzero(coef != 0.0)
    return SvrModel(
        support_vectors=x[keep],
        dual_coef=coef[keep],
        bias=bias,
        hyperparams=hp,
        feature_scaler=fs,
        target_scaler=ts,
        support_indices=keep,
        iterations=it,
    )


def predict(model: SvrModel, rows) -> np.ndarray:
    return model.predict(rows)


def dual_objective(model: SvrModel, features, targets) -> float:
    """``0.5 * coef' K coef + eps * sum|coef| - y' coef`` in scaled units (minimization form).

    At an optimum ``alpha_i * alpha*_i = 0``, so ``|coef|`` recovers
    ``alpha + alpha*`` and this equals the stacked-variable objective.
    """
    x = model.feature_scaler.apply(_as_rows(features))
    y = model.target_scaler.apply(_as_targets(targets, len(x))[:, None])[:, 0]
    coef = np.zeros(len(x))
    coef[model.support_indices] = model.dual_coef
    K = gram(x, x, model.hyperparams.gamma)
    K[np.diag_indices_from(K)] += JITTER
    return float(0.5 * coef @ K @ coef + model.hyperparams.epsilon * np.abs(coef).sum() - y @ coef)


def stacked_objective(K, y, beta, epsilon: float) -> float:
    """Dual objective in the stacked ``[alpha; alpha*]`` variable."""
    n = len(y)
    coef = beta[:n] - beta[n:]
    return float(0.5 * coef @ K @ coef + epsilon * beta.sum() - y @ coef)


def mape(actual, predicted) -> float:
    """Mean absolute percentage error, in percent."""
    a = np.asarray(actual, dtype=float).ravel()
    p = np.asarray(predicted, dtype=float).ravel()
    if a.shape != p.shape or a.size == 0:
        raise DataError("mape needs equal, non-zero lengths")
    if np.any(a == 0):
        raise DataError("mape is undefined for zero actual values")
    return float(100.0 * np.mean(np.abs(a - p) / np.abs(a)))


def expanding_folds(n: int, folds: int) -> list[tuple[int, int]]:
    """``(train_end, valid_end)`` pairs: train on ``[0, train_end)``, validate on ``[train_end, valid_end)``.

    The series is split into ``folds + 1`` near-equal chunks; fold ``k``
    trains on the first ``k`` chunks and validates on chunk ``k + 1``.
    """
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if n < 2 * (folds + 1):
        raise DataError(f"{n} rows are too few for {folds} expanding-window folds")
    edges = [round(n * k / (folds + 1)) for k in range(folds + 2)]
    return [(edges[k], edges[k + 1]) for k in range(1, folds + 1)]


@dataclass(frozen=True)
class GridResult:
    best: Hyperparams
    scores: tuple[tuple[float, float, float], ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "best": {"c": self.best.c, "gamma": self.best.gamma, "epsilon": self.best.epsilon},
            "scores": [{"c": c, "gamma": g, "mape": s} for c, g, s in self.scores],
        }


def grid_search(features, targets, grid: GridSpec | None = None, epsilon: float = DEFAULT_EPSILON) -> GridResult:
    """Pick ``(c, gamma)`` minimizing mean validation MAPE over expanding-window folds.

    Rows must be in time order. Ties go to the earliest cell in grid order.
    """
    grid = grid or GridSpec()
    x = _as_rows(features)
    y = _as_targets(targets, len(x))
    folds = expanding_folds(len(x), grid.cv_folds)
    scores = []
    best, best_score = None, math.inf
    for c, g in grid.cells():
        hp = Hyperparams(c, g, epsilon)
        errs = []
        for tr, va in folds:
            model = train(x[:tr], y[:tr], hp)
            errs.append(mape(y[tr:va], model.predict(x[tr:va])))
        s = float(np.mean(errs))
        scores.append((c, g, s))
        if s < best_score:
            best, best_score = hp, s
    if best is None:
        raise EEQuakeError("grid search produced no finite score")
    return GridResult(best, tuple(scores))


def save_model(model: SvrModel, path: str | PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_model(path: str | PathLike) -> SvrModel:
    with open(path, encoding="utf-8") as fh:
        return SvrModel.from_dict(json.load(fh))

