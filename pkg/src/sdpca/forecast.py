"""Diffusion-index forecasters and the uniform method dispatcher.

Covers the regression step shared by every pipeline variant: plain OLS,
an L1-penalized fit solved by cyclic coordinate descent with warm
starts along the penalty path, a post-selection OLS refit, and direct
autoregressive benchmarks. ``forecast_method`` wires the full pipelines
together:

* ``sdpca``  - lag-supervised scaling, PCA on the scaled panel, regress
  the target on the k extracted factors.
* ``spca``   - the q = 1 special case of ``sdpca`` (contemporaneous
  scaling only).
* ``pca``    - PCA on the standardized raw panel, current and lagged
  factor values stacked as regressors.
* ``sw``     - PCA on the standardized raw panel, contemporaneous
  factors only.
* ``ar``     - the target's own lags.

Multi-step forecasts are always direct: y_{t+h} is regressed on time-t
information, refit per horizon.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    InvalidConfig,
    NonFiniteInput,
    RankDeficient,
    TooFewRows,
)
from .factors import FactorSet, extract_factors
from .panel import Panel, TargetSeries, standardize_values
from .supervise import LagSelection, SupervisedScaling, build_scaled_panel

__all__ = [
    "ForecastModel",
    "LassoConfig",
    "ols_fit",
    "lasso_fit",
    "post_lasso_refit",
    "ar_fit",
    "forecast_method",
    "implied_loading_matrix",
    "METHODS",
]

METHODS = ("sdpca", "pca", "spca", "sw", "ar")

# Share of the training rows held out when the penalty is picked by
# validation error.
_VALIDATION_FRAC = 0.2


@dataclass
class ForecastModel:
    """A fitted linear forecaster: coefficients plus audit metadata."""

    method: str
    intercept: float
    coef: np.ndarray
    k: int | None = None
    q: int | None = None
    lam: float | None = None
    train_desc: str = ""
    converged: bool = True
    n_sweeps: int = 0
    kkt_max_violation: float | None = None
    objective_path: np.ndarray | None = None
    fitted: np.ndarray | None = None
    targets: np.ndarray | None = None

    @property
    def active_set(self) -> list[int]:
        return [int(j) for j in np.flatnonzero(self.coef != 0.0)]

    @property
    def insample_mse(self) -> float | None:
        if self.fitted is None or self.targets is None:
            return None
        return float(np.mean((self.targets - self.fitted) ** 2))

    def predict(self, z: np.ndarray) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=float))
        return self.intercept + z @ self.coef

    def to_json(self) -> str:
        return json.dumps(
            {
                "method": self.method,
                "k": self.k,
                "q": self.q,
                "lambda": self.lam,
                "intercept": self.intercept,
                "coef": [float(c) for c in self.coef],
                "active_set": self.active_set,
                "converged": self.converged,
                "train": self.train_desc,
            },
            sort_keys=True,
        )


@dataclass
class LassoConfig:
    """Penalty-path settings for the coordinate-descent solver.

    ``lam_grid`` may be given explicitly (strictly positive,
    decreasing); otherwise a log-spaced path of ``n_grid`` points from
    the smallest all-zero penalty down to ``grid_min_ratio`` times it is
    built per problem. Selection is either a fixed ``lam`` or the
    penalty minimizing one-step-ahead MSFE on the last 20% of the
    training rows.
    """

    lam_grid: np.ndarray | None = None
    n_grid: int = 50
    grid_min_ratio: float = 1e-3
    tol: float = 1e-8
    max_sweeps: int = 1000
    selection: str = "validation"
    lam: float | None = None

    def __post_init__(self) -> None:
        if self.selection not in ("validation", "fixed"):
            raise InvalidConfig(f"unknown selection rule {self.selection!r}")
        if self.selection == "fixed" and self.lam is None:
            raise InvalidConfig("fixed selection needs a lam value")
        if self.lam is not None and self.lam < 0:
            raise InvalidConfig("lam must be nonnegative")
        if self.tol <= 0:
            raise InvalidConfig("tolerance must be positive")
        if self.max_sweeps < 1:
            raise InvalidConfig("max_sweeps must be >= 1")
        if self.lam_grid is not None:
            grid = np.asarray(self.lam_grid, dtype=float)
            if grid.ndim != 1 or grid.size == 0:
                raise InvalidConfig("lam_grid must be a nonempty vector")
            if np.any(grid <= 0) or np.any(np.diff(grid) >= 0):
                raise InvalidConfig("lam_grid must be strictly positive and decreasing")
            self.lam_grid = grid


def _check_design(design: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    z = np.asarray(design, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    yv = np.asarray(y, dtype=float).ravel()
    if z.shape[0] != yv.size:
        raise TooFewRows(f"design has {z.shape[0]} rows, target has {yv.size}")
    if not (np.isfinite(z).all() and np.isfinite(yv).all()):
        raise NonFiniteInput("non-finite values in regression inputs")
    return z, yv


def ols_fit(design: np.ndarray, y: np.ndarray, method: str = "ols") -> ForecastModel:
    """Least squares with an intercept, solved by orthogonal decomposition."""
    z, yv = _check_design(design, y)
    m, p = z.shape
    if m <= p:
        raise TooFewRows(f"need more rows ({m}) than regressors ({p})")
    if p == 0:
        mu = float(yv.mean())
        return ForecastModel(
            method=method,
            intercept=mu,
            coef=np.zeros(0),
            fitted=np.full(m, mu),
            targets=yv.copy(),
            train_desc=f"rows={m}",
        )
    full = np.column_stack([np.ones(m), z])
    if np.linalg.matrix_rank(full) < p + 1:
        raise RankDeficient("design matrix is rank deficient")
    beta, _, _, _ = np.linalg.lstsq(full, yv, rcond=None)
    fitted = full @ beta
    return ForecastModel(
        method=method,
        intercept=float(beta[0]),
        coef=beta[1:].copy(),
        fitted=fitted,
        targets=yv.copy(),
        train_desc=f"rows={m}",
    )


def _soft_threshold(v: float, lam: float) -> float:
    if v > lam:
        return v - lam
    if v < -lam:
        return v + lam
    return 0.0


def _cd_path(
    xs: np.ndarray, yc: np.ndarray, grid: np.ndarray, tol: float, max_sweeps: int
) -> tuple[np.ndarray, list[np.ndarray], np.ndarray, int]:
    """Cyclic coordinate descent over a decreasing penalty path.

    ``xs`` columns must have zero mean and unit mean square. Minimizes
    (1/2m)||yc - xs b||^2 + lam ||b||_1 at each grid point, warm-started
    from the previous one. Returns the coefficient path, per-sweep
    objective values per grid point, per-point sweep counts, and the
    total sweeps used.
    """
    m, p = xs.shape
    beta = np.zeros(p)
    resid = yc.copy()
    path = np.zeros((grid.size, p))
    objectives: list[np.ndarray] = []
    sweeps_used = np.zeros(grid.size, dtype=int)
    total = 0
    for g, lam in enumerate(grid):
        objs = []
        for sweep in range(max_sweeps):
            max_delta = 0.0
            for j in range(p):
                old = beta[j]
                rho = (xs[:, j] @ resid) / m + old  # xs columns have unit mean square
                new = _soft_threshold(rho, lam)
                if new != old:
                    resid += xs[:, j] * (old - new)
                    beta[j] = new
                    max_delta = max(max_delta, abs(new - old))
            objs.append(0.5 * (resid @ resid) / m + lam * np.abs(beta).sum())
            total += 1
            if max_delta < tol:
                break
        sweeps_used[g] = len(objs)
        objectives.append(np.asarray(objs))
        path[g] = beta
    return path, objectives, sweeps_used, total


def _standardize_columns(z: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    means = z.mean(axis=0)
    centered = z - means
    scales = np.sqrt((centered**2).mean(axis=0))
    scales = np.where(scales <= 1e-15, 1.0, scales)
    return centered / scales, means, scales


def _auto_grid(xs: np.ndarray, yc: np.ndarray, cfg: LassoConfig) -> np.ndarray:
    lam_max = float(np.max(np.abs(xs.T @ yc)) / xs.shape[0]) if xs.size else 1.0
    lam_max = max(lam_max, 1e-12)
    return np.geomspace(lam_max, lam_max * cfg.grid_min_ratio, cfg.n_grid)


def _kkt_violation(
    xs: np.ndarray, resid: np.ndarray, beta: np.ndarray, lam: float
) -> float:
    grad = xs.T @ resid / xs.shape[0]
    active = beta != 0.0
    viol = 0.0
    if np.any(~active):
        viol = max(viol, float(np.max(np.abs(grad[~active])) - lam))
    if np.any(active):
        viol = max(
            viol, float(np.max(np.abs(grad[active] - lam * np.sign(beta[active]))))
        )
    return max(viol, 0.0)


def lasso_fit(
    design: np.ndarray, y: np.ndarray, cfg: LassoConfig | None = None, method: str = "lasso"
) -> ForecastModel:
    """L1-penalized regression; intercept handled by centering, never penalized.

    The design is standardized internally and coefficients are mapped
    back to the original scale on return, so the reported KKT residual
    refers to the standardized problem the solver actually saw. Hitting
    the sweep limit returns the best iterate with ``converged=False``.
    """
    cfg = cfg or LassoConfig()
    z, yv = _check_design(design, y)
    m, p = z.shape
    if m < 3 or p == 0:
        raise TooFewRows("need at least 3 rows and 1 regressor")
    xs, means, scales = _standardize_columns(z)
    y_mean = float(yv.mean())
    yc = yv - y_mean

    grid = cfg.lam_grid if cfg.lam_grid is not None else _auto_grid(xs, yc, cfg)

    if cfg.selection == "fixed":
        lam_star = float(cfg.lam)
        path_grid = np.concatenate([grid[grid > lam_star], [lam_star]])
    else:
        lam_star = None
        path_grid = grid
        n_val = max(1, int(np.floor(_VALIDATION_FRAC * m)))
        if m - n_val < 3:
            raise TooFewRows("not enough rows before the validation tail")
        tr = slice(0, m - n_val)
        va = slice(m - n_val, m)
        xs_tr, mu_tr, sc_tr = _standardize_columns(z[tr])
        ytr_mean = float(yv[tr].mean())
        sub_grid = cfg.lam_grid if cfg.lam_grid is not None else _auto_grid(
            xs_tr, yv[tr] - ytr_mean, cfg
        )
        sub_path, _, _, _ = _cd_path(
            xs_tr, yv[tr] - ytr_mean, sub_grid, cfg.tol, cfg.max_sweeps
        )
        zs_va = (z[va] - mu_tr) / sc_tr
        val_mse = np.mean(
            (yv[va][None, :] - (ytr_mean + sub_path @ zs_va.T)) ** 2, axis=1
        )
        lam_star = float(sub_grid[int(np.argmin(val_mse))])
        path_grid = np.concatenate([grid[grid > lam_star], [lam_star]])

    path, objectives, sweeps, total = _cd_path(
        xs, yc, path_grid, cfg.tol, cfg.max_sweeps
    )
    for objs in objectives:
        deltas = np.diff(objs)
        if deltas.size and float(deltas.max()) > 1e-9 * (1.0 + abs(objs[0])):
            raise AssertionError("coordinate-descent objective increased")

    beta_s = path[-1]
    converged = bool(sweeps[-1] < cfg.max_sweeps)
    if not converged:
        warnings.warn("lasso hit the sweep limit; returning best iterate", stacklevel=2)
    resid = yc - xs @ beta_s
    kkt = _kkt_violation(xs, resid, beta_s, lam_star)

    coef = beta_s / scales
    intercept = y_mean - float(coef @ means)
    fitted = intercept + z @ coef
    return ForecastModel(
        method=method,
        intercept=intercept,
        coef=coef,
        lam=lam_star,
        converged=converged,
        n_sweeps=int(total),
        kkt_max_violation=kkt,
        objective_path=np.concatenate(objectives) if objectives else None,
        fitted=fitted,
        targets=yv.copy(),
        train_desc=f"rows={m}",
    )


def post_lasso_refit(
    model: ForecastModel, design: np.ndarray, y: np.ndarray
) -> ForecastModel:
    """OLS on the penalized fit's active columns to undo shrinkage bias.

    An empty active set falls back to the intercept-only (sample mean)
    model.
    """
    z, yv = _check_design(design, y)
    active = model.active_set
    refit = ols_fit(z[:, active], yv, method=f"{model.method}+refit")
    coef = np.zeros(z.shape[1])
    coef[active] = refit.coef
    refit.coef = coef
    refit.k = model.k
    refit.q = model.q
    refit.lam = model.lam
    return refit


def ar_fit(y: np.ndarray, p: int, h: int, method: str = "ar") -> ForecastModel:
    """Direct-projection autoregression: y_{t+h} on (1, y_t, ..., y_{t-p+1})."""
    yv = np.asarray(y, dtype=float).ravel()
    if p < 1:
        raise InvalidConfig("AR order must be >= 1")
    if yv.size <= p + 2 + h:
        raise TooFewRows(f"series of length {yv.size} too short for AR({p}), h={h}")
    anchors = np.arange(p - 1, yv.size - h)
    design = np.column_stack([yv[anchors - j] for j in range(p)])
    model = ols_fit(design, yv[anchors + h], method=method)
    model.q = p
    return model


def implied_loading_matrix(
    scaling: SupervisedScaling, base_loadings: np.ndarray
) -> np.ndarray:
    """Loading matrix of the scaled panel implied by step-1 coefficients.

    Row i is the Kronecker product of predictor i's lag coefficients
    with its raw-panel loading row, giving the N x (r*q) structure whose
    right singular matrix identifies the factor rotation used ahead of
    the penalized regression.
    """
    b = np.asarray(base_loadings, dtype=float)
    if b.ndim != 2 or b.shape[0] != len(scaling.fits):
        raise InvalidConfig("base loadings must have one row per predictor")
    q = scaling.q
    r = b.shape[1]
    out = np.zeros((b.shape[0], r * q))
    for fit in scaling.fits:
        gam = np.zeros(q)
        gam[: fit.q] = fit.coef
        out[fit.index] = np.kron(gam, b[fit.index])
    return out


def _stack_lags(f: np.ndarray, anchors: np.ndarray, q: int) -> np.ndarray:
    return np.hstack([f[anchors - j] for j in range(q)])


def _pipeline_design(
    method: str,
    panel: Panel | np.ndarray,
    y: TargetSeries,
    k: int | None,
    q: int | None,
    lag_spec: int | LagSelection | None,
) -> tuple[np.ndarray, np.ndarray, FactorSet | None, SupervisedScaling | None]:
    """Design rows for every available anchor, last row = forecast origin."""
    x = panel.values if isinstance(panel, Panel) else np.asarray(panel, dtype=float)
    t = x.shape[0]
    if method == "sdpca" or method == "spca":
        spec = 1 if method == "spca" else (lag_spec if lag_spec is not None else q)
        if spec is None:
            raise InvalidConfig(f"{method} needs q or lag_spec")
        scaling = build_scaled_panel(y, x, spec, light=True)
        fs = extract_factors(scaling.scaled, k)
        return fs.factors, scaling.anchors, fs, scaling
    if method == "pca":
        if q is None:
            raise InvalidConfig("pca needs q (number of stacked factor lags)")
        xs, _ = standardize_values(x)
        fs = extract_factors(xs, k)
        anchors = np.arange(q - 1, t)
        return _stack_lags(fs.factors, anchors, q), anchors, fs, None
    if method == "sw":
        xs, _ = standardize_values(x)
        fs = extract_factors(xs, k)
        return fs.factors, np.arange(t), fs, None
    if method == "ar":
        p = q if q is not None else 1
        anchors = np.arange(p - 1, t)
        return (
            np.column_stack([y.values[anchors - j] for j in range(p)]),
            anchors,
            None,
            None,
        )
    raise InvalidConfig(f"unknown method {method!r}; expected one of {METHODS}")


def forecast_method(
    method: str,
    panel: Panel | np.ndarray,
    y: TargetSeries,
    k: int | None = None,
    q: int | None = None,
    lag_spec: int | LagSelection | None = None,
    lasso: LassoConfig | None = None,
    rotation: np.ndarray | None = None,
) -> tuple[ForecastModel, float]:
    """Fit one pipeline on the full sample and forecast h steps past its end.

    The regression sample pairs time-t regressors with y_{t+h}; the
    point forecast applies the fitted coefficients to the final design
    row (the forecast origin). ``rotation`` optionally multiplies each
    factor row (as V g_t) before the regression, which matters only for
    the penalized fit.
    """
    design, anchors, fs, scaling = _pipeline_design(method, panel, y, k, q, lag_spec)
    if rotation is not None:
        design = design @ np.asarray(rotation, dtype=float).T
    h = y.horizon
    t = int(anchors[-1]) + 1
    n_reg = int(np.sum(anchors <= t - 1 - h))
    if n_reg < design.shape[1] + 2:
        raise TooFewRows("window too short for the requested configuration")
    z_reg = design[:n_reg]
    y_reg = y.values[anchors[:n_reg] + h]
    if lasso is not None:
        model = lasso_fit(z_reg, y_reg, lasso, method=method)
    else:
        model = ols_fit(z_reg, y_reg, method=method)
    model.k = fs.k if fs is not None else None
    model.q = scaling.q if scaling is not None else q
    point = float(model.predict(design[-1])[0])
    return model, point
