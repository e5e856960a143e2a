"""Per-predictor lagged regressions and the supervised re-scaled panel.

For each predictor x_i the target y_{t+h} is regressed on
(1, x_{i,t}, ..., x_{i,t-q_i+1}). The fitted value without its
intercept (coefficients applied to centered predictor lags) becomes the
i-th column of a new panel, so every predictor is re-weighted by its
own estimated predictive relationship with the target before any factor
extraction happens. Lag orders are either fixed or selected per
predictor by AIC, BIC, or expanding one-step cross-validation.

All N regressions are independent; the batched engine solves them in
one shot through per-predictor normal equations on correlation-scaled
lags, with an orthogonal-decomposition fallback for ill-conditioned
columns.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidConfig, NonFiniteInput, RankDeficient, TooFewRows
from .panel import Panel, TargetSeries

__all__ = [
    "LaggedFit",
    "SupervisedScaling",
    "LagSelection",
    "fit_lagged_regression",
    "select_lag",
    "build_scaled_panel",
    "insample_r2_scan",
    "scaling_to_json",
]

# Held-out share of the fitting window used by cross-validation.
CV_TAIL_FRAC = 0.2

# Smallest admissible eigenvalue of a lag correlation matrix before a
# predictor is treated as rank deficient.
_RANK_EPS = 1e-10


@dataclass
class LaggedFit:
    """OLS fit of y_{t+h} on one predictor and its lags.

    ``fitted`` covers the regression anchors t = q_i .. T-h;
    ``lag_means`` are the training means of each lag column, needed to
    build the centered scaled column.
    """

    index: int
    q: int
    intercept: float
    coef: np.ndarray
    lag_means: np.ndarray
    rss: float
    tss: float
    fitted: np.ndarray | None = None
    coef_se: np.ndarray | None = None
    criterion: float | None = None
    zeroed: bool = False

    @property
    def r2(self) -> float:
        if self.zeroed or self.tss <= 0.0:
            return 0.0
        return float(max(0.0, 1.0 - self.rss / self.tss))


@dataclass
class SupervisedScaling:
    """Step-1 output: all per-predictor fits plus the re-scaled panel.

    ``scaled`` has one row per time index q .. T (0-based anchors
    ``q - 1 .. T - 1``), so its final row belongs to the forecast
    origin and is available for out-of-sample prediction.
    """

    fits: list[LaggedFit]
    q: int
    horizon: int
    scaled: np.ndarray
    anchors: np.ndarray
    warnings: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class LagSelection:
    """Per-predictor lag-order selection settings."""

    criterion: str = "aic"
    q_max: int = 3

    def __post_init__(self) -> None:
        if self.criterion not in ("aic", "bic", "cv"):
            raise InvalidConfig(f"unknown criterion {self.criterion!r}")
        if self.q_max < 1:
            raise InvalidConfig("q_max must be >= 1")


def _lag_stack(x: np.ndarray, anchors: np.ndarray, q: int) -> np.ndarray:
    """(m, N, q) tensor: lag j of every column at every anchor."""
    cols = x if x.ndim == 2 else x[:, None]
    return np.stack([cols[anchors - j] for j in range(q)], axis=2)


def _batched_lag_ols(x: np.ndarray, y: np.ndarray, anchors: np.ndarray, q: int) -> dict:
    """Solve all per-column regressions of the target on each column's lags.

    ``y`` must already be the target slice aligned with ``anchors``.
    Works on correlation-scaled lag blocks via per-column normal
    equations (2-D shifted views only, no (m, N, q) temporaries), so all
    N regressions cost a handful of BLAS passes. Returns coefficient,
    intercept, lag-mean, rss/tss arrays and a mask of columns zeroed
    for rank deficiency.
    """
    cols = x if x.ndim == 2 else x[:, None]
    m = anchors.size
    n_cols = cols.shape[1]
    y_mean = y.mean()
    y_c = y - y_mean
    tss = float(y_c @ y_c)

    ws = []
    lag_means = np.empty((n_cols, q))
    scales = np.empty((n_cols, q))
    for j in range(q):
        lj = cols[anchors - j]
        mu = lj.mean(axis=0)
        lj = lj - mu
        sc = np.sqrt((lj * lj).mean(axis=0))
        safe = np.where(sc <= 0.0, 1.0, sc)
        lj /= safe
        lag_means[:, j] = mu
        scales[:, j] = sc
        ws.append(lj)

    corr = np.empty((n_cols, q, q))
    cross = np.empty((n_cols, q))
    for j in range(q):
        cross[:, j] = ws[j].T @ y_c / m
        for k in range(j, q):
            dots = (ws[j] * ws[k]).mean(axis=0) if k != j else np.ones(n_cols)
            corr[:, j, k] = dots
            corr[:, k, j] = dots

    zeroed = np.any(scales <= 1e-12 * np.maximum(1.0, np.abs(lag_means)), axis=1)
    if not zeroed.all() and q > 1:
        eigs = np.linalg.eigvalsh(corr)
        zeroed |= eigs[:, 0] < _RANK_EPS

    coef_s = np.zeros((n_cols, q))
    good = ~zeroed
    if good.any():
        if q == 1:
            coef_s[good, 0] = cross[good, 0]
        else:
            try:
                coef_s[good] = np.linalg.solve(corr[good], cross[good][..., None])[..., 0]
            except np.linalg.LinAlgError:
                coef_s[good] = np.stack(
                    [
                        np.linalg.lstsq(a, b, rcond=None)[0]
                        for a, b in zip(corr[good], cross[good])
                    ]
                )

    # rss from the fitted moments; no pass over the data needed
    rss = tss - m * (
        2.0 * np.einsum("ij,ij->i", coef_s, cross)
        - np.einsum("ij,ijk,ik->i", coef_s, corr, coef_s)
    )
    rss = np.maximum(rss, 0.0)
    rss[zeroed] = tss
    safe_scales = np.where(scales <= 0.0, 1.0, scales)
    coef = coef_s / safe_scales
    coef[zeroed] = 0.0
    intercept = y_mean - np.einsum("ij,ij->i", coef, lag_means)
    return {
        "coef": coef,
        "intercept": intercept,
        "lag_means": lag_means,
        "rss": rss,
        "tss": tss,
        "zeroed": zeroed,
        "n_obs": m,
    }


def _fit_anchors(t: int, h: int, q: int) -> np.ndarray:
    """0-based anchors t-1 for the regression sample t = q .. T - h."""
    if t - h - q + 1 < q + 2:
        raise TooFewRows(
            f"need T - h - q + 1 >= q + 2 rows; T={t}, h={h}, q={q}"
        )
    return np.arange(q - 1, t - h)


def fit_lagged_regression(
    y: TargetSeries, x_i: np.ndarray, q_i: int, index: int = 0
) -> LaggedFit:
    """OLS of y_{t+h} on (1, x_{i,t}, ..., x_{i,t-q_i+1}) over t = q_i .. T-h.

    Solved by a numerically stable orthogonal decomposition. Raises
    ``RankDeficient`` for collinear lag columns (e.g. a constant
    predictor) and ``TooFewRows`` when the sample cannot support q_i + 2
    observations.
    """
    x = np.asarray(x_i, dtype=float).ravel()
    if not np.isfinite(x).all():
        raise NonFiniteInput("predictor contains non-finite values")
    if q_i < 1:
        raise InvalidConfig("lag order must be >= 1")
    t, h = x.size, y.horizon
    if y.values.size != t:
        raise TooFewRows(f"target has {y.values.size} rows, predictor has {t}")
    anchors = _fit_anchors(t, h, q_i)
    yy = y.values[anchors + h]
    design = np.column_stack(
        [np.ones(anchors.size)] + [x[anchors - j] for j in range(q_i)]
    )
    if np.linalg.matrix_rank(design) < q_i + 1:
        raise RankDeficient(f"collinear lag columns for predictor {index}")
    beta, _, _, _ = np.linalg.lstsq(design, yy, rcond=None)
    fitted = design @ beta
    resid = yy - fitted
    rss = float(resid @ resid)
    tss = float(((yy - yy.mean()) ** 2).sum())
    dof = max(1, anchors.size - q_i - 1)
    sigma2 = rss / dof
    xtx_inv = np.linalg.inv(design.T @ design)
    se = np.sqrt(sigma2 * np.diag(xtx_inv))[1:]
    return LaggedFit(
        index=index,
        q=q_i,
        intercept=float(beta[0]),
        coef=beta[1:].copy(),
        lag_means=np.array([x[anchors - j].mean() for j in range(q_i)]),
        rss=rss,
        tss=tss,
        fitted=fitted,
        coef_se=se,
    )


def _criterion_values(rss: np.ndarray, n_obs: int, q: int, kind: str) -> np.ndarray:
    penalty = 2.0 if kind == "aic" else float(np.log(n_obs))
    safe = np.maximum(np.asarray(rss, dtype=float), 1e-300)
    return n_obs * np.log(safe / n_obs) + penalty * (q + 1)


def _cv_scores(
    x: np.ndarray, y: TargetSeries, q_max: int
) -> np.ndarray:
    """Expanding one-step-ahead MSFE over the held-out tail, per q and column.

    Candidate fits share the common anchor range starting at q_max so
    the scores are comparable across lag orders.
    """
    t, h = x.shape[0], y.horizon
    anchors = _fit_anchors(t, h, q_max)
    n_tail = max(1, int(np.floor(CV_TAIL_FRAC * anchors.size)))
    split = anchors.size - n_tail
    if split < q_max + 2:
        raise TooFewRows("not enough observations before the validation tail")
    n_cols = x.shape[1]
    errs = np.zeros((q_max, n_cols))
    for pos in range(split, anchors.size):
        a_star = anchors[pos]
        train = anchors[:pos]
        y_train = y.values[train + h]
        for q in range(1, q_max + 1):
            res = _batched_lag_ols(x, y_train, train, q)
            lags_star = np.stack([x[a_star - j] for j in range(q)], axis=1)
            pred = res["intercept"] + np.einsum(
                "ij,ij->i", res["coef"], lags_star
            )
            errs[q - 1] += (y.values[a_star + h] - pred) ** 2
    return errs / n_tail


def select_lag(
    y: TargetSeries, x_i: np.ndarray, q_max: int, criterion: str = "aic"
) -> int:
    """Pick the lag order in 1..q_max minimizing AIC, BIC, or CV error.

    Information criteria are computed on the common sample
    t = q_max .. T-h so values are comparable across candidates; ties
    break toward the smallest order.
    """
    if q_max < 1:
        raise InvalidConfig("q_max must be >= 1")
    if criterion not in ("aic", "bic", "cv"):
        raise InvalidConfig(f"unknown criterion {criterion!r}")
    if q_max == 1:
        return 1
    x = np.asarray(x_i, dtype=float).reshape(-1, 1)
    if criterion == "cv":
        scores = _cv_scores(x, y, q_max)[:, 0]
    else:
        t, h = x.shape[0], y.horizon
        anchors = _fit_anchors(t, h, q_max)
        yy = y.values[anchors + h]
        scores = np.empty(q_max)
        for q in range(1, q_max + 1):
            res = _batched_lag_ols(x, yy, anchors, q)
            scores[q - 1] = _criterion_values(res["rss"], anchors.size, q, criterion)[0]
    return int(np.argmin(scores)) + 1  # argmin takes the first (smallest q) on ties


def _select_lags_batched(
    x: np.ndarray, y: TargetSeries, spec: LagSelection
) -> np.ndarray:
    """Per-column lag orders for a whole panel, one batched fit per candidate."""
    t, h = x.shape[0], y.horizon
    if spec.q_max == 1:
        return np.ones(x.shape[1], dtype=int)
    if spec.criterion == "cv":
        scores = _cv_scores(x, y, spec.q_max)
    else:
        anchors = _fit_anchors(t, h, spec.q_max)
        yy = y.values[anchors + h]
        scores = np.empty((spec.q_max, x.shape[1]))
        for q in range(1, spec.q_max + 1):
            res = _batched_lag_ols(x, yy, anchors, q)
            scores[q - 1] = _criterion_values(res["rss"], anchors.size, q, spec.criterion)
    return np.argmin(scores, axis=0).astype(int) + 1


def build_scaled_panel(
    y: TargetSeries,
    panel: Panel | np.ndarray,
    lag_spec: int | LagSelection,
    light: bool = False,
) -> SupervisedScaling:
    """Run the per-predictor regressions and assemble the re-scaled panel.

    ``lag_spec`` is either a fixed common lag order or a
    :class:`LagSelection`. The scaled column is the centered fitted
    value, so the result is invariant to rescaling or shifting any
    predictor. Rank-deficient predictors contribute an all-zero column
    with a warning instead of aborting. ``light`` skips the per-fit
    record objects; the rolling evaluator relies on this to keep the
    window loop cheap.
    """
    x = panel.values if isinstance(panel, Panel) else np.asarray(panel, dtype=float)
    if not np.isfinite(x).all():
        raise NonFiniteInput("panel contains non-finite values")
    t, n_cols = x.shape
    h = y.horizon
    if y.values.size != t:
        raise TooFewRows(f"target has {y.values.size} rows, panel has {t}")

    if isinstance(lag_spec, LagSelection):
        q_sel = _select_lags_batched(x, y, lag_spec)
    else:
        if int(lag_spec) < 1:
            raise InvalidConfig("fixed lag order must be >= 1")
        q_sel = np.full(n_cols, int(lag_spec), dtype=int)

    q = int(q_sel.max())
    _fit_anchors(t, h, q)  # validates sample size at the deepest order
    out_anchors = np.arange(q - 1, t)
    scaled = np.zeros((out_anchors.size, n_cols))
    fits: list[LaggedFit] = []
    warn_list: list[str] = []

    for q_i in np.unique(q_sel):
        members = np.flatnonzero(q_sel == q_i)
        anchors = _fit_anchors(t, h, int(q_i))
        yy = y.values[anchors + h]
        cols = x[:, members]
        res = _batched_lag_ols(cols, yy, anchors, int(q_i))
        block = np.zeros((out_anchors.size, members.size))
        for j in range(int(q_i)):
            block += (cols[out_anchors - j] - res["lag_means"][:, j]) * res["coef"][:, j]
        scaled[:, members] = block
        if res["zeroed"].any():
            warn_list.extend(
                f"predictor {col} is rank deficient; column zeroed"
                for col in members[res["zeroed"]]
            )
        if not light:
            for pos, col in enumerate(members):
                fit_lags = _lag_stack(x[:, col], anchors, int(q_i))[:, 0, :]
                fits.append(
                    LaggedFit(
                        index=int(col),
                        q=int(q_i),
                        intercept=float(res["intercept"][pos]),
                        coef=res["coef"][pos].copy(),
                        lag_means=res["lag_means"][pos].copy(),
                        rss=float(res["rss"][pos]),
                        tss=res["tss"],
                        fitted=res["intercept"][pos] + fit_lags @ res["coef"][pos],
                        zeroed=bool(res["zeroed"][pos]),
                    )
                )
    fits.sort(key=lambda f: f.index)
    for msg in warn_list:
        warnings.warn(msg, stacklevel=2)
    return SupervisedScaling(
        fits=fits,
        q=q,
        horizon=h,
        scaled=scaled,
        anchors=out_anchors,
        warnings=warn_list,
    )


def insample_r2_scan(
    y: TargetSeries, panel: Panel | np.ndarray, lag_spec: int | LagSelection
) -> np.ndarray:
    """Per-predictor in-sample R-squared of the lagged regressions."""
    scaling = build_scaled_panel(y, panel, lag_spec)
    return np.array([f.r2 for f in scaling.fits])


def scaling_to_json(scaling: SupervisedScaling) -> str:
    """Audit dump of every per-predictor fit."""
    recs = [
        {
            "index": f.index,
            "q": f.q,
            "intercept": f.intercept,
            "coef": [float(c) for c in f.coef],
            "r2": f.r2,
            "criterion": f.criterion,
            "zeroed": f.zeroed,
        }
        for f in scaling.fits
    ]
    return json.dumps(
        {"q": scaling.q, "horizon": scaling.horizon, "fits": recs}, sort_keys=True
    )
