"""Monte-Carlo generators for the weak-factor forecasting experiments.

The data-generating process is a static factor panel with a sparse
loading matrix (only ``n`` of ``N`` rows load on the factors) and a
target driven by the current and lagged factors:

    x_t = B f_t + u_t
    y_{t+1} = b0' f_t + b1' f_{t-1} + ... + e_{t+1}

with f_t ~ N(0, I_r), u_{i,t} ~ N(0,1), nonzero loadings ~ U(-2, 2).
All draws are fully determined by (seed, replication index).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidConfig
from .panel import Panel, TargetSeries, write_fredmd

__all__ = ["SimConfig", "SimDraw", "generate", "population_checks", "RNG_ALGORITHM"]

# Pinned generator: numpy's PCG64 seeded through SeedSequence([seed, rep]).
RNG_ALGORITHM = "numpy.random.Generator(PCG64)"

LOADING_LOW, LOADING_HIGH = -2.0, 2.0


@dataclass(frozen=True)
class SimConfig:
    """Generator settings. ``betas`` holds one length-r vector per target lag."""

    T: int = 200
    N: int = 300
    n: int = 40
    r: int = 2
    q: int = 2
    betas: tuple[tuple[float, ...], ...] = ((1.0, -0.8), (-1.0, 2.0))
    u_scale: float = 1.0
    eps_scale: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.r < 1 or self.q < 1:
            raise InvalidConfig("need r >= 1 and q >= 1")
        if not (1 <= self.n <= self.N):
            raise InvalidConfig(f"need 1 <= n <= N, got n={self.n}, N={self.N}")
        if self.T < 4:
            raise InvalidConfig("T is too small to generate a usable sample")
        if len(self.betas) != self.q:
            raise InvalidConfig(f"expected {self.q} beta vectors, got {len(self.betas)}")
        if any(len(b) != self.r for b in self.betas):
            raise InvalidConfig("every beta vector must have length r")
        if self.u_scale < 0 or self.eps_scale < 0:
            raise InvalidConfig("noise scales must be nonnegative")

    @property
    def beta_stacked(self) -> np.ndarray:
        """True coefficient vector on the stacked factors (f_t', f_{t-1}', ...)'."""
        return np.concatenate([np.asarray(b, dtype=float) for b in self.betas])


@dataclass
class SimDraw:
    """One seeded draw: observed data plus every latent ingredient.

    ``factors`` is aligned with the panel rows; ``factors_pre`` holds the
    q burn-in factor vectors from before the first panel row, so the
    target is defined from its first observation onward.
    """

    config: SimConfig
    panel: Panel
    target: TargetSeries
    factors: np.ndarray
    factors_pre: np.ndarray
    loadings: np.ndarray
    nonzero_rows: np.ndarray
    eps: np.ndarray
    replication: int = 0

    def stacked_true_factors(self) -> np.ndarray:
        """T x (r*q) matrix of true (f_t', ..., f_{t-q+1}')' per panel row."""
        q = self.config.q
        full = np.vstack([self.factors_pre, self.factors])  # time 1-q .. T
        blocks = [full[q - j : q - j + self.config.T] for j in range(q)]
        return np.hstack(blocks)


def generate(cfg: SimConfig, rep: int = 0) -> SimDraw:
    """Draw one replication. Identical (cfg, rep) always reproduces bitwise."""
    rng = np.random.default_rng([cfg.seed, rep])
    T, N, r, q = cfg.T, cfg.N, cfg.r, cfg.q

    full_f = rng.standard_normal((T + q, r))  # rows are times 1-q .. T
    u = rng.standard_normal((T, N)) * cfg.u_scale
    rows = np.sort(rng.choice(N, size=cfg.n, replace=False))
    loadings = np.zeros((N, r))
    loadings[rows] = rng.uniform(LOADING_LOW, LOADING_HIGH, size=(cfg.n, r))
    eps = rng.standard_normal(T) * cfg.eps_scale

    x = full_f[q:] @ loadings.T + u
    y = eps.copy()
    for j, beta in enumerate(cfg.betas):
        y += full_f[q - 1 - j : q - 1 - j + T] @ np.asarray(beta, dtype=float)

    panel = Panel(
        values=x,
        dates=[f"t{i + 1:05d}" for i in range(T)],
        names=[f"x{j + 1:04d}" for j in range(N)],
        tcodes=[1] * N,
    )
    return SimDraw(
        config=cfg,
        panel=panel,
        target=TargetSeries(values=y, horizon=1, name="y"),
        factors=full_f[q:],
        factors_pre=full_f[:q],
        loadings=loadings,
        nonzero_rows=rows,
        eps=eps,
        replication=rep,
    )


def population_checks(draw: SimDraw) -> dict:
    """Compare a draw's sample moments against the generating laws.

    Purely diagnostic: returns values, bounds, and pass flags without
    raising on a violation.
    """
    cfg = draw.config
    if cfg.T < 200:
        raise InvalidConfig("population checks need T >= 200")
    f = draw.factors
    t = f.shape[0]
    mean_dev = float(np.max(np.abs(f.mean(axis=0))))
    cov_dev = float(np.max(np.abs(np.cov(f, rowvar=False, ddof=1) - np.eye(cfg.r))))
    n_nonzero = int(np.sum(np.any(draw.loadings != 0.0, axis=1)))
    mean_bound = 4.0 / np.sqrt(t)
    cov_bound = 0.3
    return {
        "factor_mean_dev": mean_dev,
        "factor_mean_bound": mean_bound,
        "factor_mean_ok": mean_dev <= mean_bound,
        "factor_cov_dev": cov_dev,
        "factor_cov_bound": cov_bound,
        "factor_cov_ok": cov_dev <= cov_bound,
        "n_nonzero_rows": n_nonzero,
        "n_nonzero_ok": n_nonzero == cfg.n,
        "strength_exponent": float(np.log(cfg.n) / np.log(cfg.N)),
        "rng": RNG_ALGORITHM,
    }


def export_draw(draw: SimDraw, panel_path, target_path) -> None:
    """Write the draw in the same CSV layouts the ingestion side reads."""
    write_fredmd(draw.panel, panel_path)
    with open(target_path, "w") as fh:
        fh.write("date,%s\n" % draw.target.name)
        for d, v in zip(draw.panel.dates, draw.target.values):
            fh.write(f"{d},{v!r}\n")
