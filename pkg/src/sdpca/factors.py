"""Principal-component extraction and factor-count selection.

Factors are normalized so that G'G / T = I_k; loadings are X'G / T.
The eigendecomposition runs on whichever Gram matrix (T x T or N x N)
is smaller; the two routes agree on the nonzero spectrum. Eigenvalues
are always reported on the covariance scale eig(X'X / T) so explained
shares do not depend on the route taken.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidConfig, KTooLarge, NonFiniteInput

__all__ = [
    "FactorSet",
    "FactorCountChoice",
    "extract_factors",
    "select_num_factors",
    "svd_rotation",
]

_TIE_REL = 1e-12
_ZERO_REL = 1e-13


@dataclass
class FactorSet:
    """Extracted factors, their loadings, and the full eigenvalue spectrum."""

    factors: np.ndarray
    loadings: np.ndarray
    eigenvalues: np.ndarray
    explained: np.ndarray
    normalization: str = "factors_orthonormal"

    @property
    def k(self) -> int:
        return self.factors.shape[1]


@dataclass
class FactorCountChoice:
    """Result of a factor-count selection rule plus its diagnostics."""

    method: str
    k: int
    diagnostics: dict = field(default_factory=dict)


def _full_spectrum(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, bool]:
    """Eigen-decompose the cheaper Gram matrix.

    Returns (descending eigenvalues of X'X/T, descending eigenvectors,
    used_time_side). On the time side the vectors span R^T, on the
    cross-section side R^N.
    """
    t, n = x.shape
    if t <= n:
        gram = (x @ x.T) / n
        vals, vecs = np.linalg.eigh(gram)
        vals = vals[::-1] * (n / t)  # rescale to eig(X'X / T)
        return vals, vecs[:, ::-1], True
    gram = (x.T @ x) / t
    vals, vecs = np.linalg.eigh(gram)
    return vals[::-1], vecs[:, ::-1], False


def _fix_signs(factors: np.ndarray, loadings: np.ndarray) -> None:
    """Make the largest-magnitude entry of each loading column positive."""
    for j in range(loadings.shape[1]):
        imax = int(np.argmax(np.abs(loadings[:, j])))
        if loadings[imax, j] < 0:
            loadings[:, j] *= -1.0
            factors[:, j] *= -1.0


def _order_tied_blocks(
    vals: np.ndarray, factors: np.ndarray, loadings: np.ndarray
) -> None:
    """Deterministic column order inside numerically tied eigenvalue blocks."""
    if vals.size < 2:
        return
    tol = _TIE_REL * max(vals[0], 1.0)
    start = 0
    for j in range(1, vals.size + 1):
        if j == vals.size or vals[start] - vals[j] > tol:
            if j - start > 1:
                block = list(range(start, j))
                order = sorted(block, key=lambda c: tuple(loadings[:, c]))
                loadings[:, block] = loadings[:, order]
                factors[:, block] = factors[:, order]
            start = j


def extract_factors(x: np.ndarray, k: int) -> FactorSet:
    """Top-k principal components of a T x N panel.

    The factor matrix satisfies G'G / T = I_k up to components with a
    numerically zero eigenvalue, which come back as zero columns.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise InvalidConfig("panel matrix must be 2-D")
    if not np.isfinite(x).all():
        raise NonFiniteInput("panel matrix contains non-finite values")
    t, n = x.shape
    if not (1 <= k <= min(t, n)):
        raise KTooLarge(f"k={k} outside 1..min(T={t}, N={n})")

    vals, vecs, time_side = _full_spectrum(x)
    vals = np.maximum(vals, 0.0)
    zero_tol = _ZERO_REL * max(vals[0], 1.0)
    if time_side:
        factors = np.sqrt(t) * vecs[:, :k]
    else:
        factors = np.zeros((t, k))
        nonzero = vals[:k] > zero_tol
        if nonzero.any():
            factors[:, nonzero] = (x @ vecs[:, :k][:, nonzero]) / np.sqrt(
                t * vals[:k][nonzero]
            )
    loadings = x.T @ factors / t
    _fix_signs(factors, loadings)
    _order_tied_blocks(vals[:k], factors, loadings)

    total = vals.sum()
    explained = vals[:k] / total if total > 0 else np.zeros(k)
    return FactorSet(
        factors=factors,
        loadings=loadings,
        eigenvalues=vals,
        explained=explained,
    )


def select_num_factors(
    x: np.ndarray, k_max: int, method: str = "eigen_ratio"
) -> FactorCountChoice:
    """Choose the number of factors by eigenvalue ratio or an information criterion.

    ``eigen_ratio`` maximizes consecutive eigenvalue ratios over
    1 <= k < k_max (an exactly zero follower counts as an infinite
    ratio). ``bai_ng`` minimizes
    ln V(k) + k * ((N + T) / (N T)) * ln(min(N, T)) with V(k) the mean
    squared rank-k approximation residual.
    """
    x = np.asarray(x, dtype=float)
    if not np.isfinite(x).all():
        raise NonFiniteInput("panel matrix contains non-finite values")
    t, n = x.shape
    if not (1 <= k_max <= min(t, n)):
        raise KTooLarge(f"k_max={k_max} outside 1..min(T={t}, N={n})")
    vals, _, _ = _full_spectrum(x)
    vals = np.maximum(vals, 0.0)

    if method == "eigen_ratio":
        if k_max == 1:
            return FactorCountChoice("eigen_ratio", 1, {"eigenvalues": vals[:1]})
        lead, follow = vals[: k_max - 1], vals[1:k_max]
        zero_tol = _ZERO_REL * max(vals[0], 1.0)
        with np.errstate(divide="ignore"):
            ratios = np.where(follow <= zero_tol, np.inf, lead / np.maximum(follow, 1e-300))
        k = int(np.argmax(ratios)) + 1
        return FactorCountChoice(
            "eigen_ratio", k, {"eigenvalues": vals[:k_max], "ratios": ratios}
        )
    if method == "bai_ng":
        tail = np.concatenate([np.cumsum(vals[::-1])[::-1][1:], [0.0]])  # sum of vals[k:]
        v_k = tail[:k_max] / n
        penalty = ((n + t) / (n * t)) * np.log(min(n, t))
        ks = np.arange(1, k_max + 1)
        crit = np.log(np.maximum(v_k, 1e-300)) + ks * penalty
        k = int(np.argmin(crit)) + 1
        return FactorCountChoice(
            "bai_ng", k, {"eigenvalues": vals[:k_max], "criterion": crit}
        )
    raise InvalidConfig(f"unknown selection method {method!r}")


def svd_rotation(loadings: np.ndarray) -> np.ndarray:
    """Right singular matrix of a loading matrix, used to rotate factors.

    Column signs follow the same largest-entry-positive convention as
    :func:`extract_factors`, so applying the rotation to factors whose
    loadings were sign-fixed the same way keeps the pairing coherent.
    """
    b = np.asarray(loadings, dtype=float)
    if b.ndim != 2 or b.shape[0] < b.shape[1]:
        raise InvalidConfig("loadings must be N x k with N >= k")
    if not np.isfinite(b).all():
        raise NonFiniteInput("loadings contain non-finite values")
    u, _, vt = np.linalg.svd(b, full_matrices=False)
    v = vt.T.copy()
    for j in range(u.shape[1]):
        imax = int(np.argmax(np.abs(u[:, j])))
        if u[imax, j] < 0:
            v[:, j] *= -1.0
    return v
