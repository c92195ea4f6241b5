"""General linear model: estimation and classical inference.

Implements the observation-domain regression ``y = X theta + eps`` with
maximum-likelihood (known noise covariance) and least-squares fits, the
contrast T statistic, and a two-sided Student-t p-value.

All values are immutable after construction; every function is pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.linalg
import scipy.stats

from .errors import (
    DegenerateVarianceError,
    DimensionMismatchError,
    InvalidDfError,
    NotPositiveDefiniteError,
    RankDeficientError,
)

# Relative eigenvalue threshold (against the largest diagonal of X^T X)
# below which the design is declared rank deficient.
RANK_RTOL = 1e-10

# Numerical floor for the contrast variance in the T statistic.
VARIANCE_FLOOR = 1e-300


def _frozen(a: np.ndarray) -> np.ndarray:
    """Copy to a C-contiguous float64 array and make it read-only."""
    out = np.array(a, dtype=np.float64, order="C")
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class DesignMatrix:
    """N x M matrix of explanatory variables or one-hot class indicators.

    ``kind="indicator"`` additionally enforces that every entry is 0 or 1
    and every row sums to exactly 1.  Full column rank is not required
    here; it is checked by the fitting operations.
    """

    entries: np.ndarray
    kind: Literal["indicator", "general"] = "general"

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=np.float64)
        if entries.ndim != 2:
            raise DimensionMismatchError(
                f"design matrix must be 2-D, got shape {entries.shape}"
            )
        n, m = entries.shape
        if not (n >= m >= 1):
            raise DimensionMismatchError(
                f"design matrix needs N >= M >= 1, got N={n}, M={m}"
            )
        if self.kind == "indicator":
            if not np.isin(entries, (0.0, 1.0)).all():
                raise ValueError("indicator design entries must be 0 or 1")
            if not (entries.sum(axis=1) == 1.0).all():
                raise ValueError("indicator design rows must be one-hot")
        elif self.kind != "general":
            raise ValueError(f"unknown design kind {self.kind!r}")
        object.__setattr__(self, "entries", _frozen(entries))

    @property
    def n_rows(self) -> int:
        return self.entries.shape[0]

    @property
    def n_cols(self) -> int:
        return self.entries.shape[1]

    def class_indices(self) -> np.ndarray:
        """Per-row class index (argmax over columns) for indicator designs."""
        return np.argmax(self.entries, axis=1)


def indicator_design(column: np.ndarray) -> DesignMatrix:
    """Build the two-class indicator design ``[x_k, not x_k]`` from a 0/1 column."""
    col = np.asarray(column, dtype=np.float64).reshape(-1)
    return DesignMatrix(np.column_stack([col, 1.0 - col]), kind="indicator")


@dataclass(frozen=True)
class NoiseCov:
    """Symmetric positive-definite N x N noise covariance."""

    entries: np.ndarray

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=np.float64)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise DimensionMismatchError(
                f"noise covariance must be square, got shape {entries.shape}"
            )
        scale = max(1.0, float(np.abs(entries).max()))
        if float(np.abs(entries - entries.T).max()) > 1e-12 * scale:
            raise ValueError("noise covariance must be symmetric to 1e-12 relative")
        try:
            np.linalg.cholesky(entries)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefiniteError(
                "noise covariance is not positive definite"
            ) from exc
        object.__setattr__(self, "entries", _frozen(entries))

    @property
    def n(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class Contrast:
    """Weight vector c combining model parameters for a hypothesis."""

    weights: np.ndarray

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if not np.any(weights != 0.0):
            raise ValueError("contrast must have at least one nonzero weight")
        object.__setattr__(self, "weights", _frozen(weights))


@dataclass(frozen=True)
class GlmFit:
    """Fitted parameters, their covariance, residuals and residual power."""

    theta: np.ndarray
    cov_theta: np.ndarray
    residuals: np.ndarray
    rss: float = field(default=0.0)

    def __post_init__(self):
        object.__setattr__(self, "theta", _frozen(self.theta))
        object.__setattr__(self, "cov_theta", _frozen(self.cov_theta))
        object.__setattr__(self, "residuals", _frozen(self.residuals))
        object.__setattr__(self, "rss", float(self.rss))


def _check_rank(gram: np.ndarray) -> None:
    """Reject designs whose Gram matrix X^T X is numerically singular."""
    threshold = RANK_RTOL * float(np.max(np.diag(gram)))
    if float(np.linalg.eigvalsh(gram)[0]) <= threshold:
        raise RankDeficientError(
            "design matrix is rank deficient at the module tolerance"
        )


def _solve_normal_equations(gram: np.ndarray, rhs: np.ndarray):
    """Solve ``gram @ theta = rhs`` and return (theta, gram^-1) via Cholesky."""
    factor = scipy.linalg.cho_factor(gram, lower=True)
    theta = scipy.linalg.cho_solve(factor, rhs)
    cov = scipy.linalg.cho_solve(factor, np.eye(gram.shape[0]))
    return theta, 0.5 * (cov + cov.T)


def fit_glm_ml(y: np.ndarray, X: DesignMatrix, C: NoiseCov) -> GlmFit:
    """Maximum-likelihood fit with known Gaussian noise covariance.

    Returns the estimate ``theta = (X' C^-1 X)^-1 X' C^-1 y`` together
    with its covariance ``(X' C^-1 X)^-1``.  Solves are Cholesky-based;
    no explicit matrix inverse is formed on the data path.
    """
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    Xe = X.entries
    if y.shape[0] != Xe.shape[0]:
        raise DimensionMismatchError(
            f"y has {y.shape[0]} rows, design has {Xe.shape[0]}"
        )
    if C.n != Xe.shape[0]:
        raise DimensionMismatchError(
            f"noise covariance is {C.n}x{C.n}, design has {Xe.shape[0]} rows"
        )
    _check_rank(Xe.T @ Xe)
    try:
        c_factor = scipy.linalg.cho_factor(C.entries, lower=True)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - caught at init
        raise NotPositiveDefiniteError(
            "noise covariance is not positive definite"
        ) from exc
    ci_X = scipy.linalg.cho_solve(c_factor, Xe)
    gram = Xe.T @ ci_X
    theta, cov = _solve_normal_equations(0.5 * (gram + gram.T), ci_X.T @ y)
    residuals = y - Xe @ theta
    return GlmFit(theta, cov, residuals, float(residuals @ residuals))


def fit_glm_ls(y: np.ndarray, X: DesignMatrix) -> GlmFit:
    """Least-squares (Gauss-Markov) fit: ``theta = (X'X)^-1 X'y``.

    Identical to :func:`fit_glm_ml` with identity noise covariance.
    """
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    Xe = X.entries
    if y.shape[0] != Xe.shape[0]:
        raise DimensionMismatchError(
            f"y has {y.shape[0]} rows, design has {Xe.shape[0]}"
        )
    gram = Xe.T @ Xe
    _check_rank(gram)
    theta, cov = _solve_normal_equations(gram, Xe.T @ y)
    residuals = y - Xe @ theta
    return GlmFit(theta, cov, residuals, float(residuals @ residuals))


def residual_sum_squares(y: np.ndarray, X: DesignMatrix, theta: np.ndarray) -> float:
    """Sum of squared residuals of ``y`` against ``X @ theta``."""
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    Xe = X.entries
    if y.shape[0] != Xe.shape[0] or theta.shape[0] != Xe.shape[1]:
        raise DimensionMismatchError(
            f"shapes disagree: y {y.shape}, X {Xe.shape}, theta {theta.shape}"
        )
    r = y - Xe @ theta
    return float(r @ r)


def t_statistic(fit: GlmFit, c: Contrast) -> float:
    """Contrast estimate divided by its standard error."""
    w = c.weights
    if w.shape[0] != fit.theta.shape[0]:
        raise DimensionMismatchError(
            f"contrast has {w.shape[0]} weights, fit has {fit.theta.shape[0]} parameters"
        )
    variance = float(w @ fit.cov_theta @ w)
    if variance <= VARIANCE_FLOOR:
        raise DegenerateVarianceError(
            f"contrast variance {variance!r} is at or below the numerical floor"
        )
    return float(w @ fit.theta) / float(np.sqrt(variance))


def t_pvalue(t: float, df: int) -> float:
    """Two-sided tail probability of ``t`` under Student-t with ``df`` dof."""
    if int(df) != df or df < 1:
        raise InvalidDfError(f"degrees of freedom must be a positive integer, got {df}")
    return float(min(1.0, 2.0 * scipy.stats.t.sf(abs(float(t)), int(df))))
