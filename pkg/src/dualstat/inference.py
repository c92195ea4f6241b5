"""Permutation-test engine and residual test statistics.

The engine refits an estimator under randomly permuted responses and
counts how often the permuted statistic beats the original one
(strictly smaller, as the statistics here are residual scores where
small means good).  A statistic for which larger is better must be
negated by the caller before entering the engine.

Estimator contract
------------------
``fit_fn(Y, x) -> params`` where ``params`` is either

* a predictor callable mapping an (n, P) observation block to predicted
  responses, or
* an ndarray of per-sample predictions aligned with ``x`` (used by the
  cross-validated composition, whose "prediction" for each sample comes
  from the fold that held it out).

Responses use the indicator-column coding: ``x`` takes values in
{0, 1} and classification thresholds predictions at 0.5.  The SVM
estimator converts to +-1 labels internally and maps its decision
values back through ``(f + 1) / 2``.

Every stochastic routine takes an integer seed; the permutation stream
for index p derives from ``(seed, p)``, so results do not depend on
evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import rng
from .errors import (
    DimensionMismatchError,
    EstimatorFailureError,
    InvalidAlphaError,
    InvalidKError,
    InvalidNError,
)
from .glm import _frozen
from .svm import BinaryLabels, decision, train_linear_svm

FitFn = Callable[[np.ndarray, np.ndarray], object]
StatFn = Callable[[np.ndarray, np.ndarray, object], float]


@dataclass(frozen=True)
class TestOutcome:
    """Result of one permutation test.

    ``p_value`` is ``(card{null < statistic} + 1) / (O + 1)``; the +1
    terms account for the original sample belonging to the null
    ensemble, so p can never reach zero.
    """

    statistic: float
    null_values: np.ndarray
    p_value: float
    O: int
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "null_values", _frozen(self.null_values))


@dataclass(frozen=True)
class BoundParams:
    """Concentration-inequality bound Delta(N, P) at confidence 1 - alpha."""

    N: int
    P: int
    alpha: float
    delta: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "delta", delta_bound(self.N, self.P, self.alpha))


def t_cv_statistic(x: np.ndarray, Y: np.ndarray, w: np.ndarray) -> float:
    """Sum of squared residuals ``(x - Y w)' (x - Y w)``."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    Y = _as_matrix(Y)
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    if Y.shape[0] != x.shape[0] or Y.shape[1] != w.shape[0]:
        raise DimensionMismatchError(
            f"shapes disagree: x {x.shape}, Y {Y.shape}, w {w.shape}"
        )
    r = x - Y @ w
    return float(r @ r)


def delta_bound(N: int, P: int, alpha: float) -> float:
    """High-probability upper bound on the risk gap of a linear classifier.

    Uses the structural-risk form with VC dimension ``d = P + 1``:
    ``sqrt((d (ln(2N/d) + 1) + ln(4/alpha)) / N)``, clamped at zero.
    Decreasing in N, increasing in P and in 1 - alpha.
    """
    if int(N) != N or N < 1:
        raise InvalidNError(f"N must be a positive integer, got {N}")
    if not 0.0 < alpha < 1.0:
        raise InvalidAlphaError(f"alpha must lie in (0, 1), got {alpha}")
    if int(P) != P or P < 1:
        raise ValueError(f"P must be a positive integer, got {P}")
    d = P + 1
    inner = d * (math.log(2.0 * N / d) + 1.0) + math.log(4.0 / alpha)
    return math.sqrt(max(0.0, inner) / N)


def t_res_statistic(
    x: np.ndarray, Y: np.ndarray, w: np.ndarray, bound: BoundParams
) -> float:
    """Resubstitution residual score plus the scaled risk bound.

    ``Delta`` is a per-sample risk, so ``N * Delta`` is added to keep
    both terms on the sum-of-squares scale.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if bound.N != x.shape[0]:
        raise DimensionMismatchError(
            f"bound was computed for N={bound.N}, data has N={x.shape[0]}"
        )
    return t_cv_statistic(x, Y, w) + bound.N * bound.delta


def corrected_accuracy(resub_error: float, bound: BoundParams) -> float:
    """Worst-case accuracy ``max(0, 1 - (resub_error + Delta))``."""
    return max(0.0, 1.0 - (float(resub_error) + bound.delta))


def permutation_test(
    Y: np.ndarray,
    x: np.ndarray,
    fit_fn: FitFn,
    stat_fn: StatFn,
    O: int,
    seed: int,
) -> TestOutcome:
    """Simulate the null by refitting under permuted responses.

    For each p in 1..O a uniform permutation is drawn from the stream
    keyed by ``(seed, p)``, the estimator is refit on ``(Y, x_perm)``
    and the statistic re-evaluated.  Small statistics count as evidence
    (residual convention); see the module docstring for the direction
    rule.  Estimator errors are re-raised as ``EstimatorFailureError``
    carrying the permutation index (0 for the original fit).
    """
    Y = _as_matrix(Y)
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if Y.shape[0] != x.shape[0]:
        raise DimensionMismatchError(
            f"Y has {Y.shape[0]} rows, x has {x.shape[0]}"
        )
    if O < 1:
        raise ValueError(f"permutation count must be >= 1, got {O}")
    statistic = _evaluate(Y, x, fit_fn, stat_fn, index=0)
    null_values = np.empty(O)
    for p in range(1, O + 1):
        perm = rng.stream(seed, p).permutation(x.shape[0])
        null_values[p - 1] = _evaluate(Y, x[perm], fit_fn, stat_fn, index=p)
    below = int(np.count_nonzero(null_values < statistic))
    return TestOutcome(
        statistic=statistic,
        null_values=null_values,
        p_value=(below + 1) / (O + 1),
        O=int(O),
        seed=int(seed),
    )


def _evaluate(Y, x, fit_fn, stat_fn, index):
    try:
        params = fit_fn(Y, x)
        return float(stat_fn(x, Y, params))
    except Exception as exc:
        raise EstimatorFailureError(
            f"estimator failed at permutation {index}: {exc}"
        ) from exc


def kfold_cv_error(
    Y: np.ndarray, x: np.ndarray, K: int, fit_fn: FitFn, seed: int
) -> float:
    """Pooled held-out classification error over K seeded folds."""
    Y = _as_matrix(Y)
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    n = x.shape[0]
    if not 2 <= K <= n:
        raise InvalidKError(f"K must satisfy 2 <= K <= N={n}, got {K}")
    wrong = 0
    for k, (train, held) in enumerate(_folds(n, K, seed)):
        try:
            params = fit_fn(Y[train], x[train])
            predicted = params(Y[held]) if callable(params) else None
            if predicted is None:
                raise TypeError("cross-validation needs a predictor-returning fit_fn")
            predicted = np.asarray(predicted, dtype=np.float64).reshape(-1)
        except EstimatorFailureError:
            raise
        except Exception as exc:
            raise EstimatorFailureError(f"estimator failed at fold {k}: {exc}") from exc
        wrong += int(np.count_nonzero((predicted >= 0.5) != (x[held] >= 0.5)))
    return wrong / n


def least_squares_estimator() -> FitFn:
    """Least-squares estimator returning a linear predictor.

    Solves via an orthogonal factorization with minimum-norm fallback,
    so degenerate observation blocks (for instance an all-zero voxel
    series) yield the zero predictor instead of failing.
    """

    def fit(Y: np.ndarray, x: np.ndarray):
        w = np.linalg.lstsq(Y, x, rcond=None)[0]

        def predict(Ynew: np.ndarray) -> np.ndarray:
            return np.asarray(Ynew) @ w

        predict.w = w
        return predict

    return fit


def svm_estimator(C: float = 1.0, tol: float = 1e-3, max_passes: int = 1000) -> FitFn:
    """SVM estimator over {0, 1} responses.

    Converts responses to +-1 labels, trains the linear machine and
    predicts through ``(f(y) + 1) / 2`` clipped into [0, 1].  Without
    the clip, decision values beyond the margin would overshoot the
    response scale and a confidently correct sample would inflate the
    residual score it is supposed to shrink.
    """

    def fit(Y: np.ndarray, x: np.ndarray):
        labels = BinaryLabels(2.0 * np.asarray(x, dtype=np.float64) - 1.0)
        model = train_linear_svm(Y, labels, C=C, tol=tol, max_passes=max_passes)

        def predict(Ynew: np.ndarray) -> np.ndarray:
            raw = (decision(model, np.atleast_2d(Ynew)) + 1.0) / 2.0
            return np.clip(raw, 0.0, 1.0)

        predict.model = model
        return predict

    return fit


def cross_validated(fit_fn: FitFn, K: int, seed: int) -> FitFn:
    """Wrap an estimator so that it "fits" out-of-fold predictions.

    The returned fit function partitions the samples into K seeded
    folds (the same partition on every call, so permutation replicas
    stay comparable), refits the base estimator with each fold held
    out, and returns the assembled prediction vector.  Pairing it with
    :func:`residual_statistic` gives the cross-validated residual score.
    """

    def fit(Y: np.ndarray, x: np.ndarray) -> np.ndarray:
        n = x.shape[0]
        if not 2 <= K <= n:
            raise InvalidKError(f"K must satisfy 2 <= K <= N={n}, got {K}")
        predicted = np.empty(n)
        for train, held in _folds(n, K, seed):
            params = fit_fn(Y[train], x[train])
            predicted[held] = np.asarray(params(Y[held]), dtype=np.float64).reshape(-1)
        return predicted

    return fit


def residual_statistic(x: np.ndarray, Y: np.ndarray, params) -> float:
    """Sum of squared residuals against the estimator's predictions."""
    predicted = params(Y) if callable(params) else params
    r = np.asarray(x, dtype=np.float64).reshape(-1) - np.asarray(
        predicted, dtype=np.float64
    ).reshape(-1)
    return float(r @ r)


def corrected_residual_statistic(bound: BoundParams) -> StatFn:
    """Residual statistic shifted by ``N * Delta`` (the T_Res form)."""

    def stat(x: np.ndarray, Y: np.ndarray, params) -> float:
        return residual_statistic(x, Y, params) + bound.N * bound.delta

    return stat


def _as_matrix(Y: np.ndarray) -> np.ndarray:
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y.reshape(-1, 1)
    if Y.ndim != 2:
        raise DimensionMismatchError(f"observations must be 1-D or 2-D, got {Y.shape}")
    return Y


def _folds(n: int, K: int, seed: int):
    """Seeded near-equal partition: yields (train_indices, held_indices)."""
    order = rng.stream(seed).permutation(n)
    for held in np.array_split(order, K):
        mask = np.ones(n, dtype=bool)
        mask[held] = False
        yield np.flatnonzero(mask), held
