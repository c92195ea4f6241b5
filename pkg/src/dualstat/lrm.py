"""Linear regression of an indicator matrix (the label-domain inverse problem).

Where the GLM regresses observations on labels, this module regresses the
one-hot label matrix X on the observation matrix Y: ``X ~= Y W``.  The
regressed labels ``X_hat = Y W`` approximate the class posterior per row
but are deliberately not clipped or normalized to a probability simplex.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionMismatchError, RankDeficientError
from .glm import RANK_RTOL, DesignMatrix, _frozen


@dataclass(frozen=True)
class LrmFit:
    """Label-domain fit: coefficients W, regressed labels and error matrix.

    Satisfies ``X_hat = Y @ W`` and ``eps_LS = X - X_hat`` with the
    least-squares orthogonality ``Y' eps_LS = 0``.
    """

    W: np.ndarray
    X_hat: np.ndarray
    eps_LS: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "W", _frozen(self.W))
        object.__setattr__(self, "X_hat", _frozen(self.X_hat))
        object.__setattr__(self, "eps_LS", _frozen(self.eps_LS))


def _as_observation_matrix(Y: np.ndarray) -> np.ndarray:
    """Coerce observations to an N x P float64 matrix (vectors become P=1)."""
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y.reshape(-1, 1)
    if Y.ndim != 2:
        raise DimensionMismatchError(f"observations must be 1-D or 2-D, got {Y.shape}")
    return Y


def fit_lrm(Y: np.ndarray, X: DesignMatrix) -> LrmFit:
    """Least-squares coefficients ``W = (Y'Y)^-1 Y'X`` plus derived matrices."""
    Y = _as_observation_matrix(Y)
    Xe = X.entries
    if Y.shape[0] != Xe.shape[0]:
        raise DimensionMismatchError(
            f"observations have {Y.shape[0]} rows, design has {Xe.shape[0]}"
        )
    gram = Y.T @ Y
    threshold = RANK_RTOL * float(np.max(np.diag(gram)))
    if not np.isfinite(threshold) or threshold <= 0.0:
        raise RankDeficientError("Y'Y is singular (zero observations)")
    if float(np.linalg.eigvalsh(gram)[0]) <= threshold:
        raise RankDeficientError("Y'Y is singular at the module tolerance")
    factor = scipy.linalg.cho_factor(gram, lower=True)
    W = scipy.linalg.cho_solve(factor, Y.T @ Xe)
    X_hat = Y @ W
    return LrmFit(W, X_hat, Xe - X_hat)


def predict_labels(Y: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Regress observations into label space: returns ``Y @ W`` unclipped."""
    Y = _as_observation_matrix(Y)
    W = np.asarray(W, dtype=np.float64)
    if W.ndim == 1:
        W = W.reshape(1, -1)
    if Y.shape[1] != W.shape[0]:
        raise DimensionMismatchError(
            f"observations have P={Y.shape[1]}, coefficients have P={W.shape[0]}"
        )
    return Y @ W


def classify_rows(X_hat: np.ndarray) -> np.ndarray:
    """Class index of the maximum entry per row; ties go to the lowest index."""
    X_hat = np.asarray(X_hat, dtype=np.float64)
    if X_hat.ndim != 2 or X_hat.shape[1] < 2:
        raise DimensionMismatchError(
            f"regressed labels must be N x M with M >= 2, got {X_hat.shape}"
        )
    return np.argmax(X_hat, axis=1)


def empirical_error(predicted: np.ndarray, truth: DesignMatrix) -> float:
    """Fraction of rows whose predicted class differs from the one-hot truth."""
    predicted = np.asarray(predicted).reshape(-1)
    if truth.kind != "indicator":
        raise ValueError("truth design must be a one-hot indicator matrix")
    if predicted.shape[0] != truth.n_rows:
        raise DimensionMismatchError(
            f"{predicted.shape[0]} predictions for {truth.n_rows} truth rows"
        )
    return float(np.mean(predicted != truth.class_indices()))


def fit_multiclass(Y: np.ndarray, X: DesignMatrix) -> np.ndarray:
    """Solve the M independent column-wise least-squares problems.

    Returns the same P x M coefficient matrix as :func:`fit_lrm` (the two
    are cross-checked in tests) but goes column by column through an
    orthogonal-factorization solver rather than the normal equations.
    """
    Y = _as_observation_matrix(Y)
    Xe = X.entries
    if Y.shape[0] != Xe.shape[0]:
        raise DimensionMismatchError(
            f"observations have {Y.shape[0]} rows, design has {Xe.shape[0]}"
        )
    if np.linalg.matrix_rank(Y) < Y.shape[1]:
        raise RankDeficientError("Y'Y is singular at the module tolerance")
    W = np.empty((Y.shape[1], Xe.shape[1]))
    for m in range(Xe.shape[1]):
        W[:, m] = np.linalg.lstsq(Y, Xe[:, m], rcond=None)[0]
    return W
