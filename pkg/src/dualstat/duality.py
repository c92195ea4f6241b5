"""Exact conversion between label-domain and observation-domain parameters.

For a single response column (P=1) the least-squares label regression
``X = y w + eps_LS`` and the GLM ``y = X theta + eps`` describe the same
data, linked by ``theta = w' (w w')^-1`` and, at the LS solution, by the
normalization scalar ``(w w')^-1 = (sum y_i^2)^2 / sum_m (sum_{i in C_m} y_i)^2``.
The functions here implement both directions of that map plus the
round-trip reconstruction identities used as tests.

For a vector theta the product ``theta theta'`` in the reverse map is
read as the scalar ``theta' theta``; the rank-1 matrix reading has no
inverse.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateDenominatorError,
    DimensionMismatchError,
    ZeroVectorError,
)
from .glm import DesignMatrix, _frozen


@dataclass(frozen=True)
class DualPair:
    """A label-domain row vector w with its observation-domain dual theta."""

    w: np.ndarray
    theta: np.ndarray = field(init=False)
    norm_scalar: float = field(init=False)

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64).reshape(-1)
        theta = theta_from_w(w)
        object.__setattr__(self, "w", _frozen(w))
        object.__setattr__(self, "theta", _frozen(theta))
        object.__setattr__(self, "norm_scalar", 1.0 / float(w @ w))


def theta_from_w(w: np.ndarray) -> np.ndarray:
    """Observation-domain parameters ``theta = w' (w w')^-1``.

    Satisfies ``w @ theta == 1`` by construction.
    """
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    power = float(w @ w)
    if power == 0.0:
        raise ZeroVectorError("w must be nonzero")
    return w / power


def w_from_theta(theta: np.ndarray) -> np.ndarray:
    """Label-domain row ``w = theta' (theta' theta)^-1``; inverse of theta_from_w."""
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    power = float(theta @ theta)
    if power == 0.0:
        raise ZeroVectorError("theta must be nonzero")
    return theta / power


def normalization_scalar(y: np.ndarray, X: DesignMatrix) -> float:
    """The scalar linking the two domains at the least-squares solution.

    Returns ``(sum_i y_i^2)^2 / sum_m (sum_{i in C_m} y_i)^2`` for a
    one-hot design; equals ``(w w')^-1`` with w from the LRM fit of
    (y, X).  A single zero class sum is fine as long as the total
    denominator is positive.
    """
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if X.kind != "indicator":
        raise ValueError("normalization scalar requires a one-hot design")
    if y.shape[0] != X.n_rows:
        raise DimensionMismatchError(
            f"y has {y.shape[0]} rows, design has {X.n_rows}"
        )
    power = float(y @ y)
    if power == 0.0:
        raise ZeroVectorError("y must be nonzero")
    class_sums = X.entries.T @ y
    denominator = float(class_sums @ class_sums)
    if denominator == 0.0:
        raise DegenerateDenominatorError("all per-class sums of y are zero")
    return power * power / denominator


def reconstruct_observations(
    X: DesignMatrix, w: np.ndarray, eps_LS: np.ndarray
) -> np.ndarray:
    """Recover observations as ``(X - eps_LS) @ theta_from_w(w)``.

    When ``(w, eps_LS)`` come from the LRM fit of ``(y, X)`` this is the
    exact round trip back to ``y``.
    """
    eps = np.asarray(eps_LS, dtype=np.float64)
    if eps.shape != X.entries.shape:
        raise DimensionMismatchError(
            f"error matrix has shape {eps.shape}, design has {X.entries.shape}"
        )
    theta = theta_from_w(w)
    if theta.shape[0] != X.n_cols:
        raise DimensionMismatchError(
            f"w has {theta.shape[0]} entries, design has {X.n_cols} columns"
        )
    return (X.entries - eps) @ theta


def svm_regressed_observations(X: DesignMatrix, w: np.ndarray) -> np.ndarray:
    """Regressed observations under the +-1 label coding of the SVM.

    Applies ``(X @ theta_from_w(w) + 1) / 2``, mapping decision values of
    +-1 onto the {1, 0} indicator scale.
    """
    theta = theta_from_w(w)
    if theta.shape[0] != X.n_cols:
        raise DimensionMismatchError(
            f"w has {theta.shape[0]} entries, design has {X.n_cols} columns"
        )
    return (X.entries @ theta + 1.0) / 2.0
