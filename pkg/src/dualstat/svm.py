"""Soft-margin linear support vector machine trained from scratch.

The trainer is a sequential-minimal-optimization (SMO) solver over the
dual problem.  Working pairs are chosen by the maximal-violating-pair
rule with a second-order gain refinement: the first index is the worst
violator among the coordinates free to increase, the second maximizes
the analytic objective gain among those free to decrease.  Selection
and the stopping test use the threshold-free gradient, so the solver
cannot stall on threshold re-centering; ties resolve to the lowest
index and training is reproducible bit for bit.

The decision function is ``f(y) = w' y + w0`` on +-1 labels.  Only the
linear machine is exposed; the solver works off a Gram matrix produced
by an inner-product hook so a kernel variant can slot in later.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatchError,
    NotBinaryError,
    NotIndicatorError,
    NotScalarError,
    OneClassError,
)
from .glm import DesignMatrix, _frozen

# Multipliers within this fraction of C from a bound are snapped onto it.
_BOUND_SNAP = 1e-10

# Curvature floor for the two-variable subproblem; pairs flatter than
# this take a full step to the box edge.
_ETA_FLOOR = 1e-12


@dataclass(frozen=True)
class BinaryLabels:
    """N-vector of +-1 class labels."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if not np.isin(values, (-1.0, 1.0)).all():
            raise ValueError("labels must be -1 or +1")
        object.__setattr__(self, "values", _frozen(values))

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class SvmModel:
    """Trained soft-margin machine.

    ``w`` and ``w0`` define the decision function; ``alphas`` are the
    dual variables with ``0 <= alpha_i <= C``, nonzero exactly on the
    support vectors.  ``converged`` is False when the pass budget ran
    out before the KKT conditions were met (the best iterate is still
    returned).  ``objective_trace`` records the dual objective after
    each accepted pair update.
    """

    w: np.ndarray
    w0: float
    alphas: np.ndarray
    C: float
    support_indices: np.ndarray
    converged: bool = True
    objective_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        object.__setattr__(self, "w", _frozen(np.atleast_1d(self.w)))
        object.__setattr__(self, "w0", float(self.w0))
        object.__setattr__(self, "alphas", _frozen(self.alphas))
        support = np.array(self.support_indices, dtype=np.intp)
        support.flags.writeable = False
        object.__setattr__(self, "support_indices", support)
        object.__setattr__(self, "objective_trace", _frozen(self.objective_trace))


def labels_from_indicator(X: DesignMatrix) -> BinaryLabels:
    """Code rows of a two-class indicator design as +-1: (1,0) -> +1, (0,1) -> -1."""
    if X.kind != "indicator":
        raise NotIndicatorError("labels require a one-hot indicator design")
    if X.n_cols != 2:
        raise NotBinaryError(f"binary coding needs M=2 columns, design has {X.n_cols}")
    return BinaryLabels(np.where(X.entries[:, 0] == 1.0, 1.0, -1.0))


def _linear_gram(Y: np.ndarray) -> np.ndarray:
    return Y @ Y.T


def _smo_solve(K: np.ndarray, x: np.ndarray, C: float, tol: float, max_iter: int):
    """Second-order SMO on the dual; returns (alphas, trace, converged).

    Maintains ``G = x - K (alphas * x)``, the negated threshold-free
    error.  Optimality holds when ``max G over I_up - min G over I_low
    <= tol``; any threshold inside that gap then satisfies every KKT
    condition to within tol.
    """
    n = x.shape[0]
    alphas = np.zeros(n)
    G = x.copy()
    Kv = np.zeros(n)
    diag = np.diag(K).copy()
    trace = []
    converged = False
    neg_inf = -np.inf

    for _ in range(max_iter):
        movable_up = ((x > 0) & (alphas < C)) | ((x < 0) & (alphas > 0))
        movable_dn = ((x > 0) & (alphas > 0)) | ((x < 0) & (alphas < C))
        if not movable_up.any() or not movable_dn.any():
            converged = True
            break
        i = int(np.argmax(np.where(movable_up, G, neg_inf)))
        gap = G[i] - float(np.min(np.where(movable_dn, G, np.inf)))
        if gap <= tol:
            converged = True
            break
        # Second-order choice of the partner: maximize the gain
        # (G_i - G_j)^2 / (2 eta_ij) over descent-feasible j.
        candidates = movable_dn & (G < G[i])
        eta = np.maximum(diag[i] + diag - 2.0 * K[i], _ETA_FLOOR)
        gain = np.where(candidates, (G[i] - G) ** 2 / eta, neg_inf)
        j = int(np.argmax(gain))

        ai, aj = alphas[i], alphas[j]
        xi, xj = x[i], x[j]
        s = xi * xj
        if s > 0:
            lo, hi = max(0.0, ai + aj - C), min(C, ai + aj)
        else:
            lo, hi = max(0.0, aj - ai), min(C, C + aj - ai)
        aj_new = aj + xj * (G[j] - G[i]) / eta[j]
        aj_new = min(hi, max(lo, aj_new))
        if aj_new < _BOUND_SNAP * C:
            aj_new = 0.0
        elif aj_new > (1.0 - _BOUND_SNAP) * C:
            aj_new = C
        dj = aj_new - aj
        if dj == 0.0:
            # Numerically exhausted on the worst pair.
            break
        ai_new = ai - s * dj
        if ai_new < _BOUND_SNAP * C:
            ai_new = 0.0
        elif ai_new > (1.0 - _BOUND_SNAP) * C:
            ai_new = C
        di = ai_new - ai

        alphas[i], alphas[j] = ai_new, aj_new
        update = (xi * di) * K[i] + (xj * dj) * K[j]
        Kv += update
        G -= update
        trace.append(float(alphas.sum() - 0.5 * ((alphas * x) @ Kv)))

    return alphas, np.asarray(trace), converged


def train_linear_svm(
    Y: np.ndarray,
    labels: BinaryLabels,
    C: float = 1.0,
    tol: float = 1e-3,
    max_passes: int = 1000,
) -> SvmModel:
    """Train a soft-margin linear SVM by SMO.

    Parameters
    ----------
    Y : ndarray, shape (N, P) or (N,)
        Training observations, one row per sample.
    labels : BinaryLabels
        +-1 labels; both signs must be present.
    C : float
        Box constraint on the dual variables.
    tol : float
        KKT tolerance; the returned model satisfies every condition to
        within this value when ``converged`` is True.
    max_passes : int
        Budget of optimization sweeps (N pair updates each); exhausting
        it returns the best iterate with ``converged=False`` and a
        warning.
    """
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y.reshape(-1, 1)
    x = labels.values
    if Y.shape[0] != x.shape[0]:
        raise DimensionMismatchError(
            f"{Y.shape[0]} observations for {x.shape[0]} labels"
        )
    if C <= 0.0:
        raise ValueError(f"C must be positive, got {C}")
    if not ((x == 1.0).any() and (x == -1.0).any()):
        raise OneClassError("training labels contain a single class")

    alphas, trace, converged = _smo_solve(
        _linear_gram(Y), x, float(C), float(tol), int(max_passes) * x.shape[0]
    )
    if not converged:
        warnings.warn(
            f"SMO did not satisfy KKT within {max_passes} passes; "
            "returning best iterate",
            RuntimeWarning,
            stacklevel=2,
        )
    w = Y.T @ (alphas * x)
    w0 = _threshold(Y, x, alphas, w, float(C))
    return SvmModel(
        w=w,
        w0=w0,
        alphas=alphas,
        C=float(C),
        support_indices=np.flatnonzero(alphas > 0.0),
        converged=converged,
        objective_trace=trace,
    )


def _threshold(Y, x, alphas, w, C):
    """Deterministic threshold: mean over free support vectors, else the
    midpoint of the interval the bound constraints leave for w0."""
    margins = Y @ w
    free = (alphas > 0.0) & (alphas < C)
    if free.any():
        return float(np.mean(x[free] - margins[free]))
    lo, hi = -np.inf, np.inf
    at_zero = alphas == 0.0
    at_c = alphas == C
    for mask, sign, is_lower in (
        (at_zero & (x > 0), 1.0, True),    # f >= 1  ->  w0 >= 1 - w'y
        (at_zero & (x < 0), -1.0, False),  # -f >= 1 ->  w0 <= -1 - w'y
        (at_c & (x > 0), 1.0, False),      # f <= 1  ->  w0 <= 1 - w'y
        (at_c & (x < 0), -1.0, True),      # -f <= 1 ->  w0 >= -1 - w'y
    ):
        if not mask.any():
            continue
        bounds = sign - margins[mask]
        if is_lower:
            lo = max(lo, float(bounds.max()))
        else:
            hi = min(hi, float(bounds.min()))
    if np.isfinite(lo) and np.isfinite(hi):
        return 0.5 * (lo + hi)
    if np.isfinite(lo):
        return lo
    if np.isfinite(hi):
        return hi
    return 0.0


def decision(model: SvmModel, y: np.ndarray):
    """Decision value ``w' y + w0``; accepts one P-vector or a stack of rows."""
    y = np.asarray(y, dtype=np.float64)
    p = model.w.shape[0]
    if y.ndim == 0:
        y = y.reshape(1)
    if y.ndim == 1:
        if y.shape[0] != p:
            raise DimensionMismatchError(
                f"observation has {y.shape[0]} features, model expects {p}"
            )
        return float(model.w @ y + model.w0)
    if y.ndim == 2 and y.shape[1] == p:
        return y @ model.w + model.w0
    raise DimensionMismatchError(
        f"observations of shape {y.shape} do not match model dimension {p}"
    )


def svm_row_parameters(model: SvmModel) -> np.ndarray:
    """Two-class row form (w, -w) of a scalar machine.

    The binary problem splits into two minimizations with opposite
    solutions, so the second class's weight is the negation of the
    first; the resulting row feeds the duality map like an LRM row.
    """
    if model.w.shape[0] != 1:
        raise NotScalarError(
            f"row parameters need a P=1 model, got P={model.w.shape[0]}"
        )
    w = float(model.w[0])
    return np.array([w, -w])


def kkt_violation(model: SvmModel, Y: np.ndarray, labels: BinaryLabels) -> float:
    """Largest KKT violation of the trained model on its training set.

    Zero (up to the training tolerance) for a converged model:
    ``alpha=0`` requires ``x f >= 1``, free alphas require ``x f == 1``
    and ``alpha=C`` requires ``x f <= 1``.
    """
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y.reshape(-1, 1)
    x = labels.values
    margins = x * (Y @ model.w + model.w0)
    a = model.alphas
    worst = 0.0
    at_zero = a == 0.0
    at_c = a == model.C
    free = ~at_zero & ~at_c
    if at_zero.any():
        worst = max(worst, float(np.max(1.0 - margins[at_zero], initial=0.0)))
    if free.any():
        worst = max(worst, float(np.max(np.abs(margins[free] - 1.0))))
    if at_c.any():
        worst = max(worst, float(np.max(margins[at_c] - 1.0, initial=0.0)))
    return worst
