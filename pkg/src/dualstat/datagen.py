"""Synthetic two-class data generators, seeded and reproducible.

DG1 adds a unit-norm Gaussian noise vector to a binary class column:
``y = x_k + v`` with design ``X = [x_k, not x_k]`` (class 1 on the
alternating even rows).  DG2 additionally flips each indicator row with
probability t, modelling mislabeled subjects.

The printed construction draws observations from the flipped (observed)
indicator; ``observations_from="true"`` switches to drawing from the
clean one so that the recorded design, not the world, carries the label
noise.  Generation order is fixed (noise first, flips second) so DG2
with t=0 reproduces DG1 bit for bit under the same seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from . import rng
from .errors import InvalidNError, InvalidProbabilityError
from .glm import DesignMatrix, NoiseCov, _frozen, indicator_design

CovMode = Literal["identity", "random_spd"]


@dataclass(frozen=True)
class SyntheticDataset:
    """Observations with their observed and ground-truth indicator designs."""

    y: np.ndarray
    X: DesignMatrix
    X_true: DesignMatrix
    flip_mask: np.ndarray
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "y", _frozen(self.y))
        mask = np.array(self.flip_mask, dtype=bool)
        mask.flags.writeable = False
        object.__setattr__(self, "flip_mask", mask)


def make_covariance(N: int, mode: CovMode, seed: int) -> NoiseCov:
    """Noise covariance with spectral norm exactly 1.

    ``identity`` returns I; ``random_spd`` draws a random symmetric
    positive-definite matrix and rescales it by its largest eigenvalue.
    """
    if int(N) != N or N < 1:
        raise InvalidNError(f"N must be a positive integer, got {N}")
    if mode == "identity":
        return NoiseCov(np.eye(N))
    if mode == "random_spd":
        A = rng.stream(seed).standard_normal((N, N))
        S = A @ A.T + 1e-6 * N * np.eye(N)
        S = 0.5 * (S + S.T)
        S /= float(np.linalg.eigvalsh(S)[-1])
        return NoiseCov(0.5 * (S + S.T))
    raise ValueError(f"unknown covariance mode {mode!r}")


def generate_dg1(
    N: int,
    seed: int,
    cov_mode: CovMode = "identity",
    noise_scale: float = 1.0,
) -> SyntheticDataset:
    """Two balanced classes with expected values 1 and 0 under unit noise.

    ``noise_scale`` exists as a test hook; 0 gives ``y`` equal to the
    class column exactly.
    """
    _check_even(N)
    x_k = _alternating_column(N)
    v = _draw_noise(N, seed, cov_mode) * float(noise_scale)
    design = indicator_design(x_k)
    return SyntheticDataset(
        y=x_k + v,
        X=design,
        X_true=design,
        flip_mask=np.zeros(N, dtype=bool),
        seed=int(seed),
    )


def generate_dg2(
    N: int,
    t: float,
    seed: int,
    cov_mode: CovMode = "identity",
    noise_scale: float = 1.0,
    observations_from: Literal["observed", "true"] = "observed",
) -> SyntheticDataset:
    """DG1 plus label noise: each row's one-hot code flips with probability t.

    ``observations_from`` selects which indicator generates the
    observations: ``"observed"`` follows the printed construction
    (the flipped column), ``"true"`` keeps the world clean and corrupts
    only the recorded design.
    """
    _check_even(N)
    if not 0.0 <= t <= 1.0:
        raise InvalidProbabilityError(f"flip probability must lie in [0, 1], got {t}")
    x_true = _alternating_column(N)
    stream = rng.stream(seed)
    v = _draw_noise(N, seed, cov_mode, stream=stream) * float(noise_scale)
    flips = stream.random(N) < t
    x_obs = np.where(flips, 1.0 - x_true, x_true)
    source = x_obs if observations_from == "observed" else x_true
    return SyntheticDataset(
        y=source + v,
        X=indicator_design(x_obs),
        X_true=indicator_design(x_true),
        flip_mask=flips,
        seed=int(seed),
    )


def _alternating_column(N: int) -> np.ndarray:
    """Class-1 indicator on rows 0, 2, 4, ... (odd rows counting from 1)."""
    col = np.zeros(N)
    col[0::2] = 1.0
    return col


def _check_even(N: int) -> None:
    if int(N) != N or N < 2 or N % 2 != 0:
        raise InvalidNError(f"N must be an even integer >= 2, got {N}")


def _draw_noise(
    N: int,
    seed: int,
    cov_mode: CovMode,
    stream: Optional[np.random.Generator] = None,
) -> np.ndarray:
    if stream is None:
        stream = rng.stream(seed)
    if cov_mode == "identity":
        return stream.standard_normal(N)
    cov = make_covariance(N, cov_mode, rng.derive_seed(seed, 1))
    L = np.linalg.cholesky(cov.entries)
    return L @ stream.standard_normal(N)
