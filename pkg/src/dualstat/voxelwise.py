"""Per-voxel tests over subject volumes and threshold calibration.

A volume is a flat float64 array in x-fastest order with dimensions
``(nx, ny, nz)``; the linear index of voxel (x, y, z) is
``x + nx * (y + ny * z)``.  Tests run independently per voxel on the
across-subject series, each with its own random stream derived from
``(seed, voxel_index)``, so parallel and serial execution agree.

Permutation p-values over a whole volume are expensive, so the
calibration workflow limits them to a chosen region: p-values are
computed there, a statistic threshold reproducing the significance
level is read off, and the remainder of the volume is thresholded
directly.  Transporting the threshold assumes the null distribution of
the statistic is comparable across voxels; that assumption is the
caller's to make.

File format: raw little-endian IEEE-754 doubles (masks: 8-bit 0/1),
x-fastest, with a JSON sidecar carrying dims/dtype/order and, for stat
maps, the list of stacked planes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np

from . import rng
from .errors import (
    DimsMismatchError,
    EmptyRegionError,
    LabelCountMismatchError,
)
from .glm import Contrast, _frozen, fit_glm_ls, indicator_design, t_pvalue, t_statistic
from .inference import (
    BoundParams,
    corrected_residual_statistic,
    cross_validated,
    least_squares_estimator,
    permutation_test,
    residual_statistic,
    svm_estimator,
)
from .svm import BinaryLabels

Dims = Tuple[int, int, int]


@dataclass(frozen=True)
class Volume:
    """Flat scalar field with optional boolean mask of the same shape."""

    dims: Dims
    values: np.ndarray
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 3 or any(d < 1 for d in dims):
            raise ValueError(f"dims must be three positive integers, got {self.dims}")
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if values.shape[0] != dims[0] * dims[1] * dims[2]:
            raise ValueError(
                f"{values.shape[0]} voxels for dims {dims} "
                f"(expected {dims[0] * dims[1] * dims[2]})"
            )
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "values", _frozen(values))
        if self.mask is not None:
            mask = np.array(self.mask, dtype=bool).reshape(-1)
            if mask.shape[0] != values.shape[0]:
                raise ValueError("mask shape differs from volume shape")
            mask.flags.writeable = False
            object.__setattr__(self, "mask", mask)

    @property
    def n_voxels(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class StatMap:
    """Per-voxel statistic values with optional p-values and decisions."""

    dims: Dims
    stat: np.ndarray
    detected: np.ndarray
    p: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "stat", _frozen(self.stat))
        detected = np.array(self.detected, dtype=bool).reshape(-1)
        detected.flags.writeable = False
        object.__setattr__(self, "detected", detected)
        if self.p is not None:
            object.__setattr__(self, "p", _frozen(self.p))


@dataclass(frozen=True)
class VoxelTestConfig:
    """What to compute at each voxel.

    ``statistic`` is one of ``"t"`` (classical contrast statistic,
    parametric p unless permutations are requested), ``"t_cv"``
    (residual score, cross-validated over ``cv_folds`` or resubstituted
    when None) or ``"t_res"`` (resubstitution residual plus the scaled
    risk bound at ``bound_alpha``).  With ``permutations > 0`` each
    eligible voxel gets a permutation p-value; ``calibration_region``
    (linear voxel indices) restricts the permutation work to that
    region and transports the implied statistic threshold to the rest
    of the volume.
    """

    statistic: Literal["t", "t_cv", "t_res"] = "t_cv"
    estimator: Literal["ls", "svm"] = "ls"
    permutations: int = 0
    alpha: float = 0.05
    cv_folds: Optional[int] = None
    bound_alpha: float = 0.05
    svm_c: float = 1.0
    calibration_region: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.calibration_region is not None:
            region = np.asarray(self.calibration_region, dtype=np.intp).reshape(-1)
            region.flags.writeable = False
            object.__setattr__(self, "calibration_region", region)


def linear_index(dims: Dims, x: int, y: int, z: int) -> int:
    """Linear voxel index in x-fastest order."""
    nx, ny, _ = dims
    return int(x + nx * (y + ny * z))


def block_indices(dims: Dims, lo: Sequence[int], hi: Sequence[int]) -> np.ndarray:
    """Linear indices of the axis-aligned box ``[lo, hi)`` (x, y, z order)."""
    xs, ys, zs = (np.arange(lo[a], hi[a]) for a in range(3))
    grid = [
        linear_index(dims, x, y, z)
        for z in zs
        for y in ys
        for x in xs
    ]
    return np.asarray(grid, dtype=np.intp)


def run_voxel_tests(
    volumes: List[Volume],
    labels: BinaryLabels,
    test_config: VoxelTestConfig,
    seed: int,
) -> StatMap:
    """Apply the configured test at every in-mask voxel.

    Returns a stat map whose ``detected`` plane follows the configured
    rule: permutation p-values against alpha, the calibrated threshold
    transport when a calibration region is given, or the parametric
    p-value for the classical statistic.
    """
    if not volumes:
        raise DimsMismatchError("no volumes given")
    dims = volumes[0].dims
    for v in volumes[1:]:
        if v.dims != dims:
            raise DimsMismatchError(f"volume dims {v.dims} differ from {dims}")
    if len(labels) != len(volumes):
        raise LabelCountMismatchError(
            f"{len(labels)} labels for {len(volumes)} volumes"
        )
    config = test_config
    if config.calibration_region is not None and config.permutations < 1:
        raise ValueError("threshold calibration requires permutations >= 1")
    if config.calibration_region is not None and config.statistic == "t":
        raise ValueError("threshold transport supports the residual statistics only")

    data = np.stack([v.values for v in volumes])  # subjects x voxels
    x = (labels.values + 1.0) / 2.0
    n_subjects, n_voxels = data.shape
    in_mask = np.ones(n_voxels, dtype=bool)
    for v in volumes:
        if v.mask is not None:
            in_mask &= v.mask

    fit_fn, stat_fn, signed_stat = _build_statistic(config, n_subjects)

    stat = np.full(n_voxels, np.nan)
    p = np.full(n_voxels, np.nan)
    have_p = np.zeros(n_voxels, dtype=bool)
    region_only = config.calibration_region is not None
    region_set = (
        np.zeros(n_voxels, dtype=bool) if not region_only else _region_mask(
            n_voxels, config.calibration_region
        )
    )
    for voxel in np.flatnonzero(in_mask):
        series = data[:, voxel].reshape(-1, 1)
        wants_p = config.permutations > 0 and (not region_only or region_set[voxel])
        if wants_p:
            outcome = permutation_test(
                series, x, fit_fn, stat_fn,
                O=config.permutations,
                seed=rng.derive_seed(seed, voxel),
            )
            stat[voxel] = signed_stat(series, x) if signed_stat else outcome.statistic
            p[voxel] = outcome.p_value
            have_p[voxel] = True
        elif signed_stat:
            t_val = signed_stat(series, x)
            stat[voxel] = t_val
            p[voxel] = t_pvalue(t_val, max(1, n_subjects - 2))
            have_p[voxel] = True
        else:
            stat[voxel] = stat_fn(x, series, fit_fn(series, x))

    detected = np.zeros(n_voxels, dtype=bool)
    if region_only:
        region = config.calibration_region
        usable = region[in_mask[region] & have_p[region]]
        t_th = calibrate_threshold(stat[usable], p[usable], config.alpha)
        detected = in_mask & (stat < t_th)
    elif have_p.any():
        detected = in_mask & have_p & (p <= config.alpha)

    return StatMap(dims=dims, stat=stat, p=p if have_p.any() else None,
                   detected=detected)


def _region_mask(n_voxels: int, region: np.ndarray) -> np.ndarray:
    if region.size == 0:
        raise EmptyRegionError("calibration region is empty")
    if region.min() < 0 or region.max() >= n_voxels:
        raise ValueError("calibration region indices out of range")
    mask = np.zeros(n_voxels, dtype=bool)
    mask[region] = True
    return mask


def _build_statistic(config: VoxelTestConfig, n_subjects: int):
    """Return (fit_fn, stat_fn, signed_stat) for the configured statistic.

    ``signed_stat`` is set only for the classical statistic: the engine
    works on its negated magnitude (small = significant, matching the
    residual convention) while the map records the signed value.
    """
    if config.statistic == "t":
        contrast = Contrast([1.0, -1.0])

        def fit(Y, x):
            return fit_glm_ls(Y[:, 0], indicator_design(x))

        def stat(x, Y, fitted):
            return -abs(t_statistic(fitted, contrast))

        def signed(Y, x):
            return t_statistic(fit_glm_ls(Y[:, 0], indicator_design(x)), contrast)

        return fit, stat, signed

    base = (
        least_squares_estimator()
        if config.estimator == "ls"
        else svm_estimator(C=config.svm_c)
    )
    if config.statistic == "t_cv":
        fit_fn = (
            base
            if config.cv_folds is None
            else cross_validated(base, config.cv_folds, seed=0)
        )
        return fit_fn, residual_statistic, None
    if config.statistic == "t_res":
        bound = BoundParams(N=n_subjects, P=1, alpha=config.bound_alpha)
        return base, corrected_residual_statistic(bound), None
    raise ValueError(f"unknown statistic {config.statistic!r}")


def calibrate_threshold(
    region_stats: np.ndarray, region_pvalues: np.ndarray, alpha: float
) -> float:
    """Statistic threshold reproducing the significance level on a region.

    Returns one ulp above the largest statistic among voxels with
    ``p <= alpha`` so that strict ``stat < T_th`` thresholding includes
    every passing voxel; when none passes, one ulp below the smallest
    statistic, which detects nothing.  Smaller statistics are stronger
    evidence (residual convention).
    """
    stats = np.asarray(region_stats, dtype=np.float64).reshape(-1)
    pvalues = np.asarray(region_pvalues, dtype=np.float64).reshape(-1)
    if stats.size == 0 or pvalues.size == 0:
        raise EmptyRegionError("calibration region is empty")
    if stats.shape != pvalues.shape:
        raise ValueError("region statistics and p-values are not aligned")
    passing = stats[pvalues <= alpha]
    if passing.size == 0:
        return float(np.nextafter(stats.min(), -np.inf))
    return float(np.nextafter(passing.max(), np.inf))


def threshold_map(
    map: StatMap, T_th: float, direction: Literal["less", "greater"]
) -> StatMap:
    """Re-derive the decision plane by strict comparison against ``T_th``."""
    if direction == "less":
        detected = map.stat < T_th
    elif direction == "greater":
        detected = map.stat > T_th
    else:
        raise ValueError(f"direction must be 'less' or 'greater', got {direction!r}")
    detected &= ~np.isnan(map.stat)
    return StatMap(dims=map.dims, stat=map.stat, p=map.p, detected=detected)


# ---------------------------------------------------------------------------
# Binary volume files: <stem>.bin (raw values) + <stem>.json (header).

_HEADER_ORDER = "row-major"


def _sidecar(stem: Path) -> Path:
    return stem.with_suffix(".json")


def _binfile(stem: Path) -> Path:
    return stem.with_suffix(".bin")


def write_volume(stem, volume: Volume) -> None:
    """Write a float64 volume as <stem>.bin with its JSON sidecar."""
    stem = Path(stem)
    _binfile(stem).write_bytes(volume.values.astype("<f8").tobytes())
    _sidecar(stem).write_text(json.dumps(
        {"dims": list(volume.dims), "dtype": "f64le", "order": _HEADER_ORDER},
        sort_keys=True,
    ) + "\n")


def write_mask(stem, mask: np.ndarray, dims: Dims) -> None:
    """Write a 0/1 mask volume as 8-bit values with its JSON sidecar."""
    stem = Path(stem)
    flat = np.asarray(mask, dtype=bool).reshape(-1)
    if flat.shape[0] != dims[0] * dims[1] * dims[2]:
        raise ValueError(f"{flat.shape[0]} mask voxels for dims {tuple(dims)}")
    _binfile(stem).write_bytes(flat.astype(np.uint8).tobytes())
    _sidecar(stem).write_text(json.dumps(
        {"dims": list(dims), "dtype": "u8", "order": _HEADER_ORDER},
        sort_keys=True,
    ) + "\n")


def write_stat_map(stem, stat_map: StatMap) -> None:
    """Write a stat map as stacked float64 planes named by the sidecar."""
    stem = Path(stem)
    fields = ["stat"]
    planes = [stat_map.stat]
    if stat_map.p is not None:
        fields.append("p")
        planes.append(stat_map.p)
    fields.append("detected")
    planes.append(stat_map.detected.astype(np.float64))
    _binfile(stem).write_bytes(np.concatenate(planes).astype("<f8").tobytes())
    _sidecar(stem).write_text(json.dumps(
        {
            "dims": list(stat_map.dims),
            "dtype": "f64le",
            "order": _HEADER_ORDER,
            "fields": fields,
        },
        sort_keys=True,
    ) + "\n")


def _read_header(stem: Path, expect_dtype: str) -> dict:
    sidecar = _sidecar(stem)
    if not sidecar.exists():
        raise FileNotFoundError(f"missing sidecar header {sidecar}")
    try:
        header = json.loads(sidecar.read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"sidecar {sidecar} is not valid JSON: {exc}") from exc
    dims = header.get("dims")
    if (
        not isinstance(dims, list)
        or len(dims) != 3
        or not all(isinstance(d, int) and d > 0 for d in dims)
    ):
        raise ValueError(f"sidecar field 'dims': expected three positive integers, got {dims!r}")
    if header.get("dtype") != expect_dtype:
        raise ValueError(
            f"sidecar field 'dtype': expected {expect_dtype!r}, got {header.get('dtype')!r}"
        )
    if header.get("order") != _HEADER_ORDER:
        raise ValueError(
            f"sidecar field 'order': expected {_HEADER_ORDER!r}, got {header.get('order')!r}"
        )
    return header


def read_volume(stem) -> Volume:
    """Read a float64 volume written by :func:`write_volume`."""
    stem = Path(stem)
    header = _read_header(stem, "f64le")
    dims = tuple(header["dims"])
    raw = np.frombuffer(_binfile(stem).read_bytes(), dtype="<f8")
    if raw.shape[0] != dims[0] * dims[1] * dims[2]:
        raise ValueError(
            f"sidecar field 'dims': {dims} does not match {raw.shape[0]} stored voxels"
        )
    return Volume(dims=dims, values=raw)


def read_mask(stem) -> np.ndarray:
    """Read a 0/1 mask volume written by :func:`write_mask`."""
    stem = Path(stem)
    header = _read_header(stem, "u8")
    dims = tuple(header["dims"])
    raw = np.frombuffer(_binfile(stem).read_bytes(), dtype=np.uint8)
    if raw.shape[0] != dims[0] * dims[1] * dims[2]:
        raise ValueError(
            f"sidecar field 'dims': {dims} does not match {raw.shape[0]} stored voxels"
        )
    return raw.astype(bool)


def read_stat_map(stem) -> StatMap:
    """Read a stat map written by :func:`write_stat_map`."""
    stem = Path(stem)
    header = _read_header(stem, "f64le")
    dims = tuple(header["dims"])
    fields = header.get("fields")
    if not isinstance(fields, list) or "stat" not in fields or "detected" not in fields:
        raise ValueError(f"sidecar field 'fields': expected plane names, got {fields!r}")
    n = dims[0] * dims[1] * dims[2]
    raw = np.frombuffer(_binfile(stem).read_bytes(), dtype="<f8")
    if raw.shape[0] != n * len(fields):
        raise ValueError(
            f"sidecar field 'fields': {len(fields)} planes of {n} voxels "
            f"do not match {raw.shape[0]} stored values"
        )
    planes = {name: raw[i * n:(i + 1) * n] for i, name in enumerate(fields)}
    return StatMap(
        dims=dims,
        stat=planes["stat"],
        p=planes.get("p"),
        detected=planes["detected"] != 0.0,
    )
