"""Command-line interface: simulate, fit, permtest, power, voxmap.

Outputs are plot-ready CSV for tabular data and JSON for reports and
manifests; volumes use the raw f64le + sidecar format of
:mod:`dualstat.voxelwise`.  Every output embeds the seed and the full
parameter set, and re-running a command with identical arguments
produces byte-identical files (wall-clock timings are opt-in via
``--timing`` for exactly that reason).

Set ``DUALSTAT_LOG`` to a level name (DEBUG, INFO, ...) for progress
logging on stderr.  ``--threads`` parallelizes voxel loops; results are
identical for any thread count because each voxel owns its seed stream.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, rng
from .datagen import generate_dg1, generate_dg2
from .duality import theta_from_w, w_from_theta
from .errors import DualstatError
from .glm import Contrast, DesignMatrix, fit_glm_ls, indicator_design, t_statistic
from .inference import (
    BoundParams,
    corrected_residual_statistic,
    cross_validated,
    least_squares_estimator,
    permutation_test,
    residual_statistic,
    svm_estimator,
)
from .lrm import classify_rows, empirical_error, fit_lrm, predict_labels
from .svm import (
    BinaryLabels,
    decision,
    labels_from_indicator,
    svm_row_parameters,
    train_linear_svm,
)
from .voxelwise import (
    StatMap,
    VoxelTestConfig,
    Volume,
    calibrate_threshold,
    read_mask,
    read_volume,
    run_voxel_tests,
    write_stat_map,
)

log = logging.getLogger("dualstat")


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    _configure_logging()
    try:
        return args.func(args)
    except DualstatError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        name = getattr(exc, "filename", None)
        context = f" [{name}]" if name else ""
        print(f"error: {type(exc).__name__}: {exc}{context}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def _configure_logging() -> None:
    level = os.environ.get("DUALSTAT_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dualstat",
        description="dual regression models, permutation tests and voxel maps",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(required=True, metavar="command")

    def add_common(p, seed=True):
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads (speed only, never results)")
        if seed:
            p.add_argument("--seed", type=_nonneg_int, required=True,
                           help="base seed for all random streams")

    p = sub.add_parser("simulate", help="generate a synthetic dataset")
    add_common(p)
    p.add_argument("--gen", choices=("dg1", "dg2"), required=True)
    p.add_argument("--n", type=int, required=True, help="sample count (even)")
    p.add_argument("--t", type=float, default=0.1, help="dg2 flip probability")
    p.add_argument("--cov", choices=("identity", "random_spd"), default="identity")
    p.add_argument("--noise-scale", type=float, default=1.0)
    p.add_argument("--obs-from", choices=("observed", "true"), default="observed",
                   help="indicator the observations are generated from (dg2)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit GLM, LRM and SVM on a dataset")
    add_common(p, seed=False)
    p.add_argument("--data", type=Path, required=True, help="simulate output dir")
    p.add_argument("--svm-c", type=float, default=1.0)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("permtest", help="permutation test on a dataset")
    add_common(p)
    p.add_argument("--data", type=Path, required=True, help="simulate output dir")
    p.add_argument("--statistic", choices=("t", "t_cv", "t_res"), default="t_cv")
    p.add_argument("--estimator", choices=("glm", "ls", "svm"), default="ls")
    p.add_argument("--o", type=int, default=1000, help="permutation count")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--k", type=int, default=10,
                   help="cross-validation folds for t_cv (0 = resubstitution)")
    p.add_argument("--svm-c", type=float, default=1.0)
    p.set_defaults(func=cmd_permtest)

    p = sub.add_parser("power", help="Monte Carlo type-I error and power sweep")
    add_common(p)
    p.add_argument("--n-grid", type=_int_list, required=True, help="e.g. 50,100,200")
    p.add_argument("--t-grid", type=_float_list, default=[0.0, 0.5],
                   help="flip probabilities; 0.5 gives null cells")
    p.add_argument("--statistics", type=_str_list, default=["t_cv", "t_res"])
    p.add_argument("--estimators", type=_str_list, default=["ls"])
    p.add_argument("--repeats", type=int, default=100)
    p.add_argument("--o", type=int, default=199)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--svm-c", type=float, default=1.0)
    p.add_argument("--timing", action="store_true",
                   help="append a wall-clock column (breaks byte-identical reruns)")
    p.set_defaults(func=cmd_power)

    p = sub.add_parser("voxmap", help="voxelwise statistic map over volumes")
    add_common(p)
    p.add_argument("--volumes", type=Path, required=True,
                   help="directory of subject volumes (<pattern>.bin/.json)")
    p.add_argument("--pattern", default="vol_*", help="subject volume glob")
    p.add_argument("--labels", type=Path, required=True, help="CSV of +-1 labels")
    p.add_argument("--statistic", choices=("t", "t_cv", "t_res"), default="t_cv")
    p.add_argument("--estimator", choices=("ls", "svm"), default="ls")
    p.add_argument("--o", type=int, default=1000, help="permutation count (0 = none)")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--k", type=int, default=0,
                   help="cross-validation folds for t_cv (0 = resubstitution)")
    p.add_argument("--svm-c", type=float, default=1.0)
    p.add_argument("--mask", type=Path, default=None, help="in-mask volume stem")
    p.add_argument("--calibration-mask", type=Path, default=None,
                   help="calibration region volume stem (threshold transport)")
    p.set_defaults(func=cmd_voxmap)
    return parser


def _nonneg_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("seed must be non-negative")
    return value


def _int_list(text: str):
    return [int(v) for v in text.split(",") if v]


def _float_list(text: str):
    return [float(v) for v in text.split(",") if v]


def _str_list(text: str):
    return [v for v in text.split(",") if v]


# ---------------------------------------------------------------------------
# serialization helpers


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _manifest(command: str, seed, parameters: dict) -> dict:
    return {
        "command": command,
        "version": __version__,
        "seed": seed,
        "parameters": parameters,
    }


def _write_csv(path: Path, manifest: dict, header, rows) -> None:
    with path.open("w", newline="") as handle:
        handle.write("# " + json.dumps(manifest, sort_keys=True) + "\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(value: float) -> str:
    return repr(float(value))


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    parameters = {
        "gen": args.gen,
        "n": args.n,
        "t": args.t if args.gen == "dg2" else None,
        "cov": args.cov,
        "noise_scale": args.noise_scale,
        "obs_from": args.obs_from if args.gen == "dg2" else None,
    }
    if args.gen == "dg1":
        dataset = generate_dg1(args.n, args.seed, cov_mode=args.cov,
                               noise_scale=args.noise_scale)
    else:
        dataset = generate_dg2(args.n, args.t, args.seed, cov_mode=args.cov,
                               noise_scale=args.noise_scale,
                               observations_from=args.obs_from)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    manifest = _manifest("simulate", args.seed, parameters)
    _write_csv(out / "y.csv", manifest, ["y"], ([_fmt(v)] for v in dataset.y))
    _write_csv(out / "X.csv", manifest, ["x1", "x2"],
               ([_fmt(a), _fmt(b)] for a, b in dataset.X.entries))
    _write_csv(out / "X_true.csv", manifest, ["x1", "x2"],
               ([_fmt(a), _fmt(b)] for a, b in dataset.X_true.entries))
    _write_csv(out / "flip_mask.csv", manifest, ["flip"],
               ([int(v)] for v in dataset.flip_mask))
    _write_json(out / "manifest.json", manifest)
    log.info("simulated %d samples into %s", args.n, out)
    return 0


def _read_csv(path: Path) -> np.ndarray:
    """Read one of our CSV files: '#' comment lines, one header row, floats."""
    rows = []
    with path.open() as handle:
        header_seen = False
        for line in handle:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if not header_seen:
                header_seen = True
                continue
            rows.append([float(v) for v in line.split(",")])
    if not rows:
        raise ValueError(f"{path} contains no data rows")
    return np.asarray(rows)


def _load_dataset(data_dir: Path):
    y = _read_csv(data_dir / "y.csv").reshape(-1)
    X = _read_csv(data_dir / "X.csv")
    manifest_path = data_dir / "manifest.json"
    manifest = (
        json.loads(manifest_path.read_text()) if manifest_path.exists() else None
    )
    return y, DesignMatrix(X, kind="indicator"), manifest


# ---------------------------------------------------------------------------
# fit


def _label_domain_errors(y: np.ndarray, X: DesignMatrix, svm_c: float):
    """Empirical classification errors of the three label-domain classifiers.

    The GLM transports its parameters through the duality map, which has
    no intercept, so its regressed labels are argmax of ``y * w_dual``.
    The LRM classifier augments the observations with a constant column
    (the standard indicator-regression intercept); the SVM uses its own
    threshold through the symmetric two-column form.
    """
    glm_fit = fit_glm_ls(y, X)
    w_glm = w_from_theta(glm_fit.theta)
    glm_classes = classify_rows(predict_labels(y, w_glm))

    augmented = np.column_stack([y, np.ones_like(y)])
    W_aug = fit_lrm(augmented, X).W
    lrm_classes = classify_rows(predict_labels(augmented, W_aug))

    model = train_linear_svm(y.reshape(-1, 1), labels_from_indicator(X), C=svm_c)
    f = decision(model, y.reshape(-1, 1))
    svm_classes = classify_rows(np.column_stack([f, -f]))

    return glm_fit, model, {
        "glm": empirical_error(glm_classes, X),
        "lrm": empirical_error(lrm_classes, X),
        "svm": empirical_error(svm_classes, X),
    }


def cmd_fit(args) -> int:
    y, X, data_manifest = _load_dataset(args.data)
    glm_fit, model, errors = _label_domain_errors(y, X, args.svm_c)
    lrm_fit = fit_lrm(y, X)
    w_row = lrm_fit.W[0]
    svm_row = svm_row_parameters(model)

    report = {
        "manifest": _manifest(
            "fit",
            data_manifest.get("seed") if data_manifest else None,
            {"data": str(args.data), "svm_c": args.svm_c},
        ),
        "n": int(y.shape[0]),
        "glm": {
            "theta": list(glm_fit.theta),
            "w_dual": list(w_from_theta(glm_fit.theta)),
            "empirical_error": errors["glm"],
        },
        "lrm": {
            "W": list(w_row),
            "theta_dual": list(theta_from_w(w_row)),
            "empirical_error": errors["lrm"],
        },
        "svm": {
            "w": float(model.w[0]),
            "w0": model.w0,
            "row": list(svm_row),
            "theta_dual": list(theta_from_w(svm_row)),
            "empirical_error": errors["svm"],
        },
    }
    args.out.mkdir(parents=True, exist_ok=True)
    _write_json(args.out / "fit_report.json", report)
    log.info("fit report written to %s", args.out / "fit_report.json")
    return 0


# ---------------------------------------------------------------------------
# permtest


def _permtest_functions(statistic, estimator, n, alpha, k, svm_c, seed):
    """Compose (fit_fn, stat_fn) for the permutation engine.

    The classical statistic enters the engine negated in magnitude so
    that the residual direction rule (small = significant) applies.
    """
    if statistic == "t":
        if estimator != "glm":
            raise ValueError("statistic 't' requires the glm estimator")
        contrast = Contrast([1.0, -1.0])

        def fit(Y, x):
            return fit_glm_ls(Y[:, 0], indicator_design(x))

        def stat(x, Y, fitted):
            return -abs(t_statistic(fitted, contrast))

        return fit, stat
    if estimator == "glm":
        raise ValueError(f"statistic {statistic!r} requires the ls or svm estimator")
    base = least_squares_estimator() if estimator == "ls" else svm_estimator(C=svm_c)
    if statistic == "t_cv":
        fit = base if k == 0 else cross_validated(base, k, rng.derive_seed(seed, 0xF))
        return fit, residual_statistic
    if statistic == "t_res":
        return base, corrected_residual_statistic(BoundParams(N=n, P=1, alpha=alpha))
    raise ValueError(f"unknown statistic {statistic!r}")


def cmd_permtest(args) -> int:
    if args.o < 1:
        raise ValueError(f"permutation count must be >= 1, got {args.o}")
    y, X, _ = _load_dataset(args.data)
    x = X.entries[:, 0]
    fit_fn, stat_fn = _permtest_functions(
        args.statistic, args.estimator, y.shape[0],
        args.alpha, args.k, args.svm_c, args.seed,
    )
    outcome = permutation_test(
        y.reshape(-1, 1), x, fit_fn, stat_fn, O=args.o, seed=args.seed
    )
    null = outcome.null_values
    report = {
        "manifest": _manifest("permtest", args.seed, {
            "data": str(args.data),
            "statistic": args.statistic,
            "estimator": args.estimator,
            "o": args.o,
            "alpha": args.alpha,
            "k": args.k,
            "svm_c": args.svm_c,
        }),
        "statistic": outcome.statistic,
        "O": outcome.O,
        "p_value": outcome.p_value,
        "null_summary": {
            "min": float(null.min()),
            "q05": float(np.quantile(null, 0.05)),
            "q25": float(np.quantile(null, 0.25)),
            "median": float(np.quantile(null, 0.5)),
            "q75": float(np.quantile(null, 0.75)),
            "q95": float(np.quantile(null, 0.95)),
            "max": float(null.max()),
        },
        "seed": outcome.seed,
    }
    args.out.mkdir(parents=True, exist_ok=True)
    _write_json(args.out / "permtest.json", report)
    log.info("p=%.4g written to %s", outcome.p_value, args.out / "permtest.json")
    return 0


# ---------------------------------------------------------------------------
# power


def cmd_power(args) -> int:
    cells = [
        (n, t, stat_name, est_name)
        for n in args.n_grid
        for t in args.t_grid
        for stat_name in args.statistics
        for est_name in args.estimators
    ]
    if not cells or args.repeats < 1:
        raise ValueError("power sweep grid is empty")
    manifest = _manifest("power", args.seed, {
        "n_grid": args.n_grid,
        "t_grid": args.t_grid,
        "statistics": args.statistics,
        "estimators": args.estimators,
        "repeats": args.repeats,
        "o": args.o,
        "alpha": args.alpha,
        "k": args.k,
        "svm_c": args.svm_c,
    })
    rows = []
    for index, (n, t, stat_name, est_name) in enumerate(cells):
        started = time.perf_counter()
        rejections = 0
        p_total = 0.0
        for repeat in range(args.repeats):
            cell_seed = rng.derive_seed(args.seed, index, repeat)
            dataset = generate_dg2(n, t, cell_seed, observations_from="true")
            x = dataset.X.entries[:, 0]
            fit_fn, stat_fn = _permtest_functions(
                stat_name, "glm" if stat_name == "t" else est_name,
                n, args.alpha, args.k, args.svm_c, cell_seed,
            )
            outcome = permutation_test(
                dataset.y.reshape(-1, 1), x, fit_fn, stat_fn,
                O=args.o, seed=cell_seed,
            )
            rejections += outcome.p_value <= args.alpha
            p_total += outcome.p_value
        row = [
            n, _fmt(t), stat_name, est_name,
            _fmt(rejections / args.repeats), _fmt(p_total / args.repeats),
        ]
        if args.timing:
            row.append(_fmt(time.perf_counter() - started))
        rows.append(row)
        log.info("cell N=%d t=%g %s/%s: rejection %.3f",
                 n, t, stat_name, est_name, rejections / args.repeats)
    header = ["N", "t", "statistic", "estimator", "rejection_rate", "mean_p"]
    if args.timing:
        header.append("runtime_s")
    args.out.mkdir(parents=True, exist_ok=True)
    _write_csv(args.out / "power.csv", manifest, header, rows)
    return 0


# ---------------------------------------------------------------------------
# voxmap


def _load_labels(path: Path) -> BinaryLabels:
    return BinaryLabels(_read_csv(path).reshape(-1))


def cmd_voxmap(args) -> int:
    stems = sorted(p.with_suffix("") for p in args.volumes.glob(args.pattern + ".json"))
    if not stems:
        raise FileNotFoundError(
            f"no volumes matching {args.pattern}.json under {args.volumes}"
        )
    mask = read_mask(args.mask) if args.mask else None
    volumes = []
    for stem in stems:
        volume = read_volume(stem)
        if mask is not None:
            volume = Volume(volume.dims, volume.values, mask)
        volumes.append(volume)
    labels = _load_labels(args.labels)
    region = None
    if args.calibration_mask:
        region = np.flatnonzero(read_mask(args.calibration_mask))
    config = VoxelTestConfig(
        statistic=args.statistic,
        estimator=args.estimator,
        permutations=args.o,
        alpha=args.alpha,
        cv_folds=args.k if args.k > 0 else None,
        bound_alpha=args.alpha,
        svm_c=args.svm_c,
        calibration_region=region,
    )
    if args.threads > 1:
        stat_map = _threaded_voxel_run(volumes, labels, config, args.seed,
                                       args.threads)
    else:
        stat_map = run_voxel_tests(volumes, labels, config, args.seed)

    t_th = None
    if region is not None:
        usable = region[~np.isnan(stat_map.p[region])]
        t_th = calibrate_threshold(stat_map.stat[usable], stat_map.p[usable],
                                   args.alpha)
    summary = {
        "manifest": _manifest("voxmap", args.seed, {
            "volumes": str(args.volumes),
            "pattern": args.pattern,
            "labels": str(args.labels),
            "statistic": args.statistic,
            "estimator": args.estimator,
            "o": args.o,
            "alpha": args.alpha,
            "k": args.k,
            "svm_c": args.svm_c,
            "mask": str(args.mask) if args.mask else None,
            "calibration_mask": (
                str(args.calibration_mask) if args.calibration_mask else None
            ),
        }),
        "detected_count": int(stat_map.detected.sum()),
        "T_th": t_th,
        "dims": list(stat_map.dims),
        "n_subjects": len(volumes),
    }
    args.out.mkdir(parents=True, exist_ok=True)
    write_stat_map(args.out / "statmap", stat_map)
    _write_json(args.out / "voxmap_summary.json", summary)
    log.info("%d voxels detected", summary["detected_count"])
    return 0


def _threaded_voxel_run(volumes, labels, config, seed, threads) -> StatMap:
    """Split the volume into voxel chunks and merge per-chunk stat maps.

    Each chunk masks out the others' voxels; per-voxel seed streams make
    the merged result identical to the serial run.  Calibration needs
    the whole region in one pass, so that configuration stays serial.
    """
    n_voxels = volumes[0].n_voxels
    base_mask = np.ones(n_voxels, dtype=bool)
    for volume in volumes:
        if volume.mask is not None:
            base_mask &= volume.mask
    if config.calibration_region is not None:
        return run_voxel_tests(
            [Volume(v.dims, v.values, base_mask) for v in volumes],
            labels, config, seed,
        )
    chunk_masks = []
    for chunk in np.array_split(np.arange(n_voxels), threads):
        chunk_mask = np.zeros(n_voxels, dtype=bool)
        chunk_mask[chunk] = True
        chunk_masks.append(chunk_mask & base_mask)

    def run_chunk(chunk_mask):
        chunk_volumes = [
            Volume(v.dims, v.values, chunk_mask) for v in volumes
        ]
        return run_voxel_tests(chunk_volumes, labels, config, seed)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        maps = list(pool.map(run_chunk, chunk_masks))
    stat = np.full(n_voxels, np.nan)
    detected = np.zeros(n_voxels, dtype=bool)
    p = np.full(n_voxels, np.nan)
    have_p = False
    for chunk_mask, chunk_map in zip(chunk_masks, maps):
        stat[chunk_mask] = chunk_map.stat[chunk_mask]
        detected[chunk_mask] = chunk_map.detected[chunk_mask]
        if chunk_map.p is not None:
            p[chunk_mask] = chunk_map.p[chunk_mask]
            have_p = True
    return StatMap(dims=volumes[0].dims, stat=stat, p=p if have_p else None,
                   detected=detected)


if __name__ == "__main__":
    sys.exit(main())
