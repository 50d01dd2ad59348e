"""Command-line entry point: ``groupspam <command> [flags]``.

Commands
--------
simulate          write train/validation/test CSVs, a groups file and a truth file
fit               fit one model at a fixed or validation-selected penalty
predict           predictions of a saved model
path              penalty path with validation selection
eval              test MSE and, given a truth file, support metrics
plot-components   component curves and partial residuals as CSV
reproduce         replicated simulation table
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import io as gio
from .core import Dataset, GroupStructure, SolverConfig, SolverError
from .experiment import (DEFAULT_PATIENCE, aggregate, format_aggregate, format_replicates,
                         run_experiment, worker_count)
from .modelsel import (DEFAULT_GRID_COUNT, DEFAULT_GRID_RATIO, PathFitError, fit_path,
                       support_metrics, test_mse)
from .overlap import fit_overlap
from .simgen import Scenario, make_scenario
from .smoother import SmootherSet, predict_component
from .solver import fit

log = logging.getLogger("groupspam")


class CliError(Exception):
    pass


def _lambda_arg(text):
    if text == "auto":
        return text
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected a number or 'auto', got %r" % text) from None
    if not np.isfinite(v) or v < 0:
        raise argparse.ArgumentTypeError("lambda must be finite and nonnegative")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("expected a positive integer, got %r" % text)
    return v


def _index_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated integers, got %r" % text) from None


def _add_solver_flags(ap):
    g = ap.add_argument_group("solver")
    g.add_argument("--outer-tol", type=float, default=SolverConfig.outer_tol)
    g.add_argument("--outer-max-iter", type=_positive_int, default=SolverConfig.outer_max_iter)
    g.add_argument("--inner-tol", type=float, default=SolverConfig.inner_tol)
    g.add_argument("--inner-max-iter", type=_positive_int, default=SolverConfig.inner_max_iter)


def _add_grid_flags(ap):
    ap.add_argument("--grid-count", type=int, default=DEFAULT_GRID_COUNT)
    ap.add_argument("--grid-ratio", type=float, default=DEFAULT_GRID_RATIO)
    ap.add_argument("--patience", type=int, default=None,
                    help="stop the path after this many non-improving penalties")


def _config(args, lam=0.0):
    return SolverConfig(lam=lam, outer_tol=args.outer_tol, outer_max_iter=args.outer_max_iter,
                        inner_tol=args.inner_tol, inner_max_iter=args.inner_max_iter)


def _groups(args, p):
    if args.groups is None:
        return GroupStructure.singletons(p)
    return gio.read_groups(args.groups, p)


def _ensure_dir(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise CliError("cannot create output directory %s: %s" % (path, exc.strerror)) from None


def _write_text(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _describe(model):
    active = ",".join(str(j + 1) for j in sorted(model.active_set)) or "(empty)"
    status = "converged" if model.converged else "NOT converged"
    return ("algorithm=%s lambda=%r active=%s size=%d %s after %d sweeps objective=%r"
            % (model.algorithm, model.lam, active, len(model.active_set), status,
               model.n_iter, model.objective))


def cmd_simulate(args):
    explicit = None
    if args.groups is not None:
        explicit = gio.read_groups(args.groups, args.p)
    elif args.p % 4:
        raise CliError("p=%d is not divisible by 4, so there is no default block grouping; "
                       "supply a groups file with --groups" % args.p)
    scenario = Scenario(n=args.n, p=args.p, t=args.t, seed=args.seed,
                        snr_reading=args.snr_reading,
                        block_size=None if explicit is not None else 4)
    data = make_scenario(scenario, args.replicate, groups=explicit)
    _ensure_dir(args.out)
    for name, ds in (("train", data.train), ("validation", data.validation), ("test", data.test)):
        gio.write_dataset(os.path.join(args.out, name + ".csv"), ds)
    gio.write_groups(os.path.join(args.out, "groups.txt"), data.groups)
    gio.write_truth(os.path.join(args.out, "truth.txt"), data.true_support, data.sigma)
    print("wrote %s: n=%d p=%d t=%g sigma=%r groups=%d"
          % (args.out, args.n, args.p, args.t, data.sigma, len(data.groups)))


def _fit_once(train, groups, smoothers, config, algorithm, overlap):
    if algorithm == "groupspam" and overlap:
        return fit_overlap(train, groups, config, smoothers=smoothers)
    return fit(train, groups, smoothers, config, algorithm=algorithm)


def cmd_fit(args):
    train = gio.read_dataset(args.data)
    groups = _groups(args, train.p)
    smoothers = SmootherSet.from_dataset(train)
    if args.algorithm == "groupspam" and not groups.is_partition and not args.overlap:
        a, b = groups.overlapping_pair()
        raise CliError("groups %r and %r overlap; pass --overlap to fit overlapping groups"
                       % (a, b))
    if args.lam == "auto":
        if args.validation is None:
            raise CliError("--lambda auto needs --validation")
        validation = gio.read_dataset(args.validation)
        path = fit_path(train, validation, groups, args.grid_count, args.grid_ratio,
                        config=_config(args), algorithm=args.algorithm, smoothers=smoothers,
                        patience=args.patience)
        model = path.selected
        print("selected lambda=%r (validation mse=%r)"
              % (path.selected_lambda, float(path.validation_mse[path.selected_index])))
    else:
        model = _fit_once(train, groups, smoothers, _config(args, args.lam), args.algorithm,
                          args.overlap)
    gio.save_model(args.out, model)
    print(_describe(model))


def cmd_predict(args):
    model = gio.load_model(args.model)
    x = gio.read_covariates(args.data)
    if x.shape[1] != model.p:
        raise CliError("%s has %d covariates, model expects %d" % (args.data, x.shape[1], model.p))
    pred = model.predict(x)
    _write_text(args.out, "prediction\n" + "".join(repr(float(v)) + "\n" for v in pred))


def cmd_path(args):
    train = gio.read_dataset(args.data)
    validation = gio.read_dataset(args.validation)
    groups = _groups(args, train.p)
    path = fit_path(train, validation, groups, args.grid_count, args.grid_ratio,
                    config=_config(args), algorithm=args.algorithm, patience=args.patience)
    _ensure_dir(args.out)
    lines = ["lambda,validation_mse,support_size,converged\n"]
    for lam, err, m in zip(path.lambdas, path.validation_mse, path.models):
        lines.append("%r,%r,%d,%d\n" % (float(lam), float(err), len(m.active_set), int(m.converged)))
    _write_text(os.path.join(args.out, "path.csv"), "".join(lines))
    gio.save_model(os.path.join(args.out, "model.json"), path.selected)
    print("fitted %d of %d penalties; selected index %d" % (len(path.models), len(path.grid),
                                                             path.selected_index))
    print(_describe(path.selected))


def cmd_eval(args):
    model = gio.load_model(args.model)
    test = gio.read_dataset(args.data)
    if test.p != model.p:
        raise CliError("%s has %d covariates, model expects %d" % (args.data, test.p, model.p))
    record = {"mse": test_mse(model, test)}
    if args.truth is not None:
        support, _ = gio.read_truth(args.truth)
        if any(j >= model.p for j in support):
            raise CliError("truth file lists covariates beyond p=%d" % model.p)
        sm = support_metrics(model, support)
        record.update(precision=sm.precision, recall=sm.recall, size=sm.size)
    text = json.dumps(record) + "\n"
    sys.stdout.write(text)
    if args.out not in (None, "-"):
        _write_text(args.out, text)


def component_curves(model, covariates, resolution=100, rescale=False):
    """Grid curves ``(j, x, [u], f_j(x))`` and partial residual points per covariate."""
    if resolution < 2:
        raise ValueError("grid resolution must be at least 2")
    curves, points = [], []
    resid = model.train_y - model.fitted_values()
    for j in covariates:
        if not 0 <= j < model.p:
            raise IndexError("covariate %d is outside 1..%d" % (j + 1, model.p))
        col = model.train_x[:, j]
        lo, hi = float(col.min()), float(col.max())
        grid = np.linspace(lo, hi, resolution)
        fx = predict_component(model, j, grid)
        span = hi - lo if hi > lo else 1.0
        for x, f in zip(grid, fx):
            curves.append((j, x, (x - lo) / span, f) if rescale else (j, x, f))
        partial = model.f_hat[j] + resid
        for x, r in zip(col, partial):
            points.append((j, x, (x - lo) / span, r) if rescale else (j, x, r))
    return curves, points


def cmd_plot_components(args):
    model = gio.load_model(args.model)
    covariates = [j - 1 for j in args.covariates] if args.covariates else list(range(model.p))
    try:
        curves, points = component_curves(model, covariates, args.resolution, args.rescale)
    except IndexError as exc:
        raise CliError(str(exc)) from None
    cols = "covariate,x,u,value\n" if args.rescale else "covariate,x,value\n"
    note = ("# curve values are kernel-weighted averages of fitted values at training points; "
            "they match the stored fits only as the bandwidth shrinks\n")
    fmt = lambda row: ",".join([str(row[0] + 1)] + [repr(float(v)) for v in row[1:]]) + "\n"
    _ensure_dir(args.out)
    _write_text(os.path.join(args.out, "curves.csv"), note + cols + "".join(map(fmt, curves)))
    _write_text(os.path.join(args.out, "residuals.csv"),
                "# partial residuals: fitted component plus model residual\n"
                + cols + "".join(map(fmt, points)))
    print("wrote curves for %d covariates to %s" % (len(covariates), args.out))


def cmd_reproduce(args):
    scenarios = [Scenario(n=args.n, p=p, t=t, seed=args.seed, snr_reading=args.snr_reading)
                 for p in args.p for t in args.t]
    workers = worker_count() if args.workers is None else args.workers
    results = run_experiment(scenarios, args.replicates, workers=workers,
                             grid_count=args.grid_count, grid_ratio=args.grid_ratio,
                             patience=args.patience, config=_config(args))
    _write_text(args.out, format_aggregate(aggregate(results)))
    if args.replicate_out:
        _write_text(args.replicate_out, format_replicates(results))
    failed = sum(1 for r in results if not r.ok)
    if failed:
        log.warning("%d replicate fits failed; see the failed column", failed)


def build_parser():
    ap = argparse.ArgumentParser(prog="groupspam", description="Group sparse additive models.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="write a simulated scenario")
    sp.add_argument("--n", type=_positive_int, default=150)
    sp.add_argument("--p", type=int, default=200)
    sp.add_argument("--t", type=float, default=0.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--replicate", type=int, default=0)
    sp.add_argument("--groups", help="groups file; required when p is not divisible by 4")
    sp.add_argument("--snr-reading", choices=("literal", "standard"), default="literal")
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("fit", help="fit one model")
    sp.add_argument("--data", required=True, help="training CSV")
    sp.add_argument("--groups", help="groups file (default: one group per covariate)")
    sp.add_argument("--lambda", dest="lam", type=_lambda_arg, default=0.0,
                    help="penalty, or 'auto' to select on --validation")
    sp.add_argument("--validation", help="validation CSV for --lambda auto")
    sp.add_argument("--algorithm", choices=("backfit", "spam", "groupspam"), default="groupspam")
    sp.add_argument("--overlap", action="store_true", help="allow overlapping groups")
    sp.add_argument("--out", required=True, help="model file to write")
    _add_grid_flags(sp)
    _add_solver_flags(sp)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("predict", help="predict with a saved model")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True, help="CSV of covariates (a y column is ignored)")
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("path", help="fit a penalty path and select on validation data")
    sp.add_argument("--data", required=True, help="training CSV")
    sp.add_argument("--validation", required=True)
    sp.add_argument("--groups")
    sp.add_argument("--algorithm", choices=("backfit", "spam", "groupspam"), default="groupspam")
    sp.add_argument("--out", required=True, help="output directory for path.csv and model.json")
    _add_grid_flags(sp)
    _add_solver_flags(sp)
    sp.set_defaults(func=cmd_path)

    sp = sub.add_parser("eval", help="score a saved model on test data")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True, help="test CSV")
    sp.add_argument("--truth")
    sp.add_argument("--out", default=None, help="also write the record to this file")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("plot-components", help="emit component curves as CSV")
    sp.add_argument("--model", required=True)
    sp.add_argument("--covariates", type=_index_list, default=None,
                    help="1-based indices, comma-separated (default: all)")
    sp.add_argument("--resolution", type=int, default=100)
    sp.add_argument("--rescale", action="store_true", help="add x rescaled to [0, 1]")
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_plot_components)

    sp = sub.add_parser("reproduce", help="replicated simulation table")
    sp.add_argument("--n", type=_positive_int, default=150)
    sp.add_argument("--p", type=int, nargs="+", default=[200])
    sp.add_argument("--t", type=float, nargs="+", default=[0.0, 1.0])
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--replicates", type=_positive_int, default=10)
    sp.add_argument("--snr-reading", choices=("literal", "standard"), default="literal")
    sp.add_argument("--workers", type=int, default=None,
                    help="worker processes (default: GSPAM_THREADS, 0 = one per CPU)")
    sp.add_argument("--replicate-out", help="also write per-replicate rows here")
    sp.add_argument("--out", default="-", help="aggregate CSV (default: stdout)")
    sp.add_argument("--grid-count", type=int, default=DEFAULT_GRID_COUNT)
    sp.add_argument("--grid-ratio", type=float, default=DEFAULT_GRID_RATIO)
    sp.add_argument("--patience", type=int, default=DEFAULT_PATIENCE)
    _add_solver_flags(sp)
    sp.set_defaults(func=cmd_reproduce)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s: %(message)s")
    try:
        args.func(args)
    except (CliError, gio.FileFormatError, PathFitError, SolverError, ValueError) as exc:
        print("groupspam %s: error: %s" % (args.command, exc), file=sys.stderr)
        return 1
    except OSError as exc:
        print("groupspam %s: error: %s" % (args.command, exc), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
