"""Replicated simulation runs and their aggregate support/MSE table."""

from __future__ import annotations

import csv
import io
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import SolverConfig
from .modelsel import DEFAULT_GRID_COUNT, DEFAULT_GRID_RATIO, fit_path, support_metrics, test_mse
from .simgen import N_RELEVANT, Scenario, make_scenario
from .smoother import SmootherSet

log = logging.getLogger(__name__)

METHODS = ("spam", "groupspam")
DEFAULT_PATIENCE = 4
METRICS = ("precision", "recall", "size", "mse")
COUNT_COLUMNS = tuple("f%d" % j for j in range(1, N_RELEVANT + 1))


@dataclass(frozen=True)
class ReplicateResult:
    scenario: Scenario
    replicate: int
    method: str
    precision: float = float("nan")
    recall: float = float("nan")
    size: int = -1
    mse: float = float("nan")
    selected_relevant: tuple = ()
    selected_lambda: float = float("nan")
    converged: bool = False
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error


def run_replicate(scenario: Scenario, replicate: int, methods=METHODS,
                  grid_count: int = DEFAULT_GRID_COUNT, grid_ratio: float = DEFAULT_GRID_RATIO,
                  patience=DEFAULT_PATIENCE, config: SolverConfig = None, inspect=None) -> list:
    """Simulate one replicate and fit a validation-selected path per method.

    A failing method is recorded with its error message instead of raising.
    ``inspect(method, data, smoothers, path)`` is called on every fitted path;
    it must be picklable when replicates run in worker processes.
    """
    data = make_scenario(scenario, replicate)
    smoothers = SmootherSet.from_dataset(data.train)
    out = []
    for method in methods:
        try:
            path = fit_path(data.train, data.validation, data.groups, grid_count, grid_ratio,
                            config=config, algorithm=method, smoothers=smoothers, patience=patience)
            if inspect is not None:
                inspect(method, data, smoothers, path)
            model = path.selected
            sm = support_metrics(model, data.true_support)
            out.append(ReplicateResult(
                scenario, replicate, method,
                precision=sm.precision, recall=sm.recall, size=sm.size,
                mse=test_mse(model, data.test),
                selected_relevant=tuple(sm.per_covariate_selected[:N_RELEVANT]),
                selected_lambda=path.selected_lambda,
                converged=all(m.converged for m in path.models),
            ))
        except Exception as exc:  # keep the run going
            log.warning("replicate %d (%s, p=%d, t=%g) failed: %s",
                        replicate, method, scenario.p, scenario.t, exc)
            out.append(ReplicateResult(scenario, replicate, method,
                                       error="%s: %s" % (type(exc).__name__, exc)))
    return out


def worker_count(env=None) -> int:
    """Worker processes from ``GSPAM_THREADS``; 0 or unset means one per CPU."""
    env = os.environ if env is None else env
    raw = env.get("GSPAM_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ValueError("GSPAM_THREADS must be an integer, got %r" % raw) from None
    if n < 0:
        raise ValueError("GSPAM_THREADS must be nonnegative")
    return n or (os.cpu_count() or 1)


def _sort_key(r: ReplicateResult):
    return (r.scenario.p, r.scenario.t, r.scenario.n, r.method, r.replicate)


def run_experiment(scenarios, replicates: int, methods=METHODS, workers: int = None, **kwargs) -> list:
    """All replicates of all scenarios, sorted so the result does not depend on scheduling."""
    if replicates < 1:
        raise ValueError("replicates must be at least 1")
    workers = worker_count() if workers is None else workers
    jobs = [(sc, r) for sc in scenarios for r in range(replicates)]
    results = []
    if workers <= 1 or len(jobs) == 1:
        for sc, r in jobs:
            results.extend(run_replicate(sc, r, methods, **kwargs))
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            futures = [pool.submit(run_replicate, sc, r, methods, **kwargs) for sc, r in jobs]
            for fut in futures:
                results.extend(fut.result())
    return sorted(results, key=_sort_key)


def _mean_sd(values):
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return float("nan"), float("nan")
    sd = float(v.std(ddof=1)) if v.size > 1 else 0.0
    return float(v.mean()), sd


def aggregate(results) -> list:
    """One row per (scenario, method) with means, standard deviations and selection counts."""
    cells = {}
    for r in results:
        cells.setdefault((r.scenario.p, r.scenario.t, r.scenario.n, r.method), []).append(r)
    rows = []
    for (p, t, n, method), rs in sorted(cells.items()):
        good = [r for r in rs if r.ok]
        row = {"p": p, "t": t, "n": n, "method": method}
        for m in METRICS:
            row[m], row[m + "_sd"] = _mean_sd([getattr(r, m) for r in good])
        for j, name in enumerate(COUNT_COLUMNS):
            row[name] = sum(1 for r in good if r.selected_relevant[j])
        row["replicates"] = len(good)
        row["failed"] = len(rs) - len(good)
        rows.append(row)
    return rows


AGGREGATE_COLUMNS = (("p", "t", "n", "method")
                     + ("precision", "precision_sd", "recall", "recall_sd", "size", "size_sd")
                     + COUNT_COLUMNS + ("mse", "mse_sd", "replicates", "failed"))


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_aggregate(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AGGREGATE_COLUMNS)
    for row in rows:
        w.writerow([_cell(row[c]) for c in AGGREGATE_COLUMNS])
    return buf.getvalue()


REPLICATE_COLUMNS = ("p", "t", "n", "method", "replicate", "precision", "recall", "size",
                     "mse", "selected_lambda", "converged") + COUNT_COLUMNS + ("error",)


def format_replicates(results) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPLICATE_COLUMNS)
    for r in results:
        sel = r.selected_relevant or (False,) * N_RELEVANT
        w.writerow([r.scenario.p, _cell(float(r.scenario.t)), r.scenario.n, r.method, r.replicate,
                    _cell(r.precision), _cell(r.recall), r.size, _cell(r.mse),
                    _cell(r.selected_lambda), int(r.converged)]
                   + [int(s) for s in sel] + [r.error])
    return buf.getvalue()
