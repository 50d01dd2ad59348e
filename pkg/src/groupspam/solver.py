"""Backfitting, SpAM and GroupSpAM fitting by block coordinate descent.

All three fitters share one sweep driver. Smoothing inside the solver is
always followed by centering, i.e. the sample projection onto mean-zero
functions is ``C S_j`` with ``C = I - 11'/n``. With that operator the group
system keeps mean-zero solutions mean-zero, so the final centering step does
not disturb the stationarity condition.
"""

from __future__ import annotations

import logging
import math
import threading

import numpy as np
from scipy import linalg
from scipy.linalg.blas import ztrsv

from .core import (
    Dataset,
    FittedModel,
    GroupStructure,
    SolverConfig,
    SolverError,
    center,
    empirical_norm,
)
from .smoother import SmootherSet

logger = logging.getLogger(__name__)

# slack on threshold and stationarity comparisons made after convergence
KKT_BAND = 1e-8


def _project(S, r):
    v = S @ r
    return v - v.mean()


class GroupBlockSystem:
    """The group operator ``J`` and the stacked projections ``Q R`` for one group.

    Block row ``j`` of ``J`` is the identity on the diagonal and the centered
    smoother ``C S_j`` in every other block column. ``J`` itself is built only
    on demand; shifted solves ``(J + c I) f = b`` go through a complex Schur
    factorization computed once, after which each shift costs O((n d)^2).
    """

    def __init__(self, smoothers):
        mats = [np.asarray(S, dtype=float) for S in smoothers]
        if not mats:
            raise ValueError("a group needs at least one smoother")
        n = mats[0].shape[0]
        if any(S.shape != (n, n) for S in mats):
            raise ValueError("group smoothers must all be n x n with the same n")
        self.n = n
        self.d = len(mats)
        self.centered = [S - S.mean(axis=0) for S in mats]
        self._schur = None
        self._lock = threading.Lock()

    @property
    def J_hat(self) -> np.ndarray:
        n, d = self.n, self.d
        J = np.eye(n * d)
        for j in range(d):
            for k in range(d):
                if j != k:
                    J[j * n:(j + 1) * n, k * n:(k + 1) * n] = self.centered[j]
        return J

    def Q_applied(self, R) -> np.ndarray:
        """Stacked ``(C S_j R)_j`` of length ``n d``."""
        R = np.asarray(R, dtype=float)
        return np.concatenate([_project(Sc, R) for Sc in self.centered])

    def apply_J(self, f) -> np.ndarray:
        blocks = np.reshape(f, (self.d, self.n))
        total = blocks.sum(axis=0)
        out = [blocks[j] + self.centered[j] @ (total - blocks[j]) for j in range(self.d)]
        return np.concatenate(out)

    def _factor(self):
        if self._schur is None:
            T, Z = linalg.schur(self.J_hat)
            T, Z = linalg.rsf2csf(T, Z)
            self._schur = (np.asfortranarray(T), np.ascontiguousarray(Z), np.diag(T).copy())
        return self._schur

    def shifted_solver(self, rhs):
        """Return ``solve(shift)`` for a fixed right-hand side."""
        rhs = np.asarray(rhs, dtype=float)
        if self.d == 1:
            # J is the identity for a singleton group
            return lambda shift: rhs / (1.0 + shift)
        T, Z, diag = self._factor()
        w = (rhs @ Z).conj()  # Z^H rhs for real rhs
        idx = np.arange(T.shape[0])
        scale = max(1.0, float(np.max(np.abs(diag))))

        def solve(shift):
            shifted = diag + shift
            if np.min(np.abs(shifted)) <= 1e-13 * scale:
                raise SolverError("group system is singular at shift %g" % shift)
            with self._lock:
                T[idx, idx] = shifted
                try:
                    u = ztrsv(T, w)
                finally:
                    T[idx, idx] = diag
            f = (Z @ u).real
            if not np.all(np.isfinite(f)):
                raise SolverError("non-finite solution of the group system")
            return f

        return solve

    def solve(self, shift, rhs) -> np.ndarray:
        """Solve ``(J + shift I) f = rhs``."""
        return self.shifted_solver(rhs)(shift)


def _system(smoothers, members):
    if isinstance(smoothers, SmootherSet):
        return smoothers.cached_system(members, GroupBlockSystem)
    return GroupBlockSystem([smoothers[j] for j in members])


def _as_system(smoothers):
    if isinstance(smoothers, GroupBlockSystem):
        return smoothers
    return GroupBlockSystem(list(smoothers))


def partial_residual(y_centered, f_hat, exclude) -> np.ndarray:
    """``y_centered`` minus every component whose index is not in ``exclude``."""
    f_hat = np.asarray(f_hat, dtype=float)
    keep = [j for j in range(f_hat.shape[0]) if j not in set(exclude)]
    r = np.array(y_centered, dtype=float, copy=True)
    if keep:
        r -= f_hat[keep].sum(axis=0)
    return r


def group_threshold_check(R_g, smoothers, lam):
    """Group-level zero test.

    Returns ``(omega, is_zero)`` where ``omega = sqrt(sum_j |C S_j R|^2 / n)``
    and the group is zero iff ``omega <= lam * sqrt(d)``.
    """
    system = _as_system(smoothers)
    omega = empirical_norm(system.Q_applied(R_g))
    omega *= math.sqrt(system.d)  # empirical_norm averaged over n*d entries
    return omega, bool(omega <= lam * math.sqrt(system.d))


def soft_threshold_init(R_g, smoothers, lam) -> np.ndarray:
    """Closed-form shrinkage ``[1 - lam sqrt(d) / omega]_+ C S_j R`` for each member.

    Exact when the within-group cross-smoothing terms vanish.
    """
    system = _as_system(smoothers)
    q = system.Q_applied(R_g)
    omega = math.sqrt(np.dot(q, q) / system.n)
    scale = 0.0 if omega == 0 else max(0.0, 1.0 - lam * math.sqrt(system.d) / omega)
    return (scale * q).reshape(system.d, system.n)


def _fixed_point(system, rhs, lam, f0, config):
    n, d = system.n, system.d
    tau = lam * math.sqrt(d)
    guard = config.zero_guard
    solve = system.shifted_solver(rhs)
    if tau == 0:
        return solve(0.0), 1, True
    if d == 1:
        # J = I: the fixed point of f = QR / (1 + tau / s) has s = |QR|/sqrt(n) - tau
        omega = math.sqrt(np.dot(rhs, rhs) / n)
        return max(0.0, 1.0 - tau / omega) * rhs if omega > 0 else 0.0 * rhs, 1, True

    f = np.asarray(f0, dtype=float).ravel()
    s = math.sqrt(np.dot(f, f) / n)
    if s < guard:
        raise SolverError("fixed-point initial value has vanishing norm")
    # f^(t) depends on the previous iterate only through s = |f^(t)|/sqrt(n), so the
    # scalar sequence is accelerated with Aitken's delta-squared every two plain steps.
    trail = [s]
    for it in range(1, config.inner_max_iter + 1):
        f_new = solve(tau / s)
        s_new = math.sqrt(np.dot(f_new, f_new) / n)
        if s_new < guard:
            raise SolverError("fixed-point iterate collapsed to zero; "
                              "the group should have been thresholded")
        change = np.linalg.norm(f_new - f) / max(np.linalg.norm(f), guard)
        f = f_new
        if change <= config.inner_tol:
            return f, it, True
        trail.append(s_new)
        s = s_new
        if len(trail) == 3:
            s0, s1, s2 = trail
            denom = s2 - 2.0 * s1 + s0
            if denom != 0:
                s_acc = s0 - (s1 - s0) ** 2 / denom
                if np.isfinite(s_acc) and s_acc > guard:
                    s = s_acc
            trail = [s]
    return f, config.inner_max_iter, False


def fixed_point_solve(R_g, smoothers, lam, init, config: SolverConfig) -> np.ndarray:
    """Solve the nonzero-group stationary condition for one group.

    Iterates ``f <- (J + lam sqrt(d) / (|f|/sqrt(n)) I)^{-1} Q R`` from ``init``
    until the relative change drops below ``config.inner_tol``. Returns the
    centered member components as a ``(d, n)`` array.
    """
    system = _as_system(smoothers)
    rhs = system.Q_applied(R_g)
    f, _, ok = _fixed_point(system, rhs, lam, init, config)
    if not ok:
        logger.debug("fixed-point solve hit inner_max_iter=%d", config.inner_max_iter)
    return np.vstack([center(b) for b in f.reshape(system.d, system.n)])


def stationarity_residual(model: FittedModel, g, lam=None, smoothers=None,
                          zero_guard: float = 1e-12) -> float:
    """Relative violation of the sample stationary condition for a nonzero group.

    ``g`` is a group index into ``model.group_structure`` or an explicit member
    sequence. The residual is ``|J f + c f - Q R| / |Q R|`` with
    ``c = lam sqrt(d) / (|f_g| / sqrt(n))``. Smoothers are rebuilt from the
    model's training columns when not supplied.
    """
    if isinstance(g, (int, np.integer)):
        members = model.group_structure.members[g]
    else:
        members = tuple(int(j) for j in g)
    lam = model.lam if lam is None else float(lam)
    fg = model.f_hat[list(members)]
    norm = float(np.linalg.norm(fg))
    if norm == 0:
        raise ValueError("group %r is zero; use group_threshold_check instead" % (members,))
    if smoothers is None:
        from .smoother import build_smoother
        smoothers = {j: build_smoother(model.train_x[:, j], model.bandwidths[j]) for j in members}
    y_c = model.train_y - model.y_mean
    R = partial_residual(y_c, model.f_hat, members)
    system = _system(smoothers, members)
    q = system.Q_applied(R)
    f = fg.ravel()
    c = lam * math.sqrt(len(members)) / (norm / math.sqrt(model.n))
    resid = system.apply_J(f) + c * f - q
    return float(np.linalg.norm(resid) / max(np.linalg.norm(q), zero_guard))


def objective(y_centered, f_hat, groups: GroupStructure, lam) -> float:
    """Diagnostic ``(1/2n)|y - sum f|^2 + lam sum_g sqrt(d_g) |f_g|``."""
    f_hat = np.asarray(f_hat)
    n = f_hat.shape[1]
    r = y_centered - f_hat.sum(axis=0)
    pen = 0.0
    for members in groups.members:
        fg = f_hat[list(members)]
        pen += math.sqrt(len(members)) * math.sqrt(np.sum(fg * fg) / n)
    return float(np.dot(r, r) / (2 * n) + lam * pen)


def _check_inputs(dataset, smoothers):
    if not isinstance(dataset, Dataset):
        raise TypeError("dataset must be a Dataset")
    if smoothers.p != dataset.p or smoothers.n != dataset.n:
        raise ValueError("smoothers built for p=%d, n=%d but data has p=%d, n=%d"
                         % (smoothers.p, smoothers.n, dataset.p, dataset.n))


def _kkt_satisfied(y_c, F, blocks, systems, lam, config):
    """Threshold consistency for every group and stationarity for nonzero ones."""
    total = F.sum(axis=0)
    for members, system in zip(blocks, systems):
        fg = F[list(members)]
        R = y_c - total + fg.sum(axis=0)
        q = system.Q_applied(R)
        d = len(members)
        omega = math.sqrt(np.dot(q, q) / system.n)
        threshold = lam * math.sqrt(d)
        norm = float(np.linalg.norm(fg))
        if norm == 0:
            if omega > threshold + KKT_BAND:
                return False
            continue
        if omega <= threshold - KKT_BAND:
            return False
        f = fg.ravel()
        c = threshold / (norm / math.sqrt(system.n))
        resid = system.apply_J(f) + c * f - q
        if np.linalg.norm(resid) > 10 * config.inner_tol * max(np.linalg.norm(q), config.zero_guard):
            return False
    return True


def _descent(dataset, groups, smoothers, config, init, update, algorithm, kkt=True):
    """Shared sweep driver; ``update(g, members, system, R, F)`` returns the new block."""
    y_mean = float(dataset.y.mean())
    y_c = dataset.y - y_mean
    p, n = dataset.p, dataset.n
    F = np.zeros((p, n)) if init is None else np.array(init, dtype=float)
    if F.shape != (p, n):
        raise ValueError("init must have shape (%d, %d)" % (p, n))
    blocks = groups.members
    systems = [_system(smoothers, m) for m in blocks]

    converged = False
    sweep = 0
    for sweep in range(1, config.outer_max_iter + 1):
        r = y_c - F.sum(axis=0)
        max_change = 0.0
        for g, (members, system) in enumerate(zip(blocks, systems)):
            idx = list(members)
            old = F[idx]
            R = r + old.sum(axis=0)
            new = update(g, members, system, R, old)
            diff = new - old
            max_change = max(max_change, float(np.sqrt(np.max(np.sum(diff * diff, axis=1)) / n)))
            F[idx] = new
            r = R - new.sum(axis=0)
        if max_change <= config.outer_tol and (
                not kkt or _kkt_satisfied(y_c, F, blocks, systems, config.lam, config)):
            converged = True
            break
    if not converged:
        logger.warning("%s did not converge in %d sweeps (lambda=%g)",
                       algorithm, config.outer_max_iter, config.lam)

    active = [j for j in range(p) if np.any(F[j] != 0)]
    return FittedModel(
        f_hat=F,
        y_mean=y_mean,
        train_x=dataset.x,
        train_y=dataset.y,
        bandwidths=smoothers.bandwidths,
        lam=config.lam,
        active_set=active,
        group_structure=groups,
        algorithm=algorithm,
        converged=converged,
        n_iter=sweep,
        objective=objective(y_c, F, groups, config.lam),
    )


def fit_backfit(dataset: Dataset, smoothers: SmootherSet, config: SolverConfig = None,
                init=None) -> FittedModel:
    """Plain backfitting: ``f_j <- center(S_j (y - sum_{k != j} f_k))``.

    ``config.lam`` is ignored; the model is unpenalized.
    """
    config = (config or SolverConfig()).with_lambda(0.0)
    _check_inputs(dataset, smoothers)
    groups = GroupStructure.singletons(dataset.p)

    def update(g, members, system, R, old):
        return center(_project(system.centered[0], R))[None, :]

    return _descent(dataset, groups, smoothers, config, init, update, "backfit")


def fit_spam(dataset: Dataset, smoothers: SmootherSet, config: SolverConfig,
             init=None) -> FittedModel:
    """Sparse additive model by coordinate descent with functional soft-thresholding."""
    _check_inputs(dataset, smoothers)
    groups = GroupStructure.singletons(dataset.p)
    lam = config.lam
    n = dataset.n

    def update(g, members, system, R, old):
        proj = _project(system.centered[0], R)
        norm = math.sqrt(np.dot(proj, proj) / n)
        if norm <= lam:
            return np.zeros((1, n))
        return center((1.0 - lam / norm) * proj)[None, :]

    return _descent(dataset, groups, smoothers, config, init, update, "spam")


def fit_groupspam(dataset: Dataset, groups: GroupStructure, smoothers: SmootherSet,
                  config: SolverConfig, init=None) -> FittedModel:
    """GroupSpAM by block coordinate descent over a partition of the covariates.

    Each sweep visits the groups in input order. A group whose thresholding
    statistic does not exceed ``lam * sqrt(d_g)`` is set to exact zeros;
    otherwise its components solve the group stationary condition by fixed-point
    iteration, warm-started from the current value (or from the soft-threshold
    formula when the group was zero). Convergence requires both a small sweep
    change and the threshold/stationarity conditions on the final residuals.
    """
    _check_inputs(dataset, smoothers)
    if groups.p != dataset.p:
        raise ValueError("group structure covers %d covariates, data has %d" % (groups.p, dataset.p))
    if not groups.is_partition:
        a, b = groups.overlapping_pair()
        raise ValueError("groups %r and %r overlap; use the overlap expansion" % (a, b))
    lam = config.lam

    def update(g, members, system, R, old):
        rhs = system.Q_applied(R)
        omega = math.sqrt(np.dot(rhs, rhs) / system.n)
        if omega <= lam * math.sqrt(system.d):
            return np.zeros_like(old)
        if math.sqrt(np.sum(old * old) / system.n) > config.zero_guard:
            start = old
        else:
            shrink = max(0.0, 1.0 - lam * math.sqrt(system.d) / omega)
            if shrink * omega <= config.zero_guard:
                # omega sits on the threshold up to rounding; the solution norm is ~0
                return np.zeros_like(old)
            start = shrink * rhs
        f, _, ok = _fixed_point(system, rhs, lam, start, config)
        if not ok:
            logger.debug("group %d: inner solve hit inner_max_iter", g)
        return np.vstack([center(b) for b in f.reshape(system.d, system.n)])

    return _descent(dataset, groups, smoothers, config, init, update, "groupspam")


def fit(dataset, groups, smoothers, config, algorithm="groupspam", init=None):
    """Dispatch on ``algorithm`` in {'backfit', 'spam', 'groupspam'}."""
    if algorithm == "backfit":
        return fit_backfit(dataset, smoothers, config, init)
    if algorithm == "spam":
        return fit_spam(dataset, smoothers, config, init)
    if algorithm == "groupspam":
        return fit_groupspam(dataset, groups, smoothers, config, init)
    raise ValueError("unknown algorithm %r" % (algorithm,))


def threshold_report(model: FittedModel, smoothers) -> list:
    """Per group ``(omega, lam * sqrt(d), is_zero_in_model)`` on the final residuals."""
    y_c = model.train_y - model.y_mean
    out = []
    for members in model.group_structure.members:
        R = partial_residual(y_c, model.f_hat, members)
        omega, _ = group_threshold_check(R, _system(smoothers, members), model.lam)
        out.append((omega, model.lam * math.sqrt(len(members)),
                    not np.any(model.f_hat[list(members)])))
    return out
