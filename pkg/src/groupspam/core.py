"""Shared domain types, empirical norms and centering."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class SolverError(RuntimeError):
    """Raised when an inner solve cannot proceed (singular system, vanished norm)."""


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Covariate matrix ``x`` (n x p) and response ``y`` (n,)."""

    x: np.ndarray
    y: np.ndarray
    column_names: Optional[tuple] = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 2:
            raise ValueError("x must be a 2-d array, got shape %s" % (x.shape,))
        if y.ndim != 1:
            raise ValueError("y must be a 1-d array, got shape %s" % (y.shape,))
        n, p = x.shape
        if n < 2 or p < 1:
            raise ValueError("need n >= 2 and p >= 1, got n=%d, p=%d" % (n, p))
        if y.shape[0] != n:
            raise ValueError("y has %d entries but x has %d rows" % (y.shape[0], n))
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("dataset contains non-finite values")
        names = self.column_names
        if names is not None:
            names = tuple(str(c) for c in names)
            if len(names) != p:
                raise ValueError("expected %d column names, got %d" % (p, len(names)))
        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "column_names", names)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True, eq=False)
class GroupStructure:
    """Named groups of covariate indices over ``p`` covariates.

    Groups may overlap. Every covariate must be covered by at least one group.
    Member order inside a group is kept as given; it fixes the block layout
    used by the group solver.
    """

    groups: tuple
    p: int

    def __post_init__(self):
        p = int(self.p)
        if p < 1:
            raise ValueError("p must be positive")
        cleaned = []
        names = set()
        for name, members in self.groups:
            members = tuple(int(j) for j in members)
            if not members:
                raise ValueError("group %r is empty" % (name,))
            if len(set(members)) != len(members):
                raise ValueError("group %r lists a covariate twice" % (name,))
            bad = [j for j in members if not 0 <= j < p]
            if bad:
                raise ValueError("group %r has indices outside [0, %d): %s" % (name, p, bad))
            if str(name) in names:
                raise ValueError("duplicate group name %r" % (name,))
            names.add(str(name))
            cleaned.append((str(name), members))
        covered = set(j for _, m in cleaned for j in m)
        missing = sorted(set(range(p)) - covered)
        if missing:
            raise ValueError("covariates not covered by any group: %s" % missing)
        object.__setattr__(self, "groups", tuple(cleaned))
        object.__setattr__(self, "p", p)

    @classmethod
    def singletons(cls, p: int) -> "GroupStructure":
        return cls(tuple(("x%d" % (j + 1), (j,)) for j in range(p)), p)

    @classmethod
    def blocks(cls, p: int, size: int) -> "GroupStructure":
        """Consecutive blocks of ``size`` neighbouring covariates."""
        if size < 1 or p % size:
            raise ValueError("p=%d is not divisible into blocks of %d" % (p, size))
        return cls(
            tuple(("g%d" % (k + 1), tuple(range(k * size, (k + 1) * size)))
                  for k in range(p // size)),
            p,
        )

    @property
    def names(self) -> list:
        return [name for name, _ in self.groups]

    @property
    def members(self) -> list:
        return [m for _, m in self.groups]

    @property
    def is_partition(self) -> bool:
        total = sum(len(m) for _, m in self.groups)
        # coverage is guaranteed, so disjointness reduces to a size count
        return total == self.p

    def __len__(self):
        return len(self.groups)

    def overlapping_pair(self):
        """Return the first pair of group names sharing a covariate, or None."""
        owner = {}
        for name, members in self.groups:
            for j in members:
                if j in owner:
                    return owner[j], name
                owner[j] = name
        return None


@dataclass(frozen=True)
class SolverConfig:
    lam: float = 0.0
    outer_tol: float = 1e-4
    outer_max_iter: int = 100
    inner_tol: float = 1e-6
    inner_max_iter: int = 100
    zero_guard: float = 1e-12

    def __post_init__(self):
        if not np.isfinite(self.lam) or self.lam < 0:
            raise ValueError("lambda must be a nonnegative real, got %r" % (self.lam,))
        for name in ("outer_tol", "inner_tol", "zero_guard"):
            if not getattr(self, name) > 0:
                raise ValueError("%s must be positive" % name)
        for name in ("outer_max_iter", "inner_max_iter"):
            if getattr(self, name) < 1:
                raise ValueError("%s must be at least 1" % name)

    def with_lambda(self, lam: float) -> "SolverConfig":
        return SolverConfig(lam, self.outer_tol, self.outer_max_iter,
                            self.inner_tol, self.inner_max_iter, self.zero_guard)


@dataclass(frozen=True, eq=False)
class FittedModel:
    """Fitted additive model.

    ``f_hat[j]`` holds the centered evaluations of component ``j`` at the
    training points. Components outside ``active_set`` are exact zeros.
    ``latent`` is only set for models collapsed from an overlap expansion.
    """

    f_hat: np.ndarray
    y_mean: float
    train_x: np.ndarray
    train_y: np.ndarray
    bandwidths: np.ndarray
    lam: float
    active_set: frozenset
    group_structure: GroupStructure
    algorithm: str = "groupspam"
    converged: bool = True
    n_iter: int = 0
    objective: float = float("nan")
    latent: Optional[object] = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "f_hat", _frozen(self.f_hat))
        object.__setattr__(self, "train_x", _frozen(self.train_x))
        object.__setattr__(self, "train_y", _frozen(self.train_y))
        object.__setattr__(self, "bandwidths", _frozen(self.bandwidths))
        object.__setattr__(self, "active_set", frozenset(int(j) for j in self.active_set))
        object.__setattr__(self, "y_mean", float(self.y_mean))
        object.__setattr__(self, "lam", float(self.lam))

    @property
    def p(self) -> int:
        return self.f_hat.shape[0]

    @property
    def n(self) -> int:
        return self.f_hat.shape[1]

    def fitted_values(self) -> np.ndarray:
        return self.y_mean + self.f_hat.sum(axis=0)

    def predict(self, x_new) -> np.ndarray:
        """Predicted responses at the rows of ``x_new``."""
        from .smoother import predict_component

        x_new = np.atleast_2d(np.asarray(x_new, dtype=float))
        if x_new.shape[1] != self.p:
            raise ValueError("expected %d columns, got %d" % (self.p, x_new.shape[1]))
        out = np.full(x_new.shape[0], self.y_mean)
        for j in sorted(self.active_set):
            out += predict_component(self, j, x_new[:, j])
        return out


def empirical_norm(v) -> float:
    """sqrt(mean(v**2)), the sample L2 norm with the 1/n convention."""
    v = np.asarray(v, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("empirical norm of an empty vector")
    return float(np.sqrt(np.dot(v, v) / v.size))


def group_norm(fg) -> float:
    """sqrt of the summed squared empirical norms of the member components."""
    vecs = [np.asarray(v, dtype=float).ravel() for v in fg]
    if not vecs:
        raise ValueError("empty group")
    n = vecs[0].size
    if any(v.size != n for v in vecs):
        raise ValueError("component vectors have mismatched lengths")
    return float(np.sqrt(sum(empirical_norm(v) ** 2 for v in vecs)))


def center(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        raise ValueError("cannot center an empty vector")
    return v - v.mean()
