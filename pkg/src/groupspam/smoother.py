"""Gaussian Nadaraya-Watson smoother matrices and component prediction."""

from __future__ import annotations

import threading
from collections import OrderedDict

import numpy as np

from .core import Dataset, FittedModel

BANDWIDTH_SCALE = 0.6


def plugin_bandwidth(column) -> float:
    """Plug-in bandwidth ``0.6 * sd(x) * n**(-1/5)``.

    The standard deviation uses the n - 1 denominator. A constant column has
    no usable bandwidth and raises ``ValueError``.
    """
    x = np.asarray(column, dtype=float).ravel()
    n = x.size
    if n < 2:
        raise ValueError("need at least two observations for a bandwidth")
    sd = float(np.std(x, ddof=1))
    if not sd > 0:
        raise ValueError("degenerate covariate: column is constant")
    return BANDWIDTH_SCALE * sd * n ** (-0.2)


def _kernel_weights(query, train, h):
    """Row-normalized Gaussian weights of ``train`` points for each query point."""
    d = np.subtract.outer(np.asarray(query, float), np.asarray(train, float))
    logk = -(d * d) / (2.0 * h * h)
    # shifting by the row max keeps far-away queries from underflowing to 0/0
    logk -= logk.max(axis=1, keepdims=True)
    k = np.exp(logk)
    return k / k.sum(axis=1, keepdims=True)


def build_smoother(column, h: float) -> np.ndarray:
    """Smoother matrix with ``S[i, k] = K_h(x_i - x_k) / sum_m K_h(x_i - x_m)``."""
    if not h > 0:
        raise ValueError("bandwidth must be positive, got %r" % (h,))
    x = np.asarray(column, dtype=float).ravel()
    return _kernel_weights(x, x, h)


def smooth(S, r) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    r = np.asarray(r, dtype=float)
    if S.ndim != 2 or S.shape[1] != r.shape[0]:
        raise ValueError("smoother of shape %s cannot act on a vector of length %d"
                         % (S.shape, r.shape[0]))
    return S @ r


class SmootherSet:
    """Per-covariate smoother matrices for one training design.

    ``matrices`` is a read-only (p, n, n) array. The set also memoizes the
    factorized group systems used by the group solver so that a whole
    regularization path reuses them; the memo is bounded by ``max_cached``.
    """

    def __init__(self, matrices, bandwidths, train_columns, max_cached=64):
        matrices = np.asarray(matrices, dtype=float)
        if matrices.ndim != 3 or matrices.shape[1] != matrices.shape[2]:
            raise ValueError("matrices must have shape (p, n, n)")
        p, n, _ = matrices.shape
        bandwidths = np.asarray(bandwidths, dtype=float)
        train_columns = np.asarray(train_columns, dtype=float)
        if bandwidths.shape != (p,) or train_columns.shape != (p, n):
            raise ValueError("bandwidths/train_columns do not match %d smoothers of size %d" % (p, n))
        for a in (matrices, bandwidths, train_columns):
            a.setflags(write=False)
        self.matrices = matrices
        self.bandwidths = bandwidths
        self.train_columns = train_columns
        self.max_cached = max_cached
        self._systems = OrderedDict()
        self._lock = threading.Lock()

    @classmethod
    def from_dataset(cls, dataset: Dataset, bandwidths=None, **kwargs) -> "SmootherSet":
        cols = dataset.x.T
        if bandwidths is None:
            bandwidths = [plugin_bandwidth(c) for c in cols]
        mats = np.empty((dataset.p, dataset.n, dataset.n))
        for j, (c, h) in enumerate(zip(cols, bandwidths)):
            mats[j] = build_smoother(c, h)
        return cls(mats, bandwidths, cols, **kwargs)

    @property
    def p(self) -> int:
        return self.matrices.shape[0]

    @property
    def n(self) -> int:
        return self.matrices.shape[1]

    def __getitem__(self, j):
        return self.matrices[j]

    def __len__(self):
        return self.p

    def take(self, indices) -> "SmootherSet":
        """Smoothers for a re-indexed column set (duplicates allowed)."""
        idx = np.asarray(indices, dtype=int)
        return SmootherSet(self.matrices[idx], self.bandwidths[idx],
                           self.train_columns[idx], max_cached=self.max_cached)

    def cached_system(self, members, factory):
        key = tuple(int(j) for j in members)
        with self._lock:
            system = self._systems.get(key)
            if system is not None:
                self._systems.move_to_end(key)
                return system
        system = factory([self.matrices[j] for j in key])
        with self._lock:
            self._systems[key] = system
            while len(self._systems) > self.max_cached:
                self._systems.popitem(last=False)
        return system


def predict_component(model: FittedModel, j: int, x_new) -> np.ndarray:
    """Nadaraya-Watson interpolation of the stored fitted values of component ``j``.

    Uses the training bandwidth of covariate ``j``. Zero components predict zeros.
    """
    if not 0 <= j < model.p:
        raise IndexError("covariate index %d out of range for p=%d" % (j, model.p))
    x_new = np.atleast_1d(np.asarray(x_new, dtype=float))
    if j not in model.active_set:
        return np.zeros(x_new.shape[0])
    w = _kernel_weights(x_new, model.train_x[:, j], model.bandwidths[j])
    return w @ model.f_hat[j]
