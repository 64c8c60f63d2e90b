"""Sorted distinct-label index over a training set.

Labels are normalized to [0, 1] before any vicinity math; the raw range is
kept on the index so reports can be shown in raw units.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyDataset, InsufficientLabels, OutOfRange


@dataclass(frozen=True, eq=False)
class LabelIndex:
    distinct_labels: np.ndarray  # normalized, strictly increasing
    counts: np.ndarray  # int64, >= 1
    raw_min: float = 0.0
    raw_max: float = 1.0

    def __post_init__(self):
        for arr in (self.distinct_labels, self.counts):
            arr.setflags(write=False)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def prefix_counts(self) -> np.ndarray:
        return np.cumsum(self.counts)

    @property
    def m(self) -> int:
        return len(self.distinct_labels)

    @property
    def raw_span(self) -> float:
        return self.raw_max - self.raw_min

    def to_raw(self, y):
        return np.asarray(y) * self.raw_span + self.raw_min

    def to_normalized(self, raw):
        return (np.asarray(raw, dtype=np.float64) - self.raw_min) / self.raw_span

    def expanded(self) -> np.ndarray:
        """Every normalized label repeated ``count`` times."""
        return np.repeat(self.distinct_labels, self.counts)


@dataclass(frozen=True)
class GlobalHyperparams:
    sigma: float
    kappa_base: float
    n_av: int | None = None


def normalize_labels(labels, raw_min, raw_max):
    labels = np.asarray(labels, dtype=np.float64).reshape(-1)
    if not raw_min < raw_max:
        raise OutOfRange(f"raw_min {raw_min} must be < raw_max {raw_max}")
    if labels.size and (labels.min() < raw_min or labels.max() > raw_max):
        raise OutOfRange(
            f"labels span [{labels.min()}, {labels.max()}] outside range [{raw_min}, {raw_max}]"
        )
    return (labels - raw_min) / (raw_max - raw_min)


def build_index(labels, raw_min, raw_max) -> LabelIndex:
    """Normalize raw labels and merge duplicates into counts.

    >>> idx = build_index([10, 10, 20], 0, 100)
    >>> idx.distinct_labels.tolist(), idx.counts.tolist()
    ([0.1, 0.2], [2, 1])
    """
    labels = np.asarray(labels, dtype=np.float64).reshape(-1)
    if labels.size == 0:
        raise EmptyDataset("cannot index an empty label set")
    y = normalize_labels(labels, raw_min, raw_max)
    distinct, counts = np.unique(y, return_counts=True)
    return LabelIndex(distinct, counts.astype(np.int64), float(raw_min), float(raw_max))


def index_from_counts(distinct_labels, counts, raw_min=0.0, raw_max=1.0) -> LabelIndex:
    """Build an index directly from normalized distinct labels and counts.

    Zero counts are dropped.
    """
    distinct = np.asarray(distinct_labels, dtype=np.float64)
    counts = np.asarray(counts, dtype=np.int64)
    keep = counts > 0
    distinct, counts = distinct[keep], counts[keep]
    if distinct.size == 0:
        raise EmptyDataset("all counts are zero")
    if np.any(np.diff(distinct) <= 0):
        raise ValueError("distinct labels must be strictly increasing")
    if distinct[0] < 0 or distinct[-1] > 1:
        raise OutOfRange("normalized labels must lie in [0, 1]")
    return LabelIndex(distinct.copy(), counts.copy(), float(raw_min), float(raw_max))


def nav_heuristic(index: LabelIndex):
    """Mean summed count of each distinct label and its right neighbour.

    Returns ``(s_bar, suggestion)`` where ``suggestion`` is ``s_bar`` rounded half-up.  The
    suggestion is only advisory; callers pick the final value.
    """
    if index.m < 2:
        raise InsufficientLabels("need at least 2 distinct labels")
    s = index.counts[:-1] + index.counts[1:]
    s_bar = float(s.mean())
    return s_bar, int(np.floor(s_bar + 0.5))


def rule_of_thumb(index: LabelIndex) -> GlobalHyperparams:
    """Default target-noise std and fixed vicinity radius.

    ``sigma = std(labels) * N**(-1/5)`` over the expanded normalized labels and
    ``kappa_base`` is the largest gap between adjacent distinct labels.
    These are stand-in defaults; override them through the training config.
    """
    if index.m < 2:
        raise InsufficientLabels("need at least 2 distinct labels")
    y = index.expanded()
    sigma = float(np.std(y) * index.total ** (-0.2))
    kappa = float(np.max(np.diff(index.distinct_labels)))
    return GlobalHyperparams(sigma=sigma, kappa_base=kappa)
