"""Hard, soft and adaptive vicinities around a conditional label.

All distances are compared on a 1e-12 grid (``snap``) so that ties between
the left and right neighbour and the closed-interval boundary test are
deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyVicinity, InsufficientLabels, InsufficientSamples, OutOfRange
from .label_index import LabelIndex

SNAP = 1e12
DEFAULT_THRESHOLD = 1e-3


def snap(d):
    """Map non-negative distances onto integer units of 1e-12."""
    return np.rint(np.abs(np.asarray(d, dtype=np.float64)) * SNAP).astype(np.int64)


def _snap1(d):
    return round(abs(d) * SNAP)


@dataclass(frozen=True)
class VicinityParams:
    y_c: float
    kappa_left: float
    kappa_right: float
    kappa: float
    nu: float
    n_c: int
    n_av: int | None = None

    def as_row(self):
        return (self.y_c, self.kappa_left, self.kappa_right, self.kappa, self.nu, self.n_c)


@dataclass(frozen=True, eq=False)
class WeightVector:
    indices: np.ndarray
    weights: np.ndarray

    def __len__(self):
        return len(self.indices)

    def dense(self, n):
        out = np.zeros(n)
        out[self.indices] = self.weights
        return out


def decay_rate(kappa, decay_exponent=2):
    if decay_exponent not in (1, 2):
        raise ValueError("decay_exponent must be 1 or 2")
    return 1.0 / np.asarray(kappa, dtype=np.float64) ** decay_exponent


def build_adaptive(index: LabelIndex, y_c: float, n_av: int, decay_exponent: int = 2) -> VicinityParams:
    """Grow a vicinity around ``y_c`` until it holds at least ``n_av`` samples.

    At each step the nearer of the two external distinct labels is absorbed
    (both when equidistant) and its distance becomes the new left or right
    radius.  A label sitting exactly on ``y_c`` seeds the count at radius 0
    and at least one further extension is forced so the radius is positive.
    """
    if n_av < 1:
        raise ValueError("n_av must be >= 1")
    if not 0.0 <= y_c <= 1.0:
        raise OutOfRange(f"y_c={y_c} outside [0, 1]")
    if n_av > index.total:
        raise InsufficientSamples(f"n_av={n_av} exceeds the {index.total} training samples")

    labels = index.distinct_labels
    counts = index.counts
    m = len(labels)
    tr = int(np.searchsorted(labels, y_c, side="left"))
    tl = tr - 1

    n_c = 0
    forced = False
    if tr < m and _snap1(labels[tr] - y_c) == 0:
        n_c, forced = int(counts[tr]), True
        tr += 1
    elif tl >= 0 and _snap1(labels[tl] - y_c) == 0:
        n_c, forced = int(counts[tl]), True
        tl -= 1

    kl = kr = 0
    while n_c < n_av or forced:
        forced = False
        dl = _snap1(labels[tl] - y_c) if tl >= 0 else math.inf
        dr = _snap1(labels[tr] - y_c) if tr < m else math.inf
        if dl == math.inf and dr == math.inf:
            raise InsufficientLabels("cannot extend a vicinity beyond a single distinct label")
        if dl < dr:
            kl = dl
            n_c += int(counts[tl])
            tl -= 1
        elif dl > dr:
            kr = dr
            n_c += int(counts[tr])
            tr += 1
        else:
            kl, kr = dl, dr
            n_c += int(counts[tl]) + int(counts[tr])
            tl -= 1
            tr += 1

    kappa_l, kappa_r = kl / SNAP, kr / SNAP
    kappa = max(kappa_l, kappa_r)
    return VicinityParams(
        y_c=float(y_c),
        kappa_left=kappa_l,
        kappa_right=kappa_r,
        kappa=kappa,
        nu=float(decay_rate(kappa, decay_exponent)),
        n_c=n_c,
        n_av=int(n_av),
    )


def build_adaptive_batch(index: LabelIndex, y_c, n_av: int, decay_exponent: int = 2):
    """Vectorized :func:`build_adaptive` over an array of targets.

    Absorbing labels in nearest-first order is the same as taking the
    smallest radius ``r`` whose closed ball holds ``n_av`` samples, which is
    what is computed here row by row.

    Returns a dict of arrays ``kappa_left, kappa_right, kappa, nu, n_c``.
    """
    t = np.asarray(y_c, dtype=np.float64).reshape(-1)
    if n_av < 1:
        raise ValueError("n_av must be >= 1")
    if n_av > index.total:
        raise InsufficientSamples(f"n_av={n_av} exceeds the {index.total} training samples")
    if t.size and (t.min() < 0 or t.max() > 1):
        raise OutOfRange("targets must lie in [0, 1]")
    labels, counts = index.distinct_labels, index.counts
    diff = labels[None, :] - t[:, None]
    dist = snap(diff)
    order = np.argsort(dist, axis=1, kind="stable")
    dist_sorted = np.take_along_axis(dist, order, axis=1)
    cum = np.cumsum(counts[order], axis=1)
    ok = (cum >= n_av) & (dist_sorted > 0)
    if not ok.any(axis=1).all():
        raise InsufficientLabels("cannot extend a vicinity beyond a single distinct label")
    pos = ok.argmax(axis=1)
    radius = dist_sorted[np.arange(len(t)), pos]
    inside = dist <= radius[:, None]
    n_c = (inside * counts[None, :]).sum(axis=1)
    kl = np.where(inside & (diff < 0), dist, 0).max(axis=1) / SNAP
    kr = np.where(inside & (diff > 0), dist, 0).max(axis=1) / SNAP
    kappa = np.maximum(kl, kr)
    return {
        "kappa_left": kl,
        "kappa_right": kr,
        "kappa": kappa,
        "nu": decay_rate(kappa, decay_exponent),
        "n_c": n_c.astype(np.int64),
    }


def _normalized(idx, w, y_c):
    if idx.size == 0:
        raise EmptyVicinity(y_c)
    return WeightVector(idx, w / w.sum())


def soft_weights(sample_labels, y_c, nu, threshold=DEFAULT_THRESHOLD) -> WeightVector:
    """Exponential-decay weights ``exp(-nu (y - y_c)^2)``, thresholded and normalized."""
    if nu <= 0:
        raise ValueError("nu must be positive")
    if not 0 <= threshold < 1:
        raise ValueError("threshold must lie in [0, 1)")
    y = np.asarray(sample_labels, dtype=np.float64).reshape(-1)
    raw = np.exp(-nu * (y - y_c) ** 2)
    keep = (raw >= threshold) & (raw > 0)
    idx = np.flatnonzero(keep)
    return _normalized(idx, raw[idx], y_c)


def hybrid_weights(sample_labels, y_c, params: VicinityParams, threshold=DEFAULT_THRESHOLD) -> WeightVector:
    """Soft weights truncated to the closed interval ``[y_c - kappa, y_c + kappa]``."""
    y = np.asarray(sample_labels, dtype=np.float64).reshape(-1)
    inside = snap(y - y_c) <= _snap1(params.kappa)
    raw = np.exp(-params.nu * (y - y_c) ** 2)
    keep = inside & (raw >= threshold) & (raw > 0)
    idx = np.flatnonzero(keep)
    return _normalized(idx, raw[idx], y_c)


def hard_weights(sample_labels, y_c, kappa) -> WeightVector:
    """Uniform weights over samples with ``|y - y_c| <= kappa``."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    y = np.asarray(sample_labels, dtype=np.float64).reshape(-1)
    idx = np.flatnonzero(snap(y - y_c) <= _snap1(kappa))
    return _normalized(idx, np.ones(idx.size), y_c)


def label_weight_matrix(index: LabelIndex, targets, mode, kappa, nu, threshold=DEFAULT_THRESHOLD, raise_empty=True):
    """Unnormalized per-sample weight at every distinct label, one row per target.

    ``kappa`` and ``nu`` are scalars or arrays aligned with ``targets``.
    Modes: ``hard`` (indicator), ``soft`` (thresholded decay), ``hybrid``
    (decay truncated to the interval).  A sample's normalized weight is its
    label's entry divided by ``(row * counts).sum()``.  With ``raise_empty``
    off, empty rows are returned as zeros.
    """
    t = np.asarray(targets, dtype=np.float64).reshape(-1, 1)
    diff = index.distinct_labels[None, :] - t
    kappa = np.broadcast_to(np.asarray(kappa, dtype=np.float64), (t.shape[0],))[:, None]
    nu = np.broadcast_to(np.asarray(nu, dtype=np.float64), (t.shape[0],))[:, None]
    if mode == "hard":
        w = (snap(diff) <= snap(kappa)).astype(np.float64)
    elif mode in ("soft", "hybrid"):
        w = np.exp(-nu * diff**2)
        w = np.where((w >= threshold) & (w > 0), w, 0.0)
        if mode == "hybrid":
            w = np.where(snap(diff) <= snap(kappa), w, 0.0)
    else:
        raise ValueError(f"unknown weighting mode {mode!r}")
    if not raise_empty:
        return w
    empty = np.flatnonzero(w @ index.counts <= 0)
    if empty.size:
        raise EmptyVicinity(t[empty[0], 0])
    return w
