"""Sliding Frechet distance, label score, diversity and density-ratio checks.

All metrics run in data space.  Evaluation centers are normalized labels;
reports convert centers and label scores back to raw units.  Each center
draws its fakes from its own child of one ``SeedSequence``, so results do
not depend on how centers are spread over worker threads.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist
from scipy.stats import multivariate_normal

from .errors import InvalidCovariance, WindowTooSparse
from .imbalance_synth import ToyDataset, family_sample

REPORT_COLUMNS = ("center", "fd", "label_score", "diversity", "n_real_window")
PSD_TOL = 1e-9


def _check_cov(cov, name):
    cov = np.atleast_2d(np.asarray(cov, dtype=np.float64))
    if cov.shape[0] != cov.shape[1]:
        raise InvalidCovariance(f"{name} is not square: {cov.shape}")
    if not np.allclose(cov, cov.T, rtol=0, atol=PSD_TOL * max(1.0, np.abs(cov).max())):
        raise InvalidCovariance(f"{name} is not symmetric")
    cov = 0.5 * (cov + cov.T)
    ev = np.linalg.eigvalsh(cov)
    if ev.min() < -PSD_TOL * max(1.0, np.abs(ev).max()):
        raise InvalidCovariance(f"{name} has a negative eigenvalue {ev.min():.3g}")
    return cov


def _psd_sqrt(a):
    ev, vec = np.linalg.eigh(a)
    return (vec * np.sqrt(np.clip(ev, 0.0, None))) @ vec.T


def frechet_gaussian(mu1, cov1, mu2, cov2):
    """``|mu1 - mu2|^2 + tr(S1 + S2 - 2 (S1 S2)^(1/2))``.

    The trace of ``(S1 S2)^(1/2)`` is taken from the eigenvalues of the
    symmetric matrix ``S1^(1/2) S2 S1^(1/2)``, which shares its spectrum.
    """
    mu1 = np.atleast_1d(np.asarray(mu1, dtype=np.float64))
    mu2 = np.atleast_1d(np.asarray(mu2, dtype=np.float64))
    s1 = _check_cov(cov1, "cov1")
    s2 = _check_cov(cov2, "cov2")
    if not (mu1.shape == mu2.shape and s1.shape == s2.shape == (mu1.size, mu1.size)):
        raise InvalidCovariance("mean and covariance shapes disagree")
    r1 = _psd_sqrt(s1)
    mid = r1 @ s2 @ r1
    ev = np.linalg.eigvalsh(0.5 * (mid + mid.T))
    tr_sqrt = np.sqrt(np.clip(ev, 0.0, None)).sum()
    diff = mu1 - mu2
    return float(max(0.0, diff @ diff + np.trace(s1) + np.trace(s2) - 2.0 * tr_sqrt))


def moments(x):
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    return x.mean(axis=0), np.atleast_2d(np.cov(x, rowvar=False))


# ---------------------------------------------------------------------- samplers


class OracleGenerator:
    """Samples the true conditional of a toy family."""

    def __init__(self, family):
        self.family = family

    def sample(self, y, rng):
        return family_sample(self.family, y, rng)


class ConstantGenerator:
    """Ignores noise and label; always returns ``value``."""

    def __init__(self, value):
        self.value = np.atleast_1d(np.asarray(value, dtype=np.float64))

    def sample(self, y, rng):
        n = np.asarray(y).reshape(-1).size
        return np.tile(self.value, (n, 1))


class RingLabelOracle:
    """Recovers the label of a ring-family sample from its polar angle."""

    def __init__(self, family):
        self.family = family

    def predict(self, x):
        x = np.atleast_2d(x)
        angle = np.mod(np.arctan2(x[:, 1], x[:, 0]), 2 * np.pi)
        return angle / (2 * np.pi * self.family.span)


# ---------------------------------------------------------------------- metrics


def default_centers(n=101):
    return np.linspace(0.0, 1.0, n)


def center_seeds(seed, n):
    return np.random.SeedSequence(seed).spawn(n)


def _threads():
    try:
        return max(0, int(os.environ.get("VCCGM_THREADS", "0")))
    except ValueError:
        return 0


def _map(fn, items):
    n = _threads()
    if n <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def generate_per_center(generator, centers, n_fake, seed=0):
    """One ``(n_fake, d)`` array per center, each from its own seed."""
    centers = np.asarray(centers, dtype=np.float64).reshape(-1)
    seeds = center_seeds(seed, centers.size)

    def one(i):
        return generator.sample(np.full(n_fake, centers[i]), np.random.default_rng(seeds[i]))

    return _map(one, range(centers.size))


def window_indices(y, center, radius):
    return np.flatnonzero(np.abs(np.asarray(y) - center) <= radius + 1e-12)


def real_window(data: ToyDataset, center, radius):
    idx = window_indices(data.y, center, radius)
    if idx.size < data.d + 1:
        raise WindowTooSparse(center, idx.size, data.d + 1)
    return data.x[idx]


def fd_at_center(fakes, data: ToyDataset, center, radius):
    real = real_window(data, center, radius)
    mr, cr = moments(real)
    mf, cf = moments(fakes)
    return frechet_gaussian(mr, cr, mf, cf), real.shape[0]


def sliding_fd(generator, data: ToyDataset, centers=None, window_radius=None, n_fake_per_center=200, seed=0):
    """Per-center Frechet distance between windowed reals and fakes at the center.

    Returns ``(fd, n_real, skipped)``; skipped centers have ``fd = nan`` and
    are listed in ``skipped``.
    """
    centers = default_centers() if centers is None else np.asarray(centers, dtype=np.float64)
    radius = 2.0 / centers.size if window_radius is None else window_radius
    fakes = generate_per_center(generator, centers, n_fake_per_center, seed)
    fd = np.full(centers.size, np.nan)
    n_real = np.zeros(centers.size, dtype=np.int64)
    skipped = []
    for i, c in enumerate(centers):
        try:
            fd[i], n_real[i] = fd_at_center(fakes[i], data, c, radius)
        except WindowTooSparse as exc:
            n_real[i] = exc.n_real
            skipped.append(float(c))
    return fd, n_real, skipped


def label_score_of(fakes, regressor, center, raw_span=1.0):
    return float(np.mean(np.abs(regressor.predict(fakes) - center)) * raw_span)


def label_score(generator, regressor, centers, n_fake_per_center=200, seed=0, raw_span=1.0):
    """Mean absolute error between the regressor's reading of fakes and the center, in raw units."""
    centers = np.asarray(centers, dtype=np.float64).reshape(-1)
    fakes = generate_per_center(generator, centers, n_fake_per_center, seed)
    return np.array([label_score_of(f, regressor, c, raw_span) for f, c in zip(fakes, centers)])


def diversity_of(fakes):
    if len(fakes) < 2:
        raise ValueError("diversity needs at least 2 samples")
    return float(np.mean(pdist(np.atleast_2d(fakes))))


def diversity(generator, centers, n_fake_per_center=200, seed=0):
    """Mean pairwise Euclidean distance among the fakes at each center."""
    centers = np.asarray(centers, dtype=np.float64).reshape(-1)
    fakes = generate_per_center(generator, centers, n_fake_per_center, seed)
    return np.array([diversity_of(f) for f in fakes])


# ---------------------------------------------------------------------- report


@dataclass
class EvalReport:
    centers: np.ndarray  # normalized
    fd: np.ndarray
    label_score: np.ndarray  # raw units
    diversity: np.ndarray
    n_real_window: np.ndarray
    raw_min: float = 0.0
    raw_max: float = 1.0
    meta: dict = field(default_factory=dict)
    skipped: list = field(default_factory=list)

    @property
    def mean_fd(self):
        return float(np.nanmean(self.fd)) if np.isfinite(self.fd).any() else float("nan")

    @property
    def mean_label_score(self):
        return float(np.mean(self.label_score))

    @property
    def mean_diversity(self):
        return float(np.mean(self.diversity))

    def aggregates(self):
        return {
            "mean_fd": self.mean_fd,
            "mean_label_score": self.mean_label_score,
            "mean_diversity": self.mean_diversity,
            "n_centers": int(self.centers.size),
            "n_skipped": len(self.skipped),
        }

    def raw_centers(self):
        return self.centers * (self.raw_max - self.raw_min) + self.raw_min

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(REPORT_COLUMNS)
            for c, f, ls, dv, nr in zip(self.raw_centers(), self.fd, self.label_score, self.diversity, self.n_real_window):
                w.writerow([repr(float(c)), repr(float(f)), repr(float(ls)), repr(float(dv)), int(nr)])


def read_report(path):
    """Load a report CSV into a dict of column arrays."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {c: np.array([float(r[c]) for r in rows]) for c in REPORT_COLUMNS}


def evaluate(
    generator,
    data: ToyDataset,
    regressor,
    centers=None,
    n_fake_per_center=200,
    window_radius=None,
    seed=0,
    meta=None,
) -> EvalReport:
    """All three metrics from one shared set of fakes per center."""
    centers = default_centers() if centers is None else np.asarray(centers, dtype=np.float64)
    radius = 2.0 / centers.size if window_radius is None else window_radius
    span = data.raw_max - data.raw_min
    fakes = generate_per_center(generator, centers, n_fake_per_center, seed)

    def one(i):
        c = centers[i]
        try:
            fd, nr = fd_at_center(fakes[i], data, c, radius)
            sparse = False
        except WindowTooSparse as exc:
            fd, nr, sparse = np.nan, exc.n_real, True
        return fd, nr, sparse, label_score_of(fakes[i], regressor, c, span), diversity_of(fakes[i])

    rows = _map(one, range(centers.size))
    fd, nr, sparse, ls, dv = (np.array(col) for col in zip(*rows))
    info = {"n_fake_per_center": n_fake_per_center, "window_radius": radius, "seed": seed}
    info.update(meta or {})
    return EvalReport(
        centers=centers,
        fd=fd.astype(np.float64),
        label_score=ls.astype(np.float64),
        diversity=dv.astype(np.float64),
        n_real_window=nr.astype(np.int64),
        raw_min=data.raw_min,
        raw_max=data.raw_max,
        meta=info,
        skipped=[float(c) for c, s in zip(centers, sparse) if s],
    )


# ---------------------------------------------------------------------- density ratios


@dataclass(frozen=True)
class GaussianSpec:
    mean: tuple
    cov: tuple

    def logpdf(self, x):
        return multivariate_normal(np.asarray(self.mean), np.asarray(self.cov)).logpdf(np.atleast_2d(x))

    def sample(self, n, rng):
        return rng.multivariate_normal(np.asarray(self.mean), np.asarray(self.cov), size=n)


def true_ratio(p_r: GaussianSpec, p_g: GaussianSpec, x):
    return np.exp(p_r.logpdf(x) - p_g.logpdf(x))


def dre_diagnostic(predict, p_r: GaussianSpec, p_g: GaussianSpec, n_test=1000, rng=None, factors=(1.5, 2.0)):
    """Share of test points (drawn from ``p_g``) whose estimated ratio is within a factor of the truth."""
    rng = rng if rng is not None else np.random.default_rng(0)
    x = p_g.sample(n_test, rng)
    est = np.asarray(predict(x), dtype=np.float64).reshape(-1)
    truth = true_ratio(p_r, p_g, x)
    q = est / truth
    return {f"coverage@{f:g}": float(np.mean((q <= f) & (q >= 1.0 / f))) for f in factors}
