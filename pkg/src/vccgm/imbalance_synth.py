"""Imbalanced label-count profiles and toy conditional-Gaussian datasets.

Count profiles follow the exponential-decay recipe: every distinct label at
distance ``d`` (raw label units) from a mode gets a mean count
``max(1, int(peak * exp(-decay * d)))``, perturbed by one Gaussian draw per
label, truncated to an int and clamped to ``[0, peak]``.  Modes keep
``peak`` samples exactly.  Labels that end up with zero samples disappear
from the subsampled dataset.
"""

from __future__ import annotations

import csv
import io
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyDataset, InsufficientSamples, InvalidMode, InvalidSpec
from .label_index import LabelIndex, build_index

PATTERN_MODES = {"unimodal": 1, "bimodal": 2, "trimodal": 3}
# default mode positions as fractions of the label range
DEFAULT_MODE_FRACTIONS = {
    "unimodal": (0.5,),
    "bimodal": (0.25, 0.75),
    "trimodal": (0.2, 0.5, 0.8),
}


# ---------------------------------------------------------------------- families


@dataclass(frozen=True)
class RingFamily:
    """x | y ~ N((cos 2 pi s y, sin 2 pi s y), (a + b y)^2 I) with s = ``span``."""

    span: float = 1.0
    base_std: float = 0.05
    std_slope: float = 0.05
    name: str = field(default="ring", init=False)
    dim: int = field(default=2, init=False)

    def mean(self, y):
        a = 2.0 * np.pi * self.span * np.asarray(y, dtype=np.float64).reshape(-1)
        return np.stack([np.cos(a), np.sin(a)], axis=1)

    def std(self, y):
        return self.base_std + self.std_slope * np.asarray(y, dtype=np.float64).reshape(-1)


@dataclass(frozen=True)
class LineFamily:
    """1-d: x | y ~ N(scale * y, (a + b y)^2)."""

    scale: float = 1.0
    base_std: float = 0.05
    std_slope: float = 0.05
    name: str = field(default="line", init=False)
    dim: int = field(default=1, init=False)

    def mean(self, y):
        return self.scale * np.asarray(y, dtype=np.float64).reshape(-1, 1)

    def std(self, y):
        return self.base_std + self.std_slope * np.asarray(y, dtype=np.float64).reshape(-1)


@dataclass(frozen=True)
class HelixFamily:
    """3-d: a ring whose third coordinate rises linearly with y."""

    span: float = 1.0
    rise: float = 1.0
    base_std: float = 0.05
    std_slope: float = 0.05
    name: str = field(default="helix", init=False)
    dim: int = field(default=3, init=False)

    def mean(self, y):
        y = np.asarray(y, dtype=np.float64).reshape(-1)
        a = 2.0 * np.pi * self.span * y
        return np.stack([np.cos(a), np.sin(a), self.rise * y], axis=1)

    def std(self, y):
        return self.base_std + self.std_slope * np.asarray(y, dtype=np.float64).reshape(-1)


FAMILIES = {"ring": RingFamily, "line": LineFamily, "helix": HelixFamily}


def family_to_dict(family):
    params = {k: v for k, v in family.__dict__.items() if k not in ("name", "dim")}
    return {"name": family.name, **params}


def family_from_dict(spec):
    if spec is None:
        return None
    spec = dict(spec)
    name = spec.pop("name", "ring")
    if name not in FAMILIES:
        raise InvalidSpec(f"unknown family {name!r}")
    return FAMILIES[name](**spec)


def family_cov(family, y):
    """Per-label covariance matrices, shape ``(n, d, d)``."""
    s = family.std(y)
    return (s**2)[:, None, None] * np.eye(family.dim)[None]


def family_sample(family, y, rng):
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    s = family.std(y)
    if np.any(~(s > 0)):
        raise InvalidSpec("family covariance is not positive definite at some label")
    return family.mean(y) + s[:, None] * rng.standard_normal((y.size, family.dim))


def family_logpdf(family, x, y):
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.broadcast_to(np.asarray(y, dtype=np.float64).reshape(-1), (x.shape[0],))
    s = family.std(y)
    r2 = ((x - family.mean(y)) ** 2).sum(axis=1)
    d = family.dim
    return -0.5 * r2 / s**2 - d * np.log(s) - 0.5 * d * np.log(2 * np.pi)


# ---------------------------------------------------------------------- datasets


@dataclass(frozen=True, eq=False)
class ToyDataset:
    x: np.ndarray  # (n, d)
    y_raw: np.ndarray  # (n,)
    raw_min: float
    raw_max: float
    family: object = None

    @property
    def n(self):
        return len(self.y_raw)

    @property
    def d(self):
        return self.x.shape[1]

    @property
    def y(self):
        """Normalized labels."""
        return (self.y_raw - self.raw_min) / (self.raw_max - self.raw_min)

    def index(self) -> LabelIndex:
        return build_index(self.y_raw, self.raw_min, self.raw_max)

    def distinct_raw(self):
        return np.unique(self.y_raw)


def label_grid(n_labels, raw_range=(0.0, 1.0), interior=False):
    """Uniform raw label grid; ``interior`` excludes the range endpoints."""
    lo, hi = raw_range
    if interior:
        return lo + (hi - lo) * np.arange(1, n_labels + 1) / (n_labels + 1)
    return np.linspace(lo, hi, n_labels)


def make_toy_dataset(n_labels, per_label, family=None, rng_seed=0, raw_range=(0.0, 1.0), interior=False):
    """Balanced dataset with ``per_label`` draws of ``x | y`` at each grid label."""
    if n_labels < 2:
        raise InvalidSpec("n_labels must be >= 2")
    if per_label < 1:
        raise InvalidSpec("per_label must be >= 1")
    family = family or RingFamily()
    lo, hi = raw_range
    raw = np.repeat(label_grid(n_labels, raw_range, interior), per_label)
    y = (raw - lo) / (hi - lo)
    rng = np.random.default_rng(rng_seed)
    x = family_sample(family, y, rng)
    return ToyDataset(x=x, y_raw=raw, raw_min=float(lo), raw_max=float(hi), family=family)


# ---------------------------------------------------------------------- counts


@dataclass(frozen=True)
class ImbalanceSpec:
    modes: tuple  # raw label positions
    decay_rate: float = 0.1
    peak_count: int = 49
    noise_std: float = 5.0
    pattern: str = "unimodal"
    combine: str = "max"

    def __post_init__(self):
        if self.pattern not in PATTERN_MODES:
            raise InvalidSpec(f"unknown pattern {self.pattern!r}")
        if len(self.modes) != PATTERN_MODES[self.pattern]:
            raise InvalidSpec(f"{self.pattern} needs {PATTERN_MODES[self.pattern]} modes, got {len(self.modes)}")
        if self.peak_count < 1:
            raise InvalidSpec("peak_count must be >= 1")
        if not self.decay_rate > 0:
            raise InvalidSpec("decay_rate must be > 0")
        if self.combine not in ("max", "sum"):
            raise InvalidSpec("combine must be 'max' or 'sum'")


def default_modes(distinct_labels, pattern):
    labels = np.sort(np.asarray(distinct_labels, dtype=np.float64))
    lo, hi = labels[0], labels[-1]
    picks = []
    for frac in DEFAULT_MODE_FRACTIONS[pattern]:
        target = lo + frac * (hi - lo)
        picks.append(float(labels[np.argmin(np.abs(labels - target))]))
    return tuple(picks)


def _mode_positions(labels, modes):
    pos = []
    for m in modes:
        hit = np.flatnonzero(np.isclose(labels, m, rtol=0.0, atol=1e-9))
        if hit.size == 0:
            raise InvalidMode(f"mode {m} is not one of the distinct labels")
        pos.append(int(hit[0]))
    return pos


def mean_counts(distinct_labels, modes, spec: ImbalanceSpec):
    """Noise-free count profile for the given modes."""
    labels = np.asarray(distinct_labels, dtype=np.float64)
    pos = _mode_positions(labels, modes)
    dist = np.abs(labels[None, :] - np.asarray(modes, dtype=np.float64)[:, None])
    kernels = spec.peak_count * np.exp(-spec.decay_rate * dist)
    if spec.combine == "max":
        mean = np.maximum(1, np.trunc(kernels).max(axis=0))
    else:
        mean = np.maximum(1, np.minimum(spec.peak_count, np.trunc(kernels.sum(axis=0))))
    mean = mean.astype(np.int64)
    mean[pos] = spec.peak_count
    return mean


def _noisy(mean, pos, spec, rng_seed):
    rng = np.random.default_rng(rng_seed)
    noise = rng.normal(0.0, spec.noise_std, size=mean.shape) if spec.noise_std > 0 else np.zeros(mean.shape)
    counts = np.clip(np.trunc(mean + noise), 0, spec.peak_count).astype(np.int64)
    counts[pos] = spec.peak_count
    return counts


def unimodal_counts(distinct_labels, mode, spec: ImbalanceSpec, rng_seed=0):
    labels = np.asarray(distinct_labels, dtype=np.float64)
    mean = mean_counts(labels, (mode,), spec)
    return _noisy(mean, _mode_positions(labels, (mode,)), spec, rng_seed)


def multimodal_counts(distinct_labels, modes, spec: ImbalanceSpec, rng_seed=0):
    modes = tuple(float(m) for m in modes)
    if not 2 <= len(modes) <= 3:
        raise InvalidMode("multimodal profiles need 2 or 3 modes")
    if len(set(modes)) != len(modes):
        raise InvalidMode("modes must be pairwise distinct")
    labels = np.asarray(distinct_labels, dtype=np.float64)
    mean = mean_counts(labels, modes, spec)
    return _noisy(mean, _mode_positions(labels, modes), spec, rng_seed)


def pattern_counts(distinct_labels, spec: ImbalanceSpec, rng_seed=0):
    if len(spec.modes) == 1:
        return unimodal_counts(distinct_labels, spec.modes[0], spec, rng_seed)
    return multimodal_counts(distinct_labels, spec.modes, spec, rng_seed)


def subsample(full: ToyDataset, counts, rng_seed=0) -> ToyDataset:
    """Keep ``counts[i]`` random samples of the i-th distinct raw label."""
    labels = full.distinct_raw()
    counts = np.asarray(counts, dtype=np.int64)
    if counts.shape != labels.shape:
        raise InvalidSpec(f"need one count per distinct label ({labels.size}), got {counts.size}")
    rng = np.random.default_rng(rng_seed)
    keep = []
    for lab, c in zip(labels, counts):
        avail = np.flatnonzero(full.y_raw == lab)
        if c > avail.size:
            raise InsufficientSamples(f"label {lab}: {c} requested, {avail.size} available")
        if c > 0:
            keep.append(np.sort(rng.choice(avail, size=int(c), replace=False)))
    if not keep:
        raise EmptyDataset("all counts are zero")
    idx = np.concatenate(keep)
    return ToyDataset(full.x[idx], full.y_raw[idx], full.raw_min, full.raw_max, full.family)


def make_imbalanced(full: ToyDataset, spec: ImbalanceSpec, rng_seed=0):
    """Count profile plus subsample in one call; returns ``(dataset, counts)``."""
    counts = pattern_counts(full.distinct_raw(), spec, rng_seed)
    return subsample(full, counts, rng_seed + 1), counts


# ---------------------------------------------------------------------- file formats

MAGIC = b"VCGMDATA"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sIIQddI")


def dataset_to_bytes(ds: ToyDataset) -> bytes:
    fam = json.dumps(family_to_dict(ds.family) if ds.family else None, sort_keys=True).encode()
    head = _HEADER.pack(MAGIC, FORMAT_VERSION, ds.d, ds.n, ds.raw_min, ds.raw_max, len(fam))
    rec = np.empty((ds.n, ds.d + 1), dtype="<f8")
    rec[:, 0] = ds.y_raw
    rec[:, 1:] = ds.x
    return head + fam + rec.tobytes()


def dataset_from_bytes(buf: bytes) -> ToyDataset:
    if len(buf) < _HEADER.size:
        raise InvalidSpec("truncated dataset header")
    magic, version, d, n, lo, hi, flen = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise InvalidSpec("not a dataset file (bad magic)")
    if version != FORMAT_VERSION:
        raise InvalidSpec(f"unsupported dataset format version {version}")
    off = _HEADER.size
    fam = family_from_dict(json.loads(buf[off : off + flen].decode()))
    off += flen
    expected = n * (d + 1) * 8
    if len(buf) - off != expected:
        raise InvalidSpec(f"dataset payload has {len(buf) - off} bytes, expected {expected}")
    rec = np.frombuffer(buf, dtype="<f8", offset=off).reshape(n, d + 1).astype(np.float64)
    return ToyDataset(rec[:, 1:].copy(), rec[:, 0].copy(), lo, hi, fam)


def write_dataset(path, ds: ToyDataset):
    with open(path, "wb") as fh:
        fh.write(dataset_to_bytes(ds))


def read_dataset(path) -> ToyDataset:
    """Read the binary format, or CSV when the file name ends in ``.csv``."""
    if str(path).endswith(".csv"):
        return read_csv(path)
    with open(path, "rb") as fh:
        return dataset_from_bytes(fh.read())


def write_csv(path, ds: ToyDataset):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label"] + [f"x{i}" for i in range(ds.d)])
        for y, row in zip(ds.y_raw, ds.x):
            w.writerow([repr(float(y))] + [repr(float(v)) for v in row])


def read_csv(path, raw_min=None, raw_max=None) -> ToyDataset:
    """CSV with header ``label,<feature columns...>``; the raw range defaults to the data span."""
    with open(path, newline="") as fh:
        text = fh.read()
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0][0] != "label":
        raise InvalidSpec("CSV must start with a 'label' column header")
    body = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=np.float64)
    if body.size == 0:
        raise EmptyDataset(f"{path} has no records")
    y = body[:, 0]
    lo = float(y.min()) if raw_min is None else float(raw_min)
    hi = float(y.max()) if raw_max is None else float(raw_max)
    return ToyDataset(body[:, 1:].copy(), y.copy(), lo, hi, None)


def write_histogram(path, ds: ToyDataset):
    labels, counts = np.unique(ds.y_raw, return_counts=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", "count"])
        for lab, c in zip(labels, counts):
            w.writerow([repr(float(lab)), int(c)])
