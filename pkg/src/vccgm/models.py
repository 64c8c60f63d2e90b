"""MLP generator, multi-task discriminator, EMA shadow and label regressor.

The discriminator trunk sees ``x`` only.  The label enters through the
projection term of the adversarial score and as extra input features of the
density-ratio head, so the regression head cannot read the answer off its
input.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from . import tensor_nn as tn
from .errors import InvalidSpec, ShapeError
from .tensor_nn import Tensor

LABEL_FEATURES = 3


def label_features(y):
    """``[y, sin 2 pi y, cos 2 pi y]`` for an array of normalized labels."""
    y = np.asarray(y, dtype=np.float64).reshape(-1, 1)
    a = 2.0 * np.pi * y
    return np.hstack([y, np.sin(a), np.cos(a)])


class ParamStore(dict):
    """Named parameter tensors."""

    def clone(self):
        return ParamStore({k: tn.param(v.data, name=k) for k, v in self.items()})

    def arrays(self, prefix=""):
        return {prefix + k: v.data for k, v in self.items()}

    def tensors(self):
        return list(self.values())

    def load_arrays(self, arrays, prefix=""):
        for k, v in self.items():
            arr = np.asarray(arrays[prefix + k], dtype=np.float64)
            if arr.shape != v.data.shape:
                raise ShapeError(f"{prefix + k}: shape {arr.shape} != {v.data.shape}")
            v.data = arr.copy()

    @classmethod
    def from_arrays(cls, arrays, prefix=""):
        return cls({k[len(prefix):]: tn.param(v, name=k[len(prefix):]) for k, v in arrays.items() if k.startswith(prefix)})

    def checksum(self):
        import hashlib

        h = hashlib.sha256()
        for k in sorted(self):
            h.update(k.encode())
            h.update(np.ascontiguousarray(self[k].data).tobytes())
        return h.hexdigest()


def _dense_init(store, name, fan_in, fan_out, rng, bias=True):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    store[name + ".w"] = tn.param(rng.uniform(-bound, bound, size=(fan_in, fan_out)), name=name + ".w")
    if bias:
        store[name + ".b"] = tn.param(np.zeros((1, fan_out)), name=name + ".b")


def _dense(params, name, x):
    out = tn.matmul(x, params[name + ".w"])
    b = params.get(name + ".b")
    return out if b is None else tn.add(out, b)


def _n_layers(params, prefix):
    n = 0
    while f"{prefix}{n}.w" in params:
        n += 1
    return n


# ---------------------------------------------------------------------- generator


@dataclass
class GeneratorConfig:
    noise_dim: int = 8
    embed_dim: int = 16
    hidden: tuple = (64, 64)
    out_dim: int = 2


def init_generator(cfg: GeneratorConfig, rng) -> ParamStore:
    p = ParamStore()
    _dense_init(p, "g.embed", LABEL_FEATURES, cfg.embed_dim, rng)
    width = cfg.noise_dim + cfg.embed_dim
    for i, h in enumerate(cfg.hidden):
        _dense_init(p, f"g.l{i}", width, h, rng)
        width = h
    _dense_init(p, "g.out", width, cfg.out_dim, rng)
    return p


def generator_forward(params, z, y):
    """``G(z, y)``: label embedding concatenated with the noise at the input."""
    z = tn.const(z)
    feats = Tensor(label_features(y))
    if feats.shape[0] != z.shape[0]:
        raise ShapeError(f"{z.shape[0]} noise rows but {feats.shape[0]} labels")
    h = tn.concat([z, _dense(params, "g.embed", feats)], axis=1)
    for i in range(_n_layers(params, "g.l")):
        h = tn.relu(_dense(params, f"g.l{i}", h))
    return _dense(params, "g.out", h)


class Generator:
    def __init__(self, params: ParamStore, noise_dim: int):
        self.params = params
        self.noise_dim = noise_dim

    def __call__(self, z, y):
        return generator_forward(self.params, z, y)

    def sample(self, y, rng):
        """Draw one ``x`` per normalized label in ``y`` (no tape)."""
        y = np.asarray(y, dtype=np.float64).reshape(-1)
        z = rng.standard_normal((y.size, self.noise_dim))
        return generator_forward(self.params, z, y).data


# ---------------------------------------------------------------------- discriminator


@dataclass
class DiscriminatorConfig:
    in_dim: int = 2
    trunk: tuple = (64, 64)
    reg_hidden: int = 64
    dre_hidden: tuple = (64, 64)


@dataclass
class DiscOutput:
    h: Tensor
    adv: Tensor  # (n, 1)
    y_hat: Tensor  # (n, 1)
    dre: Tensor  # (n, 1), > 0


def init_discriminator(cfg: DiscriminatorConfig, rng) -> ParamStore:
    p = ParamStore()
    width = cfg.in_dim
    for i, h in enumerate(cfg.trunk):
        _dense_init(p, f"d.trunk{i}", width, h, rng)
        width = h
    feat = width
    _dense_init(p, "d.adv", feat, 1, rng)
    _dense_init(p, "d.proj", LABEL_FEATURES, feat, rng, bias=False)
    _dense_init(p, "d.reg0", feat, cfg.reg_hidden, rng)
    _dense_init(p, "d.reg1", cfg.reg_hidden, 1, rng)
    width = feat + LABEL_FEATURES
    for i, h in enumerate(cfg.dre_hidden):
        _dense_init(p, f"d.dre{i}", width, h, rng)
        width = h
    _dense_init(p, f"d.dre{len(cfg.dre_hidden)}", width, 1, rng)
    return p


def disc_trunk(params, x):
    h = tn.const(x)
    for i in range(_n_layers(params, "d.trunk")):
        h = tn.leaky_relu(_dense(params, f"d.trunk{i}", h), 0.2)
    return h


def disc_forward(params, x, y) -> DiscOutput:
    """Adversarial score with label projection, label estimate and density ratio."""
    h = disc_trunk(params, x)
    feats = Tensor(label_features(y))
    if feats.shape[0] != h.shape[0]:
        raise ShapeError(f"{h.shape[0]} samples but {feats.shape[0]} labels")
    emb = tn.matmul(feats, params["d.proj.w"])
    adv = tn.add(_dense(params, "d.adv", h), tn.sum_(tn.mul(h, emb), axis=1))
    y_hat = _dense(params, "d.reg1", tn.relu(_dense(params, "d.reg0", h)))
    r = tn.concat([h, feats], axis=1)
    n_dre = _n_layers(params, "d.dre")
    for i in range(n_dre - 1):
        r = tn.relu(_dense(params, f"d.dre{i}", r))
    dre = tn.softplus(_dense(params, f"d.dre{n_dre - 1}", r))
    return DiscOutput(h=h, adv=adv, y_hat=y_hat, dre=dre)


def clip_spectral(params, state, prefix="d.", max_sigma=1.0):
    """One power-iteration step per weight matrix; rescale when sigma > max_sigma.

    ``state`` holds the persistent left singular vector estimates.
    """
    for k, t in params.items():
        if not (k.startswith(prefix) and k.endswith(".w")):
            continue
        w = t.data
        u = state.get(k)
        if u is None:
            u = np.ones(w.shape[0]) / np.sqrt(w.shape[0])
        v = w.T @ u
        v /= np.linalg.norm(v) + 1e-12
        u = w @ v
        sigma = np.linalg.norm(u)
        state[k] = u / (sigma + 1e-12)
        if sigma > max_sigma:
            t.data = w * (max_sigma / sigma)
    return state


# ---------------------------------------------------------------------- EMA


@dataclass
class EmaState:
    shadow: ParamStore
    decay: float = 0.999


def ema_init(live: ParamStore, decay=0.999) -> EmaState:
    if not 0.0 <= decay <= 1.0:
        raise ValueError("EMA decay must lie in [0, 1]")
    return EmaState(live.clone(), decay)


def ema_update(ema: EmaState, live: ParamStore) -> EmaState:
    """``shadow <- decay * shadow + (1 - decay) * live`` elementwise, in place."""
    b = ema.decay
    for k, s in ema.shadow.items():
        lv = live[k].data
        if lv.shape != s.data.shape:
            raise ShapeError(f"EMA shape mismatch for {k}: {s.data.shape} vs {lv.shape}")
        s.data = b * s.data + (1.0 - b) * lv
    return ema


# ---------------------------------------------------------------------- regressor


@dataclass
class Regressor:
    params: ParamStore
    x_mean: np.ndarray
    x_std: np.ndarray
    val_mae: float = float("nan")
    steps: int = 0
    warning: str | None = None

    def predict(self, x):
        h = Tensor((np.atleast_2d(x) - self.x_mean) / self.x_std)
        for i in range(_n_layers(self.params, "r.l")):
            h = tn.relu(_dense(self.params, f"r.l{i}", h))
        return _dense(self.params, "r.out", h).data.reshape(-1)

    def _forward(self, x):
        h = Tensor((x - self.x_mean) / self.x_std)
        for i in range(_n_layers(self.params, "r.l")):
            h = tn.relu(_dense(self.params, f"r.l{i}", h))
        return _dense(self.params, "r.out", h)


def train_surrogate_regressor(
    x,
    y,
    hidden=(64, 64),
    max_steps=4000,
    batch_size=128,
    lr=2e-3,
    target_mae=0.02,
    val_fraction=0.1,
    check_every=100,
    seed=0,
) -> Regressor:
    """MSE-trained MLP ``x -> y`` stopping once validation MAE drops below ``target_mae``.

    Missing the target within ``max_steps`` is not an error; the returned
    regressor carries a warning string instead.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.shape[0] == 0:
        raise InvalidSpec("cannot train a regressor on an empty dataset")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(x.shape[0])
    n_val = max(1, int(round(val_fraction * x.shape[0]))) if x.shape[0] > 1 else 0
    val, tr = perm[:n_val], perm[n_val:]
    x_mean = x[tr].mean(axis=0, keepdims=True)
    x_std = x[tr].std(axis=0, keepdims=True)
    x_std[x_std < 1e-12] = 1.0

    p = ParamStore()
    width = x.shape[1]
    for i, h in enumerate(hidden):
        _dense_init(p, f"r.l{i}", width, h, rng)
        width = h
    _dense_init(p, "r.out", width, 1, rng)
    # start from the constant mean predictor
    p["r.out.w"].data[:] = 0.0
    p["r.out.b"].data[:] = y[tr].mean()
    reg = Regressor(p, x_mean, x_std)
    opt = tn.Adam(p.tensors(), lr=lr, betas=(0.9, 0.999))
    xv, yv = (x[val], y[val]) if n_val else (x[tr], y[tr])

    step = 0
    val_mae = float(np.mean(np.abs(reg.predict(xv) - yv)))
    while step < max_steps and val_mae >= target_mae:
        bi = rng.choice(tr, size=min(batch_size, tr.size), replace=False)
        with tn.Tape() as tape:
            pred = reg._forward(x[bi])
            loss = tn.mean(tn.square(tn.sub(pred, Tensor(y[bi].reshape(-1, 1)))))
        opt.step(tape.gradient(loss, p.tensors()))
        step += 1
        if step % check_every == 0:
            val_mae = float(np.mean(np.abs(reg.predict(xv) - yv)))
    reg.val_mae = val_mae
    reg.steps = step
    if val_mae >= target_mae:
        reg.warning = f"regressor validation MAE {val_mae:.4g} above target {target_mae} after {step} steps"
        warnings.warn(reg.warning, RuntimeWarning, stacklevel=2)
    return reg


# ---------------------------------------------------------------------- checkpoints

CKPT_MAGIC = b"VCGMCKPT"
CKPT_VERSION = 1


def save_checkpoint(path, arrays: dict, meta: dict | None = None):
    """Write named float64 arrays plus a JSON metadata block, atomically."""
    meta_b = json.dumps(meta or {}, sort_keys=True).encode()
    parts = [CKPT_MAGIC, struct.pack("<II", CKPT_VERSION, len(meta_b)), meta_b, struct.pack("<I", len(arrays))]
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name], dtype="<f8")
        nb = name.encode()
        parts.append(struct.pack("<HB", len(nb), arr.ndim))
        parts.append(nb)
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(arr.tobytes())
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".ckpt-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(b"".join(parts))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path):
    """Return ``(arrays, meta)``."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:8] != CKPT_MAGIC:
        raise InvalidSpec(f"{path} is not a checkpoint file")
    version, mlen = struct.unpack_from("<II", buf, 8)
    if version != CKPT_VERSION:
        raise InvalidSpec(f"unsupported checkpoint version {version}")
    off = 16
    meta = json.loads(buf[off : off + mlen].decode())
    off += mlen
    (n,) = struct.unpack_from("<I", buf, off)
    off += 4
    arrays = {}
    for _ in range(n):
        nlen, ndim = struct.unpack_from("<HB", buf, off)
        off += 3
        name = buf[off : off + nlen].decode()
        off += nlen
        shape = struct.unpack_from(f"<{ndim}Q", buf, off)
        off += 8 * ndim
        size = int(np.prod(shape)) if ndim else 1
        arrays[name] = np.frombuffer(buf, dtype="<f8", count=size, offset=off).reshape(shape).astype(np.float64)
        off += 8 * size
    return arrays, meta


def generator_from_checkpoint(path, which="ema") -> tuple[Generator, dict]:
    """Rebuild a generator (``ema`` shadow or ``live`` weights) from a checkpoint."""
    arrays, meta = load_checkpoint(path)
    prefix = {"ema": "ema/", "live": "G/"}[which]
    params = ParamStore.from_arrays(arrays, prefix)
    if not params:
        raise InvalidSpec(f"checkpoint {path} holds no {which} generator")
    return Generator(params, int(meta["generator"]["noise_dim"])), meta


def config_dict(cfg):
    d = asdict(cfg)
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}
