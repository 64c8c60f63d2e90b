"""Vicinal adversarial training loop with adaptive vicinities and auxiliary heads.

One training step is ``num_d_steps`` discriminator updates followed by one
generator update and one EMA update.  Each update draws a fresh batch of
target labels: training labels (uniform over samples) plus Gaussian noise,
clamped into [0, 1].
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import losses
from . import tensor_nn as tn
from .errors import ConfigError, EmptyVicinity
from .imbalance_synth import ToyDataset
from .label_index import LabelIndex, nav_heuristic, rule_of_thumb
from .losses import LossWeights
from .models import (
    DiscriminatorConfig,
    Generator,
    GeneratorConfig,
    disc_forward,
    clip_spectral,
    config_dict,
    ema_init,
    ema_update,
    generator_forward,
    init_discriminator,
    init_generator,
    save_checkpoint,
    train_surrogate_regressor,
)
from .vicinity import DEFAULT_THRESHOLD, build_adaptive_batch, decay_rate, label_weight_matrix

VICINITY_MODES = ("hard", "soft", "soft_av", "hybrid_av")
LOG_COLUMNS = ("step", "d_adv", "d_reg", "d_dre", "g_adv", "g_reg", "g_f", "gamma", "mean_kappa")
MAX_REDRAWS = 100


@dataclass
class TrainConfig:
    steps: int = 5000
    batch_size: int = 64
    learning_rate: float = 1e-3
    optimizer: str = "adam"  # or "sgd_momentum"
    momentum: float = 0.5
    adam_betas: tuple = (0.5, 0.999)
    num_d_steps: int = 2
    vicinity_mode: str = "hybrid_av"
    n_av: int | str | None = "heuristic"
    sigma: float | str = "rule_of_thumb"
    kappa_base: float | str = "rule_of_thumb"
    decay_exponent: int = 2
    weight_threshold: float = DEFAULT_THRESHOLD
    loss_form: str = "hinge"
    loss_weights: LossWeights = field(default_factory=LossWeights)
    fake_labels: str = "target"  # or "vicinity"
    fake_reg_target: str = "condition"  # or "surrogate"
    reals_per_target: int = 1
    ema_decay: float = 0.999
    ema_start: int = 1000
    spectral_clip: float | None = None
    noise_dim: int = 8
    embed_dim: int = 16
    g_hidden: tuple = (64, 64)
    d_trunk: tuple = (64, 64)
    reg_hidden: int = 64
    dre_hidden: tuple = (64, 64)
    seed: int = 0
    checkpoint_every: int = 1000

    def __post_init__(self):
        if isinstance(self.loss_weights, dict):
            self.loss_weights = LossWeights(**self.loss_weights)
        for name in ("adam_betas", "g_hidden", "d_trunk", "dre_hidden"):
            setattr(self, name, tuple(getattr(self, name)))
        self.validate()

    def validate(self):
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(isinstance(self.steps, int) and self.steps >= 1, "steps must be an integer >= 1")
        need(self.batch_size >= 1, "batch_size must be >= 1")
        need(self.num_d_steps >= 1, "num_d_steps must be >= 1")
        need(self.learning_rate > 0, "learning_rate must be positive")
        need(self.optimizer in ("adam", "sgd_momentum"), f"unknown optimizer {self.optimizer!r}")
        need(self.vicinity_mode in VICINITY_MODES, f"vicinity_mode must be one of {VICINITY_MODES}")
        if self.vicinity_mode.endswith("_av"):
            need(
                self.n_av == "heuristic" or (isinstance(self.n_av, int) and self.n_av >= 1),
                "adaptive vicinities need n_av >= 1 or 'heuristic'",
            )
        need(self.sigma == "rule_of_thumb" or float(self.sigma) >= 0, "sigma must be >= 0 or 'rule_of_thumb'")
        need(
            self.kappa_base == "rule_of_thumb" or float(self.kappa_base) > 0,
            "kappa_base must be > 0 or 'rule_of_thumb'",
        )
        need(self.decay_exponent in (1, 2), "decay_exponent must be 1 or 2")
        need(0 <= self.weight_threshold < 1, "weight_threshold must lie in [0, 1)")
        need(self.loss_form in ("hinge", "vanilla"), "loss_form must be hinge or vanilla")
        need(self.fake_labels in ("target", "vicinity"), "fake_labels must be target or vicinity")
        need(self.fake_reg_target in ("condition", "surrogate"), "fake_reg_target must be condition or surrogate")
        need(self.reals_per_target >= 1, "reals_per_target must be >= 1")
        need(0 <= self.ema_decay <= 1, "ema_decay must lie in [0, 1]")
        need(self.ema_start >= 0, "ema_start must be >= 0")
        need(self.checkpoint_every >= 0, "checkpoint_every must be >= 0")

    def to_dict(self):
        d = asdict(self)
        return json.loads(json.dumps(d))

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def replace(self, **changes):
        d = self.to_dict()
        lw = changes.pop("loss_weights", None)
        d.update(changes)
        if lw is not None:
            d["loss_weights"] = {**d["loss_weights"], **lw}
        return TrainConfig.from_dict(d)


def load_config(path) -> TrainConfig:
    try:
        with open(path) as fh:
            d = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return TrainConfig.from_dict(d)


def dump_config(cfg: TrainConfig, path):
    with open(path, "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------- ablations

_COMPONENTS = {
    "baseline": dict(lambda_reg_d=0.0, lambda_dre_d=0.0, lambda_reg_g=0.0, lambda_f_g=0.0),
    "av": dict(lambda_reg_d=0.0, lambda_dre_d=0.0, lambda_reg_g=0.0, lambda_f_g=0.0),
    "av_reg": dict(lambda_reg_d=1.0, lambda_dre_d=0.0, lambda_reg_g=1.0, lambda_f_g=0.0),
}


def expand_ablation(cfg: TrainConfig, preset: str):
    """Expand a base config into named variants.

    ``table3``: fixed soft vicinity without auxiliary terms, then the base
    adaptive mode alone, with the regression terms, and with regression plus
    density-ratio terms (the base config's own weights).
    ``grid``: {soft, soft_av, hybrid_av} x {auxiliary terms off, on}.
    """
    av_mode = cfg.vicinity_mode if cfg.vicinity_mode.endswith("_av") else "hybrid_av"
    full = asdict(cfg.loss_weights)
    if preset == "table3":
        return [
            ("baseline", cfg.replace(vicinity_mode="soft", loss_weights=_COMPONENTS["baseline"])),
            (av_mode, cfg.replace(vicinity_mode=av_mode, loss_weights=_COMPONENTS["av"])),
            (f"{av_mode}_reg", cfg.replace(vicinity_mode=av_mode, loss_weights=_COMPONENTS["av_reg"])),
            (f"{av_mode}_reg_dre", cfg.replace(vicinity_mode=av_mode, loss_weights=full)),
        ]
    if preset == "grid":
        out = []
        for mode in ("soft", "soft_av", "hybrid_av"):
            out.append((f"{mode}_plain", cfg.replace(vicinity_mode=mode, loss_weights=_COMPONENTS["baseline"])))
            out.append((f"{mode}_aux", cfg.replace(vicinity_mode=mode, loss_weights=full)))
        return out
    raise ConfigError(f"unknown ablation preset {preset!r}")


# ---------------------------------------------------------------------- targets


def sample_targets(index: LabelIndex, batch_size, sigma, rng):
    """Training labels drawn uniformly over samples, plus N(0, sigma^2), clamped to [0, 1]."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    j = np.searchsorted(index.prefix_counts, rng.integers(index.total, size=batch_size), side="right")
    y = index.distinct_labels[j]
    if sigma > 0:
        y = y + sigma * rng.standard_normal(batch_size)
    return np.clip(y, 0.0, 1.0)


@dataclass
class Vicinities:
    kappa: np.ndarray
    nu: np.ndarray
    weights: np.ndarray  # (B, M) unnormalized per-sample weight at each distinct label
    redraws: int = 0


def resolve_globals(cfg: TrainConfig, index: LabelIndex):
    """Concrete ``(sigma, kappa_base, n_av)`` for a config on a training index."""
    rot = rule_of_thumb(index)
    sigma = rot.sigma if cfg.sigma == "rule_of_thumb" else float(cfg.sigma)
    kappa = rot.kappa_base if cfg.kappa_base == "rule_of_thumb" else float(cfg.kappa_base)
    n_av = None
    if cfg.vicinity_mode.endswith("_av"):
        n_av = nav_heuristic(index)[1] if cfg.n_av == "heuristic" else int(cfg.n_av)
        n_av = min(n_av, index.total)
    return sigma, kappa, n_av


def _vicinity_rows(index, targets, cfg, kappa_base, n_av):
    mode = cfg.vicinity_mode
    b = targets.size
    if mode in ("hard", "soft"):
        kappa = np.full(b, kappa_base)
        nu = decay_rate(kappa, cfg.decay_exponent)
    else:
        av = build_adaptive_batch(index, targets, n_av, cfg.decay_exponent)
        kappa, nu = av["kappa"], av["nu"]
    wmode = {"hard": "hard", "soft": "soft", "soft_av": "soft", "hybrid_av": "hybrid"}[mode]
    w = label_weight_matrix(index, targets, wmode, kappa, nu, cfg.weight_threshold, raise_empty=False)
    return kappa, nu, w


def build_vicinities(index, targets, cfg, kappa_base, n_av, sigma, rng) -> tuple[np.ndarray, Vicinities]:
    """Vicinity radius, decay and label weights for each target.

    Targets whose vicinity holds no training sample get their label noise
    redrawn (at most ``MAX_REDRAWS`` times) before :class:`EmptyVicinity` is
    raised.
    """
    targets = np.array(targets, dtype=np.float64)
    kappa, nu, w = _vicinity_rows(index, targets, cfg, kappa_base, n_av)
    redraws = 0
    empty = np.flatnonzero(w @ index.counts <= 0)
    while empty.size:
        if redraws >= MAX_REDRAWS:
            raise EmptyVicinity(float(targets[empty[0]]))
        targets[empty] = sample_targets(index, empty.size, sigma, rng)
        k2, n2, w2 = _vicinity_rows(index, targets[empty], cfg, kappa_base, n_av)
        kappa[empty], nu[empty], w[empty] = k2, n2, w2
        redraws += 1
        empty = np.flatnonzero(w @ index.counts <= 0)
    return targets, Vicinities(kappa, nu, w, redraws)


def exact_vicinities(index, targets, cfg, kappa_base, n_av):
    """Vicinities without noise redraws; empty rows raise :class:`EmptyVicinity`."""
    targets = np.asarray(targets, dtype=np.float64).reshape(-1)
    kappa, nu, w = _vicinity_rows(index, targets, cfg, kappa_base, n_av)
    empty = np.flatnonzero(w @ index.counts <= 0)
    if empty.size:
        raise EmptyVicinity(float(targets[empty[0]]))
    return Vicinities(kappa, nu, w)


def _draw_labels(weights, counts, k, rng):
    """Draw ``k`` distinct-label positions per row with probability ``w * count``."""
    mass = weights * counts[None, :]
    cum = np.cumsum(mass, axis=1)
    u = rng.random((weights.shape[0], k)) * cum[:, -1:]
    return np.minimum((cum[:, None, :] <= u[:, :, None]).sum(axis=2), weights.shape[1] - 1)


# ---------------------------------------------------------------------- state


@dataclass
class Batch:
    targets: np.ndarray  # (B,)
    vic: Vicinities
    real_idx: np.ndarray  # (B * k,) rows into the dataset
    real_target: np.ndarray  # (B * k,) target label each real is scored against
    real_weights: np.ndarray  # (B * k,)
    real_reg_target: np.ndarray  # (B * k,) own label plus noise
    fake_labels: np.ndarray  # (B * k_g,)
    fake_target: np.ndarray  # (B * k_g,)
    fake_weights: np.ndarray  # (B * k_g,)
    z: np.ndarray

    @property
    def gamma(self):
        return float(np.max(self.vic.kappa))


@dataclass
class TrainState:
    config: TrainConfig
    data: ToyDataset
    index: LabelIndex
    sigma: float
    kappa_base: float
    n_av: int | None
    G: object
    D: object
    ema: object
    opt_g: object
    opt_d: object
    rng: np.random.Generator
    label_start: np.ndarray
    order: np.ndarray
    surrogate: object = None
    step: int = 0
    clamp_events: int = 0
    sn_state: dict = field(default_factory=dict)
    d_updates: int = 0
    g_updates: int = 0

    @property
    def generator(self):
        return Generator(self.G, self.config.noise_dim)

    @property
    def ema_generator(self):
        return Generator(self.ema.shadow, self.config.noise_dim)


def _optimizer(cfg, params):
    if cfg.optimizer == "adam":
        return tn.Adam(params, lr=cfg.learning_rate, betas=cfg.adam_betas)
    return tn.SGDMomentum(params, lr=cfg.learning_rate, momentum=cfg.momentum)


def init_state(cfg: TrainConfig, data: ToyDataset) -> TrainState:
    index = data.index()
    sigma, kappa_base, n_av = resolve_globals(cfg, index)
    ss = np.random.SeedSequence(cfg.seed)
    g_seed, d_seed, loop_seed, sur_seed = ss.spawn(4)
    G = init_generator(
        GeneratorConfig(cfg.noise_dim, cfg.embed_dim, cfg.g_hidden, data.d), np.random.default_rng(g_seed)
    )
    D = init_discriminator(
        DiscriminatorConfig(data.d, cfg.d_trunk, cfg.reg_hidden, cfg.dre_hidden), np.random.default_rng(d_seed)
    )
    order = np.argsort(data.y, kind="stable")
    label_start = np.concatenate([[0], index.prefix_counts[:-1]])
    surrogate = None
    if cfg.fake_reg_target == "surrogate":
        seed = int(np.random.default_rng(sur_seed).integers(2**31))
        surrogate = train_surrogate_regressor(data.x, data.y, seed=seed)
    return TrainState(
        config=cfg,
        data=data,
        index=index,
        sigma=sigma,
        kappa_base=kappa_base,
        n_av=n_av,
        G=G,
        D=D,
        ema=ema_init(G, cfg.ema_decay),
        opt_g=_optimizer(cfg, G.tensors()),
        opt_d=_optimizer(cfg, D.tensors()),
        rng=np.random.default_rng(loop_seed),
        label_start=label_start,
        order=order,
        surrogate=surrogate,
    )


def make_batch(state: TrainState, with_reals=True) -> Batch:
    cfg, index, rng = state.config, state.index, state.rng
    b = cfg.batch_size
    targets = sample_targets(index, b, state.sigma, rng)
    targets, vic = build_vicinities(index, targets, cfg, state.kappa_base, state.n_av, state.sigma, rng)
    k = cfg.reals_per_target
    real_idx = real_target = real_w = real_reg = np.empty(0)
    if with_reals:
        lab = _draw_labels(vic.weights, index.counts, k, rng).reshape(-1)
        within = (rng.random(lab.size) * index.counts[lab]).astype(np.int64)
        real_idx = state.order[state.label_start[lab] + within]
        real_target = np.repeat(targets, k)
        real_w = np.full(lab.size, 1.0 / k)
        real_reg = state.data.y[real_idx] + state.sigma * rng.standard_normal(lab.size)
    if cfg.fake_labels == "target":
        fake_labels = targets.copy()
    else:
        fake_labels = index.distinct_labels[_draw_labels(vic.weights, index.counts, 1, rng).reshape(-1)]
    z = rng.standard_normal((fake_labels.size, cfg.noise_dim))
    return Batch(
        targets=targets,
        vic=vic,
        real_idx=real_idx.astype(np.int64),
        real_target=real_target,
        real_weights=real_w,
        real_reg_target=real_reg,
        fake_labels=fake_labels,
        fake_target=targets.copy(),
        fake_weights=np.ones(fake_labels.size),
        z=z,
    )


def _adv_input(scores, form):
    return tn.sigmoid(scores) if form == "vanilla" else scores


def _count_clamps(state, scores, fake):
    if state.config.loss_form != "vanilla":
        return
    p = 1.0 / (1.0 + np.exp(-scores.data))
    if fake:
        p = 1.0 - p
    state.clamp_events += int(np.sum(p < losses.PROB_CLAMP))


def disc_step(state: TrainState, batch: Batch | None = None):
    """One discriminator update; returns the loss components as floats."""
    cfg, lw = state.config, state.config.loss_weights
    batch = batch or make_batch(state)
    x_real = state.data.x[batch.real_idx]
    x_fake = generator_forward(state.G, batch.z, batch.fake_labels).data
    gamma = batch.gamma if lw.gamma_mode == "batch_max_kappa" else lw.gamma_fixed
    fake_reg = batch.fake_labels
    if state.surrogate is not None:
        fake_reg = np.clip(state.surrogate.predict(x_fake), 0.0, 1.0)
    D = state.D
    with tn.Tape() as tape:
        out_r = disc_forward(D, x_real, batch.real_target)
        out_f = disc_forward(D, x_fake, batch.fake_target)
        _count_clamps(state, out_r.adv, False)
        _count_clamps(state, out_f.adv, True)
        adv = losses.vicinal_disc_loss(
            _adv_input(out_r.adv, cfg.loss_form),
            batch.real_weights,
            _adv_input(out_f.adv, cfg.loss_form),
            batch.fake_weights,
            cfg.loss_form,
            n_real_targets=batch.targets.size,
            n_fake_targets=batch.targets.size,
        )
        reg = dre = None
        if lw.lambda_reg_d > 0:
            reg = losses.disc_reg_loss(batch.real_reg_target, out_r.y_hat, fake_reg, out_f.y_hat, gamma)
        if lw.lambda_dre_d > 0:
            dre = losses.dre_loss(out_f.dre, out_r.dre, lw.lambda_dre)
        total = losses.total_disc_loss(adv, reg, dre, lw)
    state.opt_d.step(tape.gradient(total, D.tensors()))
    if cfg.spectral_clip:
        clip_spectral(D, state.sn_state, "d.", cfg.spectral_clip)
    state.d_updates += 1
    return {
        "d_adv": adv.item(),
        "d_reg": reg.item() if reg is not None else 0.0,
        "d_dre": dre.item() if dre is not None else 0.0,
        "gamma": float(gamma),
        "mean_kappa": float(np.mean(batch.vic.kappa)),
    }


def gen_step(state: TrainState, batch: Batch | None = None):
    """One generator update followed by the EMA update."""
    cfg, lw = state.config, state.config.loss_weights
    batch = batch or make_batch(state, with_reals=False)
    G = state.G
    with tn.Tape() as tape:
        x_fake = generator_forward(G, batch.z, batch.fake_labels)
        out = disc_forward(state.D, x_fake, batch.fake_target)
        adv = losses.gen_adv_loss(_adv_input(out.adv, cfg.loss_form), cfg.loss_form)
        reg = f = None
        if lw.lambda_reg_g > 0:
            reg = losses.gen_reg_penalty(batch.fake_labels, out.y_hat)
        if lw.lambda_f_g > 0:
            f = losses.gen_f_penalty(out.dre)
        total = losses.total_gen_loss(adv, reg, f, lw)
    state.opt_g.step(tape.gradient(total, G.tensors()))
    state.g_updates += 1
    state.step += 1
    if state.step <= cfg.ema_start:
        for k, s in state.ema.shadow.items():
            s.data = G[k].data.copy()
    else:
        ema_update(state.ema, G)
    return {
        "g_adv": adv.item(),
        "g_reg": reg.item() if reg is not None else 0.0,
        "g_f": f.item() if f is not None else 0.0,
    }


def train_step(state: TrainState):
    comps = {}
    for _ in range(state.config.num_d_steps):
        comps.update(disc_step(state))
    comps.update(gen_step(state))
    comps["step"] = state.step
    return comps


# ---------------------------------------------------------------------- loop


def _fmt(v):
    return str(v) if isinstance(v, (int, np.integer)) else repr(float(v))


def checkpoint_arrays(state: TrainState):
    arrays = {}
    arrays.update(state.G.arrays("G/"))
    arrays.update(state.ema.shadow.arrays("ema/"))
    arrays.update(state.D.arrays("D/"))
    return arrays


def checkpoint_meta(state: TrainState, primary=False):
    cfg = state.config
    return {
        "step": state.step,
        "primary": primary,
        "generator": config_dict(GeneratorConfig(cfg.noise_dim, cfg.embed_dim, cfg.g_hidden, state.data.d)),
        "discriminator": config_dict(DiscriminatorConfig(state.data.d, cfg.d_trunk, cfg.reg_hidden, cfg.dre_hidden)),
        "config": cfg.to_dict(),
        "sigma": state.sigma,
        "kappa_base": state.kappa_base,
        "n_av": state.n_av,
        "raw_min": state.data.raw_min,
        "raw_max": state.data.raw_max,
    }


def train(cfg: TrainConfig, data: ToyDataset, out_dir=None, progress=None) -> TrainState:
    """Run ``cfg.steps`` training steps.

    With ``out_dir`` set, writes ``training_log.csv``, ``checkpoint_<step>.bin``
    every ``checkpoint_every`` steps and ``final_ema.bin``.  A
    :class:`NumericalError` propagates after the log is flushed; checkpoints
    already written are left untouched.
    """
    state = init_state(cfg, data)
    log = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        log = open(os.path.join(out_dir, "training_log.csv"), "w", newline="")
        log.write(",".join(LOG_COLUMNS) + "\n")
    try:
        for _ in range(cfg.steps):
            comps = train_step(state)
            if log is not None:
                log.write(",".join(_fmt(comps[c]) for c in LOG_COLUMNS) + "\n")
                if cfg.checkpoint_every and state.step % cfg.checkpoint_every == 0:
                    path = os.path.join(out_dir, f"checkpoint_{state.step}.bin")
                    save_checkpoint(path, checkpoint_arrays(state), checkpoint_meta(state))
            if progress is not None:
                progress(state, comps)
    finally:
        if log is not None:
            log.close()
    if out_dir is not None:
        save_checkpoint(os.path.join(out_dir, "final_ema.bin"), checkpoint_arrays(state), checkpoint_meta(state, True))
        summary = {
            "steps": state.step,
            "d_updates": state.d_updates,
            "g_updates": state.g_updates,
            "clamp_events": state.clamp_events,
            "sigma": state.sigma,
            "kappa_base": state.kappa_base,
            "n_av": state.n_av,
            "surrogate_warning": getattr(state.surrogate, "warning", None),
        }
        with open(os.path.join(out_dir, "train_summary.json"), "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return state


# ---------------------------------------------------------------------- DRE only


def fit_dre(x_real, x_fake, steps=2000, batch_size=128, lr=2e-3, lambda_dre=1e-2, hidden=(64, 64), seed=0, label=0.5):
    """Train only the trunk and density-ratio head on two fixed sample pools.

    Returns ``(params, predict)`` where ``predict(x)`` gives the estimated
    ratio ``p_real / p_fake`` at each row of ``x``.
    """
    x_real = np.atleast_2d(x_real)
    x_fake = np.atleast_2d(x_fake)
    rng = np.random.default_rng(seed)
    cfg = DiscriminatorConfig(x_real.shape[1], hidden, 8, hidden)
    D = init_discriminator(cfg, rng)
    keys = [k for k in D if k.startswith("d.trunk") or k.startswith("d.dre")]
    params = [D[k] for k in keys]
    opt = tn.Adam(params, lr=lr, betas=(0.9, 0.999))
    for _ in range(steps):
        xr = x_real[rng.integers(len(x_real), size=batch_size)]
        xf = x_fake[rng.integers(len(x_fake), size=batch_size)]
        with tn.Tape() as tape:
            fr = disc_forward(D, xr, np.full(batch_size, label)).dre
            ff = disc_forward(D, xf, np.full(batch_size, label)).dre
            loss = losses.dre_loss(ff, fr, lambda_dre)
        opt.step(tape.gradient(loss, params))

    def predict(x):
        x = np.atleast_2d(x)
        return disc_forward(D, x, np.full(len(x), label)).dre.data.reshape(-1)

    return D, predict
