"""Adversarial, regression and density-ratio losses on :mod:`tensor_nn` tensors.

Score, prediction and ratio arguments are ``(n, 1)`` tensors.  Per-sample
vicinal weights are plain arrays aligned with the scores; the weights of
each target label sum to one, so a batch holding ``T`` targets has weights
summing to ``T``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor_nn as tn
from .tensor_nn import Tensor

PROB_CLAMP = 1e-12


@dataclass
class LossWeights:
    lambda_reg_d: float = 1.0
    lambda_dre_d: float = 0.5
    lambda_reg_g: float = 1.0
    lambda_f_g: float = 0.5
    lambda_dre: float = 1e-2
    gamma_mode: str = "batch_max_kappa"  # or "fixed"
    gamma_fixed: float = 0.0

    def __post_init__(self):
        for name in ("lambda_reg_d", "lambda_dre_d", "lambda_reg_g", "lambda_f_g", "lambda_dre", "gamma_fixed"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.gamma_mode not in ("batch_max_kappa", "fixed"):
            raise ValueError(f"unknown gamma_mode {self.gamma_mode!r}")


def _col(values):
    return Tensor(np.asarray(values, dtype=np.float64).reshape(-1, 1))


def _weighted_total(per_sample, weights):
    return tn.sum_(tn.mul(per_sample, _col(weights)))


def _n_targets(weights, n_targets):
    if n_targets is not None:
        return n_targets
    return max(1, int(round(float(np.sum(weights)))))


def _clamped_log(p):
    return tn.log(tn.max_with(p, PROB_CLAMP))


def vicinal_disc_loss(
    real_scores,
    real_weights,
    fake_scores=None,
    fake_weights=None,
    form="hinge",
    n_real_targets=None,
    n_fake_targets=None,
):
    """Vicinal discriminator loss averaged over target labels.

    ``vanilla`` expects probabilities ``D`` in (0, 1) and evaluates
    ``-sum W log D(real) - sum W log(1 - D(fake))``; ``hinge`` takes raw
    scores and evaluates ``sum W max(0, 1 - s_real) + sum W max(0, 1 + s_fake)``.
    Probabilities are clamped at 1e-12 before the log.
    """
    if form not in ("vanilla", "hinge"):
        raise ValueError(f"unknown loss form {form!r}")
    terms = []
    if real_scores is not None:
        if form == "vanilla":
            per = tn.neg(_clamped_log(real_scores))
        else:
            per = tn.max_with(tn.sub(Tensor(np.ones(real_scores.shape)), real_scores), 0.0)
        terms.append(tn.mul(_weighted_total(per, real_weights), 1.0 / _n_targets(real_weights, n_real_targets)))
    if fake_scores is not None:
        if form == "vanilla":
            per = tn.neg(_clamped_log(tn.add(tn.neg(fake_scores), 1.0)))
        else:
            per = tn.max_with(tn.add(fake_scores, 1.0), 0.0)
        terms.append(tn.mul(_weighted_total(per, fake_weights), 1.0 / _n_targets(fake_weights, n_fake_targets)))
    if not terms:
        raise ValueError("need real or fake scores")
    return terms[0] if len(terms) == 1 else tn.add(terms[0], terms[1])


def gen_adv_loss(fake_scores, form="hinge"):
    """``-mean log D(fake)`` (vanilla, probabilities) or ``-mean s`` (hinge, raw scores)."""
    if form == "vanilla":
        return tn.neg(tn.mean(_clamped_log(fake_scores)))
    if form == "hinge":
        return tn.neg(tn.mean(fake_scores))
    raise ValueError(f"unknown loss form {form!r}")


def _insensitive(target, pred, gamma):
    err = tn.abs_(tn.sub(_col(target), pred))
    return tn.mean(tn.max_with(tn.add(err, -float(gamma)), 0.0))


def disc_reg_loss(y_real_target, y_hat_real, y_fake_target, y_hat_fake, gamma):
    """Gamma-insensitive absolute error on real and fake groups.

    Either group may be ``None``.  ``y_real_target`` is the noisy target label
    of each real sample; ``y_fake_target`` the conditioning label of each fake
    (or a separately trained regressor's estimate of it).
    """
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    terms = []
    if y_hat_real is not None:
        terms.append(_insensitive(y_real_target, y_hat_real, gamma))
    if y_hat_fake is not None:
        terms.append(_insensitive(y_fake_target, y_hat_fake, gamma))
    if not terms:
        raise ValueError("need at least one group")
    return terms[0] if len(terms) == 1 else tn.add(terms[0], terms[1])


def dre_loss(dre_fake, dre_real, lambda_dre=1e-2):
    """Penalized softplus loss for the density-ratio head.

    ``mean_fake[sigmoid(f) f - softplus(f)] - mean_real[sigmoid(f)]
    + lambda_dre (mean_fake f - 1)^2``.  Minimized pointwise at
    ``f = p_real / p_fake``.
    """
    fake_term = tn.mean(tn.sub(tn.mul(tn.sigmoid(dre_fake), dre_fake), tn.softplus(dre_fake)))
    real_term = tn.mean(tn.sigmoid(dre_real))
    loss = tn.sub(fake_term, real_term)
    if lambda_dre > 0:
        loss = tn.add(loss, tn.mul(dre_penalty(dre_fake), float(lambda_dre)))
    return loss


def dre_penalty(dre_fake):
    """``(mean_fake f - 1)^2``, the unweighted normalization penalty of :func:`dre_loss`."""
    return tn.square(tn.add(tn.mean(dre_fake), -1.0))


def gen_reg_penalty(y_cond, y_hat_fake):
    """Mean absolute error between conditioning labels and predicted labels."""
    return tn.mean(tn.abs_(tn.sub(_col(y_cond), y_hat_fake)))


def gen_f_penalty(dre_fake):
    """Pearson chi-square plug-in ``mean (r - 1)^2`` over fake samples."""
    if (dre_fake.data <= 0).any():
        raise ValueError("density ratios must be positive")
    return tn.mean(tn.square(tn.add(dre_fake, -1.0)))


def _scalar(x):
    return x if isinstance(x, Tensor) else Tensor(float(x))


def _weighted_sum(first, pairs):
    total = _scalar(first)
    for lam, comp in pairs:
        if lam and comp is not None:
            total = tn.add(total, tn.mul(_scalar(comp), float(lam)))
    return total


def total_disc_loss(adv, reg=None, dre=None, weights: LossWeights | None = None):
    """``adv + lambda_reg_d * reg + lambda_dre_d * dre``."""
    w = weights or LossWeights()
    return _weighted_sum(adv, [(w.lambda_reg_d, reg), (w.lambda_dre_d, dre)])


def total_gen_loss(adv, reg=None, f=None, weights: LossWeights | None = None):
    """``adv + lambda_reg_g * reg + lambda_f_g * f``."""
    w = weights or LossWeights()
    return _weighted_sum(adv, [(w.lambda_reg_g, reg), (w.lambda_f_g, f)])
