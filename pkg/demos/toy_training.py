"""
Training on imbalanced toy data
===============================

Trains the fixed-vicinity baseline and the hybrid adaptive vicinity with
the auxiliary regression and density-ratio terms, then scores both with
the exact label oracle of the ring family.

    python3 demos/toy_training.py [steps]

The default 1500 steps take a minute or two per run on one core.
"""

import sys

from vccgm.evalsuite import RingLabelOracle, evaluate
from vccgm.imbalance_synth import ImbalanceSpec, RingFamily, make_imbalanced, make_toy_dataset
from vccgm.trainer import TrainConfig, train

steps = int(sys.argv[1]) if len(sys.argv) > 1 else 1500

family = RingFamily(span=0.75)
full = make_toy_dataset(99, 49, family, rng_seed=0, raw_range=(0, 100), interior=True)
data, _ = make_imbalanced(full, ImbalanceSpec(modes=(50.0,)), rng_seed=0)
oracle = RingLabelOracle(family)

no_aux = dict(lambda_reg_d=0.0, lambda_dre_d=0.0, lambda_reg_g=0.0, lambda_f_g=0.0)
base = TrainConfig(steps=steps, seed=0, checkpoint_every=0, ema_start=min(1000, steps // 2))
runs = {
    "fixed soft vicinity": base.replace(vicinity_mode="soft", loss_weights=no_aux),
    "hybrid adaptive + aux": base.replace(loss_weights=dict(lambda_f_g=0.1)),
}

for name, cfg in runs.items():
    state = train(cfg, data)
    rep = evaluate(state.ema_generator, full, oracle, n_fake_per_center=200, seed=1)
    print(f"{name:24s} n_av={state.n_av}  mean fd {rep.mean_fd:.4f}  "
          f"label score {rep.mean_label_score:.3f}  diversity {rep.mean_diversity:.4f}")
