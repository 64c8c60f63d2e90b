"""
Adaptive vicinities on an imbalanced label set
==============================================

Builds a unimodal imbalanced toy dataset, then shows how the vicinity
radius around a target label shrinks where samples are dense and widens
where they are sparse.
"""

import numpy as np

from vccgm.imbalance_synth import ImbalanceSpec, RingFamily, make_imbalanced, make_toy_dataset
from vccgm.label_index import nav_heuristic, rule_of_thumb
from vccgm.vicinity import build_adaptive, hybrid_weights, soft_weights

full = make_toy_dataset(99, 49, RingFamily(span=0.75), rng_seed=0, raw_range=(0, 100), interior=True)
spec = ImbalanceSpec(modes=(50.0,), decay_rate=0.1, peak_count=49, noise_std=5.0)
data, counts = make_imbalanced(full, spec, rng_seed=0)
index = data.index()

print(f"{data.n} samples over {index.m} distinct labels (balanced set: {full.n})")
print("counts near the mode:", counts[44:55].tolist())

s_bar, n_av = nav_heuristic(index)
rot = rule_of_thumb(index)
print(f"suggested n_av = {n_av} (mean neighbour-pair count {s_bar:.2f})")
print(f"sigma = {rot.sigma:.4f}, fixed kappa = {rot.kappa_base:.4f}")

# radius and decay rate across the label range
print()
print("   y_c   kappa_l  kappa_r   kappa      nu    n_c")
for y_c in (0.1, 0.3, 0.45, 0.5, 0.55, 0.7, 0.9):
    p = build_adaptive(index, y_c, n_av)
    print(f"{y_c:6.2f}  {p.kappa_left:7.4f}  {p.kappa_right:7.4f}  {p.kappa:7.4f}  {p.nu:8.1f}  {p.n_c:4d}")

# soft versus hybrid weights at a sparse target
y_c = 0.85
p = build_adaptive(index, y_c, n_av)
soft = soft_weights(data.y, y_c, p.nu)
hyb = hybrid_weights(data.y, y_c, p)
print()
print(f"at y_c = {y_c}: soft keeps {len(soft)} samples, hybrid keeps {len(hyb)}")
print(f"label span used, soft: {np.ptp(data.y[soft.indices]):.3f}, hybrid: {np.ptp(data.y[hyb.indices]):.3f}")
