#!/usr/bin/env python3
"""Hyperparameter grid search on a toy dataset.

Restricts the grid to a few cells so the run finishes in under a minute;
drop the grid_* overrides to sweep the full 120-cell space.
"""

import math

import numpy as np

from grappa import AntoineParams, TrainConfig, VpDataset, VpPoint, grid_search

points = []
for n in range(3, 13):
    params = AntoineParams(9.3 + 0.06 * n, 2700.0 + 30.0 * n, -70.0 - 1.5 * n)
    for t in np.linspace(330.0, 520.0, 8):
        p_pa = math.exp(params.A - params.B / (params.C + t)) * 1000.0
        points.append(VpPoint(f"alkane-{n}", "C" * n, float(t), p_pa))
ds = VpDataset(points)
ds.splits = {c: ("valid" if c in ("alkane-7", "alkane-10") else "train")
             for c in ds.components()}

cfg = TrainConfig(batch_size=4, warmup_epochs=10, main_epochs=5,
                  max_lr=0.02, main_lr=0.004, weight_decay=0.0, seed=1,
                  grid_gat_layers=(2, 3), grid_heads=(1, 2),
                  grid_hidden_layers=(1,), grid_pooling=("sum", "interaction"))

rows = grid_search(cfg, ds.subset("train"), ds.subset("valid"))
print(f"{'rank':>4} {'layers':>6} {'heads':>5} {'hidden':>6} {'pooling':>12} "
      f"{'valid MAPE_i':>12}")
for row in rows:
    print(f"{row['rank']:>4} {row['gat_layers']:>6} {row['heads']:>5} "
          f"{row['hidden_layers']:>6} {row['pooling']:>12} "
          f"{row['best_valid_mape_i']:>11.2f}%")
