#!/usr/bin/env python3
"""End-to-end pipeline on synthetic data: curate, split, train, evaluate.

Builds a small dataset from known Antoine curves (plus injected outliers),
runs the curation filters and the robust-fit outlier pass, trains the
network for a short two-phase schedule, and prints the evaluation metrics.
Takes roughly ten seconds.
"""

import math

import numpy as np

from grappa import (
    Architecture,
    AntoineParams,
    TrainConfig,
    VpDataset,
    VpPoint,
    curate,
    fit,
    init_model,
    predict,
    predict_dataset,
    summarize,
)

rng = np.random.default_rng(0)

# --- synthetic ground truth: smooth in the carbon/oxygen counts ------------

def true_params(n_carbons, n_oxygens):
    return AntoineParams(
        A=9.3 + 0.06 * n_carbons + 0.25 * n_oxygens,
        B=2700.0 + 30.0 * n_carbons + 75.0 * n_oxygens,
        C=-70.0 - 1.5 * n_carbons - 4.0 * n_oxygens,
    )


points = []
row = 1
n_injected = 0
specs = [(f"alkane-{n}", "C" * n, n, 0) for n in range(3, 13)]
specs += [(f"alcohol-{n}", "O" + "C" * n, n, 1) for n in range(2, 12)]
for component, smiles, n_c, n_o in specs:
    params = true_params(n_c, n_o)
    for t in np.linspace(330.0, 520.0, 10):
        p_pa = math.exp(params.A - params.B / (params.C + t)) * 1000.0
        if row % 17 == 0:  # sprinkle in gross outliers for the curation pass
            p_pa *= 3.0
            n_injected += 1
        points.append(VpPoint(component, smiles, float(t), p_pa, row=row))
        row += 1
dataset = VpDataset(points)

# --- curation ---------------------------------------------------------------

result = curate(dataset)
n_outliers = sum(1 for e in result.audit if e["rule"] == "outlier_vs_antoine_fit")
print(f"curation: {len(dataset)} points in, {len(result.dataset)} kept, "
      f"{n_outliers} of {n_injected} injected outliers flagged")

# --- component-wise split and training --------------------------------------

clean = result.dataset
valid_components = {"alkane-7", "alkane-10", "alcohol-6", "alcohol-9"}
clean.splits = {c: ("valid" if c in valid_components else "train")
                for c in clean.components()}

cfg = TrainConfig(batch_size=4, warmup_epochs=40, main_epochs=20,
                  max_lr=0.02, main_lr=0.004, weight_decay=0.0,
                  standardize_counts=True, seed=3)
model = init_model(Architecture(), seed=np.random.SeedSequence([3, 0]))
outcome = fit(model, clean.subset("train"), clean.subset("valid"), cfg)
print(f"trained {len(outcome.history)} epochs; best validation MAPE_i "
      f"{outcome.best_valid_mape_i:.2f}% at epoch {outcome.best_epoch}")

# --- evaluation on the held-out components ----------------------------------

pred_points, params_by_comp = predict_dataset(model, clean, split="valid")
report = summarize(pred_points)
print(f"valid: MAE {report.mae:.3f}  MSE {report.mse:.3f}  "
      f"MAPE_i {report.mape_i:.2f}%  MAPE_C {report.mape_c[1]:.2f}%")

# --- a single prediction ----------------------------------------------------

pred = predict(model, "CCCCCCCC", temperatures=400.0, boil_pressure_pa=101_325.0)
print(f"\noctane: A={pred.params.A:.3f} B={pred.params.B:.1f} "
      f"C={pred.params.C:.1f}")
print(f"p(400 K) = {pred.p_pa / 1000.0:.2f} kPa, "
      f"predicted normal boiling point = {pred.boiling_k:.1f} K")
