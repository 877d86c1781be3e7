#!/usr/bin/env python3
"""Input-error sensitivity of the CA50 prediction.

Reproduces the feedforward-robustness question: how much does the CA50
prediction degrade when each measured input carries a realistic error?
Ground truth is the surrogate plant (full ignition integral); the
predictor re-runs with one corrupted input per row.

Run:  python demos/sensitivity_study.py
"""
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from phasekit.harness import sample_conditions, sensitivity, write_sensitivity

conditions = sample_conditions(516, "transient", seed=0)
rows = sensitivity(conditions, oracle_step=0.01)
write_sensitivity(rows, Path(__file__).with_suffix(".csv"))

print(f"{'source':>8s} {'delta':>8s} {'std':>8s} {'max':>8s} {'chg_std':>8s}")
for r in rows:
    print(f"{r.source:>8s} {r.delta:+8.3g} {r.std_dev:8.4f} "
          f"{r.max_abs_error:8.4f} {r.change_std:8.4f}")

labels = [f"{r.source} {r.delta:+g}" for r in rows[1:]]
max_err = [r.max_abs_error for r in rows[1:]]
baseline = rows[0].max_abs_error

fig, ax = plt.subplots(figsize=(9, 4.5))
x = np.arange(len(labels))
colors = ["tab:red" if r.source == "T_IVC" else
          "tab:gray" if r.source == "X_r" else "tab:blue" for r in rows[1:]]
ax.bar(x, max_err, color=colors)
ax.axhline(baseline, color="k", ls="--", lw=0.9,
           label=f"no-error baseline ({baseline:.2f} deg)")
ax.set_xticks(x)
ax.set_xticklabels(labels, rotation=45, ha="right")
ax.set_ylabel("max |CA50 prediction error| [deg]")
ax.set_title("Charge-temperature errors hurt most; residual-fraction errors least")
ax.legend()

fig.tight_layout()
out = Path(__file__).with_suffix(".png")
fig.savefig(out, dpi=130)
print(f"wrote {out}")
