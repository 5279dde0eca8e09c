"""Sensitivity studies: how the accuracy/fairness tradeoff responds to the
number of sensitive attributes, the bias strength, and the decision count.

Runs a reduced grid (reduce further via the N constant if impatient) and
saves a matplotlib overview next to the emitted CSVs.
"""
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from fairpm.experiment import ExperimentConfig, run_ablation

os.makedirs("results", exist_ok=True)
N = 800
base = ExperimentConfig(name="study", dataset={"kind": "cs", "n_cases": N},
                        seed=7, folds=5)

grids = {
    "strength": [0.5, 0.75, 1.0],
    "attrs": [1, 5, 10],
    "decisions": [2, 6, 10],
}

fig, axes = plt.subplots(1, 3, figsize=(13, 3.6), sharey=True)
for ax, (study, grid) in zip(axes, grids.items()):
    print(f"== {study} study over {grid}")
    points = run_ablation(study, grid, base)
    for model, marker in (("F", "s"), ("M*", "o"), ("M", "^")):
        xs, ys = [], []
        for point, result, error in points:
            if error is not None:
                print(f"   point {point} failed: {error}")
                continue
            rep = result.aggregates[model]
            xs.append(point)
            ys.append(rep.accuracy_mean)
            print(f"   {study}={point} {model}: acc={rep.accuracy_mean:.3f} "
                  f"dp={rep.avg_delta_mean:.3f}")
        ax.plot(xs, ys, marker=marker, label=model)
    ax.set_title(f"{study} study")
    ax.set_xlabel(study)
axes[0].set_ylabel("validation accuracy")
axes[0].legend()
fig.tight_layout()
fig.savefig("results/sensitivity_studies.png", dpi=130)
print("\nsaved results/sensitivity_studies.png")
