"""
Equal error rate
================

Synthetic target and non-target scores, the EER and its threshold.
"""

# %%
import numpy as np

from tinysv.scoring import ScoreSet, compute_eer, error_rates

rng = np.random.default_rng(0)
targets = rng.normal(0.7, 0.1, 300)
nontargets = rng.normal(0.3, 0.1, 3000)
scores = ScoreSet.from_lists(targets, nontargets)
eer, threshold = compute_eer(scores)
print(f"EER {100 * eer:.2f}% at threshold {threshold:.4f}")

# %%
# The analytic EER for two unit-variance Gaussians 4 sigma apart is Phi(-2).
from math import erf, sqrt

print(f"expected about {100 * 0.5 * (1 + erf(-2 / sqrt(2))):.2f}%")

# %%
# Hand example: one non-target sits above one of three targets.
print(compute_eer(ScoreSet.from_lists([0.9, 0.8, 0.7], [0.75, 0.6, 0.1]))[0])
thresholds, far, frr = error_rates(scores.scores, scores.labels)
print(len(thresholds), "operating points")
