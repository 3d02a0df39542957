"""
Angular margin with focal weighting
===================================

How the margin and the focal exponent change the loss of one example.
"""

# %%
import numpy as np

from tinysv.objectives import ArcFaceConfig, arcface_focal_loss, numeric_gradient

rng = np.random.default_rng(3)
anchors = rng.normal(size=(10, 96))
emb = anchors[4] + 3.0 * rng.normal(size=96)

for margin in (0.0, 0.2, 0.5):
    for gamma in (0.0, 2.0):
        loss = arcface_focal_loss(emb, anchors, 4, ArcFaceConfig(10, margin=margin, gamma=gamma))
        print(f"m={margin:.1f} gamma={gamma:.0f}: {loss:.4f}")

# %%
# A few steps of numeric gradient descent on the embedding.
cfg = ArcFaceConfig(10)
x = emb.copy()
for step in range(5):
    g = numeric_gradient(lambda v: arcface_focal_loss(v, anchors, 4, cfg), x)
    x -= 5.0 * g
    print(step, round(arcface_focal_loss(x, anchors, 4, cfg), 5))
