"""
Streaming equals batch
======================

The sequence network keeps a small history per layer, so feeding audio in
arbitrary chunks reproduces the batch result.
"""

# %%
import numpy as np

from tinysv.config import ModelConfig
from tinysv.pipeline import Model

model = Model.random(ModelConfig().validate(), seed=0)
rng = np.random.default_rng(1)
pcm = (rng.standard_normal(3 * 16000) * 3000).astype(np.int16)
batch = model.embed_batch(pcm)

# %%
# Push ragged chunks, from single samples up to half a second.
for cap in (10, 500, 8000):
    session = model.stream(keep_frames=True)
    i = 0
    while i < len(pcm):
        n = int(rng.integers(1, cap + 1))
        session.push(pcm[i:i + n])
        i += n
    emb = session.finish()
    print(f"chunks up to {cap:>5} samples: cosine {float(batch @ emb):.9f}")

# %%
# Geometry of the default network.
net = model.net
print("receptive field (frames):", net.receptive_field)
print("sequence frames:", session.sequence_frames().shape)
