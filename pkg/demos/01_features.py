"""
Log-Mel features from raw PCM
=============================

A walk through the front end: frame counts, the Mel filterbank and the
three normalization modes.
"""

# %%
# One second of 16 kHz audio gives 99 frames of 64 log-Mel energies.
import numpy as np

from tinysv.config import FeatureConfig
from tinysv.features import apply_mvn, compute_log_mel, mel_edges_hz

cfg = FeatureConfig()
print(compute_log_mel(np.zeros(16000, np.int16), cfg).shape)

# %%
# A 1 kHz tone lands in the filter whose center is closest to 1 kHz.
t = np.arange(16000) / 16000
tone = (np.sin(2 * np.pi * 1000 * t) * 10000).astype(np.int16)
feat = compute_log_mel(tone, cfg)
centers = mel_edges_hz(cfg)[1:-1]
bin_ = int(np.bincount(feat.argmax(axis=1)).argmax())
print(f"peak bin {bin_}, center {centers[bin_]:.1f} Hz")

# %%
# Utterance MVN looks at the whole signal; causal MVN only at the past, so
# its first frames differ and the last frame sees the same statistics.
utt = apply_mvn(feat + np.random.default_rng(0).normal(size=feat.shape), "utterance")
causal = apply_mvn(feat + np.random.default_rng(0).normal(size=feat.shape), "causal")
print("utterance mean/std:", utt.mean(axis=0)[:3].round(6), utt.std(axis=0)[:3].round(4))
print("first-frame gap:", float(np.abs(utt[1] - causal[1]).max()))
print("last-frame gap:", float(np.abs(utt[-1] - causal[-1]).max()))
