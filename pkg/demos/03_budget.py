"""
Parameter and compute budget
============================

Per-layer counts for the default model next to the published reference.
"""

# %%
from tinysv.budget import REFERENCE, count_flops
from tinysv.config import ModelConfig, SequenceNetConfig

report = count_flops(ModelConfig().validate(), audio_seconds=1.0)
for ln in report.lines[:4]:
    print(f"{ln.name:<20} params {ln.params:>6}  FMA/s {ln.fma:>10.0f}")
print("...")

# %%
for stage, t in report.totals().items():
    ref = REFERENCE[stage]
    print(f"{stage:<10} learnable {t.learnable:>7} (ref {ref['params']:>7})  "
          f"FMA/s {t.fma:>11.0f} (ref {ref['fma']:>11.0f})")

# %%
# The doubling MFM variant widens every layer before the max.
doubling = ModelConfig(sequence=SequenceNetConfig(mfm_variant="doubling")).validate()
print("doubling variant, sequence learnable:",
      count_flops(doubling).totals()["sequence"].learnable)
