"""Analytic parameter and compute accounting.

Counting rules, per frame unless noted:

* depthwise conv: ``C_in * kernel`` FMA
* pointwise conv: ``C_in * C_out`` FMA; batch norm is folded into it and the
  bias seeds the accumulator, so neither costs anything
* PReLU, MFM, max-pool and residual adds are compares/adds and are not counted
* soft assignment: ``O * C`` FMA and ``O`` div (softmax normalization)
* accumulation: ``K * C + K`` FMA
* finalization, once per utterance: residuals ``K*C``, intra-norm ``2*K*C``
  FMA and ``K`` div, cluster average ``K*C``, projection ``D*C``, final norm
  ``2*D`` FMA and 1 div

The stem runs at the feature frame rate, everything after the max-pool at
half of it. FLOPS = 2 * FMA + div.
"""

from dataclasses import asdict, dataclass, field

from . import sequence, vlad
from .sequence import layer_schedule

# Reference figures reported for the default model (FMA and div in units per
# second of audio, params in scalars).
REFERENCE = {
    "sequence": {"fma": 10_850_400.0, "div": 0.0, "flops": 10.8e6, "params": 211_600},
    "embedding": {"fma": 659_700.0, "div": 8_000.0, "flops": 0.7e6, "params": 25_800},
    "total": {"fma": 11_509_400.0, "div": 8_000.0, "flops": 11.5e6, "params": 237_499},
}


@dataclass
class LayerLine:
    stage: str
    name: str
    params: int = 0  # scalars stored in the weight container
    learnable: int = 0  # excludes batch-norm running statistics
    fma: float = 0.0
    div: float = 0.0

    @property
    def flops(self):
        return 2 * self.fma + self.div


@dataclass
class BudgetReport:
    audio_seconds: float
    lines: list = field(default_factory=list)
    receptive_field_frames: int = 0
    lookahead_input_frames: int = 0
    endpoint_delay_frames: int = 0
    n_tcs: int = 0

    def stage_total(self, stage=None):
        sel = [ln for ln in self.lines if stage is None or ln.stage == stage]
        return LayerLine(stage or "total", "total",
                         sum(ln.params for ln in sel), sum(ln.learnable for ln in sel),
                         sum(ln.fma for ln in sel), sum(ln.div for ln in sel))

    def totals(self):
        return {s: self.stage_total(None if s == "total" else s)
                for s in ("sequence", "embedding", "total")}

    def to_dict(self):
        totals = {}
        for stage, t in self.totals().items():
            ref = REFERENCE[stage]
            totals[stage] = {
                "params": t.params, "learnable": t.learnable, "fma": t.fma, "div": t.div,
                "flops": t.flops,
                "reference": ref,
                "deviation": {
                    "learnable": t.learnable - ref["params"],
                    "learnable_rel": (t.learnable - ref["params"]) / ref["params"],
                    "fma_per_s": t.fma / self.audio_seconds - ref["fma"],
                    "fma_per_s_rel": (t.fma / self.audio_seconds - ref["fma"]) / ref["fma"],
                },
            }
        return {
            "audio_seconds": self.audio_seconds,
            "n_tcs": self.n_tcs,
            "receptive_field_frames": self.receptive_field_frames,
            "lookahead_input_frames": self.lookahead_input_frames,
            "endpoint_delay_frames": self.endpoint_delay_frames,
            "lines": [dict(asdict(ln), flops=ln.flops) for ln in self.lines],
            "totals": totals,
        }


def pointwise_params(c_in, c_out, bias=True):
    return c_in * c_out + (c_out if bias else 0)


def pointwise_fma(c_in, c_out, frames):
    return c_in * c_out * frames


def depthwise_fma(channels, kernel, frames):
    return channels * kernel * frames


def _sequence_lines(cfg, frames_in, frames_pooled):
    scfg = cfg.sequence
    shapes = sequence.tensor_shapes(scfg)
    lines = []
    for layer in layer_schedule(scfg):
        n = layer.name
        frames = frames_pooled if layer.pooled else frames_in
        stored = sum(_size(s) for t, s in shapes.items() if t.startswith(n + "."))
        bn_stats = 2 * layer.out_channels
        lines.append(LayerLine(
            "sequence", n, stored, stored - bn_stats,
            fma=depthwise_fma(layer.in_channels, layer.kernel, frames)
            + pointwise_fma(layer.in_channels, layer.out_channels, frames)))
    for t, s in shapes.items():
        # Block PReLU slopes are not part of any conv prefix.
        if t.endswith(".prelu.slope") and ".block" in t:
            lines.append(LayerLine("sequence", t[:-len(".slope")], _size(s), _size(s)))
    return lines


def _embedding_lines(cfg, frames_pooled):
    v = cfg.vlad
    o, k, c, d = v.total_clusters, v.clusters, v.in_channels, v.embed_dim
    shapes = vlad.tensor_shapes(v)
    assign = _size(shapes["vlad.assign_weights"]) + _size(shapes["vlad.assign_bias"])
    proj = _size(shapes["vlad.projection"]) + _size(shapes["vlad.projection_bias"])
    cent = _size(shapes["vlad.centroids"])
    return [
        LayerLine("embedding", "vlad.assign", assign, assign,
                  fma=frames_pooled * o * c, div=frames_pooled * o),
        LayerLine("embedding", "vlad.accumulate", cent, cent,
                  fma=frames_pooled * (k * c + k)),
        LayerLine("embedding", "vlad.finalize", proj, proj,
                  fma=k * c + 2 * k * c + k * c + d * c + 2 * d, div=k + 1),
    ]


def _size(shape):
    n = 1
    for s in shape:
        n *= s
    return n


def budget_report(cfg, audio_seconds=1.0):
    if not audio_seconds > 0:
        raise ValueError("audio_seconds must be positive")
    cfg.validate()
    frames_in = cfg.features.frame_rate_hz * audio_seconds
    frames_pooled = frames_in / cfg.sequence.pool_stride
    lines = _sequence_lines(cfg, frames_in, frames_pooled) + _embedding_lines(cfg, frames_pooled)
    return BudgetReport(
        audio_seconds=audio_seconds,
        lines=lines,
        receptive_field_frames=sequence.receptive_field(cfg.sequence),
        lookahead_input_frames=sequence.lookahead_input_frames(cfg.sequence),
        endpoint_delay_frames=sequence.endpoint_delay_frames(cfg.sequence),
        n_tcs=cfg.sequence.n_tcs,
    )


def count_params(cfg):
    return budget_report(cfg, 1.0)


def count_flops(cfg, audio_seconds=1.0):
    return budget_report(cfg, audio_seconds)
