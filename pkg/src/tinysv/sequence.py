"""Sequence-wise network: stacked time-channel separable convolutions.

Layer schedule for ``B`` blocks of ``R`` repeats::

    stem   TCSConv1d + BN + PReLU, max-pool /2
    block  R x (TCSConv1d + BN + MFM), TCSConv1d + BN, residual add, PReLU
    head   TCSConv1d + BN + PReLU

giving ``1 + B*(R+1) + 1`` TCSConv1d layers (22 for B=5, R=3).

``forward_batch`` pads every depthwise convolution with zeros over the whole
utterance. ``SequenceStream`` reproduces it chunk by chunk: each depthwise
layer keeps ``kernel - 1`` frames of history, the residual path delays its
skip input until the branch catches up, and ``flush`` feeds the same tail
zeros the batch path uses.
"""

from dataclasses import dataclass

import numpy as np

from . import ops
from .errors import DoubleFlush, MissingTensor, PushAfterFlush, ShapeError, SignalTooShort
from .ops import DTYPE


@dataclass(frozen=True)
class TCSSpec:
    name: str
    in_channels: int
    out_channels: int
    kernel: int
    pooled: bool  # runs after the max-pool (half frame rate)


def block_channels(cfg):
    """(MFM output width, inner conv output width) for the configured variant."""
    if cfg.mfm_variant == "halving":
        return cfg.filters // 2, cfg.filters
    return cfg.filters, 2 * cfg.filters


def layer_schedule(cfg):
    """Ordered TCSConv1d layers."""
    f, k = cfg.filters, cfg.kernel
    mid, inner = block_channels(cfg)
    layers = [TCSSpec("seq.stem", cfg.in_channels, f, k, False)]
    for b in range(cfg.blocks):
        cin = f
        for r in range(cfg.repeats):
            layers.append(TCSSpec(f"seq.block{b}.conv{r}", cin, inner, k, True))
            cin = mid
        layers.append(TCSSpec(f"seq.block{b}.close", mid, f, k, True))
    if cfg.head:
        layers.append(TCSSpec("seq.head", f, f, k, True))
    return layers


def tensor_shapes(cfg):
    """Name -> shape of every tensor the sequence network loads."""
    shapes = {}
    for layer in layer_schedule(cfg):
        n, c = layer.name, layer.out_channels
        shapes[f"{n}.dw.weight"] = (layer.in_channels, layer.kernel)
        shapes[f"{n}.pw.weight"] = (c, layer.in_channels)
        shapes[f"{n}.pw.bias"] = (c,)
        for p in ("gamma", "beta", "running_mean", "running_var"):
            shapes[f"{n}.bn.{p}"] = (c,)
        if n == "seq.stem" or n == "seq.head":
            shapes[f"{n}.prelu.slope"] = (c,)
        elif n.endswith(".close"):
            shapes[f"{n.rsplit('.', 1)[0]}.prelu.slope"] = (cfg.filters,)
    return shapes


def receptive_field(cfg):
    """Input frames that can influence one output frame."""
    post = sum(1 for layer in layer_schedule(cfg) if layer.pooled)
    span = 1 + post * (cfg.kernel - 1)
    return cfg.pool_stride * span + (cfg.kernel - 1)


def lookahead(cfg):
    """Future frames each stage waits for: (stem input frames, pooled frames)."""
    right = ops.pad_amounts(cfg.kernel, cfg.padding)[1]
    post = sum(1 for layer in layer_schedule(cfg) if layer.pooled)
    return right, post * right


def endpoint_delay_frames(cfg):
    """Upper bound on output frames still pending when the input ends."""
    stem_right, post_right = lookahead(cfg)
    return post_right + (stem_right + 1) // 2


def lookahead_input_frames(cfg):
    """Input frames that must follow an output frame's own frames before it is emitted."""
    stem_right, post_right = lookahead(cfg)
    return stem_right + cfg.pool_stride * post_right


class TCSLayer:
    """Depthwise conv followed by pointwise conv with batch norm folded in."""

    def __init__(self, spec, weights, eps):
        self.spec = spec
        n = spec.name
        self.depthwise = ops.DepthwiseKernel(weights[f"{n}.dw.weight"])
        self.pointwise = ops.PointwiseKernel(weights[f"{n}.pw.weight"], weights[f"{n}.pw.bias"])
        self.bn = ops.BatchNormParams(weights[f"{n}.bn.gamma"], weights[f"{n}.bn.beta"],
                                      weights[f"{n}.bn.running_mean"],
                                      weights[f"{n}.bn.running_var"], eps)
        self.folded = ops.fold_batch_norm(self.pointwise, self.bn)

    def project(self, x):
        return ops.pointwise_conv1d(x, self.folded)


class SequenceNet:
    """Immutable, executable sequence network bound to a weight set."""

    def __init__(self, cfg, layers, slopes):
        self.cfg = cfg
        self.layers = layers
        self.slopes = slopes

    @property
    def schedule(self):
        return [layer.spec for layer in self.layers]

    @property
    def receptive_field(self):
        return receptive_field(self.cfg)

    @property
    def out_channels(self):
        return self.cfg.filters

    def _prelu(self, name):
        p = self.slopes[name]
        return lambda x: ops.prelu(x, p)

    def _blocks(self):
        """Yield (block prefix, inner layers, closing layer)."""
        per = self.cfg.repeats + 1
        for b in range(self.cfg.blocks):
            chunk = self.layers[1 + b * per:1 + (b + 1) * per]
            yield f"seq.block{b}", chunk[:-1], chunk[-1]

    def forward_batch(self, feat):
        x = np.asarray(feat, dtype=DTYPE)
        if x.ndim != 2 or x.shape[1] != self.cfg.in_channels:
            raise ShapeError("sequence input", f"(T, {self.cfg.in_channels})", x.shape)
        if len(x) < self.cfg.pool_stride:
            raise SignalTooShort(f"{len(x)} frames is shorter than one pooled frame")
        pad = self.cfg.padding

        def tcs(layer, h):
            return layer.project(ops.depthwise_conv1d(h, layer.depthwise, pad))

        x = self._prelu("seq.stem")(tcs(self.layers[0], x))
        x = ops.max_pool1d(x)
        for prefix, inner, close in self._blocks():
            y = x
            for layer in inner:
                y = ops.mfm(tcs(layer, y))
            y = tcs(close, y)
            x = self._prelu(prefix)(x + y)
        if self.cfg.head:
            x = self._prelu("seq.head")(tcs(self.layers[-1], x))
        return x

    def new_stream(self):
        return SequenceStream(self)


def build_sequence_net(cfg, weights):
    cfg.validate()
    shapes = tensor_shapes(cfg)
    for name, shape in shapes.items():
        if name not in weights:
            raise MissingTensor(name)
        found = tuple(np.shape(weights[name]))
        if found != tuple(shape):
            raise ShapeError(name, tuple(shape), found)
    layers = [TCSLayer(spec, weights, cfg.bn_eps) for spec in layer_schedule(cfg)]
    slopes = {n[:-len(".prelu.slope")]: ops.PReluParams(weights[n])
              for n in shapes if n.endswith(".prelu.slope")}
    return SequenceNet(cfg, layers, slopes)


def forward_batch(net, feat):
    return net.forward_batch(feat)


# -- streaming ---------------------------------------------------------------


def _empty(channels):
    return np.zeros((0, channels), dtype=DTYPE)


class _Depthwise:
    def __init__(self, kernel, padding):
        w = kernel.weights
        self.w = w
        self.k = w.shape[1]
        left, self.right = ops.pad_amounts(self.k, padding)
        self.buf = np.zeros((left, w.shape[0]), dtype=DTYPE)
        self.capacity = max(self.k - 1, left)

    def push(self, x):
        if len(x) == 0:
            return _empty(self.w.shape[0])
        buf = np.concatenate([self.buf, x])
        out = ops.depthwise_valid(buf, self.w)
        self.buf = buf[len(out):]
        return out

    def flush(self):
        return self.push(np.zeros((self.right, self.w.shape[0]), dtype=DTYPE))

    def buffered(self):
        return len(self.buf)


class _Map:
    capacity = 0

    def __init__(self, fn):
        self.fn = fn

    def push(self, x):
        return self.fn(x)

    def flush(self):
        return None

    def buffered(self):
        return 0


class _Pool:
    capacity = 1

    def __init__(self):
        self.odd = None

    def push(self, x):
        if self.odd is not None:
            x = np.concatenate([self.odd, x])
        n = len(x) // 2 * 2
        self.odd = x[n:] if n < len(x) else None
        return ops.max_pool1d(x[:n])

    def flush(self):
        # Trailing odd frame is dropped, as in batch mode.
        self.odd = None
        return None

    def buffered(self):
        return 0 if self.odd is None else len(self.odd)


class _Chain:
    def __init__(self, stages):
        self.stages = stages

    def push(self, x):
        for s in self.stages:
            x = s.push(x)
        return x

    def flush(self):
        carry = None
        for s in self.stages:
            parts = []
            if carry is not None and len(carry):
                parts.append(s.push(carry))
            tail = s.flush()
            if tail is not None:
                parts.append(tail)
            carry = np.concatenate(parts) if parts else None
        return carry

    @property
    def capacity(self):
        return sum(s.capacity for s in self.stages)

    def buffered(self):
        return sum(s.buffered() for s in self.stages)


class _Residual:
    """Adds the delayed block input to the branch output, then applies ``post``."""

    def __init__(self, branch, post, lag):
        self.branch = branch
        self.post = post
        self.skip = None
        self.capacity = branch.capacity + lag
        self.lag = lag

    def _combine(self, y):
        if y is None or len(y) == 0:
            return y
        n = len(y)
        skip, self.skip = self.skip[:n], self.skip[n:]
        return self.post(skip + y)

    def push(self, x):
        self.skip = x if self.skip is None else np.concatenate([self.skip, x])
        return self._combine(self.branch.push(x))

    def flush(self):
        return self._combine(self.branch.flush())

    def buffered(self):
        return self.branch.buffered() + (0 if self.skip is None else len(self.skip))


class SequenceStream:
    """Per-utterance streaming state for one ``SequenceNet``.

    Buffer sizes depend only on the network config.
    """

    def __init__(self, net):
        self.net = net
        cfg = net.cfg
        pad = cfg.padding

        def tcs(layer):
            return [_Depthwise(layer.depthwise, pad), _Map(layer.project)]

        stages = tcs(net.layers[0]) + [_Map(net._prelu("seq.stem")), _Pool()]
        right = ops.pad_amounts(cfg.kernel, pad)[1]
        for prefix, inner, close in net._blocks():
            branch = []
            for layer in inner:
                branch += tcs(layer) + [_Map(ops.mfm)]
            branch += tcs(close)
            lag = right * (len(inner) + 1)
            stages.append(_Residual(_Chain(branch), net._prelu(prefix), lag))
        if cfg.head:
            stages += tcs(net.layers[-1]) + [_Map(net._prelu("seq.head"))]
        self._chain = _Chain(stages)
        self.frames_consumed = 0
        self.frames_emitted = 0
        self.flushed = False

    @property
    def capacity(self):
        """Maximum frames held between calls."""
        return self._chain.capacity

    def buffered_frames(self):
        return self._chain.buffered()

    def push(self, frames):
        if self.flushed:
            raise PushAfterFlush("stream already flushed")
        x = np.asarray(frames, dtype=DTYPE)
        if x.ndim != 2 or x.shape[1] != self.net.cfg.in_channels:
            raise ShapeError("sequence input", f"(T, {self.net.cfg.in_channels})", x.shape)
        self.frames_consumed += len(x)
        out = self._chain.push(x)
        self.frames_emitted += len(out)
        return out

    def flush(self):
        if self.flushed:
            raise DoubleFlush("stream already flushed")
        self.flushed = True
        if self.frames_consumed == 0:
            return _empty(self.net.out_channels)
        out = self._chain.flush()
        if out is None:
            out = _empty(self.net.out_channels)
        self.frames_emitted += len(out)
        return out


def stream_push(state, net, frames):
    if state.net is not net:
        raise ValueError("stream state belongs to a different network")
    return state.push(frames)


def stream_flush(state, net):
    if state.net is not net:
        raise ValueError("stream state belongs to a different network")
    return state.flush()
