"""Additive angular margin logits with focal cross-entropy.

Forward values only; gradients are checked numerically with
``numeric_gradient``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import BadIndex, ZeroVector

COS_CLAMP = 1e-7


@dataclass(frozen=True)
class ArcFaceConfig:
    num_classes: int
    scale: float = 15.0
    margin: float = 0.5
    gamma: float = 2.0  # focal exponent

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        if not 0 <= self.margin < np.pi:
            raise ValueError("margin must be in [0, pi)")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")


def normalize_anchors(anchors):
    a = np.asarray(anchors, dtype=np.float64)
    norms = np.linalg.norm(a, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ZeroVector("class anchor with zero norm")
    return a / norms


def arcface_logits(embedding, anchors, target, cfg):
    """``s*cos(theta_j)`` for every class, ``s*cos(theta_target + m)`` for the target."""
    e = np.asarray(embedding, dtype=np.float64)
    n = np.linalg.norm(e)
    if not n > 0:
        raise ZeroVector("embedding has zero norm")
    w = normalize_anchors(anchors)
    if not 0 <= target < len(w):
        raise BadIndex(f"target {target} outside [0, {len(w)})")
    cos = np.clip(w @ (e / n), -1 + COS_CLAMP, 1 - COS_CLAMP)
    logits = cfg.scale * cos
    logits[target] = cfg.scale * np.cos(np.arccos(cos[target]) + cfg.margin)
    return logits


def focal_cross_entropy(logits, target, gamma=2.0):
    """``-(1 - p_t)^gamma * log(p_t)`` with ``p = softmax(logits)``."""
    z = np.asarray(logits, dtype=np.float64)
    if not 0 <= target < len(z):
        raise BadIndex(f"target {target} outside [0, {len(z)})")
    zmax = z.max()
    log_p = z[target] - zmax - np.log(np.exp(z - zmax).sum())
    p = np.exp(log_p)
    return float(-((1.0 - p) ** gamma) * log_p)


def arcface_focal_loss(embedding, anchors, target, cfg):
    return focal_cross_entropy(arcface_logits(embedding, anchors, target, cfg), target, cfg.gamma)


def numeric_gradient(f, x, h=1e-4):
    """Central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step.flat[i] = h
        grad.flat[i] = (f(x + step) - f(x - step)) / (2 * h)
    return grad
