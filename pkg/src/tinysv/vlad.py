"""Ghost-cluster VLAD aggregation with a shared, cluster-averaged projection.

Frames are softly assigned over ``K + G`` clusters; only the ``K`` real
clusters accumulate residual descriptors. Each descriptor is L2-normalized,
projected by one shared ``D x C`` matrix, averaged over clusters and the
result L2-normalized. Because the projection is shared, a new cluster costs
one assignment row plus one centroid.

The accumulator holds only sums, so it can be fed frame by frame while the
sequence network streams.
"""

from dataclasses import dataclass

import numpy as np

from .errors import EmptyUtterance, MissingTensor, ShapeError
from .ops import DTYPE


@dataclass(frozen=True)
class VladParams:
    assign_weights: np.ndarray  # (K+G, C)
    assign_bias: np.ndarray  # (K+G,)
    centroids: np.ndarray  # (K, C)
    projection: np.ndarray  # (D, C)
    projection_bias: np.ndarray  # (D,)

    @property
    def clusters(self):
        return self.centroids.shape[0]

    @property
    def total_clusters(self):
        return self.assign_weights.shape[0]

    @property
    def in_channels(self):
        return self.centroids.shape[1]

    @property
    def embed_dim(self):
        return self.projection.shape[0]


TENSOR_FIELDS = ("assign_weights", "assign_bias", "centroids", "projection", "projection_bias")


def tensor_shapes(cfg):
    o, k, c, d = cfg.total_clusters, cfg.clusters, cfg.in_channels, cfg.embed_dim
    return {
        "vlad.assign_weights": (o, c),
        "vlad.assign_bias": (o,),
        "vlad.centroids": (k, c),
        "vlad.projection": (d, c),
        "vlad.projection_bias": (d,),
    }


def param_count(cfg):
    return sum(int(np.prod(s)) for s in tensor_shapes(cfg).values())


def build_vlad(cfg, weights):
    cfg.validate()
    for name, shape in tensor_shapes(cfg).items():
        if name not in weights:
            raise MissingTensor(name)
        if tuple(np.shape(weights[name])) != shape:
            raise ShapeError(name, shape, tuple(np.shape(weights[name])))
    return VladParams(*(weights[f"vlad.{f}"] for f in TENSOR_FIELDS))


def soft_assign(frames, p):
    """Row-wise softmax over all clusters, ghosts included. Shape (T, K+G)."""
    x = np.asarray(frames, dtype=DTYPE)
    if x.ndim != 2 or x.shape[1] != p.in_channels:
        raise ShapeError("soft_assign input", f"(T, {p.in_channels})", x.shape)
    logits = x @ p.assign_weights.T.astype(DTYPE) + p.assign_bias.astype(DTYPE)
    logits = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(logits)
    return e / e.sum(axis=1, keepdims=True)


class VladAccumulator:
    """Assignment-weighted feature sums and masses for the non-ghost clusters."""

    def __init__(self, clusters, channels):
        self.weighted_feature_sums = np.zeros((clusters, channels), dtype=DTYPE)
        self.assignment_mass = np.zeros(clusters, dtype=DTYPE)
        self.frames_seen = 0

    @classmethod
    def for_params(cls, p):
        return cls(p.clusters, p.in_channels)

    def accumulate(self, frames, assignments):
        x = np.asarray(frames, dtype=DTYPE)
        a = np.asarray(assignments, dtype=DTYPE)
        k, c = self.weighted_feature_sums.shape
        if x.ndim != 2 or x.shape[1] != c:
            raise ShapeError("accumulate frames", f"(T, {c})", x.shape)
        if a.ndim != 2 or len(a) != len(x) or a.shape[1] < k:
            raise ShapeError("accumulate assignments", f"({len(x)}, >={k})", a.shape)
        # Ghost columns (index >= K) are discarded.
        a = a[:, :k]
        self.weighted_feature_sums += a.T @ x
        self.assignment_mass += a.sum(axis=0)
        self.frames_seen += len(x)
        return self

    def push(self, frames, p):
        """Assign and accumulate in one step."""
        return self.accumulate(frames, soft_assign(frames, p))


def accumulate(acc, frames, assignments):
    return acc.accumulate(frames, assignments)


def _l2_normalize_rows(v):
    norms = np.sqrt((v * v).sum(axis=-1, keepdims=True))
    return np.divide(v, norms, out=np.zeros_like(v), where=norms > 0)


def finalize_embedding(acc, p):
    if acc.frames_seen == 0:
        raise EmptyUtterance("no frames were accumulated")
    residuals = acc.weighted_feature_sums - acc.assignment_mass[:, None] * p.centroids.astype(DTYPE)
    residuals = _l2_normalize_rows(residuals)
    # Projection is linear and shared, so averaging descriptors first is exact
    # and costs D*C instead of K*D*C multiply-adds.
    pooled = residuals.mean(axis=0)
    emb = p.projection.astype(DTYPE) @ pooled + p.projection_bias.astype(DTYPE)
    return _l2_normalize_rows(emb)


def embed_frames(frames, p):
    """Single-shot embedding of a whole sequence-network output."""
    return finalize_embedding(VladAccumulator.for_params(p).push(frames, p), p)
