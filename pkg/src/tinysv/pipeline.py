"""End-to-end embedding: PCM -> log-Mel -> sequence network -> VLAD."""

import numpy as np

from . import features, store, vlad
from .errors import SignalTooShort, UnsupportedMode
from .sequence import build_sequence_net


class Model:
    """A loaded model; immutable and shareable across threads."""

    def __init__(self, cfg, weights):
        self.cfg = cfg.validate()
        self.weights = weights
        self.net = build_sequence_net(cfg.sequence, weights)
        self.vlad = vlad.build_vlad(cfg.vlad, weights)

    @classmethod
    def load(cls, path, expected_config=None):
        return cls(*store.load_model(path, expected_config))

    @classmethod
    def random(cls, cfg, seed=0):
        return cls(cfg, store.random_init(cfg, seed))

    def features(self, pcm):
        feat = features.compute_log_mel(pcm, self.cfg.features)
        return features.apply_mvn(feat, self.cfg.features.mvn)

    def sequence_batch(self, pcm):
        return self.net.forward_batch(self.features(pcm))

    def embed_batch(self, pcm):
        return vlad.embed_frames(self.sequence_batch(pcm), self.vlad)

    def stream(self, keep_frames=False):
        return StreamSession(self, keep_frames)

    def embed_stream(self, pcm, chunk_samples=1600):
        session = self.stream()
        for start in range(0, len(pcm), chunk_samples):
            session.push(pcm[start:start + chunk_samples])
        return session.finish()

    def embed(self, pcm, mode="batch"):
        if mode == "batch":
            return self.embed_batch(pcm)
        if mode == "stream":
            return self.embed_stream(pcm)
        raise UnsupportedMode(f"unknown embedding mode {mode!r}")


class StreamSession:
    """Streaming front end and sequence network feeding a VLAD accumulator.

    Only the final normalization and projection run after ``finish``.
    """

    def __init__(self, model, keep_frames=False):
        self.model = model
        self.front = features.FeatureStreamState(model.cfg.features, mvn=model.cfg.features.mvn)
        self.seq = model.net.new_stream()
        self.acc = vlad.VladAccumulator.for_params(model.vlad)
        self.kept = [] if keep_frames else None

    def _consume(self, frames):
        if len(frames):
            self.acc.push(frames, self.model.vlad)
            if self.kept is not None:
                self.kept.append(frames)

    def push(self, pcm_chunk):
        feats = self.front.push(pcm_chunk)
        if len(feats):
            self._consume(self.seq.push(feats))

    def finish(self):
        if self.seq.frames_consumed < self.model.cfg.sequence.pool_stride:
            raise SignalTooShort("utterance shorter than one pooled frame")
        tail = self.front.flush()
        if len(tail):
            self._consume(self.seq.push(tail))
        self._consume(self.seq.flush())
        return vlad.finalize_embedding(self.acc, self.model.vlad)

    def sequence_frames(self):
        n = self.model.net.out_channels
        if not self.kept:
            return np.zeros((0, n), dtype=np.float32)
        return np.concatenate(self.kept)
