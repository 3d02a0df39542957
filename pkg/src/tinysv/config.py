"""Model configuration schema.

A ``ModelConfig`` groups the front-end, sequence network and aggregator
settings. It serializes to a JSON document with stable field names (see
README) and is embedded verbatim in every weight container.
"""

import dataclasses
import json
from dataclasses import dataclass, field

from .errors import ConfigError

FORMAT_VERSION = 1

MVN_MODES = ("utterance", "causal")
MFM_VARIANTS = ("halving", "doubling")
PADDINGS = ("same", "causal")


@dataclass(frozen=True)
class FeatureConfig:
    sample_rate_hz: int = 16000
    n_mels: int = 64
    window_ms: float = 20.0
    hop_ms: float = 10.0
    fmin_hz: float = 0.0
    fmax_hz: float | None = None
    log_floor: float = 1e-10
    # Front-end conventions stored so models and front ends stay paired.
    window: str = "hamming"
    n_fft: int = 512
    mel_scale: str = "htk"
    mvn: str = "causal"

    @property
    def win_length(self):
        return int(round(self.sample_rate_hz * self.window_ms / 1000.0))

    @property
    def hop_length(self):
        return int(round(self.sample_rate_hz * self.hop_ms / 1000.0))

    @property
    def upper_hz(self):
        return self.sample_rate_hz / 2.0 if self.fmax_hz is None else float(self.fmax_hz)

    @property
    def frame_rate_hz(self):
        return self.sample_rate_hz / self.hop_length

    def validate(self):
        if self.sample_rate_hz <= 0:
            raise ConfigError("sample_rate_hz", "must be positive")
        if self.n_mels < 1:
            raise ConfigError("n_mels", "must be >= 1")
        if not self.hop_ms > 0:
            raise ConfigError("hop_ms", "must be positive")
        if self.window_ms < self.hop_ms:
            raise ConfigError("window_ms", "must be >= hop_ms")
        if self.hop_length < 1:
            raise ConfigError("hop_ms", "shorter than one sample")
        if not self.fmin_hz < self.upper_hz:
            raise ConfigError("fmin_hz", "must be below fmax_hz")
        if self.upper_hz > self.sample_rate_hz / 2.0:
            raise ConfigError("fmax_hz", "must not exceed sample_rate/2")
        if self.log_floor <= 0:
            raise ConfigError("log_floor", "must be positive")
        if self.window not in ("hamming", "hann"):
            raise ConfigError("window", f"unknown window {self.window!r}")
        if self.n_fft < self.win_length:
            raise ConfigError("n_fft", "must be >= window length in samples")
        if self.mel_scale != "htk":
            raise ConfigError("mel_scale", "only 'htk' is supported")
        if self.mvn not in MVN_MODES:
            raise ConfigError("mvn", f"must be one of {MVN_MODES}")


@dataclass(frozen=True)
class SequenceNetConfig:
    in_channels: int = 64
    filters: int = 96
    kernel: int = 15
    blocks: int = 5
    repeats: int = 3
    pool_stride: int = 2
    mfm_variant: str = "halving"
    head: bool = True
    padding: str = "same"
    bn_eps: float = 1e-5

    @property
    def n_tcs(self):
        return 1 + self.blocks * (self.repeats + 1) + (1 if self.head else 0)

    def validate(self):
        for name in ("in_channels", "filters", "blocks", "repeats"):
            if getattr(self, name) < 1:
                raise ConfigError(name, "must be >= 1")
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ConfigError("kernel", "must be a positive odd integer")
        if self.pool_stride != 2:
            raise ConfigError("pool_stride", "only stride 2 is supported")
        if self.mfm_variant not in MFM_VARIANTS:
            raise ConfigError("mfm_variant", f"must be one of {MFM_VARIANTS}")
        if self.mfm_variant == "halving" and self.filters % 2:
            raise ConfigError("filters", "must be even for the halving MFM variant")
        if self.padding not in PADDINGS:
            raise ConfigError("padding", f"must be one of {PADDINGS}")
        if self.bn_eps <= 0:
            raise ConfigError("bn_eps", "must be positive")


@dataclass(frozen=True)
class VladConfig:
    clusters: int = 32
    ghosts: int = 3
    in_channels: int = 96
    embed_dim: int = 96

    @property
    def total_clusters(self):
        return self.clusters + self.ghosts

    def validate(self):
        if self.clusters < 1:
            raise ConfigError("clusters", "must be >= 1")
        if self.ghosts < 0:
            raise ConfigError("ghosts", "must be >= 0")
        if self.in_channels < 1:
            raise ConfigError("in_channels", "must be >= 1")
        if self.embed_dim < 1:
            raise ConfigError("embed_dim", "must be >= 1")


@dataclass(frozen=True)
class ModelConfig:
    features: FeatureConfig = field(default_factory=FeatureConfig)
    sequence: SequenceNetConfig = field(default_factory=SequenceNetConfig)
    vlad: VladConfig = field(default_factory=VladConfig)
    format_version: int = FORMAT_VERSION

    def validate(self):
        self.features.validate()
        self.sequence.validate()
        self.vlad.validate()
        if self.format_version != FORMAT_VERSION:
            raise ConfigError("format_version", f"unsupported version {self.format_version}")
        if self.features.n_mels != self.sequence.in_channels:
            raise ConfigError("sequence.in_channels",
                              f"{self.sequence.in_channels} != features.n_mels {self.features.n_mels}")
        if self.sequence.filters != self.vlad.in_channels:
            raise ConfigError("vlad.in_channels",
                              f"{self.vlad.in_channels} != sequence.filters {self.sequence.filters}")
        return self

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        sections = {"features": FeatureConfig, "sequence": SequenceNetConfig, "vlad": VladConfig}
        kwargs = {}
        for key, value in d.items():
            if key in sections:
                klass = sections[key]
                known = {f.name for f in dataclasses.fields(klass)}
                unknown = set(value) - known
                if unknown:
                    raise ConfigError(f"{key}.{sorted(unknown)[0]}", "unknown field")
                kwargs[key] = klass(**value)
            elif key == "format_version":
                kwargs[key] = int(value)
            else:
                raise ConfigError(key, "unknown field")
        return cls(**kwargs).validate()

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("<document>", f"invalid JSON: {exc}") from None
        if not isinstance(d, dict):
            raise ConfigError("<document>", "expected a JSON object")
        return cls.from_dict(d)


def toy_config(blocks=1, repeats=1, filters=8, n_mels=8, clusters=4, ghosts=2,
               embed_dim=8, kernel=3, mfm_variant="halving"):
    """Small config for fast tests and demos."""
    return ModelConfig(
        features=FeatureConfig(n_mels=n_mels),
        sequence=SequenceNetConfig(in_channels=n_mels, filters=filters, kernel=kernel,
                                   blocks=blocks, repeats=repeats, mfm_variant=mfm_variant),
        vlad=VladConfig(clusters=clusters, ghosts=ghosts, in_channels=filters,
                        embed_dim=embed_dim),
    ).validate()
