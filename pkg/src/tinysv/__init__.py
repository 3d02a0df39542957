"""Small-footprint streaming speaker-verification embeddings."""

from .config import FeatureConfig, ModelConfig, SequenceNetConfig, VladConfig, toy_config
from .errors import SVError
from .pipeline import Model, StreamSession
from .scoring import compute_eer, cosine_score, enroll

__all__ = [
    "FeatureConfig", "ModelConfig", "SequenceNetConfig", "VladConfig", "toy_config",
    "SVError", "Model", "StreamSession", "compute_eer", "cosine_score", "enroll",
]
__version__ = "0.1.0"
