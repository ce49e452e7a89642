"""Localized latent updates on frozen joint image/text embeddings."""

from .core import (ClassEmbeddingSet, FeatureSet, Metrics, cosine_sim,
                   harmonic_mean, normalize)
from .adapter import AffineAdapter, identity
from .locality import AnchorSet, MaskConfig, mask_weight, mask_weights_batch

__all__ = [
    "ClassEmbeddingSet", "FeatureSet", "Metrics", "cosine_sim",
    "harmonic_mean", "normalize", "AffineAdapter", "identity",
    "AnchorSet", "MaskConfig", "mask_weight", "mask_weights_batch",
]

__version__ = "0.1.0"
