"""Locality interpolation weight alpha(x, D) and its ablation variants.

alpha decides how far the adapted embedding is trusted away from the
fine-tuning datapoints: it decays exponentially with cosine distance to the
nearest anchor, capped by the global damping beta.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import normalize_rows
from .errors import DimMismatch, EmptyAnchorSet

MODES = ("smooth", "constant", "dirac", "off")


@dataclass(frozen=True)
class AnchorSet:
    """Unit vectors the update is localized around (images or class texts)."""

    vectors: np.ndarray  # (m, dim), unit rows

    def __post_init__(self):
        vectors = np.asarray(self.vectors, dtype=np.float64).copy()
        norms = np.linalg.norm(vectors, axis=1)
        # renormalize only rows that need it, so unit inputs pass through exactly
        off = np.abs(norms - 1.0) > 1e-12
        if off.any():
            vectors[off] = normalize_rows(vectors[off])
        object.__setattr__(self, "vectors", vectors)
        self.vectors.setflags(write=False)

    def __len__(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True)
class MaskConfig:
    beta: float = 0.5
    gamma: float = 20.0
    mode: str = "smooth"
    dirac_threshold: float = 1e-3  # cosine distance; paper says only "small"
    dirac_alpha: str = "beta"  # "beta" keeps global damping inside the threshold

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta {self.beta} outside [0, 1]")
        if not (np.isfinite(self.gamma) and self.gamma >= 0):
            raise ValueError(f"gamma {self.gamma} must be finite and >= 0")
        if self.mode not in MODES:
            raise ValueError(f"mode {self.mode!r} not one of {MODES}")
        if self.dirac_threshold < 0:
            raise ValueError("dirac_threshold must be >= 0")
        if self.dirac_alpha not in ("beta", "one"):
            raise ValueError("dirac_alpha must be 'beta' or 'one'")


def mask_weights_batch(us: np.ndarray, anchors: AnchorSet | None,
                       cfg: MaskConfig) -> np.ndarray:
    """alpha for each row of us; vectorized over the batch."""
    us = np.atleast_2d(np.asarray(us, dtype=np.float64))
    n = us.shape[0]
    if cfg.mode == "off":
        return np.zeros(n)
    if cfg.mode == "constant":
        return np.full(n, cfg.beta)
    if anchors is None or len(anchors) == 0:
        raise EmptyAnchorSet(f"mode {cfg.mode!r} needs a non-empty anchor set")
    if us.shape[1] != anchors.dim:
        raise DimMismatch(f"probe dim {us.shape[1]} vs anchor dim {anchors.dim}")
    max_sim = (us @ anchors.vectors.T).max(axis=1)
    if cfg.mode == "smooth":
        return cfg.beta * np.exp(-cfg.gamma * (1.0 - max_sim))
    # dirac: clamp the exponential factor by a distance threshold
    inside = 1.0 - max_sim < cfg.dirac_threshold
    level = cfg.beta if cfg.dirac_alpha == "beta" else 1.0
    return np.where(inside, level, 0.0)


def mask_weight(u: np.ndarray, anchors: AnchorSet | None, cfg: MaskConfig) -> float:
    """alpha(u, anchors) for a single probe vector."""
    return float(mask_weights_batch(np.asarray(u)[None, :], anchors, cfg)[0])
