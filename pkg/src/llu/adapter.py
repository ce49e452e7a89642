"""Trainable affine map g(x) = Wx + b with identity regularization.

The regularizer keeps g near the identity so interpolation between frozen and
adapted embeddings stays sensible.  Training uses SQUARED norms
lambda * (||W - I||_F^2 + ||b||^2) for a smooth gradient at the identity,
where training starts; the unsquared sum ||W - I|| + ||b|| is kept as the
reporting metric.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimMismatch
from .rng import CounterRng


@dataclass
class AffineAdapter:
    W: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        d = self.b.shape[0]
        if self.W.shape != (d, d):
            raise DimMismatch(f"W shape {self.W.shape} vs b length {d}")
        if not (np.isfinite(self.W).all() and np.isfinite(self.b).all()):
            raise ValueError("adapter parameters must be finite")

    @property
    def dim(self) -> int:
        return self.b.shape[0]

    def copy(self) -> "AffineAdapter":
        return AffineAdapter(self.W.copy(), self.b.copy())


def identity(dim: int) -> AffineAdapter:
    """The identity map: W == I, b == 0 (exact)."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    return AffineAdapter(np.eye(dim), np.zeros(dim))


def random_init(dim: int, rng: CounterRng) -> AffineAdapter:
    """Gaussian W with std 1/sqrt(dim), zero b (the rand-init ablation)."""
    w = rng.normal(dim * dim).reshape(dim, dim) / np.sqrt(dim)
    return AffineAdapter(w, np.zeros(dim))


def apply(adapter: AffineAdapter, u: np.ndarray) -> np.ndarray:
    """W u + b, NOT renormalized; normalization happens after interpolation."""
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (adapter.dim,):
        raise DimMismatch(f"vector shape {u.shape} vs adapter dim {adapter.dim}")
    return adapter.W @ u + adapter.b


def reg_penalty(adapter: AffineAdapter, lam: float) -> float:
    """lambda * (||W - I||_F^2 + ||b||^2), the training-time regularizer."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    if lam == 0:
        return 0.0
    dw = adapter.W - np.eye(adapter.dim)
    return lam * (float(np.sum(dw * dw)) + float(np.dot(adapter.b, adapter.b)))


def reg_gradient(adapter: AffineAdapter, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """d/dW = 2 lambda (W - I), d/db = 2 lambda b."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    return 2.0 * lam * (adapter.W - np.eye(adapter.dim)), 2.0 * lam * adapter.b


def distance_to_identity(adapter: AffineAdapter) -> float:
    """||W - I||_F + ||b||, unsquared, for reporting."""
    return float(np.linalg.norm(adapter.W - np.eye(adapter.dim)) +
                 np.linalg.norm(adapter.b))
