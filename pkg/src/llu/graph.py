"""Differentiable forward pass and hand-derived reverse-mode gradients.

Forward per batch: adapt each embedding, interpolate with its frozen version
under the precomputed mask weight, renormalize, score all class embeddings by
temperature-scaled cosine similarity, softmax, cross-entropy, plus the
identity regularizer on both adapters.

The mask weights depend only on frozen features, so they are constants with
respect to the parameters; gradients flow into the image adapter through every
image and into the text adapter through every class embedding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adapter import AffineAdapter, reg_gradient, reg_penalty
from .core import ClassEmbeddingSet
from .errors import NonFiniteLoss, ZeroVector
from .rng import CounterRng


@dataclass
class ForwardBatch:
    image_vectors: np.ndarray  # (N, dim) unit rows
    labels: np.ndarray         # (N,) class indices into class_vectors
    class_vectors: np.ndarray  # (K, dim) unit rows
    image_alphas: np.ndarray   # (N,) in [0, 1]
    class_alphas: np.ndarray   # (K,) in [0, 1]

    def __post_init__(self):
        self.image_vectors = np.asarray(self.image_vectors, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.class_vectors = np.asarray(self.class_vectors, dtype=np.float64)
        self.image_alphas = np.asarray(self.image_alphas, dtype=np.float64)
        self.class_alphas = np.asarray(self.class_alphas, dtype=np.float64)
        n, k = self.image_vectors.shape[0], self.class_vectors.shape[0]
        assert self.labels.shape == (n,) and self.image_alphas.shape == (n,)
        assert self.class_alphas.shape == (k,)
        for alphas in (self.image_alphas, self.class_alphas):
            if alphas.size and (alphas.min() < 0 or alphas.max() > 1):
                raise ValueError("alphas must lie in [0, 1]")

    @classmethod
    def from_sets(cls, image_vectors, labels, classes: ClassEmbeddingSet,
                  image_alphas, class_alphas) -> "ForwardBatch":
        return cls(image_vectors, labels, classes.vectors, image_alphas, class_alphas)


@dataclass
class Gradients:
    dW_I: np.ndarray
    db_I: np.ndarray
    dW_T: np.ndarray
    db_T: np.ndarray


def adapt_embed(u: np.ndarray, adapter: AffineAdapter, alpha: float,
                renorm: bool = True) -> np.ndarray:
    """normalize(alpha * (W u + b) + (1 - alpha) * u); u untouched at alpha 0."""
    u = np.asarray(u, dtype=np.float64)
    if alpha == 0.0:
        return u.copy()
    z = alpha * (adapter.W @ u + adapter.b) + (1.0 - alpha) * u
    if not renorm:
        return z
    norm = np.linalg.norm(z)
    if norm <= 1e-12:
        raise ZeroVector("interpolated vector collapsed to zero")
    return z / norm


def _adapt_rows(vectors: np.ndarray, adapter: AffineAdapter, alphas: np.ndarray,
                renorm: bool) -> tuple[np.ndarray, np.ndarray]:
    """Batched adapt_embed.  Returns (adapted rows, pre-normalization norms).

    Rows with alpha exactly 0 pass through bit-identically, which is what makes
    the frozen baseline and dirac-conservation guarantees exact.
    """
    live = alphas != 0.0
    z = vectors.copy()
    if live.any():
        g = vectors[live] @ adapter.W.T + adapter.b
        z[live] = alphas[live, None] * g + (1.0 - alphas[live, None]) * vectors[live]
    norms = np.ones(vectors.shape[0])
    if renorm and live.any():
        live_norms = np.linalg.norm(z[live], axis=1)
        if live_norms.min() <= 1e-12:
            raise ZeroVector("interpolated vector collapsed to zero")
        z[live] /= live_norms[:, None]
        norms[live] = live_norms
    return z, norms


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _forward_parts(batch: ForwardBatch, adapter_i: AffineAdapter,
                   adapter_t: AffineAdapter, tau: float, lam: float,
                   renorm: bool):
    if tau <= 0:
        raise ValueError("tau must be > 0")
    u_hat, u_norms = _adapt_rows(batch.image_vectors, adapter_i,
                                 batch.image_alphas, renorm)
    v_hat, v_norms = _adapt_rows(batch.class_vectors, adapter_t,
                                 batch.class_alphas, renorm)
    logits = (u_hat @ v_hat.T) / tau
    probs = _softmax_rows(logits)
    n = batch.image_vectors.shape[0]
    rows = np.arange(n)
    log_probs = logits - logits.max(axis=1, keepdims=True)
    log_probs = log_probs - np.log(np.exp(log_probs).sum(axis=1, keepdims=True))
    ce = -float(log_probs[rows, batch.labels].mean()) if n else 0.0
    loss = ce + reg_penalty(adapter_i, lam) + reg_penalty(adapter_t, lam)
    if not np.isfinite(loss):
        raise NonFiniteLoss(f"loss is {loss}")
    return loss, logits, probs, u_hat, u_norms, v_hat, v_norms


def forward(batch: ForwardBatch, adapters: tuple[AffineAdapter, AffineAdapter],
            tau: float, lam: float, renorm: bool = True):
    """Returns (loss, logits, probs)."""
    loss, logits, probs, *_ = _forward_parts(batch, adapters[0], adapters[1],
                                             tau, lam, renorm)
    return loss, logits, probs


def _back_through_adapt(d_hat: np.ndarray, hat: np.ndarray, norms: np.ndarray,
                        vectors: np.ndarray, alphas: np.ndarray,
                        renorm: bool) -> tuple[np.ndarray, np.ndarray]:
    """Chain rule through renormalization and interpolation.

    The normalization Jacobian at z is (I - zz_hat zz_hat^T) / ||z||; the
    interpolation contributes the constant factor alpha toward (W, b).
    """
    if renorm:
        dz = (d_hat - (d_hat * hat).sum(axis=1, keepdims=True) * hat) / norms[:, None]
    else:
        dz = d_hat
    scaled = alphas[:, None] * dz
    dW = scaled.T @ vectors
    db = scaled.sum(axis=0)
    return dW, db


def backward(batch: ForwardBatch, adapters: tuple[AffineAdapter, AffineAdapter],
             tau: float, lam: float, renorm: bool = True):
    """Returns (loss, Gradients) with analytic reverse-mode gradients."""
    adapter_i, adapter_t = adapters
    loss, _, probs, u_hat, u_norms, v_hat, v_norms = _forward_parts(
        batch, adapter_i, adapter_t, tau, lam, renorm)

    n = batch.image_vectors.shape[0]
    d_logits = probs.copy()
    d_logits[np.arange(n), batch.labels] -= 1.0
    d_logits /= n

    d_u_hat = (d_logits @ v_hat) / tau
    d_v_hat = (d_logits.T @ u_hat) / tau

    dW_I, db_I = _back_through_adapt(d_u_hat, u_hat, u_norms,
                                     batch.image_vectors, batch.image_alphas, renorm)
    dW_T, db_T = _back_through_adapt(d_v_hat, v_hat, v_norms,
                                     batch.class_vectors, batch.class_alphas, renorm)

    rw, rb = reg_gradient(adapter_i, lam)
    dW_I += rw
    db_I += rb
    rw, rb = reg_gradient(adapter_t, lam)
    dW_T += rw
    db_T += rb
    return loss, Gradients(dW_I, db_I, dW_T, db_T)


def grad_check(batch: ForwardBatch, adapters: tuple[AffineAdapter, AffineAdapter],
               tau: float, lam: float, epsilon: float = 1e-5,
               renorm: bool = True, max_coords: int = 200,
               seed: int = 0) -> float:
    """Max relative error of backward vs central finite differences.

    For dim > 32 a seeded random subsample of at least max_coords coordinates
    is checked instead of every entry.
    """
    if not 1e-7 <= epsilon <= 1e-3:
        raise ValueError("epsilon outside [1e-7, 1e-3]")
    adapter_i, adapter_t = adapters
    shared = adapter_i is adapter_t
    _, grads = backward(batch, adapters, tau, lam, renorm)

    if shared:
        params = [(adapter_i.W, grads.dW_I + grads.dW_T),
                  (adapter_i.b, grads.db_I + grads.db_T)]
    else:
        params = [(adapter_i.W, grads.dW_I), (adapter_i.b, grads.db_I),
                  (adapter_t.W, grads.dW_T), (adapter_t.b, grads.db_T)]

    dim = adapter_i.dim
    rng = CounterRng(seed)
    worst = 0.0
    for array, analytic in params:
        flat = array.reshape(-1)
        n_coords = flat.size
        if dim > 32 and n_coords > max_coords:
            order = rng.permutation(n_coords)[:max_coords]
        else:
            order = np.arange(n_coords)
        analytic_flat = analytic.reshape(-1)
        for idx in order:
            orig = flat[idx]
            flat[idx] = orig + epsilon
            up, _, _ = forward(batch, adapters, tau, lam, renorm)
            flat[idx] = orig - epsilon
            down, _, _ = forward(batch, adapters, tau, lam, renorm)
            flat[idx] = orig
            fd = (up - down) / (2.0 * epsilon)
            a = analytic_flat[idx]
            err = abs(a - fd) / max(abs(a), abs(fd), 1e-8)
            worst = max(worst, err)
    return worst
