"""Seeded synthetic joint-embedding generator.

Stands in for the frozen encoders: each class gets a latent unit direction,
its text embedding is the direction plus a controlled Gaussian offset (the
misalignment the adapter can learn to correct), and every image is the
direction plus per-component Gaussian noise, all renormalized.  Draw order is
fixed and the random source is the counter-based generator, so output files
are byte-identical across platforms for a given seed.
"""

from __future__ import annotations

import warnings

import numpy as np

from .core import ClassEmbeddingSet, FeatureSet, normalize, normalize_rows
from .rng import CounterRng


def _class_directions(dim: int, n_classes: int, rng: CounterRng) -> np.ndarray:
    return normalize_rows(rng.normal(n_classes * dim).reshape(n_classes, dim))


def _images_for(directions: np.ndarray, per_class: int, sigma: float,
                rng: CounterRng, shift: np.ndarray | None = None):
    n_classes, dim = directions.shape
    vectors = np.empty((n_classes * per_class, dim))
    labels = np.empty(n_classes * per_class, dtype=np.int64)
    row = 0
    for c in range(n_classes):
        noise = rng.normal(per_class * dim).reshape(per_class, dim)
        raw = directions[c] + sigma * noise
        if shift is not None:
            raw = raw + shift
        vectors[row:row + per_class] = normalize_rows(raw)
        labels[row:row + per_class] = c
        row += per_class
    return vectors, labels


def _names(n_classes: int) -> tuple[str, ...]:
    return tuple(f"class_{c:03d}" for c in range(n_classes))


def synth_dataset(dim: int, n_classes: int, shots_train: int,
                  n_test_per_class: int, sigma_image: float,
                  sigma_text_offset: float, seed: int):
    """Returns (train FeatureSet, test FeatureSet, ClassEmbeddingSet)."""
    if sigma_image < 0 or sigma_text_offset < 0:
        raise ValueError("sigmas must be >= 0")
    if dim < n_classes:
        warnings.warn(f"dim {dim} < n_classes {n_classes}: "
                      "class directions will be far from orthogonal")
    rng = CounterRng(seed)
    directions = _class_directions(dim, n_classes, rng)
    texts = np.array([
        normalize(directions[c] + sigma_text_offset * rng.normal(dim))
        for c in range(n_classes)])
    train_vecs, train_labels = _images_for(directions, shots_train, sigma_image, rng)
    test_vecs, test_labels = _images_for(directions, n_test_per_class,
                                         sigma_image, rng)
    names = _names(n_classes)
    train = FeatureSet(dim=dim, class_names=names, vectors=train_vecs,
                       labels=train_labels)
    test = FeatureSet(dim=dim, class_names=names, vectors=test_vecs,
                      labels=test_labels)
    classes = ClassEmbeddingSet(dim=dim, class_names=names, vectors=texts)
    return train, test, classes


def synth_shifted(dim: int, n_classes: int, n_test_per_class: int,
                  sigma_image: float, shift_magnitude: float,
                  seed: int, shift_seed: int = 1) -> FeatureSet:
    """Test set drawn off-manifold: one fixed shift vector for the whole run.

    Uses the same class directions as synth_dataset(seed) so a model trained
    on the unshifted data can be probed for locality behavior.
    """
    if shift_magnitude < 0:
        raise ValueError("shift_magnitude must be >= 0")
    rng = CounterRng(seed)
    directions = _class_directions(dim, n_classes, rng)
    shift_rng = CounterRng((seed << 8) ^ shift_seed)
    shift = shift_magnitude * normalize(shift_rng.normal(dim))
    vecs, labels = _images_for(directions, n_test_per_class, sigma_image,
                               shift_rng, shift=shift)
    return FeatureSet(dim=dim, class_names=_names(n_classes), vectors=vecs,
                      labels=labels)
