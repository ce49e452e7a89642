"""Shared numeric domain types and elementary vector/statistics operations.

Vectors are plain float64 numpy arrays; feature sets carry their vectors as
(n, dim) row matrices with unit-norm rows.  All arithmetic is done in 64-bit
even though feature files store 32-bit floats.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimMismatch, InvalidSet, ZeroVector

ZERO_NORM_EPS = 1e-12
UNIT_NORM_TOL = 1e-5


def normalize(v: np.ndarray) -> np.ndarray:
    """Return v / ||v|| as float64. Raises ZeroVector for (near-)zero input."""
    v = np.asarray(v, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if norm <= ZERO_NORM_EPS:
        raise ZeroVector(f"cannot normalize vector with norm {norm:g}")
    return v / norm


def normalize_rows(m: np.ndarray) -> np.ndarray:
    """Row-wise normalize an (n, dim) matrix."""
    m = np.asarray(m, dtype=np.float64)
    norms = np.linalg.norm(m, axis=1)
    if norms.size and norms.min() <= ZERO_NORM_EPS:
        raise ZeroVector("row with (near-)zero norm")
    return m / norms[:, None]


def cosine_sim(a: np.ndarray, b: np.ndarray) -> float:
    """Dot product of two unit vectors (== cosine similarity)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimMismatch(f"shape {a.shape} vs {b.shape}")
    return float(np.dot(a, b))


def harmonic_mean(a: float, b: float) -> float:
    """2ab/(a+b), the base/new trade-off summary; 0 when a + b == 0."""
    if a < 0 or b < 0:
        raise ValueError("harmonic_mean expects non-negative inputs")
    if a + b == 0:
        return 0.0
    return 2.0 * a * b / (a + b)


def _check_unit_rows(vectors: np.ndarray, what: str) -> None:
    norms = np.linalg.norm(vectors, axis=1)
    if norms.size and (np.abs(norms - 1.0) > UNIT_NORM_TOL).any():
        worst = float(np.abs(norms - 1.0).max())
        raise InvalidSet(f"{what}: row norm off unit by {worst:g}")


@dataclass(frozen=True)
class FeatureSet:
    """Labeled frozen image features: (n, dim) unit rows plus class indices."""

    dim: int
    class_names: tuple[str, ...]
    vectors: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        vectors = np.asarray(self.vectors, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "class_names", tuple(self.class_names))
        if self.dim < 2:
            raise InvalidSet("dim must be >= 2")
        if not self.class_names:
            raise InvalidSet("class_names must be non-empty")
        if len(set(self.class_names)) != len(self.class_names):
            raise InvalidSet("class_names must be unique")
        if vectors.ndim != 2 or vectors.shape[1] != self.dim:
            raise InvalidSet(f"vectors must be (n, {self.dim})")
        if labels.shape != (vectors.shape[0],):
            raise InvalidSet("one label per vector required")
        if labels.size and (labels.min() < 0 or labels.max() >= len(self.class_names)):
            raise InvalidSet("label out of range")
        _check_unit_rows(vectors, "FeatureSet")
        vectors.setflags(write=False)
        labels.setflags(write=False)

    def __len__(self) -> int:
        return self.vectors.shape[0]


@dataclass(frozen=True)
class ClassEmbeddingSet:
    """One frozen text embedding per class, in class order."""

    dim: int
    class_names: tuple[str, ...]
    vectors: np.ndarray

    def __post_init__(self):
        vectors = np.asarray(self.vectors, dtype=np.float64)
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "class_names", tuple(self.class_names))
        if self.dim < 2:
            raise InvalidSet("dim must be >= 2")
        if not self.class_names:
            raise InvalidSet("class_names must be non-empty")
        if len(set(self.class_names)) != len(self.class_names):
            raise InvalidSet("class_names must be unique")
        if vectors.shape != (len(self.class_names), self.dim):
            raise InvalidSet("need exactly one vector per class")
        _check_unit_rows(vectors, "ClassEmbeddingSet")
        vectors.setflags(write=False)

    def __len__(self) -> int:
        return len(self.class_names)


@dataclass(frozen=True)
class Metrics:
    """Accuracy on base classes, new classes, and their harmonic mean."""

    base_accuracy: float
    new_accuracy: float
    harmonic_mean: float
    per_class_accuracy: dict[str, float] = field(default_factory=dict)

    @classmethod
    def from_accuracies(cls, base: float, new: float,
                        per_class: dict[str, float] | None = None) -> "Metrics":
        return cls(base, new, harmonic_mean(base, new), dict(per_class or {}))
