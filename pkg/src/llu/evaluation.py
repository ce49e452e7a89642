"""Zero-shot classification, base/new protocol, and metric reporting.

Base and new halves are scored as separate closed-vocabulary problems: the
classifier only sees the class embeddings of the half being evaluated.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .core import ClassEmbeddingSet, FeatureSet, Metrics
from .errors import DimMismatch, EmptyEvaluationSet, TooFewClasses
from .graph import _adapt_rows
from .locality import mask_weights_batch
from .rng import CounterRng
from .train import TrainedModel


def _adapted(vectors: np.ndarray, model: TrainedModel | None,
             side: str) -> np.ndarray:
    if model is None:
        return vectors
    if vectors.shape[1] != model.dim:
        raise DimMismatch(f"vectors dim {vectors.shape[1]} vs model dim {model.dim}")
    anchors = model.anchors_I if side == "image" else model.anchors_T
    adapter = model.adapter_I if side == "image" else model.adapter_T
    alphas = mask_weights_batch(vectors, anchors, model.mask)
    adapted, _ = _adapt_rows(vectors, adapter, alphas, renorm=True)
    return adapted


def classify(u: np.ndarray, model: TrainedModel | None,
             classes: ClassEmbeddingSet) -> tuple[int, np.ndarray]:
    """Predicted class index and softmax probabilities for one vector."""
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (classes.dim,):
        raise DimMismatch(f"vector shape {u.shape} vs class dim {classes.dim}")
    uh = _adapted(u[None, :], model, "image")
    vh = _adapted(classes.vectors, model, "text")
    sims = (uh @ vh.T)[0]
    tau = model.tau if model is not None else 0.01
    logits = sims / tau
    e = np.exp(logits - logits.max())
    return int(np.argmax(sims)), e / e.sum()


def split_base_new(class_names) -> tuple[np.ndarray, np.ndarray]:
    """First ceil(K/2) classes in stored order are base, the rest new."""
    k = len(class_names)
    if k < 2:
        raise TooFewClasses(f"need >= 2 classes, have {k}")
    cut = (k + 1) // 2
    return np.arange(cut), np.arange(cut, k)


def _decisions(features: FeatureSet, model: TrainedModel | None,
               classes: ClassEmbeddingSet,
               restrict: np.ndarray | None) -> tuple[np.ndarray, np.ndarray]:
    """(labels, predictions) over the restricted closed set of classes."""
    if features.dim != classes.dim:
        raise DimMismatch("feature/class dim mismatch")
    if restrict is None:
        keep = np.arange(len(features))
        class_idx = np.arange(len(classes))
    else:
        class_idx = np.asarray(restrict, dtype=np.int64)
        keep = np.flatnonzero(np.isin(features.labels, class_idx))
    if keep.size == 0:
        raise EmptyEvaluationSet("no records to evaluate")
    uh = _adapted(features.vectors[keep], model, "image")
    vh = _adapted(classes.vectors[class_idx], model, "text")
    preds = class_idx[(uh @ vh.T).argmax(axis=1)]
    return features.labels[keep], preds


def evaluate(features: FeatureSet, model: TrainedModel | None,
             classes: ClassEmbeddingSet,
             restrict: np.ndarray | None = None) -> tuple[float, dict[str, float]]:
    """(accuracy, per-class accuracy) over the restricted class subset."""
    labels, preds = _decisions(features, model, classes, restrict)
    correct = preds == labels
    per_class = {}
    for c in np.unique(labels):
        sel = labels == c
        per_class[classes.class_names[c]] = float(correct[sel].mean())
    return float(correct.mean()), per_class


def evaluate_base_new(features: FeatureSet, model: TrainedModel | None,
                      classes: ClassEmbeddingSet) -> Metrics:
    """Closed-set accuracy on each half of the class split, plus H."""
    base_idx, new_idx = split_base_new(classes.class_names)
    base_acc, base_pc = evaluate(features, model, classes, base_idx)
    new_acc, new_pc = evaluate(features, model, classes, new_idx)
    return Metrics.from_accuracies(base_acc, new_acc, {**base_pc, **new_pc})


def sample_shots(features: FeatureSet, shots: int, seed: int) -> FeatureSet:
    """min(shots, available) records per class, sampled without replacement."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    rng = CounterRng(seed)
    keep: list[int] = []
    for c in range(len(features.class_names)):
        idx = np.flatnonzero(features.labels == c)
        if idx.size == 0:
            continue
        order = rng.permutation(idx.size)
        keep.extend(idx[order[:min(shots, idx.size)]])
    keep = np.array(sorted(keep), dtype=np.int64)
    return FeatureSet(dim=features.dim, class_names=features.class_names,
                      vectors=features.vectors[keep],
                      labels=features.labels[keep])


@dataclass
class Report:
    base: float | None
    new: float | None
    harmonic_mean: float | None
    accuracy: float | None
    per_class: dict[str, float]
    n_eval: int
    model_fingerprint: str | None

    def to_dict(self) -> dict:
        return {"base": self.base, "new": self.new, "H": self.harmonic_mean,
                "accuracy": self.accuracy, "per_class": self.per_class,
                "n_eval": self.n_eval, "model_fingerprint": self.model_fingerprint}


def write_report(report: Report, path: str | os.PathLike) -> None:
    tmp = os.fspath(path) + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(report.to_dict(), fh, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)
