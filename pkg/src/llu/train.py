"""Optimization loop producing a TrainedModel.

Anchor construction (clustering the image features when they outgrow the
budget), minibatched momentum SGD with cosine learning-rate decay, and the
ablation presets.  Mask weights are precomputed once per run: the features and
anchors are frozen, so alpha never changes during training.

The regularizer is part of the gradient (plain momentum SGD on the full
objective), so the reported epoch losses track exactly what is being
minimized.  Note the heavy-ball stability bound lr * 2 * lambda < 2 * (1 + mu):
very large lambda values oscillate during the high-lr epochs and only settle
once the cosine schedule decays, which is why the default lambda is small.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .adapter import AffineAdapter, identity, random_init
from .cluster import agglomerate
from .core import ClassEmbeddingSet, FeatureSet
from .errors import NonFiniteLoss, UnknownPreset
from .graph import ForwardBatch, backward
from .locality import AnchorSet, MaskConfig, mask_weights_batch
from .rng import CounterRng

MODEL_FORMAT_VERSION = 1

# Default lambda for the squared-norm regularizer.  Large values (1e3 and up)
# pin the adapters so hard that base-class gains vanish on the synthetic task;
# they remain available through TrainConfig / --lambda.
DEFAULT_LAMBDA = 1.0

PRESETS = ("default", "no-cluster", "no-damp", "no-mask", "dirac-mask",
           "no-reg", "rand-init", "linear")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.002
    momentum: float = 0.9
    epochs: int | None = None  # None: derived from the per-class shot count
    batch_size: int = 32
    lam: float = DEFAULT_LAMBDA
    mask: MaskConfig = field(default_factory=MaskConfig)
    max_anchors: int = 512
    shared_adapter: bool = False
    tau: float = 0.01
    seed: int = 0
    init: str = "identity"
    renorm: bool = True
    warmup_epochs: int = 1
    warmup_lr: float = 1e-5

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        if self.epochs is not None and self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.max_anchors < 1:
            raise ValueError("max_anchors must be >= 1")
        if self.tau <= 0:
            raise ValueError("tau must be > 0")
        if self.init not in ("identity", "random"):
            raise ValueError("init must be 'identity' or 'random'")
        if self.warmup_epochs < 0:
            raise ValueError("warmup_epochs must be >= 0")


def ablation_preset(name: str) -> TrainConfig:
    """TrainConfig for one of the named ablation variants."""
    base = TrainConfig()
    if name == "default":
        return base
    if name == "no-cluster":
        return replace(base, max_anchors=2 ** 31 - 1)
    if name == "no-damp":
        return replace(base, mask=replace(base.mask, beta=1.0))
    if name == "no-mask":
        return replace(base, mask=replace(base.mask, mode="constant"))
    if name == "dirac-mask":
        return replace(base, mask=replace(base.mask, mode="dirac"))
    if name == "no-reg":
        return replace(base, lam=0.0)
    if name == "rand-init":
        return replace(base, init="random")
    if name == "linear":
        # plain adapter output, no interpolation: alpha == 1 everywhere
        return replace(base, mask=MaskConfig(beta=1.0, gamma=0.0, mode="constant"),
                       lam=0.0, init="random")
    raise UnknownPreset(name)


def derive_epochs(shots: int) -> int:
    """Epoch budget by per-class shot count, mirroring the inherited recipe."""
    if shots <= 1:
        return 50
    if shots <= 4:
        return 100
    return 200


@dataclass
class TrainedModel:
    adapter_I: AffineAdapter
    adapter_T: AffineAdapter
    anchors_I: AnchorSet
    anchors_T: AnchorSet
    mask: MaskConfig
    tau: float
    dim: int
    class_names: tuple[str, ...]
    config_fingerprint: str
    shared: bool = False

    def fingerprint(self) -> str:
        payload = json.dumps(model_to_dict(self), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:16]


def _config_fingerprint(cfg: TrainConfig, epochs: int) -> str:
    payload = json.dumps({
        "learning_rate": cfg.learning_rate, "momentum": cfg.momentum,
        "epochs": epochs, "batch_size": cfg.batch_size, "lambda": cfg.lam,
        "mask": [cfg.mask.beta, cfg.mask.gamma, cfg.mask.mode,
                 cfg.mask.dirac_threshold, cfg.mask.dirac_alpha],
        "max_anchors": cfg.max_anchors, "shared_adapter": cfg.shared_adapter,
        "tau": cfg.tau, "seed": cfg.seed, "init": cfg.init,
        "renorm": cfg.renorm, "warmup_epochs": cfg.warmup_epochs,
        "warmup_lr": cfg.warmup_lr,
    }, sort_keys=True).encode()
    return hashlib.sha256(payload).hexdigest()[:16]


def build_anchors(features: FeatureSet, classes: ClassEmbeddingSet,
                  cfg: TrainConfig) -> tuple[AnchorSet, AnchorSet]:
    """Image anchors (clustered past the budget) and per-class text anchors."""
    if len(features) == 0:
        raise ValueError("cannot build anchors from an empty feature set")
    if len(features) > cfg.max_anchors:
        anchors_i = agglomerate(features.vectors, cfg.max_anchors)
    else:
        anchors_i = AnchorSet(features.vectors.copy())
    anchors_t = AnchorSet(classes.vectors.copy())
    return anchors_i, anchors_t


def _init_adapters(dim: int, cfg: TrainConfig):
    if cfg.init == "identity":
        make = lambda stream: identity(dim)
    else:
        make = lambda stream: random_init(dim, CounterRng((cfg.seed << 1) ^ stream))
    adapter_i = make(0x11)
    adapter_t = adapter_i if cfg.shared_adapter else make(0x22)
    return adapter_i, adapter_t


def _cosine_lr(cfg: TrainConfig, epoch: int, epochs: int) -> float:
    if epoch < cfg.warmup_epochs:
        return cfg.warmup_lr
    span = max(epochs - cfg.warmup_epochs - 1, 1)
    t = epoch - cfg.warmup_epochs
    return cfg.learning_rate * 0.5 * (1.0 + np.cos(np.pi * t / span))


def train(features: FeatureSet, classes: ClassEmbeddingSet, cfg: TrainConfig,
          log=None) -> tuple[TrainedModel, list[float]]:
    """Run the full loop; returns the model and mean loss per epoch.

    `log`, when given, is called as log(epoch, mean_loss) after each epoch.
    """
    if len(features) == 0:
        raise ValueError("training set is empty")
    if features.dim != classes.dim:
        raise ValueError("feature/class dim mismatch")
    if int(features.labels.max()) >= len(classes):
        raise ValueError("feature label outside the class-embedding set")

    dim = features.dim
    n = len(features)
    counts = np.bincount(features.labels, minlength=len(classes))
    shots = int(counts[counts > 0].max())
    epochs = cfg.epochs if cfg.epochs is not None else derive_epochs(shots)
    batch = min(cfg.batch_size, n)

    adapter_i, adapter_t = _init_adapters(dim, cfg)
    anchors_i, anchors_t = build_anchors(features, classes, cfg)
    image_alphas = mask_weights_batch(features.vectors, anchors_i, cfg.mask)
    class_alphas = mask_weights_batch(classes.vectors, anchors_t, cfg.mask)

    vel = [np.zeros((dim, dim)), np.zeros(dim), np.zeros((dim, dim)), np.zeros(dim)]
    rng = CounterRng(cfg.seed)
    steps_per_epoch = (n + batch - 1) // batch
    epoch_losses: list[float] = []

    for epoch in range(epochs):
        lr = _cosine_lr(cfg, epoch, epochs)
        perm = rng.permutation(n)
        step_losses = []
        for step in range(steps_per_epoch):
            idx = perm[step * batch:(step + 1) * batch]
            fb = ForwardBatch(features.vectors[idx], features.labels[idx],
                              classes.vectors, image_alphas[idx], class_alphas)
            try:
                loss, grads = backward(fb, (adapter_i, adapter_t),
                                       cfg.tau, cfg.lam, cfg.renorm)
            except NonFiniteLoss as exc:
                raise NonFiniteLoss(
                    f"non-finite loss at epoch {epoch} step {step}",
                    step=epoch * steps_per_epoch + step) from exc

            if cfg.shared_adapter:
                updates = [(adapter_i.W, grads.dW_I + grads.dW_T),
                           (adapter_i.b, grads.db_I + grads.db_T)]
            else:
                updates = [(adapter_i.W, grads.dW_I), (adapter_i.b, grads.db_I),
                           (adapter_t.W, grads.dW_T), (adapter_t.b, grads.db_T)]
            for k, (param, grad) in enumerate(updates):
                vel[k] = cfg.momentum * vel[k] - lr * grad
                param += vel[k]
            step_losses.append(loss)
        mean_loss = float(np.mean(step_losses)) if step_losses else 0.0
        epoch_losses.append(mean_loss)
        if log is not None:
            log(epoch, mean_loss)

    model = TrainedModel(
        adapter_I=adapter_i, adapter_T=adapter_t,
        anchors_I=anchors_i, anchors_T=anchors_t,
        mask=cfg.mask, tau=cfg.tau, dim=dim,
        class_names=features.class_names,
        config_fingerprint=_config_fingerprint(cfg, epochs),
        shared=cfg.shared_adapter)
    return model, epoch_losses


def model_to_dict(model: TrainedModel) -> dict:
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "dim": model.dim,
        "tau": model.tau,
        "mask": {
            "beta": model.mask.beta,
            "gamma": model.mask.gamma,
            "mode": model.mask.mode,
            "dirac_threshold": model.mask.dirac_threshold,
            "dirac_alpha": model.mask.dirac_alpha,
        },
        "adapter_I": {"dim": model.dim,
                      "W": model.adapter_I.W.reshape(-1).tolist(),
                      "b": model.adapter_I.b.tolist()},
        "adapter_T": ({"ref": "adapter_I"} if model.shared else
                      {"dim": model.dim,
                       "W": model.adapter_T.W.reshape(-1).tolist(),
                       "b": model.adapter_T.b.tolist()}),
        "anchors_I": model.anchors_I.vectors.tolist(),
        "anchors_T": model.anchors_T.vectors.tolist(),
        "class_names": list(model.class_names),
        "config_fingerprint": model.config_fingerprint,
    }
    return doc


def model_from_dict(doc: dict) -> TrainedModel:
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format {doc.get('format_version')}")
    dim = int(doc["dim"])

    def load_adapter(entry):
        w = np.array(entry["W"], dtype=np.float64).reshape(dim, dim)
        return AffineAdapter(w, np.array(entry["b"], dtype=np.float64))

    adapter_i = load_adapter(doc["adapter_I"])
    shared = doc["adapter_T"].get("ref") == "adapter_I"
    adapter_t = adapter_i if shared else load_adapter(doc["adapter_T"])
    m = doc["mask"]
    mask = MaskConfig(beta=m["beta"], gamma=m["gamma"], mode=m["mode"],
                      dirac_threshold=m["dirac_threshold"],
                      dirac_alpha=m.get("dirac_alpha", "beta"))
    return TrainedModel(
        adapter_I=adapter_i, adapter_T=adapter_t,
        anchors_I=AnchorSet(np.array(doc["anchors_I"], dtype=np.float64)),
        anchors_T=AnchorSet(np.array(doc["anchors_T"], dtype=np.float64)),
        mask=mask, tau=float(doc["tau"]), dim=dim,
        class_names=tuple(doc["class_names"]),
        config_fingerprint=doc["config_fingerprint"],
        shared=shared)


def save_model(model: TrainedModel, path: str | os.PathLike) -> None:
    """JSON, written via temp-then-rename; float repr round-trips exactly."""
    tmp = os.fspath(path) + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(model_to_dict(model), fh)
        fh.write("\n")
    os.replace(tmp, path)


def load_model(path: str | os.PathLike) -> TrainedModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))
