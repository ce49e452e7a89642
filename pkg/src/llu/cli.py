"""Command-line surface.

Exit codes: 0 success, 1 usage/validation/file errors, 2 numerical failure
(non-finite training loss).
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import numpy as np

from . import adapter as adapter_mod
from . import featio, synth
from .core import ClassEmbeddingSet, FeatureSet
from .errors import LluError, NonFiniteLoss, UnknownPreset
from .evaluation import (Report, evaluate, evaluate_base_new, split_base_new,
                         write_report)
from .graph import ForwardBatch, grad_check
from .locality import MODES, AnchorSet, MaskConfig, mask_weights_batch
from .rng import CounterRng
from .train import (TrainConfig, ablation_preset, load_model, save_model,
                    train)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _apply_threads(threads: int | None) -> None:
    n = threads if threads is not None else os.environ.get("LLU_THREADS")
    if n is None:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, str(n))


def cmd_synth(args) -> int:
    if args.classes < 2:
        print("synth: need at least 2 classes", file=sys.stderr)
        return 1
    train_set, test_set, class_set = synth.synth_dataset(
        args.dim, args.classes, args.shots, args.test_per_class,
        args.sigma_image, args.sigma_text, args.seed)
    os.makedirs(args.out_dir, exist_ok=True)
    featio.write_features(train_set, os.path.join(args.out_dir, "train.lluf"))
    featio.write_features(test_set, os.path.join(args.out_dir, "test.lluf"))
    featio.write_features(class_set, os.path.join(args.out_dir, "classes.lluf"))
    print(f"wrote train.lluf ({len(train_set)}), test.lluf ({len(test_set)}), "
          f"classes.lluf ({len(class_set)}) to {args.out_dir}")
    return 0


def _load_pair(train_path, classes_path):
    features = featio.read_features(train_path)
    classes = featio.read_features(classes_path)
    if not isinstance(features, FeatureSet):
        raise LluError(f"{train_path} does not hold labeled features (kind 0)")
    if not isinstance(classes, ClassEmbeddingSet):
        raise LluError(f"{classes_path} does not hold class embeddings (kind 1)")
    return features, classes


def _build_config(args) -> TrainConfig:
    cfg = ablation_preset(args.preset)
    mask_fields = {}
    for flag, fld in (("beta", "beta"), ("gamma", "gamma"), ("mask", "mode"),
                      ("dirac_threshold", "dirac_threshold"),
                      ("dirac_alpha", "dirac_alpha")):
        value = getattr(args, flag)
        if value is not None:
            mask_fields[fld] = value
    if mask_fields:
        cfg = dataclasses.replace(cfg, mask=dataclasses.replace(cfg.mask, **mask_fields))
    overrides = {}
    for flag, fld in (("lr", "learning_rate"), ("momentum", "momentum"),
                      ("epochs", "epochs"), ("batch", "batch_size"),
                      ("lam", "lam"), ("max_anchors", "max_anchors"),
                      ("tau", "tau"), ("seed", "seed"), ("init", "init")):
        value = getattr(args, flag)
        if value is not None:
            overrides[fld] = value
    if args.shared_adapter:
        overrides["shared_adapter"] = True
    if args.no_renorm:
        overrides["renorm"] = False
    return dataclasses.replace(cfg, **overrides)


def cmd_train(args) -> int:
    features, classes = _load_pair(args.train, args.classes)
    cfg = _build_config(args)
    if args.base_only:
        # base classes are a prefix of the stored order, so labels stay valid
        base_idx, _ = split_base_new(classes.class_names)
        names = tuple(classes.class_names[i] for i in base_idx)
        keep = np.flatnonzero(np.isin(features.labels, base_idx))
        features = FeatureSet(dim=features.dim, class_names=names,
                              vectors=features.vectors[keep],
                              labels=features.labels[keep])
        classes = ClassEmbeddingSet(dim=classes.dim, class_names=names,
                                    vectors=classes.vectors[base_idx])
    model, _ = train(features, classes, cfg,
                     log=lambda ep, loss: print(f"epoch {ep:4d}  mean loss {loss:.6f}"))
    save_model(model, args.out)
    print(f"wrote model to {args.out}")
    return 0


def cmd_eval(args) -> int:
    test = featio.read_features(args.test)
    classes = featio.read_features(args.classes)
    if not isinstance(test, FeatureSet) or not isinstance(classes, ClassEmbeddingSet):
        raise LluError("eval needs a kind-0 test file and a kind-1 class file")
    model = load_model(args.model) if args.model else None
    if model is not None and model.dim != test.dim:
        raise LluError(f"model dim {model.dim} != feature dim {test.dim}")

    fingerprint = model.fingerprint() if model is not None else None
    if args.split_base_new or args.restrict in ("base", "new"):
        base_idx, new_idx = split_base_new(classes.class_names)
        if args.restrict == "base":
            acc, per_class = evaluate(test, model, classes, base_idx)
            report = Report(acc, None, None, acc, per_class,
                            int(np.isin(test.labels, base_idx).sum()), fingerprint)
            print(f"Base: {acc:.4f}")
        elif args.restrict == "new":
            acc, per_class = evaluate(test, model, classes, new_idx)
            report = Report(None, acc, None, acc, per_class,
                            int(np.isin(test.labels, new_idx).sum()), fingerprint)
            print(f"New: {acc:.4f}")
        else:
            metrics = evaluate_base_new(test, model, classes)
            report = Report(metrics.base_accuracy, metrics.new_accuracy,
                            metrics.harmonic_mean, None,
                            metrics.per_class_accuracy, len(test), fingerprint)
            print(f"{'Base':>8} {'New':>8} {'H':>8}")
            print(f"{metrics.base_accuracy:8.4f} {metrics.new_accuracy:8.4f} "
                  f"{metrics.harmonic_mean:8.4f}")
    else:
        acc, per_class = evaluate(test, model, classes, None)
        report = Report(None, None, None, acc, per_class, len(test), fingerprint)
        print(f"Accuracy: {acc:.4f}")

    if args.report:
        write_report(report, args.report)
        print(f"wrote report to {args.report}")
    return 0


def cmd_gradcheck(args) -> int:
    rng = CounterRng(args.seed)
    worst_overall = 0.0
    failures = []
    for trial in range(args.trials):
        for mode in MODES:
            dim, k, n = args.dim, args.classes, args.batch
            us = rng.normal(n * dim).reshape(n, dim)
            us /= np.linalg.norm(us, axis=1, keepdims=True)
            vs = rng.normal(k * dim).reshape(k, dim)
            vs /= np.linalg.norm(vs, axis=1, keepdims=True)
            labels = (rng.uniform(n) * k).astype(np.int64)
            cfg = MaskConfig(mode=mode, dirac_threshold=0.5)
            anchors = AnchorSet(us[: max(2, n // 2)].copy())
            ia = mask_weights_batch(us, anchors, cfg)
            ca = mask_weights_batch(vs, anchors, cfg)
            w_i = adapter_mod.random_init(dim, CounterRng(args.seed + 7 * trial + 1))
            w_i.W = np.eye(dim) + 0.05 * w_i.W
            w_t = adapter_mod.random_init(dim, CounterRng(args.seed + 7 * trial + 2))
            w_t.W = np.eye(dim) + 0.05 * w_t.W
            w_t.b = 0.05 * CounterRng(args.seed + trial).normal(dim)
            batch = ForwardBatch(us, labels, vs, ia, ca)
            err = grad_check(batch, (w_i, w_t), tau=0.05, lam=3.0,
                             epsilon=1e-5, seed=args.seed + trial)
            worst_overall = max(worst_overall, err)
            if err >= args.tolerance:
                failures.append((trial, mode, err))
    print(f"max relative error: {worst_overall:.3e} "
          f"(tolerance {args.tolerance:g}, {args.trials} trials x {len(MODES)} modes)")
    if failures:
        for trial, mode, err in failures:
            print(f"FAIL trial {trial} mode {mode}: {err:.3e}", file=sys.stderr)
        return 1
    return 0


def cmd_inspect(args) -> int:
    model = load_model(args.model)
    print(f"dim:                  {model.dim}")
    print(f"tau:                  {model.tau}")
    print(f"mask:                 mode={model.mask.mode} beta={model.mask.beta} "
          f"gamma={model.mask.gamma} dirac_threshold={model.mask.dirac_threshold}")
    print(f"anchors:              image={len(model.anchors_I)} text={len(model.anchors_T)}")
    print(f"shared adapter:       {model.shared}")
    print(f"distance to identity: image={adapter_mod.distance_to_identity(model.adapter_I):.6g} "
          f"text={adapter_mod.distance_to_identity(model.adapter_T):.6g}")
    print(f"classes:              {len(model.class_names)}")
    print(f"config fingerprint:   {model.config_fingerprint}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="llu",
                     description="Localized latent updates on frozen embeddings")
    parser.add_argument("--threads", type=int, default=None,
                        help="cap internal worker/BLAS threads (env: LLU_THREADS)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--classes", type=int, default=8)
    p.add_argument("--shots", type=int, default=16)
    p.add_argument("--test-per-class", type=int, default=50)
    p.add_argument("--sigma-image", type=float, default=0.4)
    p.add_argument("--sigma-text", type=float, default=0.6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train adapters on feature files")
    p.add_argument("--train", required=True, help="kind-0 .lluf training features")
    p.add_argument("--classes", required=True, help="kind-1 .lluf class embeddings")
    p.add_argument("--out", required=True, help="output model JSON")
    p.add_argument("--preset", default="default",
                   help="ablation preset (default, no-cluster, no-damp, no-mask, "
                        "dirac-mask, no-reg, rand-init, linear)")
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--max-anchors", type=int, default=None)
    p.add_argument("--mask", choices=MODES, default=None)
    p.add_argument("--dirac-threshold", type=float, default=None)
    p.add_argument("--dirac-alpha", choices=("beta", "one"), default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--momentum", type=float, default=None)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--shared-adapter", action="store_true")
    p.add_argument("--init", choices=("identity", "random"), default=None)
    p.add_argument("--no-renorm", action="store_true")
    p.add_argument("--base-only", action="store_true",
                   help="restrict training to the base half of the class split")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate features against class embeddings")
    p.add_argument("--test", required=True)
    p.add_argument("--classes", required=True)
    p.add_argument("--model", default=None)
    p.add_argument("--split-base-new", action="store_true")
    p.add_argument("--restrict", choices=("base", "new", "all"), default="all")
    p.add_argument("--report", default=None, help="write machine-readable JSON here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="verify gradients vs finite differences")
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--batch", type=int, default=6)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("inspect", help="summarize a trained model file")
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _apply_threads(args.threads)
    try:
        return args.func(args)
    except NonFiniteLoss as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (LluError, UnknownPreset, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
