import numpy as np
import pytest

from llu.core import ClassEmbeddingSet, FeatureSet
from llu.errors import EmptyEvaluationSet, TooFewClasses
from llu.evaluation import (classify, evaluate, evaluate_base_new,
                            sample_shots, split_base_new)
from llu.locality import MaskConfig
from llu.rng import CounterRng
from llu.synth import synth_dataset
from llu.train import TrainConfig, train


def orthogonal_task(dim=6, k=4):
    classes = ClassEmbeddingSet(dim=dim, class_names=tuple("abcd"[:k]),
                                vectors=np.eye(dim)[:k])
    features = FeatureSet(dim=dim, class_names=classes.class_names,
                          vectors=np.eye(dim)[:k], labels=np.arange(k))
    return features, classes


class TestClassify:
    def test_exact_match_wins(self):
        _, classes = orthogonal_task()
        idx, probs = classify(classes.vectors[2], None, classes)
        assert idx == 2
        assert probs.argmax() == 2 and probs.sum() == pytest.approx(1.0)

    def test_identity_model_matches_no_model(self):
        train_set, test_set, classes = synth_dataset(16, 4, 4, 10, 0.3, 0.5, 1)
        model, _ = train(train_set, classes, TrainConfig(epochs=0))
        for u in test_set.vectors[:20]:
            assert classify(u, model, classes)[0] == classify(u, None, classes)[0]

    def test_dirac_far_probe_matches_baseline(self):
        # train on the base half only; probes and class texts from the new half
        # sit outside the dirac threshold, so decisions there are untouched
        train_set, test_set, classes = synth_dataset(16, 4, 4, 10, 0.3, 0.5, 2)
        base_idx, new_idx = split_base_new(classes.class_names)
        keep = np.flatnonzero(np.isin(train_set.labels, base_idx))
        base_names = tuple(classes.class_names[i] for i in base_idx)
        base_train = FeatureSet(dim=16, class_names=base_names,
                                vectors=train_set.vectors[keep],
                                labels=train_set.labels[keep])
        base_classes = ClassEmbeddingSet(dim=16, class_names=base_names,
                                         vectors=classes.vectors[base_idx])
        cfg = TrainConfig(epochs=20, mask=MaskConfig(mode="dirac"))
        model, _ = train(base_train, base_classes, cfg)
        new_classes = ClassEmbeddingSet(
            dim=16, class_names=tuple(classes.class_names[i] for i in new_idx),
            vectors=classes.vectors[new_idx])
        checked = 0
        for u in test_set.vectors[np.isin(test_set.labels, new_idx)]:
            dist = 1 - (u @ model.anchors_I.vectors.T).max()
            if dist >= model.mask.dirac_threshold:
                assert classify(u, model, new_classes)[0] == \
                    classify(u, None, new_classes)[0]
                checked += 1
        assert checked > 0


class TestSplit:
    def test_even(self):
        base, new = split_base_new(["a", "b", "c", "d"])
        assert base.tolist() == [0, 1] and new.tolist() == [2, 3]

    def test_odd_uses_ceil(self):
        base, new = split_base_new(["a", "b", "c", "d", "e"])
        assert base.tolist() == [0, 1, 2] and new.tolist() == [3, 4]

    def test_partition(self):
        for k in range(2, 9):
            base, new = split_base_new([str(i) for i in range(k)])
            assert sorted(base.tolist() + new.tolist()) == list(range(k))

    def test_too_few(self):
        with pytest.raises(TooFewClasses):
            split_base_new(["only"])


class TestEvaluate:
    def test_perfect_and_zero(self):
        features, classes = orthogonal_task()
        acc, per_class = evaluate(features, None, classes)
        assert acc == 1.0 and all(v == 1.0 for v in per_class.values())
        wrong = FeatureSet(dim=6, class_names=features.class_names,
                           vectors=features.vectors,
                           labels=(features.labels + 1) % 4)
        acc, _ = evaluate(wrong, None, classes)
        assert acc == 0.0

    def test_paper_harmonic_mean_consistency(self):
        from llu.core import Metrics
        m = Metrics.from_accuracies(0.9817, 0.9393)
        assert m.harmonic_mean == pytest.approx(0.9600, abs=1e-4)

    def test_empty_after_restriction(self):
        features, classes = orthogonal_task()
        only_base = FeatureSet(dim=6, class_names=features.class_names,
                               vectors=features.vectors[:2], labels=np.arange(2))
        with pytest.raises(EmptyEvaluationSet):
            evaluate(only_base, None, classes, restrict=np.array([2, 3]))

    def test_record_order_invariance(self):
        _, test_set, classes = synth_dataset(16, 4, 4, 10, 0.3, 0.5, 3)
        perm = CounterRng(1).permutation(len(test_set))
        shuffled = FeatureSet(dim=16, class_names=test_set.class_names,
                              vectors=test_set.vectors[perm],
                              labels=test_set.labels[perm])
        assert evaluate(test_set, None, classes) == evaluate(shuffled, None, classes)

    def test_base_new_metrics_consistent(self):
        _, test_set, classes = synth_dataset(16, 4, 4, 10, 0.3, 0.5, 4)
        m = evaluate_base_new(test_set, None, classes)
        from llu.core import harmonic_mean
        assert m.harmonic_mean == harmonic_mean(m.base_accuracy, m.new_accuracy)

    def test_frozen_baseline_identity_decision_for_decision(self):
        train_set, test_set, classes = synth_dataset(16, 4, 4, 25, 0.3, 0.5, 5)
        model, _ = train(train_set, classes, TrainConfig(epochs=0))
        base_idx, new_idx = split_base_new(classes.class_names)
        for restrict in (base_idx, new_idx, None):
            from llu.evaluation import _decisions
            _, with_model = _decisions(test_set, model, classes, restrict)
            _, without = _decisions(test_set, None, classes, restrict)
            assert np.array_equal(with_model, without)


class TestSampleShots:
    def test_exact_counts(self):
        _, test_set, _ = synth_dataset(16, 4, 4, 25, 0.3, 0.5, 6)
        sampled = sample_shots(test_set, 16, seed=0)
        assert np.bincount(sampled.labels).tolist() == [16] * 4

    def test_caps_at_available(self):
        _, test_set, _ = synth_dataset(16, 4, 4, 5, 0.3, 0.5, 6)
        sampled = sample_shots(test_set, 16, seed=0)
        assert np.bincount(sampled.labels).tolist() == [5] * 4

    def test_seeded_determinism(self):
        _, test_set, _ = synth_dataset(16, 4, 4, 25, 0.3, 0.5, 7)
        a = sample_shots(test_set, 8, seed=5)
        b = sample_shots(test_set, 8, seed=5)
        c = sample_shots(test_set, 8, seed=6)
        assert np.array_equal(a.vectors, b.vectors)
        assert not np.array_equal(a.vectors, c.vectors)
