import numpy as np
import pytest

from llu.adapter import AffineAdapter, identity, reg_gradient
from llu.errors import ZeroVector
from llu.graph import (ForwardBatch, adapt_embed, backward, forward,
                       grad_check)
from llu.locality import AnchorSet, MaskConfig, mask_weights_batch
from llu.rng import CounterRng


def random_units(seed, n, dim):
    v = CounterRng(seed).normal(n * dim).reshape(n, dim)
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def perturbed_adapter(seed, dim, scale=0.3):
    rng = CounterRng(seed)
    w = np.eye(dim) + scale * rng.normal(dim * dim).reshape(dim, dim) / np.sqrt(dim)
    b = scale * rng.normal(dim) / np.sqrt(dim)
    return AffineAdapter(w, b)


def make_batch(seed, n=6, k=4, dim=8, mode="smooth"):
    us = random_units(seed, n, dim)
    vs = random_units(seed + 100, k, dim)
    labels = (CounterRng(seed + 200).uniform(n) * k).astype(np.int64)
    anchors = AnchorSet(random_units(seed + 300, 5, dim))
    cfg = MaskConfig(mode=mode, dirac_threshold=0.6)
    return ForwardBatch(us, labels, vs,
                        mask_weights_batch(us, anchors, cfg),
                        mask_weights_batch(vs, anchors, cfg))


class TestAdaptEmbed:
    def test_alpha_zero_is_exact_passthrough(self):
        u = random_units(1, 1, 5)[0]
        out = adapt_embed(u, perturbed_adapter(2, 5), 0.0)
        assert np.array_equal(out, u)

    def test_identity_adapter_keeps_direction(self):
        u = random_units(3, 1, 5)[0]
        out = adapt_embed(u, identity(5), 0.7)
        assert np.abs(out - u).max() < 1e-12

    def test_uniform_scaling_cancels(self):
        u = random_units(4, 1, 5)[0]
        ad = AffineAdapter(2 * np.eye(5), np.zeros(5))
        out = adapt_embed(u, ad, 1.0)
        assert np.abs(out - u).max() < 1e-12

    def test_collapse_raises(self):
        u = np.zeros(3)
        u[0] = 1.0
        ad = AffineAdapter(-np.eye(3), np.zeros(3))  # alpha 0.5 cancels u
        with pytest.raises(ZeroVector):
            adapt_embed(u, ad, 0.5)


class TestForward:
    def test_equal_logits_give_ln2(self):
        dim = 4
        us = np.array([[1.0, 0.0, 0.0, 0.0]])
        vs = np.array([[0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]])
        batch = ForwardBatch(us, np.array([0]), vs, np.zeros(1), np.zeros(2))
        loss, logits, probs = forward(batch, (identity(dim), identity(dim)), 1.0, 0.0)
        assert np.allclose(probs, 0.5)
        assert loss == pytest.approx(np.log(2), rel=1e-12)

    def test_reference_softmax(self):
        # logits (2, 0) -> probs (0.8808, 0.1192)
        dim = 4
        us = np.array([[1.0, 0.0, 0.0, 0.0]])
        vs = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]])
        batch = ForwardBatch(us, np.array([0]), vs, np.zeros(1), np.zeros(2))
        _, logits, probs = forward(batch, (identity(dim), identity(dim)), 0.5, 0.0)
        assert np.allclose(logits[0], [2.0, 0.0])
        assert probs[0, 0] == pytest.approx(0.8808, abs=1e-4)
        assert probs[0, 1] == pytest.approx(0.1192, abs=1e-4)

    def test_identity_adapters_reduce_to_frozen_baseline(self):
        batch = make_batch(11)
        loss_reg, logits, _ = forward(batch, (identity(8), identity(8)), 0.02, 5.0)
        frozen = (batch.image_vectors @ batch.class_vectors.T) / 0.02
        assert np.abs(logits - frozen).max() < 1e-9
        loss0, _, _ = forward(batch, (identity(8), identity(8)), 0.02, 0.0)
        assert loss_reg == pytest.approx(loss0)  # reg term is 0 at identity

    def test_loss_decomposition(self):
        batch = make_batch(12)
        ads = (perturbed_adapter(1, 8), perturbed_adapter(2, 8))
        lam = 17.0
        loss_l, _, _ = forward(batch, ads, 0.05, lam)
        loss_0, _, _ = forward(batch, ads, 0.05, 0.0)
        from llu.adapter import reg_penalty
        expected = reg_penalty(ads[0], lam) + reg_penalty(ads[1], lam)
        assert loss_l - loss_0 == pytest.approx(expected, abs=1e-10)

    def test_softmax_rows_sum_to_one(self):
        batch = make_batch(13)
        _, _, probs = forward(batch, (perturbed_adapter(3, 8),
                                      perturbed_adapter(4, 8)), 0.01, 0.0)
        assert np.abs(probs.sum(axis=1) - 1).max() < 1e-9

    def test_permutation_invariance(self):
        batch = make_batch(14)
        perm = CounterRng(5).permutation(6)
        shuffled = ForwardBatch(batch.image_vectors[perm], batch.labels[perm],
                                batch.class_vectors, batch.image_alphas[perm],
                                batch.class_alphas)
        ads = (perturbed_adapter(5, 8), perturbed_adapter(6, 8))
        l1, _, _ = forward(batch, ads, 0.05, 3.0)
        l2, _, _ = forward(shuffled, ads, 0.05, 3.0)
        assert l1 == pytest.approx(l2, abs=1e-12)


class TestBackward:
    def test_reg_only_when_alpha_zero(self):
        batch = make_batch(21, mode="off")
        ads = (perturbed_adapter(7, 8), perturbed_adapter(8, 8))
        lam = 9.0
        _, grads = backward(batch, ads, 0.05, lam)
        for ad, dw, db in ((ads[0], grads.dW_I, grads.db_I),
                           (ads[1], grads.dW_T, grads.db_T)):
            rw, rb = reg_gradient(ad, lam)
            assert np.array_equal(dw, rw)
            assert np.array_equal(db, rb)

    def test_pure_quadratic_is_exact(self):
        batch = make_batch(22, mode="off")
        err = grad_check(batch, (identity(8), identity(8)), 0.05, 1e3)
        assert err < 1e-6

    def test_matched_orthogonal_batch_still_has_pressure(self):
        dim, k = 6, 3
        vs = np.eye(dim)[:k]
        us = vs.copy()
        batch = ForwardBatch(us, np.arange(k), vs, np.full(k, 0.5), np.full(k, 0.5))
        _, grads = backward(batch, (identity(dim), identity(dim)), 0.5, 0.0)
        assert np.abs(grads.dW_I).max() > 0
        err = grad_check(batch, (identity(dim), identity(dim)), 0.5, 0.0)
        assert err < 1e-4


@pytest.mark.parametrize("mode", ["smooth", "constant", "dirac", "off"])
@pytest.mark.parametrize("dim", [4, 8, 32])
def test_grad_check_modes_and_dims(mode, dim):
    batch = make_batch(31 + dim, n=5, k=3, dim=dim, mode=mode)
    ads = (perturbed_adapter(dim, dim), perturbed_adapter(dim + 1, dim))
    assert grad_check(batch, ads, 0.05, 2.0) < 1e-4


def test_grad_check_shared_adapter():
    batch = make_batch(41)
    shared = perturbed_adapter(9, 8)
    assert grad_check(batch, (shared, shared), 0.05, 2.0) < 1e-4


def test_grad_check_no_renorm():
    batch = make_batch(42)
    ads = (perturbed_adapter(10, 8), perturbed_adapter(11, 8))
    assert grad_check(batch, ads, 0.05, 2.0, renorm=False) < 1e-4


def test_grad_check_step_size_robustness():
    batch = make_batch(43)
    ads = (perturbed_adapter(12, 8), perturbed_adapter(13, 8))
    for eps in (1e-7, 1e-5):
        assert grad_check(batch, ads, 0.05, 2.0, epsilon=eps) < 1e-4
