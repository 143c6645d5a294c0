import math
from fractions import Fraction

import numpy as np
import pytest

from transfer_knn.classifier import (
    RateSpec,
    check_bias_lemma,
    eta_hat,
    fit_pooled,
    make_batch_partition,
    optimal_k,
    predict,
    rate_exponent,
    rate_spec,
)
from transfer_knn.core import TransferSample
from transfer_knn.synth import excess_error_mc, make_margin_singularity_family


def sample(sx, sy, tx=None, ty=None):
    sx = np.asarray(sx, dtype=float).reshape(-1, 1) if np.ndim(sx) < 2 else np.asarray(sx, float)
    if tx is None:
        tx, ty = np.zeros((0, sx.shape[1])), np.zeros(0)
    tx = np.asarray(tx, dtype=float).reshape(-1, sx.shape[1])
    return TransferSample(sx, sy, tx, ty)


def test_fit_pooled_cases():
    m = fit_pooled(sample([0.3], [1]))
    assert predict(m, [0.9], 1) == 1 and predict(m, [0.0], 1) == 1
    m0 = fit_pooled(TransferSample(np.zeros((0, 1)), [], np.random.default_rng(0).random((5, 1)), [0, 1, 1, 0, 1]))
    assert m0.n == 5
    with pytest.raises(ValueError):
        fit_pooled(TransferSample(np.zeros((2, 1)), [0, 1], np.zeros((3, 1))))


def test_eta_hat_examples():
    m = fit_pooled(sample([0.1, 0.5, 0.9], [1, 1, 1]))
    for k in (1, 2, 3):
        assert eta_hat(m, [0.4], k) == 1.0
    m = fit_pooled(sample([0.1, 0.5, 0.9], [0, 1, 1]))
    assert eta_hat(m, [0.4], 3) == pytest.approx(2 / 3)
    with pytest.raises(ValueError):
        eta_hat(m, [0.4], 4)
    with pytest.raises(ValueError):
        eta_hat(m, [0.4], 0)


def test_predict_threshold_tie_goes_to_one():
    m = fit_pooled(sample([0.1, 0.2], [0, 1]))
    assert eta_hat(m, [0.15], 2) == 0.5
    assert predict(m, [0.15], 2) == 1
    m = fit_pooled(sample(np.linspace(0, 1, 100), [1] * 49 + [0] * 51))
    assert eta_hat(m, [0.5], 100) == 0.49
    assert predict(m, [0.5], 100) == 0


def test_eta_hat_matches_loop_oracle(rng):
    x = rng.random((80, 2))
    y = rng.integers(0, 2, 80)
    m = fit_pooled(TransferSample(x[:50], y[:50], x[50:], y[50:]))
    for _ in range(30):
        q = rng.random(2)
        k = int(rng.integers(1, 81))
        order = sorted(range(80), key=lambda i: (max(abs(x[i] - q)), i))[:k]
        assert eta_hat(m, q, k) == pytest.approx(np.mean(y[order]))


def test_eta_hat_close_to_truth():
    f = make_margin_singularity_family(0.0)
    x, y = f.sample_source(10000, 1)
    m = fit_pooled(TransferSample(x, y, np.zeros((0, 1)), np.zeros(0)))
    k = 100
    for q in (0.2, 0.35, 0.8):
        idx = m.index.knn(np.array([[q]]), k)[0]
        dk = np.max(np.abs(x[idx, 0] - q))
        truth = f.eta(np.array([[q]]))[0]
        assert abs(eta_hat(m, [q], k) - truth) <= 3 * math.sqrt(1 / k) + f.params.c_alpha * dk


def test_permutation_invariance(rng):
    x = rng.random((60, 1))
    y = rng.integers(0, 2, 60)
    m1 = fit_pooled(sample(x, y))
    perm = rng.permutation(60)
    m2 = fit_pooled(sample(x[perm], y[perm]))
    q = rng.random((40, 1))
    for k in (1, 5, 17):
        np.testing.assert_array_equal(m1.predict(q, k), m2.predict(q, k))


def test_bayes_consistency_smoke():
    f = make_margin_singularity_family(1.0)
    x, y = f.sample_source(5000, 2)
    xq, yq = f.sample_target(5000, 3)
    m = fit_pooled(TransferSample(x, y, xq, yq))
    k = optimal_k(5000, 5000, RateSpec(f.params))
    est, _ = excess_error_mc(m.classifier(k), f, 20000, 4)
    assert est < 0.05


def test_eq4_pointwise_implication(rng):
    f = make_margin_singularity_family(0.0)
    x, y = f.sample_source(2000, 9)
    m = fit_pooled(sample(x, y))
    q = rng.random((500, 1))
    for k in (5, 51):
        eh = m.eta_hat(q, k)
        pred = (eh >= 0.5).astype(int)
        eta = f.eta(q)
        wrong = pred != f.bayes(q)
        assert np.all(np.abs(eh - eta)[wrong] >= np.abs(eta - 0.5)[wrong] - 1e-15)


def test_optimal_k_examples():
    assert optimal_k(1000, 0, rate_spec(0.0, 1.0, 0.0, 1)) == 100
    # d0 = 4 via BCN with beta = 1, d = 1, alpha = 1
    s = rate_spec(math.inf, 1.0, 1.0, 1, regime="BCN")
    assert s.d0 == 4
    assert optimal_k(10 ** 6, 8, s) == 3
    assert optimal_k(1, 0, rate_spec(0.0, 1.0, 0.0, 1)) == 1
    with pytest.raises(ValueError):
        optimal_k(0, 0, rate_spec(0.0, 1.0, 0.0, 1))


def test_optimal_k_formula_oracle(rng):
    for _ in range(200):
        g = float(rng.choice([0, 0.5, 1, 3]))
        a = float(rng.choice([0.5, 1.0]))
        b = float(rng.choice([0, 1]))
        d = int(rng.integers(1, 4))
        n_P, n_Q = int(rng.integers(0, 5000)), int(rng.integers(0, 5000))
        if max(n_P, n_Q) == 0:
            continue
        s = rate_spec(g, a, b, d)
        d0 = 2 + d / a
        raw = (n_P ** (d0 / (d0 + g / a)) + n_Q) ** (2 / d0)
        k = optimal_k(n_P, n_Q, s)
        assert 1 <= k <= n_P + n_Q
        assert k == max(1, min(n_P + n_Q, math.ceil(raw - 1e-9 * raw)))


def test_optimal_k_monotone():
    s = rate_spec(1.0, 1.0, 1.0, 2)
    ks = [optimal_k(n, 10, s) for n in range(0, 5000, 50)]
    assert all(a <= b for a, b in zip(ks, ks[1:]))
    ks = [optimal_k(10, n, s) for n in range(0, 5000, 50)]
    assert all(a <= b for a, b in zip(ks, ks[1:]))


def test_rate_exponent_examples():
    s = rate_spec(0.0, 1.0, 0.0, 1)
    assert rate_exponent(s, "source_dominated") == pytest.approx(1 / 3)
    assert rate_exponent(s, "target_dominated") == pytest.approx(1 / 3)
    s = rate_spec(2.0, 1.0, 1.0, 2, regime="BCN")
    assert s.d0 == 5
    assert rate_exponent(s, "source_dominated") == pytest.approx(2 / 7)
    assert rate_exponent(s, "target_dominated") == pytest.approx(2 / 5)
    assert rate_exponent(rate_spec(math.inf, 1.0, 1.0, 1), "source_dominated") == 0
    with pytest.raises(ValueError):
        rate_exponent(s, "both")


def test_rate_exponent_ordering():
    for g in (0.0, 0.3, 1.0, 5.0):
        s = rate_spec(g, 0.7, 1.0, 2)
        src, tgt = rate_exponent(s, "source_dominated"), rate_exponent(s, "target_dominated")
        assert src <= tgt
        assert (src == tgt) == (g == 0)


def test_batch_partition_examples():
    p = make_batch_partition(4, 2, 2, seed=1)
    assert p.k == 2
    for b in p.batches:
        assert sum(i < 4 for i in b) == 2 and sum(i >= 4 for i in b) == 1
    assert not set(p.batches[0]) & set(p.batches[1])
    p = make_batch_partition(5, 0, 2, seed=1)
    assert [len(b) for b in p.batches] == [2, 2]
    assert len(set(np.concatenate(p.batches))) == 4
    q = make_batch_partition(5, 0, 2, seed=1)
    assert all(np.array_equal(a, b) for a, b in zip(p.batches, q.batches))
    with pytest.raises(ValueError):
        make_batch_partition(3, 2, 4, seed=0)


def test_bias_lemma_trivial_single_batch(rng):
    x = rng.random((7, 2))
    m = fit_pooled(sample(x, rng.integers(0, 2, 7)))
    p = make_batch_partition(7, 0, 1, seed=0)
    assert check_bias_lemma(m, p, rng.random(2), 0.5)


def test_bias_lemma_clustered(rng):
    for s in range(100):
        r = np.random.default_rng(s)
        centers = r.random((3, 2))
        x = np.clip(centers[r.integers(0, 3, 120)] + 0.01 * r.standard_normal((120, 2)), 0, 1)
        n_P = int(r.integers(0, 120))
        m = fit_pooled(TransferSample(x[:n_P], np.zeros(n_P), x[n_P:], np.zeros(120 - n_P)))
        k = int(r.integers(1, max(n_P, 120 - n_P) + 1))
        part = make_batch_partition(n_P, 120 - n_P, k, seed=s)
        assert check_bias_lemma(m, part, centers[0], float(r.uniform(0.1, 1)))
