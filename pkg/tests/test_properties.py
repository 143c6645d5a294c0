"""Property-based checks of the geometric and combinatorial invariants."""
import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from transfer_knn.classifier import check_bias_lemma, fit_pooled, make_batch_partition, optimal_k, rate_spec
from transfer_knn.core import NnIndex, TransferSample, linf_distance
from transfer_knn.cover import is_k2k_cover, r_counts
from transfer_knn.core import pairwise_linf

coord = st.sampled_from([0.0, 0.125, 0.25, 0.5, 0.75, 1.0]) | st.floats(0, 1)


@st.composite
def point_sets(draw, min_n=1, max_n=40):
    d = draw(st.integers(1, 3))
    n = draw(st.integers(min_n, max_n))
    pts = draw(arrays(float, (n, d), elements=coord))
    x = draw(arrays(float, (d,), elements=coord))
    return pts, x


@settings(max_examples=150, deadline=None)
@given(point_sets())
def test_knn_distances_monotone_and_closed_ball(data):
    pts, x = data
    idx = NnIndex(pts)
    order = idx.knn(x[None, :], len(pts))[0]
    d = [linf_distance(pts[i], x) for i in order]
    assert all(a <= b for a, b in zip(d, d[1:]))
    # ties are ordered by index
    for (a, ia), (b, ib) in zip(zip(d, order), zip(d[1:], order[1:])):
        if a == b:
            assert ia < ib
    for k in range(1, len(pts) + 1):
        assert idx.ball_count(x[None, :], d[k - 1])[0] >= k


@settings(max_examples=150, deadline=None)
@given(point_sets(min_n=2), st.data())
def test_bias_lemma_always_holds(data, draw):
    pts, x = data
    n = len(pts)
    n_P = draw.draw(st.integers(0, n))
    k = draw.draw(st.integers(1, max(n_P, n - n_P)))
    alpha = draw.draw(st.floats(0.05, 1.0))
    m = fit_pooled(TransferSample(pts[:n_P], np.zeros(n_P), pts[n_P:], np.zeros(n - n_P)))
    part = make_batch_partition(n_P, n - n_P, k, seed=draw.draw(st.integers(0, 2**32 - 1)))
    assert check_bias_lemma(m, part, x, alpha)


@settings(max_examples=150, deadline=None)
@given(point_sets(min_n=2), st.data())
def test_cover_count_monotone_in_r(data, draw):
    pts, _ = data
    n = len(pts)
    k = draw.draw(st.integers(1, n // 2))
    r1 = np.array(draw.draw(st.lists(st.booleans(), min_size=n, max_size=n)))
    extra = np.array(draw.draw(st.lists(st.booleans(), min_size=n, max_size=n)))
    r2 = r1 | extra
    dist = pairwise_linf(pts, pts)
    assert np.all(r_counts(dist, r1, k) <= r_counts(dist, r2, k))
    if is_k2k_cover(pts, np.flatnonzero(r1), k):
        assert is_k2k_cover(pts, np.flatnonzero(r2), k)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 10**6), st.sampled_from([0.0, 1.0, 2.5, float("inf")]),
       st.sampled_from([0.25, 0.5, 1.0]), st.integers(1, 4))
def test_optimal_k_in_range_and_monotone(n_P, n_Q, g, a, d):
    if max(n_P, n_Q) == 0:
        return
    s = rate_spec(g, a, 1.0, d)
    k = optimal_k(n_P, n_Q, s)
    assert 1 <= k <= n_P + n_Q
    assert optimal_k(n_P + 1, n_Q, s) >= k
    assert optimal_k(n_P, n_Q + 1, s) >= k
