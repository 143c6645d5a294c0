"""Pooled-sample k-NN classifier, rate formulas and implicit-1-NN diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import NnIndex, TransferSample, as_points, pairwise_linf
from .synth import FamilyParams

SOURCE_DOMINATED = "source_dominated"
TARGET_DOMINATED = "target_dominated"


@dataclass(frozen=True)
class PooledModel:
    """k-NN model over source points followed by labeled target points."""

    index: NnIndex
    labels: np.ndarray
    n_P: int
    n_Q: int

    @property
    def n(self) -> int:
        return self.n_P + self.n_Q

    def eta_hat(self, x, k: int) -> np.ndarray:
        """Vectorized regression estimate for a batch of query points."""
        return self.index.neighbor_mean(x, self.labels, self._check_k(k))

    def predict(self, x, k: int) -> np.ndarray:
        return (self.eta_hat(x, k) >= 0.5).astype(np.int8)

    def _check_k(self, k) -> int:
        k = int(k)
        if not 1 <= k <= self.n:
            raise ValueError(f"k={k} out of range [1, n_P + n_Q = {self.n}]")
        return k

    def classifier(self, k: int):
        """Return ``h(X) -> labels`` for a fixed ``k``."""
        k = self._check_k(k)
        return lambda x: self.predict(x, k)


def fit_pooled(sample: TransferSample, backend: str = "auto") -> PooledModel:
    if sample.n_P + sample.n_Q < 1:
        raise ValueError("empty pooled sample: need n_P or n_Q >= 1")
    if sample.n_Q > 0 and not sample.target_labeled:
        raise ValueError("fit_pooled needs labeled target points; use the cover module for unlabeled pools")
    labels = sample.pooled_y if sample.n_Q else sample.source_y
    labels = np.asarray(labels, dtype=np.int8)
    labels.setflags(write=False)
    return PooledModel(NnIndex(sample.pooled_x, backend=backend), labels, sample.n_P, sample.n_Q)


def eta_hat(model: PooledModel, x, k: int) -> float:
    """Mean label over the ``k`` nearest pooled neighbors of a single point."""
    return float(model.eta_hat(np.asarray(x, dtype=float).reshape(1, -1), k)[0])


def predict(model: PooledModel, x, k: int) -> int:
    return int(eta_hat(model, x, k) >= 0.5)


@dataclass(frozen=True)
class RateSpec:
    params: FamilyParams

    @property
    def d0(self) -> float:
        p = self.params
        if p.regime == "DM":
            return 2.0 + p.dim / p.alpha
        return 2.0 + p.beta + p.dim / p.alpha


def rate_spec(gamma, alpha, beta, dim, regime="DM") -> RateSpec:
    return RateSpec(FamilyParams(gamma=gamma, alpha=alpha, beta=beta, dim=dim, regime=regime))


def _effective_n(n_P: int, n_Q: int, spec: RateSpec) -> float:
    p = spec.params
    d0 = spec.d0
    if math.isinf(p.gamma):
        src = 1.0
    else:
        src = float(n_P) ** (d0 / (d0 + p.gamma / p.alpha)) if n_P > 0 else 0.0
    return src + n_Q


def optimal_k(n_P: int, n_Q: int, spec: RateSpec) -> int:
    """``ceil((n_P^(d0/(d0+gamma/alpha)) + n_Q)^(2/d0))`` clamped to ``[1, n_P + n_Q]``."""
    n_P, n_Q = int(n_P), int(n_Q)
    if n_P < 0 or n_Q < 0 or max(n_P, n_Q) < 1:
        raise ValueError("need n_P, n_Q >= 0 with n_P or n_Q >= 1")
    raw = _effective_n(n_P, n_Q, spec) ** (2.0 / spec.d0)
    # absorb float noise so exact integer powers are not pushed up by one
    k = math.ceil(raw * (1.0 - 1e-12))
    return max(1, min(k, n_P + n_Q))


def rate_exponent(spec: RateSpec, which: str) -> float:
    p = spec.params
    if which == SOURCE_DOMINATED:
        if math.isinf(p.gamma):
            return 0.0
        return (p.beta + 1.0) / (spec.d0 + p.gamma / p.alpha)
    if which == TARGET_DOMINATED:
        return (p.beta + 1.0) / spec.d0
    raise ValueError(f"which must be {SOURCE_DOMINATED!r} or {TARGET_DOMINATED!r}")


@dataclass(frozen=True)
class BatchPartition:
    """``k`` disjoint batches of pooled indices with fixed source/target composition."""

    k: int
    batches: tuple
    n_P: int
    n_Q: int


def make_batch_partition(n_P: int, n_Q: int, k: int, seed) -> BatchPartition:
    n_P, n_Q, k = int(n_P), int(n_Q), int(k)
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > max(n_P, n_Q):
        raise ValueError(f"k={k} exceeds n_P v n_Q = {max(n_P, n_Q)}")
    rng = np.random.default_rng(seed)
    a, b = n_P // k, n_Q // k
    src = rng.permutation(n_P)[: a * k].reshape(k, a)
    tgt = (n_P + rng.permutation(n_Q)[: b * k]).reshape(k, b)
    batches = tuple(np.sort(np.concatenate([src[i], tgt[i]])) for i in range(k))
    return BatchPartition(k, batches, n_P, n_Q)


def check_bias_lemma(model: PooledModel, partition: BatchPartition, x, alpha: float) -> bool:
    """Compare the true k-NN distance sum with the per-batch 1-NN sum.

    Both sums use ``rho^alpha``, sorted ascending before summation so that
    an elementwise-dominated sequence also has a dominated float sum.
    """
    k = partition.k
    if k > model.n:
        raise ValueError("partition has more batches than pooled points")
    q = as_points(x, model.index.dim)[:1]
    d = pairwise_linf(q, model.index.points)[0]
    knn = np.sort(d)[:k] ** alpha
    batch_min = np.sort(np.array([d[b].min() for b in partition.batches])) ** alpha
    return bool(np.sum(knn) <= np.sum(batch_min))
