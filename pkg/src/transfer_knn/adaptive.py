"""Lepski-style local choice of k and the cover-based adaptive classifier."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import TransferSample, _chunks, as_points, pairwise_linf
from .cover import CoverIndex, base_level, build_cover

INTERVAL_SPLIT = "interval_split"
CROSSED_HALF_LOW = "crossed_half_low"
CROSSED_HALF_HIGH = "crossed_half_high"
K_EXHAUSTED = "k_exhausted"


@dataclass(frozen=True)
class AdaptiveConfig:
    v_b: float = 3
    delta: float = 0.05
    k0_override: Optional[int] = None

    def __post_init__(self):
        if self.v_b < 1:
            raise ValueError("v_b must be >= 1")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.k0_override is not None and int(self.k0_override) < 1:
            raise ValueError("k0_override must be >= 1")

    def k0(self, n: int) -> int:
        if self.k0_override is not None:
            return int(self.k0_override)
        return base_level(n, self.delta, self.v_b)


@dataclass(frozen=True)
class LepskiStep:
    k: int
    eta_k: float
    lower: float
    upper: float


@dataclass(frozen=True)
class LepskiTrace:
    steps: tuple
    stop_reason: str
    final_eta: float
    final_label: int
    final_k: int


class LabelRequestError(RuntimeError):
    """A label query for a retained target index failed."""

    def __init__(self, index: int, cause: BaseException):
        super().__init__(f"label request failed for target index {index}: {cause!r}")
        self.index = index


def _lepski_from_cumsum(cum: np.ndarray, n: int, k0: int, v_b: float) -> LepskiTrace:
    """Run the interval-intersection loop given cumulative sorted labels.

    ``cum[j]`` is the sum of the labels of the ``j+1`` nearest points.
    """
    log_n = math.log(n)

    def est(k):
        return float(cum[k - 1]) / k

    def width(k):
        return math.sqrt(v_b / k) * log_n

    k = k0
    e = est(k)
    lo, hi = e - width(k), e + width(k)
    eta = e
    steps = [LepskiStep(k, e, lo, hi)]
    split = False
    while lo <= 0.5 and hi >= 0.5 and k <= n / 2:
        k = min(2 * k, n)
        e = est(k)
        lo = max(e - width(k), lo)
        hi = min(e + width(k), hi)
        steps.append(LepskiStep(k, e, lo, hi))
        if hi < lo:
            split = True
            break
        eta = (hi + lo) / 2.0
    if split:
        reason = INTERVAL_SPLIT
    elif lo > 0.5:
        reason = CROSSED_HALF_HIGH
    elif hi < 0.5:
        reason = CROSSED_HALF_LOW
    else:
        reason = K_EXHAUSTED
    return LepskiTrace(tuple(steps), reason, eta, int(eta >= 0.5), k)


def _prepare(labeled_x, labeled_y, cfg: AdaptiveConfig):
    lx = as_points(labeled_x)
    ly = np.asarray(labeled_y, dtype=float).ravel()
    if ly.shape[0] != lx.shape[0]:
        raise ValueError("labels and points differ in length")
    n = lx.shape[0]
    if n < 1:
        raise ValueError("labeled set is empty")
    k0 = cfg.k0(n)
    if n < k0:
        raise ValueError(f"labeled set has {n} points; Lepski needs at least n_0 = {k0}")
    return lx, ly, n, k0


def lepski_classify(labeled_x, labeled_y, x, cfg: AdaptiveConfig) -> LepskiTrace:
    """Adaptive k-NN estimate at one point ``x``."""
    lx, ly, n, k0 = _prepare(labeled_x, labeled_y, cfg)
    q = as_points(x, lx.shape[1])[:1]
    d = pairwise_linf(q, lx)[0]
    order = np.argsort(d, kind="stable")
    return _lepski_from_cumsum(np.cumsum(ly[order]), n, k0, cfg.v_b)


def lepski_batch(labeled_x, labeled_y, x, cfg: AdaptiveConfig) -> list[LepskiTrace]:
    """:func:`lepski_classify` for every row of ``x``."""
    lx, ly, n, k0 = _prepare(labeled_x, labeled_y, cfg)
    q = as_points(x, lx.shape[1])
    out = []
    for sl in _chunks(q.shape[0], n):
        d = pairwise_linf(q[sl], lx)
        order = np.argsort(d, axis=1, kind="stable")
        cum = np.cumsum(ly[order], axis=1)
        out.extend(_lepski_from_cumsum(row, n, k0, cfg.v_b) for row in cum)
    return out


@dataclass
class CoverClassifier:
    """Lepski classifier over the labeled retained set of a cover."""

    x: np.ndarray
    y: np.ndarray
    cfg: AdaptiveConfig
    cover: CoverIndex

    def traces(self, x) -> list[LepskiTrace]:
        return lepski_batch(self.x, self.y, x, self.cfg)

    def __call__(self, x) -> np.ndarray:
        return np.array([t.final_label for t in self.traces(x)], dtype=np.int8)


def cover_based_classifier(
    sample: TransferSample,
    labeler: Callable[[int], int],
    cfg: AdaptiveConfig,
) -> tuple[CoverClassifier, CoverIndex]:
    """Build a cover, query each retained target label once, return the classifier.

    ``labeler`` maps a pooled target index (``>= n_P``) to its label.  Unless
    ``cfg.k0_override`` is set, the Lepski grid starts at the cover's own
    base level so that it runs over the cover's levels.
    """
    cover = build_cover(sample, delta=cfg.delta, v_b=cfg.v_b)
    retained = cover.retained_array
    labels = np.empty(retained.size, dtype=np.int8)
    n_P = sample.n_P
    labels[: n_P] = sample.source_y
    for j, idx in enumerate(retained[n_P:], start=n_P):
        try:
            labels[j] = int(labeler(int(idx)))
        except Exception as exc:
            raise LabelRequestError(int(idx), exc) from exc
    x = sample.pooled_x[retained]
    k0 = cfg.k0_override if cfg.k0_override is not None else min(cover.k0, retained.size)
    run_cfg = AdaptiveConfig(v_b=cfg.v_b, delta=cfg.delta, k0_override=k0)
    return CoverClassifier(x, labels, run_cfg, cover), cover


def envelope(n: int, k: int, dists: np.ndarray, cfg: AdaptiveConfig, c_alpha: float, alpha: float) -> float:
    """Deviation bound ``sqrt((V_B ln(2n/delta)+8)/k) + (C_alpha/k) sum rho^alpha``."""
    var = math.sqrt((cfg.v_b * math.log(2 * n / cfg.delta) + 8.0) / k)
    return var + c_alpha / k * float(np.sum(dists ** alpha))


def check_envelope(labeled_x, labeled_y, x, k: int, true_eta_x: float, cfg: AdaptiveConfig,
                   c_alpha: float = 1.0, alpha: float = 1.0) -> bool:
    """Test-side oracle: is the k-NN estimate within the high-probability envelope?"""
    lx = as_points(labeled_x)
    ly = np.asarray(labeled_y, dtype=float).ravel()
    n = lx.shape[0]
    k = int(k)
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range [1, {n}]")
    q = as_points(x, lx.shape[1])[:1]
    d = pairwise_linf(q, lx)[0]
    order = np.argsort(d, kind="stable")[:k]
    est = float(ly[order].mean())
    return abs(est - true_eta_x) <= envelope(n, k, d[order], cfg, c_alpha, alpha)
