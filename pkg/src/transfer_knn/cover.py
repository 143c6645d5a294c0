"""Simultaneous k-2k covers and label-request accounting.

A subset ``R`` of the pooled sample is a k-2k cover when every point is
in ``R`` or has at least ``k`` members of ``R`` among some choice of its
``2k`` nearest neighbors (itself included).  At a tie on the ``2k``-th
distance, members of ``R`` are preferred, which is the most favourable
admissible choice.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .core import TransferSample, _chunks, as_points, pairwise_linf

log = logging.getLogger(__name__)


def base_level(n: int, delta: float, v_b: float) -> int:
    """``n_0 = ceil(V_B ln(2n) + ln(6/delta))``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    return int(math.ceil(v_b * math.log(2 * n) + math.log(6.0 / delta)))


def level_grid(n_P: int, n_Q: int, k0: int) -> list[int]:
    """Levels ``2^i n_0`` for ``i = 0 .. floor(log2((n_P v n_Q) / (2 n_0)))``."""
    top = max(n_P, n_Q) / (2.0 * k0)
    if top < 1:
        return []
    i_max = int(math.floor(math.log2(top)))
    # guard against float error in log2 at exact powers of two
    while k0 * 2 ** (i_max + 1) * 2 <= max(n_P, n_Q):
        i_max += 1
    while i_max >= 0 and k0 * 2 ** i_max * 2 > max(n_P, n_Q):
        i_max -= 1
    return [k0 * 2 ** i for i in range(i_max + 1)]


def r_counts(dist: np.ndarray, in_r: np.ndarray, k: int) -> np.ndarray:
    """Largest number of ``R`` members in any admissible 2k-NN set, per row.

    ``dist`` is a ``(m, n)`` distance block (rows include the point itself
    at distance 0); ``in_r`` is a boolean mask of length ``n``.
    """
    two_k = 2 * k
    kth = np.partition(dist, two_k - 1, axis=1)[:, two_k - 1][:, None]
    less = dist < kth
    eq = dist == kth
    n_less = less.sum(axis=1)
    r_less = (less & in_r).sum(axis=1)
    r_eq = (eq & in_r).sum(axis=1)
    return r_less + np.minimum(r_eq, two_k - n_less)


def _check_k(n: int, k: int) -> int:
    k = int(k)
    if not (1 <= k and 2 * k <= n):
        raise ValueError(f"k={k} out of range: need 1 <= k <= n/2 with n={n}")
    return k


def is_k2k_cover(points, R, k: int) -> bool:
    pts = as_points(points)
    n = pts.shape[0]
    k = _check_k(n, k)
    in_r = np.zeros(n, dtype=bool)
    idx = np.asarray(list(R), dtype=np.int64)
    if idx.size:
        if idx.min() < 0 or idx.max() >= n:
            raise ValueError("R contains indices outside the point list")
        in_r[idx] = True
    todo = np.flatnonzero(~in_r)
    for sl in _chunks(todo.size, n):
        rows = todo[sl]
        if np.any(r_counts(pairwise_linf(pts[rows], pts), in_r, k) < k):
            return False
    return True


@dataclass(frozen=True)
class CoverIndex:
    """Retained pooled indices valid as a k-2k cover at every level."""

    retained: tuple
    k0: int
    levels: tuple
    queries: tuple
    delta: float
    v_b: float
    n_P: int
    n_Q: int
    added_per_level: tuple = field(default=())

    @property
    def retained_array(self) -> np.ndarray:
        return np.asarray(self.retained, dtype=np.int64)


def build_cover(sample: TransferSample, delta: float = 0.05, v_b=None, k0=None,
                within_level: str = "sequential") -> CoverIndex:
    """Grow ``R`` from the source indices level by level.

    With ``within_level="sequential"`` (default), target indices are
    visited in ascending order and checked against the current ``R``,
    including earlier additions at the same level.  With ``"snapshot"``
    every target is checked against ``R`` as it stood when the level
    started, so all failing targets are added together.  ``v_b`` defaults
    to ``2d + 1``; ``k0`` overrides ``n_0``.
    """
    if within_level not in ("sequential", "snapshot"):
        raise ValueError("within_level must be 'sequential' or 'snapshot'")
    n_P, n_Q = sample.n_P, sample.n_Q
    n = n_P + n_Q
    if v_b is None:
        v_b = 2 * sample.dim + 1
    if v_b < 1:
        raise ValueError("v_b must be >= 1")
    k0 = base_level(n, delta, v_b) if k0 is None else int(k0)
    if k0 < 1:
        raise ValueError("k0 must be >= 1")
    levels = level_grid(n_P, n_Q, k0)
    in_r = np.zeros(n, dtype=bool)
    in_r[:n_P] = True
    added = []
    if not levels:
        log.warning("sample too small for any cover level (n_P v n_Q = %d < 2 n_0 = %d); keeping source only",
                    max(n_P, n_Q), 2 * k0)
    if levels and n_Q:
        pts = sample.pooled_x
        tgt = np.arange(n_P, n)
        for k in levels:
            count = 0
            cand = tgt[~in_r[tgt]]
            if cand.size == 0:
                added.append(0)
                continue
            start_r = in_r.copy()
            for sl in _chunks(cand.size, n):
                rows = cand[sl]
                dist = pairwise_linf(pts[rows], pts)
                if within_level == "snapshot":
                    fail = rows[r_counts(dist, start_r, k) < k]
                    in_r[fail] = True
                    count += fail.size
                    continue
                # vectorized pass against R as it stands; passes are final because
                # the count can only grow as R grows
                fail = np.flatnonzero(r_counts(dist, in_r, k) < k)
                for j in fail:
                    if r_counts(dist[j : j + 1], in_r, k)[0] < k:
                        in_r[rows[j]] = True
                        count += 1
            added.append(count)
    retained = tuple(int(i) for i in np.flatnonzero(in_r))
    queries = tuple(i for i in retained if i >= n_P)
    return CoverIndex(
        retained=retained,
        k0=k0,
        levels=tuple(levels),
        queries=queries,
        delta=delta,
        v_b=v_b,
        n_P=n_P,
        n_Q=n_Q,
        added_per_level=tuple(added),
    )


def requested_labels(cover: CoverIndex) -> tuple[int, list[int]]:
    return len(cover.queries), list(cover.queries)
