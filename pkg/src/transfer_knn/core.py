"""Sup-norm geometry on the unit hypercube and exact nearest-neighbor search.

Points are stored as rows of float arrays of shape ``(n, d)``.  Every
neighbor query in the package goes through :class:`NnIndex`, which orders
neighbors by ``(distance, stable index)`` so that results never depend on
the backing search structure.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

# rows of the query-by-data distance block processed at once
_CHUNK_CELLS = 4_000_000


@dataclass(frozen=True)
class MetricSpace:
    """``([0,1]^dim, sup-norm)``; its diameter is 1."""

    dim: int
    diameter: float = 1.0

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim}")
        if not self.diameter > 0:
            raise ValueError("diameter must be positive")

    def check(self, points) -> np.ndarray:
        """Return ``points`` as a finite ``(n, dim)`` float array."""
        pts = as_points(points, self.dim)
        return pts


def as_points(points, dim: Optional[int] = None) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(1, -1) if dim is None or pts.size == dim else pts.reshape(-1, 1)
    if pts.ndim != 2:
        raise ValueError(f"expected a 2-d array of points, got shape {pts.shape}")
    if dim is not None and pts.shape[1] != dim:
        raise ValueError(f"dimension mismatch: points have d={pts.shape[1]}, expected {dim}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must have finite coordinates")
    return pts


def linf_distance(a, b) -> float:
    """Sup-norm distance ``max_j |a_j - b_j|``."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - b)))


def pairwise_linf(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Distance block of shape ``(len(x), len(y))``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.abs(x[:, 0][:, None] - y[:, 0][None, :])
    for j in range(1, x.shape[1]):
        np.maximum(out, np.abs(x[:, j][:, None] - y[:, j][None, :]), out=out)
    return out


def _chunks(n_rows: int, n_cols: int):
    step = max(1, _CHUNK_CELLS // max(n_cols, 1))
    for start in range(0, n_rows, step):
        yield slice(start, min(n_rows, start + step))


def first_k_mask(dist: np.ndarray, k: int) -> np.ndarray:
    """Boolean mask selecting, per row, the ``k`` smallest entries.

    Ties at the k-th distance go to the smallest column index.
    """
    n_cols = dist.shape[1]
    if k == n_cols:
        return np.ones_like(dist, dtype=bool)
    kth = np.partition(dist, k - 1, axis=1)[:, k - 1][:, None]
    less = dist < kth
    need = k - less.sum(axis=1, keepdims=True)
    eq = dist == kth
    return less | (eq & (np.cumsum(eq, axis=1) <= need))


@dataclass(frozen=True)
class NnIndex:
    """Immutable exact k-NN index over a fixed, index-stable point list.

    ``backend`` is ``"brute"`` (the reference path), ``"kdtree"`` or
    ``"auto"``.  Both backends return identical neighbor lists.
    """

    points: np.ndarray
    backend: str = "auto"
    _tree: Optional[cKDTree] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        pts = as_points(self.points)
        if pts.shape[0] == 0:
            raise ValueError("cannot index an empty point set")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.backend not in ("auto", "brute", "kdtree"):
            raise ValueError(f"unknown backend {self.backend!r}")
        use_tree = self.backend == "kdtree" or (self.backend == "auto" and pts.shape[0] > 20_000)
        if use_tree:
            object.__setattr__(self, "_tree", cKDTree(pts))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def _queries(self, x) -> np.ndarray:
        return as_points(x, self.dim)

    def _check_k(self, k: int):
        if not 1 <= k <= self.n:
            raise ValueError(f"k={k} out of range [1, {self.n}]")

    def distances(self, x) -> np.ndarray:
        return pairwise_linf(self._queries(x), self.points)

    def knn(self, x, k: int) -> np.ndarray:
        """Indices of the ``k`` nearest points per query, sorted by (distance, index)."""
        k = int(k)
        self._check_k(k)
        q = self._queries(x)
        if self._tree is not None:
            return self._knn_tree(q, k)
        out = np.empty((q.shape[0], k), dtype=np.int64)
        for sl in _chunks(q.shape[0], self.n):
            out[sl] = self._knn_brute(q[sl], k)
        return out

    def _knn_brute(self, q: np.ndarray, k: int) -> np.ndarray:
        dist = pairwise_linf(q, self.points)
        mask = first_k_mask(dist, k)
        rows, cols = np.nonzero(mask)
        cols = cols.reshape(q.shape[0], k)
        d_sel = dist[rows.reshape(q.shape[0], k), cols]
        order = np.argsort(d_sel, axis=1, kind="stable")
        return np.take_along_axis(cols, order, axis=1)

    def _knn_tree(self, q: np.ndarray, k: int) -> np.ndarray:
        dk, _ = self._tree.query(q, k=k, p=np.inf)
        dk = np.asarray(dk).reshape(q.shape[0], -1)[:, -1]
        out = np.empty((q.shape[0], k), dtype=np.int64)
        # widen the ball slightly, then filter with exact distances
        cands = self._tree.query_ball_point(q, dk * (1 + 1e-9) + 1e-12, p=np.inf)
        for i, c in enumerate(cands):
            c = np.asarray(c, dtype=np.int64)
            d = np.max(np.abs(self.points[c] - q[i]), axis=1)
            order = np.lexsort((c, d))
            out[i] = c[order[:k]]
        return out

    def knn_mask(self, x, k: int) -> np.ndarray:
        """Boolean ``(m, n)`` membership matrix of the k-NN sets (brute force)."""
        k = int(k)
        self._check_k(k)
        return first_k_mask(self.distances(x), k)

    def neighbor_mean(self, x, values, k: int) -> np.ndarray:
        """Mean of ``values`` over each query's ``k`` nearest points."""
        k = int(k)
        self._check_k(k)
        vals = np.asarray(values, dtype=float)
        q = self._queries(x)
        out = np.empty(q.shape[0])
        if self._tree is not None:
            idx = self._knn_tree(q, k)
            return vals[idx].mean(axis=1)
        for sl in _chunks(q.shape[0], self.n):
            mask = first_k_mask(pairwise_linf(q[sl], self.points), k)
            out[sl] = mask @ vals / k
        return out

    def sorted_neighbors(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Full neighbor order (and distances) for a single query point."""
        q = self._queries(x)
        if q.shape[0] != 1:
            raise ValueError("sorted_neighbors takes exactly one query point")
        d = pairwise_linf(q, self.points)[0]
        order = np.argsort(d, kind="stable")
        return order, d[order]

    def ball_count(self, x, r: float) -> np.ndarray:
        """Number of indexed points in the closed ball ``B(x, r)`` per query."""
        if r < 0:
            raise ValueError("radius must be nonnegative")
        q = self._queries(x)
        out = np.empty(q.shape[0], dtype=np.int64)
        for sl in _chunks(q.shape[0], self.n):
            out[sl] = (pairwise_linf(q[sl], self.points) <= r).sum(axis=1)
        return out

    def ball_counts(self, x, radii) -> np.ndarray:
        """Closed-ball counts for every (query, radius) pair, shape ``(m, len(radii))``."""
        radii = np.asarray(radii, dtype=float)
        if np.any(radii < 0):
            raise ValueError("radii must be nonnegative")
        q = self._queries(x)
        out = np.empty((q.shape[0], radii.size), dtype=np.int64)
        for sl in _chunks(q.shape[0], self.n):
            d = pairwise_linf(q[sl], self.points)
            for j, r in enumerate(radii):
                out[sl, j] = np.count_nonzero(d <= r, axis=1)
        return out


def knn_indices(index: NnIndex, x, k: int) -> list[int]:
    """Indices of the ``k`` nearest indexed points to a single point ``x``."""
    return index.knn(np.asarray(x, dtype=float).reshape(1, -1), k)[0].tolist()


def ball_count(index: NnIndex, x, r: float) -> int:
    return int(index.ball_count(np.asarray(x, dtype=float).reshape(1, -1), r)[0])


@dataclass(frozen=True)
class TransferSample:
    """Source sample plus target sample on one metric space.

    Pooled indices follow the source-first convention: source rows occupy
    ``[0, n_P)`` and target rows ``[n_P, n_P + n_Q)``.  ``target_y`` is
    ``None`` when the target pool is unlabeled.
    """

    source_x: np.ndarray
    source_y: np.ndarray
    target_x: np.ndarray
    target_y: Optional[np.ndarray] = None

    def __post_init__(self):
        sx = np.asarray(self.source_x, dtype=float)
        tx = np.asarray(self.target_x, dtype=float)
        if sx.ndim != 2 or tx.ndim != 2:
            raise ValueError("source_x and target_x must be 2-d arrays (use shape (0, d) when empty)")
        if sx.shape[1] != tx.shape[1]:
            raise ValueError("source and target points live in different dimensions")
        sy = np.asarray(self.source_y, dtype=np.int8).ravel()
        if sy.shape[0] != sx.shape[0]:
            raise ValueError("source_y length does not match source_x")
        object.__setattr__(self, "source_x", as_points(sx, sx.shape[1]) if sx.size else sx)
        object.__setattr__(self, "target_x", as_points(tx, tx.shape[1]) if tx.size else tx)
        object.__setattr__(self, "source_y", sy)
        if self.target_y is not None:
            ty = np.asarray(self.target_y, dtype=np.int8).ravel()
            if ty.shape[0] != tx.shape[0]:
                raise ValueError("target_y length does not match target_x")
            object.__setattr__(self, "target_y", ty)
        if self.n_P + self.n_Q < 1:
            raise ValueError("need n_P or n_Q >= 1")

    @property
    def n_P(self) -> int:
        return self.source_x.shape[0]

    @property
    def n_Q(self) -> int:
        return self.target_x.shape[0]

    @property
    def dim(self) -> int:
        return self.source_x.shape[1]

    @property
    def target_labeled(self) -> bool:
        return self.target_y is not None

    @property
    def pooled_x(self) -> np.ndarray:
        return np.vstack([self.source_x, self.target_x])

    @property
    def pooled_y(self) -> np.ndarray:
        if self.target_y is None:
            raise ValueError("target labels are not available")
        return np.concatenate([self.source_y, self.target_y])

    def target_indices(self) -> np.ndarray:
        return np.arange(self.n_P, self.n_P + self.n_Q)
