"""Synthetic covariate-shift families with known regression function.

Every family shares one ``eta`` between source and target, exposes the
Bayes classifier, and records the transfer, smoothness and noise
parameters it satisfies.  Samplers take an explicit seed (int,
``SeedSequence`` or ``Generator``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .core import MetricSpace, as_points

INF = math.inf


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class FamilyParams:
    """Transfer-class parameters of a family.

    ``c_gamma`` is ``None`` when no constant has been certified.  ``c_d``
    and ``c_d_upper`` are the doubling (lower) and upper ball-mass
    constants of the target marginal, when known.
    """

    gamma: float
    alpha: float
    beta: float
    dim: int
    regime: str = "DM"
    c_gamma: Optional[float] = 1.0
    c_alpha: float = 1.0
    c_beta: float = 1.0
    c_d: Optional[float] = None
    c_d_upper: Optional[float] = None

    def __post_init__(self):
        if self.regime not in ("DM", "BCN"):
            raise ValueError(f"regime must be 'DM' or 'BCN', got {self.regime!r}")
        if not (self.gamma >= 0):
            raise ValueError("gamma must be nonnegative (or inf)")
        if not (0 < self.alpha <= 1):
            raise ValueError("alpha must lie in (0, 1]")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if int(self.dim) < 1:
            raise ValueError("dim must be a positive integer")
        if self.c_gamma is not None and not (0 < self.c_gamma <= 1):
            raise ValueError("c_gamma must lie in (0, 1]")
        if self.c_alpha <= 0 or self.c_beta <= 0:
            raise ValueError("c_alpha and c_beta must be positive")


def profile_eta(t: np.ndarray, c_prime: float, alpha: float) -> np.ndarray:
    """``(1 + c' sign(t) |t|^alpha) / 2`` with ``t`` clipped to [-1, 1]."""
    t = np.clip(t, -1.0, 1.0)
    return 0.5 * (1.0 + c_prime * np.sign(t) * np.abs(t) ** alpha)


class TransferFamily:
    """Base class: a (P, Q) pair on ``[0,1]^d`` sharing one regression function."""

    name = "family"

    def __init__(self, params: FamilyParams):
        self.params = params
        self.space = MetricSpace(params.dim)

    # subclasses implement the three primitives below
    def sample_source_x(self, n: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def sample_target_x(self, n: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def eta(self, x) -> np.ndarray:
        raise NotImplementedError

    def bayes(self, x) -> np.ndarray:
        return (self.eta(x) >= 0.5).astype(np.int8)

    def margin(self, x) -> np.ndarray:
        return np.abs(self.eta(x) - 0.5)

    def label(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return (rng.random(x.shape[0]) < self.eta(x)).astype(np.int8)

    def sample_source(self, n: int, seed) -> tuple[np.ndarray, np.ndarray]:
        rng = _rng(seed)
        x = self.sample_source_x(int(n), rng)
        return x, self.label(x, rng)

    def sample_target(self, n: int, seed) -> tuple[np.ndarray, np.ndarray]:
        rng = _rng(seed)
        x = self.sample_target_x(int(n), rng)
        return x, self.label(x, rng)

    def _points(self, x) -> np.ndarray:
        return as_points(x, self.params.dim)

    def __repr__(self):
        return f"{type(self).__name__}({self.params})"


class MarginSingularityFamily(TransferFamily):
    """Source density vanishing polynomially at the decision boundary.

    In the first coordinate, mapped to ``u = 2 x_1 - 1`` in [-1, 1]: the
    target is uniform, the source has density proportional to ``|u|^gamma``
    and ``eta = (1 + c' sign(u) |u|^alpha) / 2`` with ``c' = min(c_alpha, 1/2)``.
    Remaining coordinates (``dim > 1``) are uniform under both marginals.
    """

    name = "margin_singularity"

    def __init__(self, gamma: float, alpha: float = 1.0, c_alpha: float = 1.0, dim: int = 1):
        if not math.isfinite(gamma):
            raise ValueError("gamma must be finite here; use DisjointSupportFamily for gamma = inf")
        if gamma < 0:
            raise ValueError("gamma must be nonnegative")
        self.c_prime = min(c_alpha, 0.5)
        super().__init__(
            FamilyParams(
                gamma=float(gamma),
                alpha=alpha,
                beta=1.0 / alpha,
                dim=dim,
                regime="DM",
                c_gamma=1.0,
                c_alpha=c_alpha,
                c_beta=(2.0 / self.c_prime) ** (1.0 / alpha),
                c_d=1.0,
                c_d_upper=2.0 ** dim,
            )
        )

    def sample_source_x(self, n, rng):
        g = self.params.gamma
        mag = rng.random(n) ** (1.0 / (g + 1.0))
        sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)
        x = rng.random((n, self.params.dim))
        x[:, 0] = (sign * mag + 1.0) / 2.0
        return x

    def sample_target_x(self, n, rng):
        return rng.random((n, self.params.dim))

    def eta(self, x):
        x = self._points(x)
        return profile_eta(2.0 * x[:, 0] - 1.0, self.c_prime, self.params.alpha)

    def source_ball_mass(self, center: float, radius: float) -> float:
        """Closed-form source mass of the first-coordinate interval ``B(center, radius)``."""
        g = self.params.gamma
        lo = max(-1.0, 2 * (center - radius) - 1)
        hi = min(1.0, 2 * (center + radius) - 1)

        def cdf(u):
            return 0.5 * (1.0 + np.sign(u) * abs(u) ** (g + 1.0))

        return max(0.0, cdf(hi) - cdf(lo))


class DimensionGapFamily(TransferFamily):
    """Full-dimensional source, target on a lower-dimensional slice.

    The source is uniform on ``[0,1]^d_P``; the target is uniform on the
    first ``d_Q`` coordinates with the rest pinned to 1/2.  ``eta`` depends
    on the first coordinate exactly as in :class:`MarginSingularityFamily`.
    """

    name = "dimension_gap"

    def __init__(self, d_P: int, d_Q: int, alpha: float = 1.0, c_alpha: float = 1.0):
        if not (1 <= d_Q <= d_P):
            raise ValueError(f"need 1 <= d_Q <= d_P, got d_P={d_P}, d_Q={d_Q}")
        self.d_P, self.d_Q = int(d_P), int(d_Q)
        self.c_prime = min(c_alpha, 0.5)
        super().__init__(
            FamilyParams(
                gamma=float(d_P - d_Q),
                alpha=alpha,
                beta=1.0 / alpha,
                dim=d_P,
                regime="DM",
                c_gamma=1.0,
                c_alpha=c_alpha,
                c_beta=(2.0 / self.c_prime) ** (1.0 / alpha),
                c_d=1.0,
                c_d_upper=2.0 ** d_Q,
            )
        )

    def sample_source_x(self, n, rng):
        return rng.random((n, self.d_P))

    def sample_target_x(self, n, rng):
        x = np.full((n, self.d_P), 0.5)
        x[:, : self.d_Q] = rng.random((n, self.d_Q))
        return x

    def eta(self, x):
        x = self._points(x)
        return profile_eta(2.0 * x[:, 0] - 1.0, self.c_prime, self.params.alpha)


class DisjointSupportFamily(TransferFamily):
    """Source on ``[0,1/2]^d``, target on ``[3/4,1] x [0,1]^(d-1)``: no transfer.

    ``eta`` follows the same odd power profile in the first coordinate,
    centred at 7/8 with half-width 1/8 so the boundary cuts the target support.
    """

    name = "disjoint_support"
    _center, _half = 7.0 / 8.0, 1.0 / 8.0

    def __init__(self, d: int = 1, alpha: float = 1.0, c_alpha: float = 1.0):
        if d < 1:
            raise ValueError("d must be >= 1")
        self.c_prime = min(c_alpha * (2 * self._half) ** alpha, 0.5)
        super().__init__(
            FamilyParams(
                gamma=INF,
                alpha=alpha,
                beta=1.0 / alpha,
                dim=d,
                regime="DM",
                c_gamma=None,
                c_alpha=c_alpha,
                c_beta=(2.0 / self.c_prime) ** (1.0 / alpha),
                c_d=1.0,
                c_d_upper=4.0 * 2.0 ** (d - 1),
            )
        )

    def sample_source_x(self, n, rng):
        return 0.5 * rng.random((n, self.params.dim))

    def sample_target_x(self, n, rng):
        x = rng.random((n, self.params.dim))
        x[:, 0] = 0.75 + 0.25 * x[:, 0]
        return x

    def eta(self, x):
        x = self._points(x)
        return profile_eta((x[:, 0] - self._center) / self._half, self.c_prime, self.params.alpha)


def bump(s: np.ndarray) -> np.ndarray:
    """Piecewise-linear plateau: 1 on [0, 1/6], linear down to 0 at 1/3."""
    s = np.asarray(s, dtype=float)
    return np.clip(1.0 - 6.0 * (s - 1.0 / 6.0), 0.0, 1.0)


@dataclass(frozen=True)
class LowerBoundSpec:
    """Grid-of-hypercubes construction: cell side ``r``, ``m`` active cells,
    target mass ``w`` per active inner ball, and one sign per active cell."""

    r: float
    m: int
    w: float
    sigma: tuple
    params: FamilyParams

    def __post_init__(self):
        object.__setattr__(self, "sigma", tuple(int(s) for s in self.sigma))

    @property
    def grid(self) -> int:
        return int(math.floor(1.0 / self.r + 1e-12))

    def violations(self) -> list[str]:
        out = []
        p = self.params
        if not (0 < self.r <= 1):
            out.append("r must lie in (0, 1]")
            return out
        if self.m < 1:
            out.append("m must be a positive integer")
        if not self.w > 0:
            out.append("w must be positive")
        if not self.m * self.w < 1:
            out.append(f"m*w < 1 (got m*w = {self.m * self.w:g})")
        n_cells = self.grid ** p.dim
        if self.m > n_cells:
            out.append(f"m <= floor(1/r)^d (got m={self.m}, cells={n_cells})")
        elif self.m == n_cells:
            out.append("leftover mass 1 - m*w needs at least one null cell (m < floor(1/r)^d)")
        if len(self.sigma) != self.m:
            out.append(f"sigma has length {len(self.sigma)}, expected m={self.m}")
        if any(s not in (-1, 1) for s in self.sigma):
            out.append("sigma entries must be -1 or +1")
        if p.regime == "DM" and p.alpha * p.beta > p.dim + 1e-12:
            out.append("alpha*beta <= d is required in the DM regime")
        # inner-ball side r/3 must fit the volume budget
        if self.w > (self.r / 3.0) ** p.dim * 1e12:
            out.append("w too large for the inner ball volume")
        return out


class LowerBoundFamily(TransferFamily):
    """Hypercube grid construction with ``m`` signed active cells.

    Target: mass ``w`` uniform on each inner ball ``B(z, r/6)`` of an active
    cell, the remaining ``1 - m w`` uniform on the null cells.  Source:
    density ``r^gamma`` times the target's on inner balls, the rest of each
    active cell's mass uniform on the shell ``B(z,r/2) \\ B(z,r/3)``, and the
    target's own density on null cells.
    """

    name = "lowerbound"

    def __init__(self, spec: LowerBoundSpec, seed=0):
        bad = spec.violations()
        if bad:
            raise ValueError("invalid LowerBoundSpec: " + "; ".join(bad))
        super().__init__(spec.params)
        self.spec = spec
        p = spec.params
        self.r, self.m, self.w = spec.r, spec.m, spec.w
        self.G = spec.grid
        self.n_cells = self.G ** p.dim
        rng = _rng(seed)
        active = np.sort(rng.choice(self.n_cells, size=self.m, replace=False))
        self.active_ids = active
        self.sigma = np.asarray(spec.sigma, dtype=float)
        self.c_prime = min(p.c_alpha * 6.0 ** (-p.alpha), 0.5)
        self.source_ratio = 0.0 if math.isinf(p.gamma) else self.r ** p.gamma
        self.q1 = self.w / (self.r / 3.0) ** p.dim
        self.q0 = (1.0 - self.m * self.w) / ((self.n_cells - self.m) * self.r ** p.dim)
        self.p1 = self.q1 * self.source_ratio

    # cell bookkeeping
    def _cell_corner(self, ids: np.ndarray) -> np.ndarray:
        d = self.params.dim
        idx = np.empty((ids.size, d), dtype=np.int64)
        rem = ids.copy()
        for j in range(d - 1, -1, -1):
            idx[:, j] = rem % self.G
            rem //= self.G
        return idx * self.r

    def centers(self) -> np.ndarray:
        return self._cell_corner(self.active_ids) + self.r / 2.0

    def _cell_ids(self, x: np.ndarray) -> np.ndarray:
        j = np.floor(x / self.r).astype(np.int64)
        inside = np.all((j >= 0) & (j < self.G), axis=1)
        ids = np.full(x.shape[0], -1, dtype=np.int64)
        jj = j[inside]
        lin = np.zeros(jj.shape[0], dtype=np.int64)
        for c in range(x.shape[1]):
            lin = lin * self.G + jj[:, c]
        ids[inside] = lin
        return ids

    def _active_slot(self, ids: np.ndarray) -> np.ndarray:
        pos = np.searchsorted(self.active_ids, ids)
        pos = np.clip(pos, 0, self.m - 1)
        hit = (ids >= 0) & (self.active_ids[pos] == ids)
        return np.where(hit, pos, -1)

    def _null_cells(self, n: int, rng) -> np.ndarray:
        out = np.empty(0, dtype=np.int64)
        while out.size < n:
            cand = rng.integers(0, self.n_cells, size=2 * (n - out.size) + 8)
            cand = cand[self._active_slot(cand) < 0]
            out = np.concatenate([out, cand])
        return out[:n]

    def _uniform_in_cells(self, ids: np.ndarray, rng) -> np.ndarray:
        return self._cell_corner(ids) + self.r * rng.random((ids.size, self.params.dim))

    def _inner_ball(self, slots: np.ndarray, rng) -> np.ndarray:
        z = self.centers()[slots]
        return z + (self.r / 6.0) * (2.0 * rng.random(z.shape) - 1.0)

    def _shell(self, slots: np.ndarray, rng) -> np.ndarray:
        d = self.params.dim
        z = self.centers()[slots]
        out = np.empty_like(z)
        todo = np.arange(slots.size)
        while todo.size:
            u = (2.0 * rng.random((todo.size, d)) - 1.0) * (self.r / 2.0)
            ok = np.max(np.abs(u), axis=1) > self.r / 3.0
            out[todo[ok]] = z[todo[ok]] + u[ok]
            todo = todo[~ok]
        return out

    def sample_target_x(self, n, rng):
        comp = rng.random(n) < self.m * self.w
        x = np.empty((n, self.params.dim))
        n_act = int(comp.sum())
        x[comp] = self._inner_ball(rng.integers(0, self.m, size=n_act), rng)
        x[~comp] = self._uniform_in_cells(self._null_cells(n - n_act, rng), rng)
        return x

    def sample_source_x(self, n, rng):
        u = rng.random(n)
        inner_mass = self.m * self.w * self.source_ratio
        shell_mass = self.m * self.w * (1.0 - self.source_ratio)
        inner = u < inner_mass
        shell = (u >= inner_mass) & (u < inner_mass + shell_mass)
        null = ~(inner | shell)
        x = np.empty((n, self.params.dim))
        x[inner] = self._inner_ball(rng.integers(0, self.m, size=int(inner.sum())), rng)
        x[shell] = self._shell(rng.integers(0, self.m, size=int(shell.sum())), rng)
        x[null] = self._uniform_in_cells(self._null_cells(int(null.sum()), rng), rng)
        return x

    def eta(self, x):
        x = self._points(x)
        out = np.full(x.shape[0], 0.5)
        slot = self._active_slot(self._cell_ids(x))
        hit = slot >= 0
        if np.any(hit):
            z = self.centers()[slot[hit]]
            s = np.max(np.abs(x[hit] - z), axis=1) / self.r
            a = self.params.alpha
            out[hit] = 0.5 * (1.0 + self.sigma[slot[hit]] * self.c_prime * self.r ** a * bump(s) ** a)
        return out

    def constant_classifier_excess(self, label: int) -> float:
        """Exact excess error of the constant classifier ``label``."""
        wrong = np.sum(self.sigma > 0) if label == 0 else np.sum(self.sigma < 0)
        return float(self.c_prime * self.r ** self.params.alpha * self.w * wrong)


def lowerbound_schedule(
    gamma: float,
    alpha: float,
    beta: float,
    dim: int,
    n_P: int,
    n_Q: int,
    regime: str = "DM",
    c_alpha: float = 1.0,
    c_r: float = 1.0 / 9.0,
    c_w: float = 1.0 / 16.0,
) -> tuple[float, int, float, FamilyParams]:
    """Cell size, active-cell count and per-cell mass tied to sample sizes.

    Follows the minimax construction: ``r`` shrinks like
    ``(n_P^(d0/(d0+gamma/alpha)) + n_Q)^(-1/(alpha d0))``.  Returns
    ``(r, m, w, params)`` with the noise constant ``c_beta`` set to the
    smallest value the construction satisfies.
    """
    if regime == "DM":
        d0 = 2.0 + dim / alpha
    else:
        d0 = 2.0 + beta + dim / alpha
    if math.isinf(gamma):
        eff = 1.0 + n_Q
    else:
        eff = (n_P ** (d0 / (d0 + gamma / alpha)) if n_P > 0 else 0.0) + n_Q
    if eff <= 0:
        raise ValueError("need n_P or n_Q >= 1")
    r = c_r * eff ** (-1.0 / (alpha * d0))
    return _fixed_geometry(gamma, alpha, beta, dim, regime, c_alpha, r, c_w)


def make_margin_singularity_family(gamma: float, alpha: float = 1.0, c_alpha: float = 1.0, dim: int = 1):
    return MarginSingularityFamily(gamma, alpha=alpha, c_alpha=c_alpha, dim=dim)


def make_dimension_gap_family(d_P: int, d_Q: int, alpha: float = 1.0, c_alpha: float = 1.0):
    return DimensionGapFamily(d_P, d_Q, alpha=alpha, c_alpha=c_alpha)


def make_disjoint_support_family(d: int = 1, alpha: float = 1.0, c_alpha: float = 1.0):
    return DisjointSupportFamily(d, alpha=alpha, c_alpha=c_alpha)


def make_lowerbound_family(spec: LowerBoundSpec, seed=0) -> LowerBoundFamily:
    return LowerBoundFamily(spec, seed=seed)


def excess_error_mc(h: Callable[[np.ndarray], np.ndarray], family: TransferFamily, m_eval: int, seed):
    """Monte Carlo estimate of target excess error with a 95% half-width.

    Averages ``2 |eta(X) - 1/2| 1{h(X) != h*(X)}`` over ``m_eval`` draws
    ``X ~ Q_X``.  ``h`` is only evaluated where ``eta != 1/2``, since the
    integrand vanishes elsewhere.  The half-width is floored at ``1/m_eval``.
    """
    m_eval = int(m_eval)
    if m_eval < 100:
        raise ValueError("m_eval must be >= 100")
    rng = _rng(seed)
    x = family.sample_target_x(m_eval, rng)
    margin = family.margin(x)
    terms = np.zeros(m_eval)
    nz = margin > 0
    if np.any(nz):
        pred = np.asarray(h(x[nz])).astype(np.int8).ravel()
        wrong = pred != family.bayes(x[nz])
        terms[nz] = 2.0 * margin[nz] * wrong
    est = float(terms.mean())
    sd = float(terms.std(ddof=1))
    half = max(1.959963984540054 * sd / math.sqrt(m_eval), 1.0 / m_eval)
    return min(max(est, 0.0), 1.0), half


# ---------------------------------------------------------------------------
# presets addressable from experiment configs

def _lowerbound_preset(params: dict, n_P: int, n_Q: int, seed) -> LowerBoundFamily:
    p = dict(params)
    gamma = float(p.pop("gamma", 0.0))
    alpha = float(p.pop("alpha", 1.0))
    beta = float(p.pop("beta", 1.0))
    dim = int(p.pop("dim", 1))
    regime = p.pop("regime", "DM")
    c_alpha = float(p.pop("c_alpha", 1.0))
    c_r = float(p.pop("c_r", 1.0 / 9.0))
    c_w = float(p.pop("c_w", 1.0 / 16.0))
    sigma_mode = p.pop("sigma", "random")
    fixed_r = p.pop("r", None)
    if p:
        raise ValueError(f"unknown lowerbound parameters: {sorted(p)}")
    if fixed_r is not None:
        # fixed geometry: same construction at every sample size
        r, m, w, fp = _fixed_geometry(gamma, alpha, beta, dim, regime, c_alpha, float(fixed_r), c_w)
    else:
        r, m, w, fp = lowerbound_schedule(gamma, alpha, beta, dim, n_P, n_Q, regime, c_alpha, c_r, c_w)
    ss = np.random.SeedSequence(_entropy(seed))
    cell_seed, sign_seed = ss.spawn(2)
    if sigma_mode == "random":
        sigma = np.where(np.random.default_rng(sign_seed).random(m) < 0.5, -1, 1)
    elif sigma_mode in ("plus", "+1", 1):
        sigma = np.ones(m, dtype=int)
    elif sigma_mode in ("minus", "-1", -1):
        sigma = -np.ones(m, dtype=int)
    else:
        raise ValueError(f"unknown sigma mode {sigma_mode!r}")
    spec = LowerBoundSpec(r=r, m=m, w=w, sigma=tuple(sigma), params=fp)
    return LowerBoundFamily(spec, seed=cell_seed)


def _fixed_geometry(gamma, alpha, beta, dim, regime, c_alpha, r, c_w):
    ab = alpha * beta
    if regime == "DM":
        m = int(math.floor(8.0 * 9.0 ** (ab - dim) * r ** (ab - dim) + 1e-9))
        w = c_w * r ** dim
    else:
        m = int(math.floor((8.0 / 9.0) ** dim * r ** (-dim) + 1e-9))
        w = c_w * r ** (dim + ab)
    m = max(m, 1)
    c_prime = min(c_alpha * 6.0 ** (-alpha), 0.5)
    c_beta = m * w / (c_prime * r ** alpha / 2.0) ** beta if beta > 0 else 1.0
    fp = FamilyParams(gamma=float(gamma), alpha=alpha, beta=beta, dim=dim, regime=regime,
                      c_gamma=None, c_alpha=c_alpha, c_beta=max(c_beta, 1e-300))
    return r, m, w, fp


def _entropy(seed):
    if isinstance(seed, np.random.SeedSequence):
        return seed.entropy if seed.spawn_key == () else [seed.entropy, *seed.spawn_key]
    if seed is None:
        return 0
    return seed


def _margin_preset(params, n_P, n_Q, seed):
    p = dict(params)
    fam = MarginSingularityFamily(
        float(p.pop("gamma", 0.0)),
        alpha=float(p.pop("alpha", 1.0)),
        c_alpha=float(p.pop("c_alpha", 1.0)),
        dim=int(p.pop("dim", 1)),
    )
    if p:
        raise ValueError(f"unknown margin_singularity parameters: {sorted(p)}")
    return fam


def _dimgap_preset(params, n_P, n_Q, seed):
    p = dict(params)
    fam = DimensionGapFamily(
        int(p.pop("d_P", 2)),
        int(p.pop("d_Q", 1)),
        alpha=float(p.pop("alpha", 1.0)),
        c_alpha=float(p.pop("c_alpha", 1.0)),
    )
    if p:
        raise ValueError(f"unknown dimension_gap parameters: {sorted(p)}")
    return fam


def _disjoint_preset(params, n_P, n_Q, seed):
    p = dict(params)
    fam = DisjointSupportFamily(
        int(p.pop("d", p.pop("dim", 1))),
        alpha=float(p.pop("alpha", 1.0)),
        c_alpha=float(p.pop("c_alpha", 1.0)),
    )
    if p:
        raise ValueError(f"unknown disjoint_support parameters: {sorted(p)}")
    return fam


PRESETS: dict[str, Callable] = {
    "margin_singularity": _margin_preset,
    "dimension_gap": _dimgap_preset,
    "disjoint_support": _disjoint_preset,
    "lowerbound": _lowerbound_preset,
}


def make_family(preset: str, params: Optional[dict] = None, n_P: int = 0, n_Q: int = 0, seed=0) -> TransferFamily:
    """Build a preset family.  ``n_P``, ``n_Q`` and ``seed`` only matter for
    presets whose geometry depends on the sample sizes (``lowerbound``)."""
    try:
        factory = PRESETS[preset]
    except KeyError:
        raise KeyError(f"unknown family preset {preset!r}; available: {sorted(PRESETS)}") from None
    return factory(params or {}, n_P, n_Q, seed)


def family_depends_on_sizes(preset: str, params: Optional[dict] = None) -> bool:
    return preset == "lowerbound" and "r" not in (params or {})
