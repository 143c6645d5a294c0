"""Transfer-exponent estimation and empirical rate fitting."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np
from scipy import stats

from .core import NnIndex, as_points

log = logging.getLogger(__name__)

DEFAULT_RADII = tuple(np.geomspace(0.02, 0.5, 12))


@dataclass(frozen=True)
class GammaEstimate:
    """Result of the ball-mass ratio regression.

    When ``infinite`` is set the supports look disjoint and ``gamma_hat``
    is ``inf``; the remaining fields then describe the data that triggered
    the flag.
    """

    gamma_hat: float
    intercept: float
    radii: tuple
    n_points_used: int
    fit_residual: float
    infinite: bool = False
    log_ratio: tuple = ()
    mean_log_ratio: tuple = ()


def estimate_gamma(source_pts, target_pts, probes, radii: Optional[Iterable[float]] = None,
                   min_count: int = 10, diameter: float = 1.0,
                   coverage: float = 1.0) -> GammaEstimate:
    """Estimate gamma from how the target/source ball-mass ratio grows as r shrinks.

    For each radius the worst-case (largest) ``log(Q_hat/P_hat)`` over the
    probes is used, and ``gamma_hat`` is minus the least-squares slope
    against ``log r``.  A radius enters the fit only when at least a
    ``coverage`` fraction of probes has ``min_count`` points in both samples.  When
    half or more of the probes see no source point inside a ball that
    already holds ``min_count`` target points, the supports are treated as
    disjoint and an infinite estimate is returned.
    """
    radii = np.asarray(DEFAULT_RADII if radii is None else list(radii), dtype=float)
    if radii.size < 2:
        raise ValueError("need at least two radii")
    if np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be strictly increasing")
    if radii[0] <= 0 or radii[-1] > diameter:
        raise ValueError("radii must lie in (0, diameter]")
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    src = as_points(source_pts)
    tgt = as_points(target_pts, src.shape[1])
    prb = as_points(probes, src.shape[1])
    n_P, n_Q = src.shape[0], tgt.shape[0]
    if n_P == 0 or n_Q == 0 or prb.shape[0] == 0:
        raise ValueError("source, target and probe sets must be nonempty")
    cp = NnIndex(src, backend="brute").ball_counts(prb, radii)
    cq = NnIndex(tgt, backend="brute").ball_counts(prb, radii)

    support_gap = np.any((cq >= min_count) & (cp == 0), axis=1)
    if np.mean(support_gap) >= 0.5:
        return GammaEstimate(math.inf, math.nan, tuple(radii), int(support_gap.sum()), math.nan, True)

    ok = (cp >= min_count) & (cq >= min_count)
    with np.errstate(divide="ignore"):
        ratio = np.log(cq / n_Q) - np.log(cp / n_P)
    ratio = np.where(ok, ratio, -np.inf)
    worst = ratio.max(axis=0)
    # the maximum is only meaningful at radii where every probe was measured;
    # elsewhere the most singular probes are exactly the ones censored out
    use = ok.mean(axis=0) >= coverage
    if use.sum() < 2:
        raise ValueError("fewer than two radii have enough points in both samples; "
                         "increase sample sizes or lower min_count")
    lr = np.log(radii[use])
    fit = stats.linregress(lr, worst[use])
    resid = worst[use] - (fit.intercept + fit.slope * lr)
    return GammaEstimate(
        gamma_hat=float(-fit.slope),
        intercept=float(fit.intercept),
        radii=tuple(radii[use]),
        n_points_used=int(ok.any(axis=1).sum()),
        fit_residual=float(np.sqrt(np.mean(resid ** 2))),
        infinite=False,
        log_ratio=tuple(worst[use]),
        mean_log_ratio=tuple(
            float(np.mean(ratio[ok[:, j], j])) for j in np.flatnonzero(use)
        ),
    )


@dataclass(frozen=True)
class RateFit:
    slope: float
    stderr: float
    points: tuple
    intercept: float = 0.0
    censored: int = 0


def fit_rate(records, filter: Optional[Callable[[int, int], bool]] = None, n_of: str = "total") -> RateFit:
    """Fit ``log E_hat = a - slope * log n`` over sweep points.

    Trials at the same sample size are averaged before fitting.  ``n_of``
    selects the abscissa: ``"total"`` (``n_P + n_Q``), ``"n_P"`` or ``"n_Q"``.
    A zero excess error is replaced by its CI half-width.
    """
    groups: dict[float, list[float]] = {}
    censored = 0
    for rec in records:
        if filter is not None and not filter(rec.n_P, rec.n_Q):
            continue
        if n_of == "total":
            n = rec.n_P + rec.n_Q
        elif n_of == "n_P":
            n = rec.n_P
        elif n_of == "n_Q":
            n = rec.n_Q
        else:
            raise ValueError(f"unknown n_of {n_of!r}")
        e = rec.excess_error
        if e <= 0:
            censored += 1
            e = rec.ci_half_width
        groups.setdefault(n, []).append(e)
    if censored:
        log.info("fit_rate: %d zero excess-error records replaced by their CI half-width", censored)
    if len(groups) < 4:
        raise ValueError(f"need at least 4 sweep points, got {len(groups)}")
    ns = np.array(sorted(groups), dtype=float)
    es = np.array([np.mean(groups[n]) for n in sorted(groups)])
    if np.any(ns <= 0) or np.any(es <= 0):
        raise ValueError("sample sizes and excess errors must be positive to fit on log scale")
    lx, ly = np.log(ns), np.log(es)
    fit = stats.linregress(lx, ly)
    return RateFit(
        slope=float(-fit.slope),
        stderr=float(fit.stderr),
        points=tuple(zip(lx.tolist(), ly.tolist())),
        intercept=float(fit.intercept),
        censored=censored,
    )
