"""Experiment configuration, sweep execution, CSV persistence and plot scripts."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .adaptive import AdaptiveConfig, cover_based_classifier, lepski_batch
from .classifier import RateSpec, fit_pooled, optimal_k
from .core import TransferSample
from .synth import PRESETS, excess_error_mc, make_family

CSV_COLUMNS = ("n_P", "n_Q", "trial", "k_used", "queries_made", "excess_error", "ci_half_width", "wall_time_ms")
K_POLICIES = ("oracle_optimal", "fixed", "adaptive_lepski", "cover_adaptive")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    family: str
    family_params: dict
    n_P: tuple
    n_Q: tuple
    trials: int = 1
    k_policy: str = "oracle_optimal"
    k_fixed: Optional[int] = None
    m_eval: int = 10_000
    seed: int = 0
    delta: float = 0.05
    v_b: Optional[float] = None
    output: Optional[str] = None
    pairs: Optional[tuple] = None
    timing: bool = False
    workers: int = 1
    extra: dict = field(default_factory=dict)

    def sweep_points(self) -> list[tuple[int, int]]:
        """Explicit ``pairs`` if given, otherwise the grid ``n_P x n_Q``."""
        if self.pairs is not None:
            return [tuple(p) for p in self.pairs]
        return [(a, b) for a in self.n_P for b in self.n_Q]

    def validate(self) -> "ExperimentConfig":
        if self.family not in PRESETS:
            raise ConfigError(f"unknown family preset {self.family!r}; available: {sorted(PRESETS)}")
        pts = self.sweep_points()
        if not pts:
            raise ConfigError("sweep is empty")
        for a, b in pts:
            if a < 0 or b < 0 or max(a, b) < 1:
                raise ConfigError(f"sweep point (n_P={a}, n_Q={b}) needs n_P or n_Q >= 1")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.k_policy not in K_POLICIES:
            raise ConfigError(f"k_policy must be one of {K_POLICIES}, got {self.k_policy!r}")
        if self.k_policy == "fixed":
            if self.k_fixed is None or self.k_fixed < 1:
                raise ConfigError("fixed k_policy needs a positive k")
            small = min(a + b for a, b in pts)
            if self.k_fixed > small:
                raise ConfigError(f"fixed k={self.k_fixed} exceeds the smallest pooled size {small}")
        if self.m_eval < 100:
            raise ConfigError("m_eval must be >= 100")
        if not 0 < self.delta < 1:
            raise ConfigError("delta must lie in (0, 1)")
        if self.v_b is not None and self.v_b < 1:
            raise ConfigError("v_b must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        try:
            a, b = pts[0]
            make_family(self.family, self.family_params, a, b, 0)
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"invalid family parameters: {exc}") from exc
        return self

    def to_json(self) -> str:
        d = asdict(self)
        d["sweep"] = {"n_P": list(self.n_P), "n_Q": list(self.n_Q)}
        if self.pairs is not None:
            d["sweep"]["pairs"] = [list(p) for p in self.pairs]
        for key in ("n_P", "n_Q", "pairs"):
            d.pop(key)
        d["family"] = {"preset": self.family, "params": self.family_params}
        d.pop("family_params")
        if self.k_policy == "fixed":
            d["k_policy"] = {"fixed": self.k_fixed}
        d.pop("k_fixed")
        extra = d.pop("extra")
        d.update(extra)
        return json.dumps(d, sort_keys=True)

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()


def config_from_dict(d: dict) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    d = dict(d)
    try:
        fam = d.pop("family")
        if isinstance(fam, str):
            preset, params = fam, {}
        else:
            preset, params = fam["preset"], dict(fam.get("params", {}))
        sweep = d.pop("sweep")
        n_P = tuple(int(v) for v in sweep.get("n_P", [0]))
        n_Q = tuple(int(v) for v in sweep.get("n_Q", [0]))
        pairs = sweep.get("pairs")
        pairs = None if pairs is None else tuple((int(a), int(b)) for a, b in pairs)
        kp = d.pop("k_policy", "oracle_optimal")
        k_fixed = None
        if isinstance(kp, dict):
            if set(kp) != {"fixed"}:
                raise ConfigError(f"unrecognized k_policy object {kp!r}")
            k_fixed = int(kp["fixed"])
            kp = "fixed"
        elif isinstance(kp, str) and kp.startswith("fixed"):
            # accept "fixed(5)" / "fixed:5"
            inner = kp[5:].strip("():= ")
            k_fixed = int(inner) if inner else d.pop("k", None)
            kp = "fixed"
        known = {f.name for f in fields(ExperimentConfig)} - {"family", "family_params", "n_P", "n_Q",
                                                               "pairs", "k_policy", "k_fixed", "extra"}
        kwargs = {k: d.pop(k) for k in list(d) if k in known}
        cfg = ExperimentConfig(
            family=preset, family_params=params, n_P=n_P, n_Q=n_Q, pairs=pairs,
            k_policy=kp, k_fixed=k_fixed, extra=d, **kwargs,
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed config: {exc!r}") from exc
    return cfg.validate()


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            d = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(d)


@dataclass(frozen=True)
class RateRecord:
    n_P: int
    n_Q: int
    trial: int
    k_used: int
    queries_made: int
    excess_error: float
    ci_half_width: float
    wall_time_ms: float

    def __post_init__(self):
        if not 0.0 <= self.excess_error <= 1.0:
            raise ValueError("excess_error must lie in [0, 1]")
        if self.queries_made > self.n_Q:
            raise ValueError("queries_made exceeds n_Q")


def trial_seeds(seed: int, n_P: int, n_Q: int, trial: int):
    """Independent (family, data, evaluation) seeds for one trial."""
    ss = np.random.SeedSequence([int(seed) & (2**64 - 1), int(n_P), int(n_Q), int(trial)])
    return ss.spawn(3)


def _v_b(cfg: ExperimentConfig, dim: int) -> float:
    return cfg.v_b if cfg.v_b is not None else 2 * dim + 1


def draw_trial(cfg: ExperimentConfig, n_P: int, n_Q: int, trial: int):
    """Family instance and labeled sample for one trial."""
    fam_seed, data_seed, eval_seed = trial_seeds(cfg.seed, n_P, n_Q, trial)
    family = make_family(cfg.family, cfg.family_params, n_P, n_Q, fam_seed)
    src_seed, tgt_seed = data_seed.spawn(2)
    sx, sy = family.sample_source(n_P, src_seed)
    tx, ty = family.sample_target(n_Q, tgt_seed)
    return family, TransferSample(sx, sy, tx, ty), eval_seed


def run_trial(cfg: ExperimentConfig, n_P: int, n_Q: int, trial: int) -> RateRecord:
    t0 = time.perf_counter()
    family, sample, eval_seed = draw_trial(cfg, n_P, n_Q, trial)
    queries = 0
    v_b = _v_b(cfg, family.params.dim)
    if cfg.k_policy in ("oracle_optimal", "fixed"):
        model = fit_pooled(sample)
        if cfg.k_policy == "fixed":
            k = cfg.k_fixed
        else:
            k = optimal_k(n_P, n_Q, RateSpec(family.params))
        h = model.classifier(k)
        k_used = k
    else:
        acfg = AdaptiveConfig(v_b=v_b, delta=cfg.delta)
        if cfg.k_policy == "adaptive_lepski":
            lx, ly = sample.pooled_x, sample.pooled_y
            h = _TracingLepski(lx, ly, acfg)
        else:
            unlabeled = TransferSample(sample.source_x, sample.source_y, sample.target_x)
            ty = sample.target_y
            clf, cover = cover_based_classifier(unlabeled, lambda i: ty[i - n_P], acfg)
            queries = len(cover.queries)
            h = _TracingLepski(clf.x, clf.y, clf.cfg)
    est, half = excess_error_mc(h, family, cfg.m_eval, eval_seed)
    if cfg.k_policy in ("adaptive_lepski", "cover_adaptive"):
        k_used = h.median_k()
    wall = (time.perf_counter() - t0) * 1000.0 if cfg.timing else 0.0
    return RateRecord(n_P, n_Q, trial, int(k_used), int(queries), est, half, round(wall, 3))


class _TracingLepski:
    """Lepski classifier that remembers the local k it chose at each query."""

    def __init__(self, x, y, cfg):
        self.x, self.y, self.cfg = x, y, cfg
        self.ks: list[int] = []

    def __call__(self, q):
        tr = lepski_batch(self.x, self.y, q, self.cfg)
        self.ks.extend(t.final_k for t in tr)
        return np.array([t.final_label for t in tr], dtype=np.int8)

    def median_k(self) -> int:
        if not self.ks:
            return self.cfg.k0(self.x.shape[0])
        return int(np.median(self.ks))


def _run_trial_args(args):
    return run_trial(*args)


def run_sweep(cfg: ExperimentConfig) -> list[RateRecord]:
    """All records of a sweep, sorted by ``(n_P, n_Q, trial)``."""
    cfg.validate()
    jobs = [(cfg, a, b, t) for a, b in cfg.sweep_points() for t in range(cfg.trials)]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            records = list(pool.map(_run_trial_args, jobs))
    else:
        records = [run_trial(*j) for j in jobs]
    return sorted(records, key=lambda r: (r.n_P, r.n_Q, r.trial))


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def records_to_csv(records, comments=()) -> str:
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def write_records(records, path, cfg: Optional[ExperimentConfig] = None) -> None:
    comments = [f"config_sha256={cfg.digest()}"] if cfg is not None else []
    text = records_to_csv(records, comments)
    path = Path(path)
    tmp = path.with_name(path.name + ".partial")
    try:
        tmp.write_text(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise OSError(f"failed to write records to {path}: {exc}; partial output may remain at {tmp}") from exc


def _read_rows(path) -> tuple[list[str], list[dict]]:
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#") and ln.strip()]
    if not lines:
        return [], []
    reader = csv.DictReader(lines)
    return list(reader.fieldnames or []), list(reader)


def read_records(path) -> list[RateRecord]:
    header, rows = _read_rows(path)
    missing = [c for c in CSV_COLUMNS if c not in header]
    if missing:
        raise ValueError(f"records CSV is missing columns: {', '.join(missing)}")
    out = []
    for row in rows:
        out.append(RateRecord(
            n_P=int(row["n_P"]), n_Q=int(row["n_Q"]), trial=int(row["trial"]),
            k_used=int(row["k_used"]), queries_made=int(row["queries_made"]),
            excess_error=float(row["excess_error"]), ci_half_width=float(row["ci_half_width"]),
            wall_time_ms=float(row["wall_time_ms"]),
        ))
    return out


_PLOT_COLUMNS = ("n_P", "n_Q", "excess_error")

_PLOT_TEMPLATE = '''"""Log-log plot of excess error against total sample size.

Generated from {source}.  Run with: python {name} [output.png]
"""
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

# series label -> list of (n, mean excess error)
SERIES = {series}

out = sys.argv[1] if len(sys.argv) > 1 else {default_out!r}
fig, ax = plt.subplots(figsize=(6, 4))
for label, pts in SERIES.items():
    if not pts:
        continue
    xs, ys = zip(*pts)
    ax.loglog(xs, ys, marker="o", label=label)
ax.set_xlabel("n_P + n_Q")
ax.set_ylabel("excess error")
if SERIES:
    ax.legend()
fig.tight_layout()
fig.savefig(out)
print(out)
'''


def emit_plot_script(records_path, out_path) -> Path:
    """Write a standalone matplotlib script plotting the records.

    One series per ``policy`` value when that column exists, otherwise one
    per ``n_Q``.  Points average the trials at each sample size.
    """
    records_path, out_path = Path(records_path), Path(out_path)
    if not records_path.exists():
        raise FileNotFoundError(f"records file {records_path} does not exist")
    header, rows = _read_rows(records_path)
    missing = [c for c in _PLOT_COLUMNS if c not in header]
    if missing and header:
        raise ValueError(f"records CSV is missing columns: {', '.join(missing)}")
    key = "policy" if "policy" in header else "n_Q"
    acc: dict[str, dict[int, list[float]]] = {}
    for row in rows:
        label = row[key] if key == "policy" else f"n_Q={row['n_Q']}"
        n = int(row["n_P"]) + int(row["n_Q"])
        err = float(row["excess_error"])
        if err <= 0 and "ci_half_width" in row:
            err = float(row["ci_half_width"])
        acc.setdefault(label, {}).setdefault(n, []).append(err)
    series = {
        label: [(n, float(np.mean(v))) for n, v in sorted(pts.items())]
        for label, pts in sorted(acc.items())
    }
    text = _PLOT_TEMPLATE.format(
        source=records_path.name,
        name=out_path.name,
        series=json.dumps(series, indent=4),
        default_out=str(out_path.with_suffix(".png").name),
    )
    out_path.write_text(text)
    return out_path
