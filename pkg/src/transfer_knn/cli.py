"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .adaptive import AdaptiveConfig, cover_based_classifier
from .core import TransferSample
from .cover import build_cover
from .diagnostics import DEFAULT_RADII, estimate_gamma
from .harness import (
    ConfigError,
    _v_b,
    config_from_dict,
    draw_trial,
    emit_plot_script,
    load_config,
    records_to_csv,
    run_sweep,
    trial_seeds,
    write_records,
)
from .synth import make_family

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _load(args, need_sweep: bool = True):
    if need_sweep:
        cfg = load_config(args.config)
    else:
        try:
            raw = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if isinstance(raw, dict):
            raw.setdefault("sweep", {"n_P": [1], "n_Q": [0]})
        cfg = config_from_dict(raw)
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.trials is not None:
        over["trials"] = args.trials
    if args.out is not None:
        over["output"] = args.out
    if over:
        cfg = dataclasses.replace(cfg, **over).validate()
    return cfg


def _emit(text: str, path) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_sweep(args) -> int:
    cfg = _load(args)
    records = run_sweep(cfg)
    if cfg.output and cfg.output != "-":
        write_records(records, cfg.output, cfg)
    else:
        sys.stdout.write(records_to_csv(records, [f"config_sha256={cfg.digest()}"]))
    return EXIT_OK


def cmd_cover(args) -> int:
    cfg = _load(args)
    buf = io.StringIO()
    buf.write(f"# config_sha256={cfg.digest()}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n_P", "n_Q", "trial", "k0", "level", "k", "added", "cumulative_queries"])
    for n_P, n_Q in cfg.sweep_points():
        for t in range(cfg.trials):
            family, sample, _ = draw_trial(cfg, n_P, n_Q, t)
            unlabeled = TransferSample(sample.source_x, sample.source_y, sample.target_x)
            cover = build_cover(unlabeled, delta=cfg.delta, v_b=_v_b(cfg, family.params.dim))
            total = 0
            if not cover.levels:
                w.writerow([n_P, n_Q, t, cover.k0, -1, 0, 0, 0])
            for i, (k, added) in enumerate(zip(cover.levels, cover.added_per_level)):
                total += added
                w.writerow([n_P, n_Q, t, cover.k0, i, k, added, total])
    _emit(buf.getvalue(), cfg.output)
    return EXIT_OK


def cmd_adapt(args) -> int:
    cfg = dataclasses.replace(_load(args), k_policy="cover_adaptive")
    records = run_sweep(cfg)
    if cfg.output and cfg.output != "-":
        write_records(records, cfg.output, cfg)
    else:
        sys.stdout.write(records_to_csv(records, [f"config_sha256={cfg.digest()}"]))
    if args.traces:
        n_points = int(cfg.extra.get("trace_points", 20))
        with open(args.traces, "w") as fh:
            for n_P, n_Q in cfg.sweep_points():
                for t in range(cfg.trials):
                    family, sample, eval_seed = draw_trial(cfg, n_P, n_Q, t)
                    unlabeled = TransferSample(sample.source_x, sample.source_y, sample.target_x)
                    ty = sample.target_y
                    acfg = AdaptiveConfig(v_b=_v_b(cfg, family.params.dim), delta=cfg.delta)
                    clf, _ = cover_based_classifier(unlabeled, lambda i: ty[i - n_P], acfg)
                    probe_seed = np.random.SeedSequence(eval_seed.entropy, spawn_key=(*eval_seed.spawn_key, 1))
                    pts = family.sample_target_x(n_points, np.random.default_rng(probe_seed))
                    for x, tr in zip(pts, clf.traces(pts)):
                        fh.write(json.dumps({
                            "n_P": n_P, "n_Q": n_Q, "trial": t, "x": x.tolist(),
                            "eta": float(family.eta(x[None, :])[0]),
                            "stop_reason": tr.stop_reason, "final_k": tr.final_k,
                            "final_eta": tr.final_eta, "final_label": tr.final_label,
                            "steps": [dataclasses.asdict(s) for s in tr.steps],
                        }) + "\n")
    return EXIT_OK


def cmd_gamma(args) -> int:
    cfg = _load(args, need_sweep=False)
    g = dict(cfg.extra.get("gamma", {}))
    n = int(g.get("n", 50_000))
    n_probes = int(g.get("probes", 200))
    radii = g.get("radii", list(DEFAULT_RADII))
    min_count = int(g.get("min_count", 10))
    buf = io.StringIO()
    buf.write(f"# config_sha256={cfg.digest()}\n")
    rows = []
    for t in range(cfg.trials):
        fam_seed, data_seed, probe_seed = trial_seeds(cfg.seed, n, n, t)
        family = make_family(cfg.family, cfg.family_params, n, n, fam_seed)
        s1, s2 = data_seed.spawn(2)
        xs = family.sample_source_x(n, np.random.default_rng(s1))
        xq = family.sample_target_x(n, np.random.default_rng(s2))
        probes = family.sample_target_x(n_probes, np.random.default_rng(probe_seed))
        est = estimate_gamma(xs, xq, probes, radii, min_count)
        if est.infinite:
            buf.write(f"# trial={t} gamma_hat=inf (source misses the target support)\n")
            continue
        buf.write(f"# trial={t} gamma_hat={est.gamma_hat!r} intercept={est.intercept!r} "
                  f"fit_residual={est.fit_residual!r} n_points_used={est.n_points_used}\n")
        for r, lw, lm in zip(est.radii, est.log_ratio, est.mean_log_ratio):
            rows.append([t, repr(float(r)), repr(float(np.exp(lm))), repr(float(np.exp(lw)))])
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["trial", "r", "mean_ratio", "max_ratio"])
    w.writerows(rows)
    _emit(buf.getvalue(), cfg.output)
    return EXIT_OK


def cmd_plot(args) -> int:
    emit_plot_script(args.records, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="transfer-knn", description="Covariate-shift k-NN experiments.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn, help_ in (
        ("sweep", cmd_sweep, "run a rate sweep and write records CSV"),
        ("cover", cmd_cover, "build label-request covers and report per-level additions"),
        ("adapt", cmd_adapt, "run the cover-based adaptive classifier"),
        ("gamma", cmd_gamma, "estimate the transfer exponent of a family"),
    ):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("config", help="experiment JSON config")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--trials", type=int)
        sp.add_argument("--out", help="output path ('-' for stdout)")
        if name == "adapt":
            sp.add_argument("--traces", help="write per-query Lepski traces as JSON lines")
        sp.set_defaults(func=fn)
    sp = sub.add_parser("plot", help="emit a matplotlib script for a records CSV")
    sp.add_argument("records")
    sp.add_argument("out")
    sp.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - report any runtime failure with its exit code
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
