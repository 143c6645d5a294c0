import json
import subprocess
import sys

import numpy as np
import pytest

from transfer_knn.classifier import RateSpec, optimal_k
from transfer_knn.cli import main
from transfer_knn.harness import (
    CSV_COLUMNS,
    ConfigError,
    RateRecord,
    config_from_dict,
    emit_plot_script,
    read_records,
    run_sweep,
    run_trial,
    write_records,
)
from transfer_knn.synth import make_family

BASE = {
    "family": {"preset": "margin_singularity", "params": {"gamma": 1.0}},
    "sweep": {"n_P": [200, 400], "n_Q": [0, 50]},
    "trials": 2,
    "k_policy": "oracle_optimal",
    "m_eval": 2000,
    "seed": 7,
}


def cfg(**kw):
    d = json.loads(json.dumps(BASE))
    d.update(kw)
    return config_from_dict(d)


def test_single_record_fixed_k():
    c = cfg(sweep={"n_P": [30], "n_Q": [0]}, trials=1, k_policy={"fixed": 1})
    recs = run_sweep(c)
    assert len(recs) == 1 and recs[0].k_used == 1 and recs[0].queries_made == 0
    assert config_from_dict({**BASE, "k_policy": "fixed(3)"}).k_fixed == 3


def test_oracle_k_logged():
    c = cfg()
    for r in run_sweep(c):
        fam = make_family("margin_singularity", {"gamma": 1.0})
        assert r.k_used == optimal_k(r.n_P, r.n_Q, RateSpec(fam.params))
        assert 0 <= r.excess_error <= 1 and r.queries_made == 0


def test_rerun_byte_identical(tmp_path):
    c = cfg()
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_records(run_sweep(c), a, c)
    write_records(run_sweep(c), b, c)
    assert a.read_bytes() == b.read_bytes()
    text = a.read_text().splitlines()
    assert text[0].startswith("# config_sha256=")
    assert text[1] == ",".join(CSV_COLUMNS)


def test_seed_splitting_independent_of_other_trials():
    big = run_sweep(cfg(trials=3))
    small = run_sweep(cfg(trials=1, sweep={"n_P": [400], "n_Q": [50]}))
    match = [r for r in big if (r.n_P, r.n_Q, r.trial) == (400, 50, 0)]
    assert match == small


def test_workers_give_same_records():
    assert run_sweep(cfg(workers=2)) == run_sweep(cfg())


def test_csv_round_trip(tmp_path):
    recs = run_sweep(cfg(timing=True))
    p = tmp_path / "r.csv"
    write_records(recs, p)
    assert read_records(p) == recs


@pytest.mark.parametrize("policy", ["adaptive_lepski", "cover_adaptive"])
def test_adaptive_policies(policy):
    c = cfg(k_policy=policy, sweep={"n_P": [300], "n_Q": [200]}, trials=1, family={
        "preset": "disjoint_support", "params": {"d": 1}})
    (r,) = run_sweep(c)
    if policy == "adaptive_lepski":
        assert r.queries_made == 0
    else:
        assert 0 < r.queries_made <= 200


def test_lowerbound_preset_rebuilt_per_point():
    c = cfg(family={"preset": "lowerbound", "params": {"gamma": 0, "beta": 1}}, m_eval=5000)
    recs = run_sweep(c)
    assert len(recs) == 8


@pytest.mark.parametrize("bad,msg", [
    ({"family": {"preset": "nope"}}, "available"),
    ({"trials": 0}, "trials"),
    ({"sweep": {"n_P": [0], "n_Q": [0]}}, "n_P or n_Q"),
    ({"k_policy": "smart"}, "k_policy"),
    ({"k_policy": {"fixed": 10000}}, "exceeds"),
    ({"m_eval": 10}, "m_eval"),
    ({"family": {"preset": "margin_singularity", "params": {"gamma": 1, "bogus": 2}}}, "bogus"),
])
def test_config_errors(bad, msg):
    d = {**BASE, **bad}
    with pytest.raises(ConfigError, match=msg):
        config_from_dict(d)


def test_record_invariants():
    with pytest.raises(ValueError):
        RateRecord(1, 0, 0, 1, 0, 1.5, 0.1, 0.0)
    with pytest.raises(ValueError):
        RateRecord(1, 2, 0, 1, 3, 0.1, 0.1, 0.0)


def _csv(tmp_path, rows, header=",".join(CSV_COLUMNS), extra=""):
    p = tmp_path / "r.csv"
    p.write_text("# comment\n" + header + extra + "\n" + "".join(r + "\n" for r in rows))
    return p


def test_plot_script_empty_records_is_valid_python(tmp_path):
    out = emit_plot_script(_csv(tmp_path, []), tmp_path / "plot.py")
    src = out.read_text()
    compile(src, "plot.py", "exec")
    assert "SERIES = {}" in src


def test_plot_script_two_policies(tmp_path):
    rows = ["100,0,0,5,0,0.1,0.01,0,lepski", "100,0,0,5,0,0.2,0.01,0,oracle",
            "200,0,0,5,0,0.05,0.01,0,lepski", "200,0,0,5,0,0.1,0.01,0,oracle"]
    out = emit_plot_script(_csv(tmp_path, rows, extra=",policy"), tmp_path / "plot.py")
    ns = {}
    src = out.read_text()
    series = src[src.index("SERIES = ") + 9: src.index("\n\nout =")]
    ns = eval(series)
    assert set(ns) == {"lepski", "oracle"}


def test_plot_script_missing_columns(tmp_path):
    with pytest.raises(ValueError, match="excess_error"):
        emit_plot_script(_csv(tmp_path, ["1,2"], header="n_P,n_Q"), tmp_path / "p.py")


def test_plot_script_runs(tmp_path):
    pytest.importorskip("matplotlib")
    c = cfg()
    p = tmp_path / "r.csv"
    write_records(run_sweep(c), p, c)
    script = emit_plot_script(p, tmp_path / "plot.py")
    png = tmp_path / "out.png"
    subprocess.run([sys.executable, str(script), str(png)], check=True, capture_output=True)
    assert png.exists() and png.stat().st_size > 0


# ---------------------------------------------------------------- CLI

def write_cfg(tmp_path, **kw):
    d = json.loads(json.dumps(BASE))
    d.update(kw)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(d))
    return p


def test_cli_sweep_and_overrides(tmp_path, capsys):
    p = write_cfg(tmp_path)
    out = tmp_path / "o.csv"
    assert main(["sweep", str(p), "--trials", "1", "--seed", "3", "--out", str(out)]) == 0
    recs = read_records(out)
    assert len(recs) == 4 and {r.trial for r in recs} == {0}


def test_cli_cover(tmp_path, capsys):
    p = write_cfg(tmp_path, sweep={"n_P": [500], "n_Q": [100]}, trials=1)
    assert main(["cover", str(p)]) == 0
    lines = [ln for ln in capsys.readouterr().out.splitlines() if not ln.startswith("#")]
    assert lines[0] == "n_P,n_Q,trial,k0,level,k,added,cumulative_queries"
    assert len(lines) >= 2


def test_cli_adapt_with_traces(tmp_path, capsys):
    p = write_cfg(tmp_path, sweep={"n_P": [300], "n_Q": [100]}, trials=1, trace_points=5)
    tr = tmp_path / "t.jsonl"
    assert main(["adapt", str(p), "--traces", str(tr)]) == 0
    lines = tr.read_text().splitlines()
    assert len(lines) == 5
    assert json.loads(lines[0])["stop_reason"] in {"interval_split", "crossed_half_low",
                                                   "crossed_half_high", "k_exhausted"}


def test_cli_gamma(tmp_path, capsys):
    p = tmp_path / "g.json"
    p.write_text(json.dumps({"family": {"preset": "margin_singularity", "params": {"gamma": 1}},
                             "trials": 1, "gamma": {"n": 20000, "probes": 100}}))
    assert main(["gamma", str(p)]) == 0
    out = capsys.readouterr().out
    assert "gamma_hat=" in out and "trial,r,mean_ratio,max_ratio" in out


def test_cli_plot(tmp_path):
    p = _csv(tmp_path, ["100,0,0,5,0,0.1,0.01,0"])
    assert main(["plot", str(p), str(tmp_path / "s.py")]) == 0


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["sweep", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["sweep", str(bad)]) == 2
    assert main(["sweep", str(write_cfg(tmp_path, trials=0))]) == 2
    assert main(["bogus"]) == 2
    # runtime failure: output directory does not exist
    assert main(["sweep", str(write_cfg(tmp_path, trials=1)), "--out", str(tmp_path / "no" / "x.csv")]) == 3
    assert main(["plot", str(tmp_path / "none.csv"), str(tmp_path / "x.py")]) == 3


def test_console_script_entry_point(tmp_path):
    p = write_cfg(tmp_path, trials=1, sweep={"n_P": [50], "n_Q": [0]})
    res = subprocess.run([sys.executable, "-m", "transfer_knn.cli", "sweep", str(p)], capture_output=True, text=True)
    assert res.returncode == 0 and "n_P,n_Q,trial" in res.stdout
