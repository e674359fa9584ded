import json
import math
import os

import pytest

from spotsched.adversary import generate_synthetic_trace
from spotsched.cli import (
    ExperimentConfig,
    ResultRow,
    cost_savings_pct,
    main,
    overhead_to_opt_pct,
    sweep,
    verify_bounds,
    write_results_csv,
)
from spotsched.ingest import write_canonical


def test_cost_savings_examples():
    assert cost_savings_pct(18.0, 3.0, 10, 0, True) == pytest.approx(40.0)
    assert cost_savings_pct(30.0, 3.0, 10, 0, True) == pytest.approx(0.0)
    assert cost_savings_pct(10.0, 3.0, 10, 0, True) == pytest.approx(66.6667, abs=1e-3)
    # billed changeover raises the baseline
    assert cost_savings_pct(33.0, 3.0, 10, 1, True) == pytest.approx(0.0)


def test_overhead_examples():
    assert overhead_to_opt_pct(10.0, 10.0) == 0.0
    assert overhead_to_opt_pct(20.0, 10.0) == pytest.approx(100.0)
    with pytest.raises(ValueError):
        overhead_to_opt_pct(5.0, 0.0)


def test_overhead_of_ross_all_spot_loose_deadline(tmp_path):
    # ross on an always-available trace pays L + (K-1)*delta vs the optimum L:
    # with K=4 and an exactly divisible window this is 100*(sqrt(K)-1) = 100%
    from spotsched.core import CostModel, Job
    from spotsched.engine import SimConfig, run_monte_carlo
    from spotsched.oracle import opt_cost_delay_free
    from tracegen import make_trace
    trace = make_trace([1] * 24)
    stats = run_monte_carlo(__import__("spotsched.policies", fromlist=["make_policy"]).make_policy("ross-greedy"),
                            trace, Job(12, 24), CostModel(4.0), SimConfig(1.0, 50, 0))
    opt = opt_cost_delay_free(trace, Job(12, 24), 4.0)
    assert overhead_to_opt_pct(stats.mean_cost, opt) == pytest.approx(100.0)


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(k_grid=[1.0, 2.0])
    with pytest.raises(ValueError):
        ExperimentConfig(ld_grid=[0.0])
    with pytest.raises(ValueError):
        ExperimentConfig(runs=0)


def test_config_roundtrip(tmp_path):
    cfg = ExperimentConfig(traces=["a.csv", "b.csv"], policies=["greedy", "ross-greedy"],
                           k_grid=[2.0, 4.0], ld_grid=[0.5, 0.9], job_steps=50,
                           changeover_steps=1, bill_changeover=False, runs=7, seed=3,
                           out_dir="out")
    path = tmp_path / "exp.cfg"
    cfg.to_file(path)
    back = ExperimentConfig.from_file(path)
    assert back == cfg


def test_config_env_seed_override(tmp_path, monkeypatch):
    monkeypatch.setenv("SPOTSCHED_SEED", "99")
    cfg = ExperimentConfig(seed=3)
    assert cfg.seed == 99


def _corpus(tmp_path, n=1):
    paths = []
    for i in range(n):
        trace = generate_synthetic_trace("segments", 400, 1.0, 100 + i, mean_on=40, mean_off=18)
        p = tmp_path / f"trace{i}.csv"
        write_canonical(trace, p)
        paths.append(str(p))
    return paths


def test_sweep_cardinality_and_determinism(tmp_path):
    cfg = ExperimentConfig(traces=_corpus(tmp_path), policies=["greedy", "on-demand"],
                           k_grid=[2.0, 4.0, 9.0], ld_grid=[0.5, 0.7, 0.9],
                           job_steps=60, changeover_steps=0, runs=3, seed=5,
                           out_dir=str(tmp_path / "out"))
    rows, failures = sweep(cfg)
    assert len(rows) == 2 * 3 * 3  # policies x K x L/D on one trace
    assert not failures
    out1, out2 = tmp_path / "r1.csv", tmp_path / "r2.csv"
    write_results_csv(rows, out1)
    rows2, _ = sweep(cfg)
    write_results_csv(rows2, out2)
    assert out1.read_bytes() == out2.read_bytes()


def test_sweep_metric_consistency(tmp_path):
    cfg = ExperimentConfig(traces=_corpus(tmp_path), policies=["greedy", "uniform-progress"],
                           k_grid=[4.0], ld_grid=[0.5, 0.9], job_steps=60,
                           changeover_steps=0, runs=2, seed=1, out_dir=str(tmp_path))
    rows, _ = sweep(cfg)
    for r in rows:
        assert r.cost_savings_pct == pytest.approx(
            cost_savings_pct(r.mean_cost, r.K, r.L, 0, True))
        assert r.overhead_to_opt_pct == pytest.approx(
            overhead_to_opt_pct(r.mean_cost, r.opt_cost))
        assert r.overhead_to_opt_pct >= -1e-9  # the optimum is a true lower bound
        assert r.mean_cost <= r.K * (r.L + 0) + 1e-9  # never worse than on-demand here


def test_sweep_records_cell_failures(tmp_path):
    # a trace too short for the tightest deadline: those cells fail, sweep continues
    trace = generate_synthetic_trace("bernoulli", 70, 1.0, 0, p=0.5)
    p = tmp_path / "short.csv"
    write_canonical(trace, p)
    cfg = ExperimentConfig(traces=[str(p)], policies=["greedy"], k_grid=[2.0],
                           ld_grid=[0.5, 0.9], job_steps=60, changeover_steps=0,
                           runs=1, seed=0, out_dir=str(tmp_path))
    rows, failures = sweep(cfg)
    assert len(rows) == 1 and len(failures) == 1  # L/D=0.5 needs 120 steps


def test_cli_end_to_end(tmp_path, capsys):
    trace = generate_synthetic_trace("segments", 300, 1.0, 42, mean_on=30, mean_off=15)
    tr_path = tmp_path / "trace.csv"
    write_canonical(trace, tr_path)

    rc = main(["simulate", "--trace", str(tr_path), "--policy", "ross-greedy",
               "--K", "4.0", "--L", "50", "--D", "120", "--delay", "1",
               "--seed", "3", "--out", str(tmp_path / "run.csv")])
    assert rc == 0
    totals = json.loads(capsys.readouterr().out)
    assert totals["completion_step"] <= 120
    assert (tmp_path / "run.csv").exists()

    rc = main(["opt", "--trace", str(tr_path), "--K", "3.0", "--L", "50", "--D", "100"])
    assert rc == 0
    opt = json.loads(capsys.readouterr().out)
    assert opt["opt_delay_free"] <= opt["opt_with_delays"] + 1e-9

    rc = main(["stats", "--trace", str(tr_path)])
    assert rc == 0
    stats = json.loads(capsys.readouterr().out)
    assert 0 <= stats["fraction_available"] <= 1

    cfg = ExperimentConfig(traces=[str(tr_path)], policies=["greedy"], k_grid=[2.0],
                           ld_grid=[0.5], job_steps=40, changeover_steps=0, runs=2,
                           seed=1, out_dir=str(tmp_path / "out"))
    cfg_path = tmp_path / "exp.cfg"
    cfg.to_file(cfg_path)
    rc = main(["sweep", "--config", str(cfg_path)])
    assert rc == 0
    results = (tmp_path / "out" / "results.csv").read_text().splitlines()
    assert results[0].startswith("# spotsched-results v1")
    assert results[1].split(",")[0] == "trace_id"
    assert len(results) == 3


def test_cli_ingest_roundtrip(tmp_path, capsys):
    src = tmp_path / "pings.csv"
    src.write_text("0,up\n600,down\n1200,up\n")
    out = tmp_path / "canon.csv"
    rc = main(["ingest", "skypilot-availability", str(src), str(out)])
    assert rc == 0
    from spotsched.ingest import read_canonical
    assert read_canonical(out).availability == (True, False, True)


def test_verify_bounds_small(tmp_path):
    certs = verify_bounds([4.0], tolerance=0.05, compute_steps=100, mc_runs=300, seed=0)
    assert certs["pass"], json.dumps(certs, indent=2, default=str)
    assert certs["adaptive_killer"]["pass"]
    assert certs["parametric_pass"]
    assert certs["minimax_pass"]
    assert certs["fluid_pass"]


def test_verify_bounds_rejects_k_of_one():
    with pytest.raises(ValueError):
        verify_bounds([1.0, 4.0])


def test_verify_bounds_zero_tolerance_fails_on_discretization():
    # finite grids cannot hit the continuous targets exactly
    certs = verify_bounds([4.0], tolerance=0.0, compute_steps=60, mc_runs=60, seed=0)
    assert not certs["pass"]
