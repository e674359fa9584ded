import json
import random

import pytest

from spotsched.core import CostModel, Job
from spotsched.engine import (
    DeadlineViolated,
    SimConfig,
    TraceTooShort,
    run,
    run_monte_carlo,
    total_cost,
    verify_log,
    write_log_csv,
)
from spotsched.oracle import opt_cost_delay_free
from spotsched.policies import make_policy
from tracegen import make_trace
from oracles import brute_force_min_cost


def test_greedy_all_spot(all_spot):
    log = run(make_policy("greedy"), all_spot(15), Job(10, 15), CostModel(3.0), SimConfig())
    assert log.total_cost == 10
    assert log.completion_step == 10


def test_greedy_no_spot_switches_at_no_return(no_spot):
    log = run(make_policy("greedy"), no_spot(15), Job(10, 15), CostModel(3.0), SimConfig())
    assert log.idle_steps == 5
    assert log.on_demand_steps == 10
    assert log.total_cost == 30
    assert log.completion_step == 15


def test_on_demand_only_changeover_billed(all_spot):
    # one initial switch of 2 steps at rate K, then L steps of work
    cm = CostModel(3.0, changeover_steps=2, bill_during_changeover=True)
    log = run(make_policy("on-demand"), all_spot(20), Job(10, 20), cm, SimConfig())
    assert log.total_cost == pytest.approx(3.0 * (10 + 2))
    assert log.changeover_steps == 2
    unbilled = CostModel(3.0, changeover_steps=2, bill_during_changeover=False)
    log2 = run(make_policy("on-demand"), all_spot(20), Job(10, 20), unbilled, SimConfig())
    assert log2.total_cost == pytest.approx(30.0)


def test_changeover_cost_monotone_in_delay(all_spot):
    costs = []
    for d in (0, 1, 2, 3, 4):
        cm = CostModel(3.0, changeover_steps=d)
        costs.append(run(make_policy("on-demand"), all_spot(30), Job(10, 30), cm, SimConfig()).total_cost)
    assert costs == sorted(costs)


def test_trace_too_short(all_spot):
    with pytest.raises(TraceTooShort):
        run(make_policy("greedy"), all_spot(9), Job(10, 15), CostModel(2.0), SimConfig())


def test_infeasible_job_rejected(all_spot):
    with pytest.raises(ValueError):
        run(make_policy("on-demand"), all_spot(10), Job(10, 10),
            CostModel(2.0, changeover_steps=1), SimConfig())


def test_non_integral_job_rejected(all_spot):
    with pytest.raises(ValueError):
        run(make_policy("greedy"), all_spot(20), Job(9.5, 15.0), CostModel(2.0), SimConfig())


def test_preemption_counts_transition_and_costs_delay():
    # spot for 4 steps, gap, spot again: greedy pays the re-entry changeover
    trace = make_trace([1, 1, 1, 1, 0, 0, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1])
    cm = CostModel(4.0, changeover_steps=1)
    log = run(make_policy("greedy"), trace, Job(8, 20), cm, SimConfig())
    verification = verify_log(log, Job(8, 20), cm)
    assert verification.all_passed, verification.failures()
    # entry changeover, 3 spot, forced idle at the gap, re-entry changeover, rest on spot
    assert log.changeover_steps >= 2
    assert sum(r.progress for r in log.records) == 8


def test_requested_spot_downgraded_and_flagged():
    class BadPolicy:
        name = "bad"
        randomized = False

        def initial_state(self, job, cm, seed):
            return None

        def decide(self, ctx, state):
            from spotsched.policies import Action
            return Action.RUN_SPOT, state  # asks for spot even when unavailable

    trace = make_trace([0, 0, 1, 1, 1, 1, 1, 1, 1, 1])
    log = run(BadPolicy(), trace, Job(5, 10), CostModel(2.0), SimConfig())
    assert log.policy_faults >= 2
    assert log.total_cost == 5


def test_deadline_violation_is_fatal():
    class LazyPolicy:
        name = "lazy"
        randomized = False

        def initial_state(self, job, cm, seed):
            return None

        def decide(self, ctx, state):
            from spotsched.policies import Action
            return Action.IDLE, state

    with pytest.raises(DeadlineViolated):
        run(LazyPolicy(), make_trace([1] * 10), Job(5, 10), CostModel(2.0), SimConfig())


def test_total_cost_conservation():
    rng = random.Random(0)
    trace = make_trace([rng.random() < 0.6 for _ in range(40)])
    cm = CostModel(3.0, 1)
    log = run(make_policy("uniform-progress"), trace, Job(15, 40), cm, SimConfig())
    assert total_cost(log) == pytest.approx(sum(r.cost for r in log.records))
    derived = (log.spot_steps * 1.0 + log.on_demand_steps * 3.0
               + sum(cm.rate(r.effective) for r in log.records if r.in_changeover))
    assert log.total_cost == pytest.approx(derived)


def test_verify_log_detects_tampering():
    log = run(make_policy("greedy"), make_trace([1] * 15), Job(10, 15), CostModel(2.0), SimConfig())
    ok = verify_log(log, Job(10, 15), CostModel(2.0))
    assert ok.all_passed
    log.completion_step = 16  # inject a deadline violation
    bad = verify_log(log, Job(10, 15), CostModel(2.0))
    assert not bad.all_passed and any("deadline" in f for f in bad.failures())
    log.completion_step = 10
    log.total_cost += 1.0  # tamper with the totals
    bad = verify_log(log, Job(10, 15), CostModel(2.0))
    assert not bad.all_passed


def test_monte_carlo_deterministic_policy_zero_variance():
    trace = make_trace([1, 0] * 25)
    stats = run_monte_carlo(make_policy("greedy"), trace, Job(10, 50), CostModel(2.0),
                            SimConfig(1.0, 100, 0))
    assert stats.cost_stddev == 0.0
    assert stats.min_cost == stats.max_cost == stats.mean_cost


def test_monte_carlo_ross_all_spot_window_cost(all_spot):
    # every interval placement yields K*delta + (L - delta): 4*4 + 8 = 24
    stats = run_monte_carlo(make_policy("ross-greedy"), all_spot(24), Job(12, 24),
                            CostModel(4.0), SimConfig(1.0, 200, 0))
    assert stats.mean_cost == pytest.approx(24.0)
    assert stats.cost_stddev == 0.0
    # with L=10 the window rounds up to 4 steps: 4*4 + 6 = 22
    stats = run_monte_carlo(make_policy("ross-greedy"), all_spot(20), Job(10, 20),
                            CostModel(4.0), SimConfig(1.0, 200, 0))
    assert stats.mean_cost == pytest.approx(22.0)


def test_monte_carlo_reproducible():
    trace = make_trace([1, 1, 0, 0] * 20)
    a = run_monte_carlo(make_policy("ross-greedy"), trace, Job(20, 60), CostModel(4.0),
                        SimConfig(1.0, 50, 7))
    b = run_monte_carlo(make_policy("ross-greedy"), trace, Job(20, 60), CostModel(4.0),
                        SimConfig(1.0, 50, 7))
    assert a == b


def test_identical_runs_identical_logs():
    rng = random.Random(3)
    trace = make_trace([rng.random() < 0.5 for _ in range(60)])
    for pid in ("greedy", "ross-greedy", "ross-uniform"):
        l1 = run(make_policy(pid), trace, Job(20, 60), CostModel(4.0, 1), SimConfig(), seed=4)
        l2 = run(make_policy(pid), trace, Job(20, 60), CostModel(4.0, 1), SimConfig(), seed=4)
        assert l1.records == l2.records
        assert l1.total_cost == l2.total_cost


def test_engine_matches_brute_force_optimum_when_omniscient():
    """No policy can beat the brute-force minimum; the optimum is reachable."""
    rng = random.Random(11)
    for _ in range(40):
        n = rng.randint(5, 14)
        bits = tuple(rng.random() < 0.5 for _ in range(n))
        L = rng.randint(1, max(1, n // 2))
        D = rng.randint(L, n)
        best = brute_force_min_cost(bits, L, D, 3.0, 0, True)
        opt = opt_cost_delay_free(make_trace(bits), Job(L, D), 3.0)
        assert opt == pytest.approx(best)


def test_log_csv_export_roundtrip(tmp_path):
    log = run(make_policy("greedy"), make_trace([1, 0] * 10), Job(5, 20),
              CostModel(2.0, 1), SimConfig())
    csv_path = tmp_path / "log.csv"
    write_log_csv(log, csv_path)
    lines = csv_path.read_text().strip().split("\n")
    assert lines[0] == "step,t,action,effective,progress,cost,changeover"
    assert len(lines) == 1 + len(log.records)
    totals = json.loads((tmp_path / "log.csv.totals.json").read_text())
    assert totals["total_cost"] == log.total_cost
    assert totals["completion_step"] == log.completion_step
    # per-step cost column re-sums to the total
    cost_sum = sum(float(ln.split(",")[5]) for ln in lines[1:])
    assert cost_sum == pytest.approx(log.total_cost)
