"""Discrete-time simulation loop and its verifiable execution log.

The engine advances one trace step at a time: build a decision context,
ask the policy, apply changeover friction, accrue cost, advance progress.
Every run either completes with phi == L at some C <= D or raises; a silent
deadline miss is treated as a bug, never a result.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, field

from .core import CostModel, Job, Rental, SpotTrace
from .policies import Action, DecisionContext, Policy, RENTAL_FOR_ACTION


class DeadlineViolated(RuntimeError):
    """A policy failed to finish by the deadline; indicates a policy bug."""


class TraceTooShort(ValueError):
    """The trace does not cover the job's deadline."""


@dataclass(frozen=True, slots=True)
class SimConfig:
    step_seconds: float = 1.0
    monte_carlo_runs: int = 1
    base_seed: int = 0

    def __post_init__(self) -> None:
        if self.step_seconds <= 0:
            raise ValueError("step_seconds must be positive")
        if self.monte_carlo_runs < 1:
            raise ValueError("monte_carlo_runs must be at least 1")


@dataclass(frozen=True, slots=True)
class StepRecord:
    step: int
    action: Action          # what the policy asked for
    effective: Rental       # what actually ran after downgrades
    progress: int
    cost: float
    in_changeover: bool
    fault: bool = False     # spot requested while unavailable


@dataclass(slots=True)
class ExecutionLog:
    policy: str
    seed: int
    step_seconds: float
    records: list[StepRecord]
    completion_step: int          # C in steps; job done at end of step C-1
    spot_steps: int
    on_demand_steps: int
    idle_steps: int
    changeover_steps: int
    total_cost: float
    policy_faults: int

    @property
    def completion_time(self) -> float:
        return self.completion_step * self.step_seconds

    def totals_dict(self) -> dict:
        return {
            "policy": self.policy,
            "seed": self.seed,
            "step_seconds": self.step_seconds,
            "completion_step": self.completion_step,
            "spot_steps": self.spot_steps,
            "on_demand_steps": self.on_demand_steps,
            "idle_steps": self.idle_steps,
            "changeover_steps": self.changeover_steps,
            "total_cost": self.total_cost,
            "policy_faults": self.policy_faults,
        }


@dataclass(frozen=True, slots=True)
class RunStats:
    policy: str
    mean_cost: float
    cost_stddev: float
    min_cost: float
    max_cost: float
    deadline_violations: int
    seeds: tuple[int, ...]


def _require_step_aligned(job: Job) -> tuple[int, int]:
    L, D = job.compute_length, job.deadline
    if int(L) != L or int(D) != D:
        raise ValueError("engine jobs must be whole numbers of steps; use Job.from_seconds")
    return int(L), int(D)


def build_log(policy_name: str, seed: int, step_seconds: float, records: list[StepRecord]) -> ExecutionLog:
    spot = sum(1 for r in records if r.effective is Rental.SPOT and not r.in_changeover)
    od = sum(1 for r in records if r.effective is Rental.ON_DEMAND and not r.in_changeover)
    chg = sum(1 for r in records if r.in_changeover)
    idle = len(records) - spot - od - chg
    return ExecutionLog(
        policy=policy_name,
        seed=seed,
        step_seconds=step_seconds,
        records=records,
        completion_step=records[-1].step + 1 if records else 0,
        spot_steps=spot,
        on_demand_steps=od,
        idle_steps=idle,
        changeover_steps=chg,
        total_cost=sum(r.cost for r in records),
        policy_faults=sum(1 for r in records if r.fault),
    )


def run(policy: Policy, trace: SpotTrace, job: Job, cost_model: CostModel,
        config: SimConfig, seed: int = 0) -> ExecutionLog:
    """Simulate one policy on one trace until the job completes.

    Raises TraceTooShort if the trace cannot cover the deadline,
    DeadlineViolated if the policy fails to finish in time, and ValueError
    for jobs that no policy could finish (deadline shorter than work plus
    one initial changeover).
    """
    L, D = _require_step_aligned(job)
    if len(trace.availability) < D:
        raise TraceTooShort(f"trace has {len(trace.availability)} steps, deadline needs {D}")
    d = cost_model.changeover_steps
    if D < L + d:
        raise ValueError(f"no policy can finish: D={D} < L+changeover={L + d}")

    avail = trace.availability
    rental = Rental.IDLE
    changeover = 0
    phi = 0
    t = 0
    pstate = policy.initial_state(job, cost_model, seed)
    records: list[StepRecord] = []

    while phi < L:
        if t >= D:
            raise DeadlineViolated(f"policy {policy.name}: phi={phi} of {L} at deadline {D}")
        spot_now = avail[t]
        ctx = DecisionContext(t, spot_now, phi, job, cost_model, rental)
        action, pstate = policy.decide(ctx, pstate)
        requested = action
        fault = False
        if action is Action.RUN_SPOT and not spot_now:
            action = Action.IDLE
            fault = True
        target = RENTAL_FOR_ACTION[action]
        if target is not rental:
            rental = target
            changeover = d
        if changeover > 0:
            changeover -= 1
            gain = 0
            cost = cost_model.rate(rental) if cost_model.bill_during_changeover else 0.0
            in_chg = True
        else:
            gain = 1 if rental is not Rental.IDLE else 0
            cost = cost_model.rate(rental)
            in_chg = False
        phi += gain
        records.append(StepRecord(t, requested, rental, gain, cost, in_chg, fault))
        t += 1

    return build_log(policy.name, seed, config.step_seconds, records)


def total_cost(log: ExecutionLog) -> float:
    return log.total_cost


@dataclass(frozen=True, slots=True)
class Verification:
    checks: tuple[tuple[str, bool, str], ...]

    @property
    def all_passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks)

    def failures(self) -> list[str]:
        return [f"{name}: {detail}" for name, ok, detail in self.checks if not ok]


def verify_log(log: ExecutionLog, job: Job, cost_model: CostModel) -> Verification:
    """Re-derive every log invariant from the per-step records."""
    L, D = job.compute_length, job.deadline
    checks = []

    progress = sum(r.progress for r in log.records)
    checks.append(("progress_conservation", progress == L, f"sum progress {progress} vs L {L}"))
    checks.append(("deadline", log.completion_step <= D, f"C {log.completion_step} vs D {D}"))

    stepwise = sum(r.cost for r in log.records)
    checks.append(("cost_stepwise", abs(stepwise - log.total_cost) < 1e-9,
                   f"sum {stepwise} vs total {log.total_cost}"))

    expected = log.spot_steps * cost_model.spot_rate + log.on_demand_steps * cost_model.cost_ratio
    if cost_model.bill_during_changeover:
        expected += sum(cost_model.rate(r.effective) for r in log.records if r.in_changeover)
    checks.append(("cost_conservation", abs(expected - log.total_cost) < 1e-9,
                   f"derived {expected} vs total {log.total_cost}"))

    dead_progress = any(r.progress != 0 for r in log.records
                        if r.in_changeover or r.effective is Rental.IDLE)
    checks.append(("no_progress_while_stalled", not dead_progress,
                   "progress recorded during changeover or idle"))

    contiguous = all(r.step == i for i, r in enumerate(log.records))
    checks.append(("contiguous_steps", contiguous, "step indices must be 0..C-1"))

    return Verification(tuple(checks))


def run_monte_carlo(policy: Policy, trace: SpotTrace, job: Job, cost_model: CostModel,
                    config: SimConfig) -> RunStats:
    """Estimate the expected cost over the policy's own randomness.

    Seeds are base_seed + i; aggregation is order-independent, so runs may be
    farmed out in any order.
    """
    seeds = tuple(config.base_seed + i for i in range(config.monte_carlo_runs))
    costs = [run(policy, trace, job, cost_model, config, seed=s).total_cost for s in seeds]
    return RunStats(
        policy=policy.name,
        mean_cost=statistics.fmean(costs),
        cost_stddev=statistics.pstdev(costs) if len(costs) > 1 else 0.0,
        min_cost=min(costs),
        max_cost=max(costs),
        deadline_violations=0,
        seeds=seeds,
    )


LOG_CSV_HEADER = "step,t,action,effective,progress,cost,changeover"


def write_log_csv(log: ExecutionLog, csv_path, totals_path=None) -> None:
    """Line-oriented per-step export plus a JSON totals footer file."""
    lines = [LOG_CSV_HEADER]
    for r in log.records:
        lines.append(
            f"{r.step},{r.step * log.step_seconds!r},{r.action.value},"
            f"{r.effective.value},{r.progress},{r.cost!r},{int(r.in_changeover)}"
        )
    with open(csv_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    if totals_path is None:
        totals_path = str(csv_path) + ".totals.json"
    with open(totals_path, "w") as fh:
        json.dump(log.totals_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
