"""Online scheduling policies as step-wise decision functions.

Every policy is pure: ``decide(ctx, state) -> (action, state)`` has no side
effects, so a caller may re-ask a policy under a different availability bit
(the adversaries do) and distinct runs can share policy objects.

Safety discipline shared by all policies: an action is only taken if, in the
worst case (immediate preemption, no future spot), one final switch to
on-demand still meets the deadline. With the default one-step changeover this
reduces exactly to the point-of-no-return reserve rule in :mod:`core`; for
longer changeovers it additionally refuses to start a spot rental whose
post-switch slack could not absorb the forced exit.
"""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass, replace

from .core import CostModel, Job, Rental, critical_threshold

POLICY_IDS = ("greedy", "uniform-progress", "on-demand", "ross-greedy", "ross-uniform")


class Action(enum.Enum):
    IDLE = "idle"
    RUN_SPOT = "spot"
    RUN_ON_DEMAND = "on-demand"


RENTAL_FOR_ACTION = {
    Action.IDLE: Rental.IDLE,
    Action.RUN_SPOT: Rental.SPOT,
    Action.RUN_ON_DEMAND: Rental.ON_DEMAND,
}


@dataclass(frozen=True, slots=True)
class DecisionContext:
    """Everything a policy may look at for one step: the present, never the future."""

    t: int
    spot_available_now: bool
    phi: int
    job: Job
    cost_model: CostModel
    current_rental: Rental = Rental.IDLE

    @property
    def slack(self) -> float:
        return (self.job.deadline - self.t) - (self.job.compute_length - self.phi)


def resolve_action(ctx: DecisionContext, preferred: Action) -> Action:
    """Clamp `preferred` so one forced on-demand switch always stays affordable.

    Idling one more step must leave `changeover` slack for the final switch;
    starting a spot rental must survive losing it on the very next step.
    """
    if preferred is Action.RUN_ON_DEMAND:
        return preferred
    d = ctx.cost_model.changeover_steps
    s = ctx.slack
    if preferred is Action.RUN_SPOT and ctx.spot_available_now:
        entry = 0 if ctx.current_rental is Rental.SPOT else d
        if s - entry >= d:
            return Action.RUN_SPOT
    if s - 1 >= d:
        return Action.IDLE
    return Action.RUN_ON_DEMAND


def forced_commitment(ctx: DecisionContext) -> bool:
    """The point-of-no-return trigger on a decision context: slack down to the
    switching reserve (one changeover unless already renting on-demand)."""
    reserve = 0 if ctx.current_rental is Rental.ON_DEMAND else ctx.cost_model.changeover_steps
    return ctx.slack <= reserve


def greedy_preference(ctx: DecisionContext) -> Action:
    """Ride spot when offered, otherwise wait."""
    return Action.RUN_SPOT if ctx.spot_available_now else Action.IDLE


def uniform_progress_preference(ctx: DecisionContext) -> Action:
    """Act only when behind the even-progress line phi = (L/D) * t."""
    behind = ctx.phi * ctx.job.deadline < ctx.job.compute_length * ctx.t
    if behind:
        return Action.RUN_SPOT if ctx.spot_available_now else Action.RUN_ON_DEMAND
    return Action.IDLE


def warmup_decide(kind: str, ctx: DecisionContext) -> Action:
    """Warm-up step: greedy runs every step (spot else on-demand), uniform
    follows the even-progress rule."""
    if kind == "greedy":
        return Action.RUN_SPOT if ctx.spot_available_now else Action.RUN_ON_DEMAND
    if kind == "uniform":
        return uniform_progress_preference(ctx)
    raise ValueError(f"unknown warm-up kind {kind!r}")


def sample_interval(window_start: int, remaining: int, length: int, rng: random.Random) -> tuple[int, int]:
    """Uniformly placed interval of `length` steps inside [window_start, window_start + remaining)."""
    if length <= 0:
        raise ValueError("interval length must be positive")
    if length > remaining:
        raise ValueError(f"interval length {length} exceeds window {remaining}")
    start = window_start + rng.randint(0, remaining - length)
    return start, start + length


class Policy:
    """Base class: a named, optionally randomized decision function."""

    name: str = "abstract"
    randomized: bool = False

    def initial_state(self, job: Job, cost_model: CostModel, seed: int):
        return None

    def decide(self, ctx: DecisionContext, state):
        raise NotImplementedError


class GreedyPolicy(Policy):
    """Wait on spot until the slack reserve is gone, then on-demand to the end.

    State is the commitment latch: once the forced switch happens the policy
    stays on on-demand for the rest of the job.
    """

    name = "greedy"

    def initial_state(self, job, cost_model, seed):
        return False  # committed?

    def decide(self, ctx: DecisionContext, committed: bool):
        if committed:
            return Action.RUN_ON_DEMAND, True
        action = resolve_action(ctx, greedy_preference(ctx))
        return action, action is Action.RUN_ON_DEMAND


class UniformProgressPolicy(Policy):
    """Spread work evenly along the horizon; stateless.

    The point-of-no-return override is applied last: once slack is down to the
    reserve the policy rents on-demand no matter where the line sits.
    """

    name = "uniform-progress"

    def decide(self, ctx: DecisionContext, state):
        if forced_commitment(ctx):
            return Action.RUN_ON_DEMAND, state
        return resolve_action(ctx, uniform_progress_preference(ctx)), state


class OnDemandPolicy(Policy):
    """Baseline for the savings metric: rent on-demand from start to finish."""

    name = "on-demand"

    def decide(self, ctx: DecisionContext, state):
        return Action.RUN_ON_DEMAND, state


class RossPhase(enum.Enum):
    WARM_UP = "warm-up"
    RANDOM_WINDOW = "random-window"
    CATCH_UP = "catch-up"
    COMMITTED = "committed"


_PHASE_ORDER = {
    RossPhase.WARM_UP: 0,
    RossPhase.RANDOM_WINDOW: 1,
    RossPhase.CATCH_UP: 2,
    RossPhase.COMMITTED: 3,
}


@dataclass(frozen=True, slots=True)
class RossState:
    """Per-run state of the randomized policy. Phases only move forward."""

    phase: RossPhase
    warmup: str
    seed: int
    window_start: int | None = None  # time the warm-up exited
    window_len: int | None = None    # remaining work at that moment
    od_len: int | None = None        # length of the on-demand window
    od_start: int | None = None
    od_end: int | None = None
    commit_time: int | None = None


class RossPolicy(Policy):
    """Warm up, then hedge with a uniformly placed on-demand window.

    Warm-up runs while (D - t) / (L - phi) is below the critical threshold;
    on exit the policy draws an on-demand interval of length
    ceil(remaining / (1 + sqrt(K))) uniformly inside the next `remaining`
    steps, rides spot opportunistically around it, and finally commits to
    on-demand when the slack reserve runs out. Rounding the window up only
    adds guaranteed progress, so deadline safety is preserved.
    """

    randomized = True

    def __init__(self, warmup: str = "greedy"):
        if warmup not in ("greedy", "uniform"):
            raise ValueError(f"warm-up must be 'greedy' or 'uniform', got {warmup!r}")
        self.warmup = warmup
        self.name = f"ross-{warmup}"

    def initial_state(self, job, cost_model, seed):
        return RossState(phase=RossPhase.WARM_UP, warmup=self.warmup, seed=seed)

    def decide(self, ctx: DecisionContext, state: RossState):
        if state.phase is RossPhase.COMMITTED:
            return Action.RUN_ON_DEMAND, state

        job, K = ctx.job, ctx.cost_model.cost_ratio

        if state.phase is RossPhase.WARM_UP:
            remaining = job.compute_length - ctx.phi
            if (job.deadline - ctx.t) >= critical_threshold(K) * remaining:
                od_len = math.ceil(remaining / (1 + math.sqrt(K)))
                start, end = sample_interval(ctx.t, remaining, od_len, random.Random(state.seed))
                state = replace(
                    state,
                    phase=RossPhase.RANDOM_WINDOW,
                    window_start=ctx.t,
                    window_len=remaining,
                    od_len=od_len,
                    od_start=start,
                    od_end=end,
                )
            else:
                if state.warmup == "uniform" and forced_commitment(ctx):
                    return Action.RUN_ON_DEMAND, replace(
                        state, phase=RossPhase.COMMITTED, commit_time=ctx.t)
                preferred = warmup_decide(state.warmup, ctx)
                return self._guarded(ctx, preferred, state)

        if state.phase is RossPhase.RANDOM_WINDOW:
            if ctx.t < state.window_start + state.window_len:
                if state.od_start <= ctx.t < state.od_end:
                    return Action.RUN_ON_DEMAND, state
                preferred = Action.RUN_SPOT if ctx.spot_available_now else Action.IDLE
                return self._guarded(ctx, preferred, state)
            state = replace(state, phase=RossPhase.CATCH_UP)

        # catch-up runs only while slack exceeds the reserve; at the point of
        # no return the commitment is unconditional, spot or no spot
        if forced_commitment(ctx):
            return Action.RUN_ON_DEMAND, replace(
                state, phase=RossPhase.COMMITTED, commit_time=ctx.t)
        preferred = Action.RUN_SPOT if ctx.spot_available_now else Action.IDLE
        return self._guarded(ctx, preferred, state)

    @staticmethod
    def _guarded(ctx, preferred, state):
        action = resolve_action(ctx, preferred)
        if action is Action.RUN_ON_DEMAND and preferred is not Action.RUN_ON_DEMAND:
            # slack reserve exhausted: this is the final commitment
            state = replace(state, phase=RossPhase.COMMITTED, commit_time=ctx.t)
        return action, state


def phase_rank(phase: RossPhase) -> int:
    return _PHASE_ORDER[phase]


def make_policy(policy_id: str) -> Policy:
    """Instantiate a policy from its command-line identifier."""
    table = {
        "greedy": GreedyPolicy,
        "uniform-progress": UniformProgressPolicy,
        "on-demand": OnDemandPolicy,
    }
    if policy_id in table:
        return table[policy_id]()
    if policy_id == "ross-greedy":
        return RossPolicy("greedy")
    if policy_id == "ross-uniform":
        return RossPolicy("uniform")
    raise ValueError(f"unknown policy {policy_id!r}; expected one of {POLICY_IDS}")
