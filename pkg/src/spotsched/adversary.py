"""Adversarial and synthetic availability: the constructions behind the bounds.

Three co-simulations live here, all in the delay-free setting the analysis
uses (changeover must be zero):

* `run_adaptive_killer` - the construction that forces any deterministic
  policy to a cost ratio linear in K: spot appears exactly where the policy
  demonstrably cannot profit from it (after its forced on-demand commitment,
  or while it idles despite availability) and is withdrawn the moment the
  policy would grab it.
* `build_parametric_run` - the two-strategy supplier parameterized by
  (z, alpha, gamma): alpha spot spread evenly over phase one, then either all
  remaining spot hidden behind the scheduler's realized commitment point, or
  phase two flooded so the scheduler finishes early and cheap.
* `run_tight_deadline_adversary` - full availability on a prefix [0, T), then
  spot only at steps the policy spends on forced on-demand.

Adversaries react to the policy's realized past actions only, never to its
future random draws.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .core import CostModel, Job, Rental, SpotTrace
from .engine import SimConfig, StepRecord, build_log, run_monte_carlo
from .policies import Action, DecisionContext, Policy, RENTAL_FOR_ACTION, RossPolicy
from .oracle import opt_cost_delay_free


class RandomizedPolicyError(ValueError):
    """The deterministic-policy construction was asked to attack a randomized policy."""


class InfeasibleAdversaryError(ValueError):
    """The requested adversary cannot itself finish the job by the deadline."""


def _require_delay_free(cost_model: CostModel) -> None:
    if cost_model.changeover_steps != 0:
        raise ValueError("proof-replication runs require changeover_steps == 0")


@dataclass(frozen=True, slots=True)
class ParametricAdversary:
    """Supplier strategy from the two-phase game: phase-one length z, spot
    volume alpha in [0, z], own on-demand volume gamma in [0, L]."""

    z: int
    alpha: int
    gamma: float

    def validate(self, job: Job) -> None:
        L, D = int(job.compute_length), int(job.deadline)
        if not 0 < self.z <= D:
            raise InfeasibleAdversaryError(f"z={self.z} outside (0, D={D}]")
        if not 0 <= self.alpha <= self.z:
            raise InfeasibleAdversaryError(f"alpha={self.alpha} outside [0, z={self.z}]")
        if not 0 <= self.gamma <= L:
            raise InfeasibleAdversaryError(f"gamma={self.gamma} outside [0, L={L}]")
        if self.alpha + self.gamma > L:
            raise InfeasibleAdversaryError("alpha + gamma exceeds the job length")


def spread_evenly(volume: int, length: int) -> frozenset[int]:
    """`volume` step indices spread evenly over [0, length)."""
    if volume == 0:
        return frozenset()
    return frozenset((i * length) // volume for i in range(volume))


@dataclass(frozen=True, slots=True)
class CosimResult:
    alg_cost: float
    adv_cost: float
    ratio: float
    trace: SpotTrace
    log: object
    extras: dict


class _Cosim:
    """Step loop shared by the adversaries: policy in, availability decided per step."""

    def __init__(self, policy: Policy, job: Job, cost_model: CostModel, seed: int):
        _require_delay_free(cost_model)
        self.policy = policy
        self.job = job
        self.cm = cost_model
        self.L = int(job.compute_length)
        self.D = int(job.deadline)
        self.pstate = policy.initial_state(job, cost_model, seed)
        self.rental = Rental.IDLE
        self.phi = 0
        self.t = 0
        self.records: list[StepRecord] = []
        self.avail: list[bool] = []
        self.last_action: Action | None = None

    def probe(self, spot: bool) -> Action:
        ctx = DecisionContext(self.t, spot, self.phi, self.job, self.cm, self.rental)
        action, _ = self.policy.decide(ctx, self.pstate)
        return action

    def slack(self) -> int:
        return (self.D - self.t) - (self.L - self.phi)

    def step(self, spot: bool) -> Action:
        ctx = DecisionContext(self.t, spot, self.phi, self.job, self.cm, self.rental)
        action, self.pstate = self.policy.decide(ctx, self.pstate)
        effective = action
        fault = False
        if action is Action.RUN_SPOT and not spot:
            effective = Action.IDLE
            fault = True
        self.rental = RENTAL_FOR_ACTION[effective]
        gain = 1 if self.rental is not Rental.IDLE else 0
        cost = self.cm.rate(self.rental)
        self.phi += gain
        self.records.append(StepRecord(self.t, action, self.rental, gain, cost, False, fault))
        self.avail.append(spot)
        self.last_action = effective
        self.t += 1
        return effective

    def done(self) -> bool:
        return self.phi >= self.L

    def overran(self) -> bool:
        return self.t >= self.D and not self.done()

    def finish(self, seed: int) -> tuple[float, SpotTrace, object]:
        while len(self.avail) < self.D:
            self.avail.append(False)
        trace = SpotTrace(step_seconds=1.0, availability=tuple(self.avail),
                          origin_meta={"generator": "adversary", "seed": seed})
        log = build_log(self.policy.name, seed, 1.0, self.records)
        return log.total_cost, trace, log


def certify_deterministic(policy: Policy, job: Job, cost_model: CostModel,
                          config: SimConfig) -> None:
    """Zero cost variance across seeds on a probe trace, else reject.

    The probe is a single spot block covering half the job: any policy whose
    decisions depend on an internal draw pays a draw-dependent on-demand tail
    there, so its cost variance is visibly nonzero.
    """
    L, D = int(job.compute_length), int(job.deadline)
    block = max(1, L // 2)
    probe = SpotTrace(1.0, tuple(i < block for i in range(D)),
                      {"generator": "determinism-probe"})
    stats = run_monte_carlo(policy, probe, job, cost_model,
                            SimConfig(config.step_seconds, 8, 0))
    if stats.cost_stddev > 0:
        raise RandomizedPolicyError(
            f"policy {policy.name} is randomized; the construction only applies "
            "to deterministic policies")


def run_adaptive_cosim(policy: Policy, job: Job, cost_model: CostModel, seed: int = 0) -> CosimResult:
    """Adaptive spot supply against any policy (no determinism gate).

    Offer rule per step: spot is tentatively present after an on-demand step
    or while a standing offer is being ignored. The offer materializes only
    where the policy cannot benefit: it is past its point of no return (forced
    on-demand), or it idles despite the offer. A grab attempt retracts it.
    """
    sim = _Cosim(policy, job, cost_model, seed)
    prev_avail = False
    while not sim.done():
        if sim.overran():
            raise RuntimeError("policy overran the deadline inside the adaptive co-simulation")
        candidate = sim.last_action is Action.RUN_ON_DEMAND or (
            prev_avail and sim.last_action is Action.IDLE)
        spot = False
        if candidate:
            probed = sim.probe(True)
            if probed is Action.IDLE:
                spot = True
            elif probed is Action.RUN_ON_DEMAND and sim.slack() <= 0:
                spot = True  # forced on-demand: the offer is safe to leave up
        prev_avail = spot
        sim.step(spot)
    alg_cost, trace, log = sim.finish(seed)
    opt = opt_cost_delay_free(trace, job, cost_model.cost_ratio)
    return CosimResult(alg_cost, opt, alg_cost / opt, trace, log,
                       {"opt_is_trace_opt": True})


def run_adaptive_killer(policy: Policy, job: Job, cost_model: CostModel,
                        config: SimConfig, seed: int = 0) -> CosimResult:
    """The deterministic-policy construction; rejects randomized policies."""
    certify_deterministic(policy, job, cost_model, config)
    return run_adaptive_cosim(policy, job, cost_model, seed)


def build_parametric_run(adv: ParametricAdversary, job: Job, cost_model: CostModel,
                         seed: int, warmup: str = "greedy") -> CosimResult:
    """One realized play of the (z, alpha, gamma) supplier against the randomized policy.

    Phase one: alpha spot steps spread evenly over [0, z). At t = z the
    supplier checks, from realized progress P, whether its remaining
    L - alpha - gamma spot units fit after the scheduler's projected
    commitment (gamma >= P - alpha). If so it hides them there; otherwise it
    floods phase two, the scheduler finishes early on cheap spot, and the
    supplier rides the leftover afterwards. Its own cost is L + (K-1)*gamma
    either way.
    """
    adv.validate(job)
    _require_delay_free(cost_model)
    L, D = int(job.compute_length), int(job.deadline)
    K = cost_model.cost_ratio
    phase1 = spread_evenly(adv.alpha, adv.z)

    sim = _Cosim(RossPolicy(warmup), job, cost_model, seed)
    branch = None
    progress_at_z = None
    hidden_spots: frozenset[int] = frozenset()
    flood_until = None

    while not sim.done():
        if sim.overran():
            raise RuntimeError("policy overran the deadline inside the parametric co-simulation")
        t = sim.t
        if t < adv.z:
            spot = t in phase1
        else:
            if branch is None:
                progress_at_z = sim.phi
                if adv.gamma >= progress_at_z - adv.alpha - 1e-9:
                    branch = "hide"
                    # remaining supply sits after the projected commitment D - L + P
                    no_return = D - L + progress_at_z
                    need = L - adv.alpha - adv.gamma
                    count = math.floor(need + 1e-9)
                    if no_return + need > D + 1e-9:
                        raise InfeasibleAdversaryError(
                            "supplier cannot finish: hidden spot does not fit before D")
                    hidden_spots = frozenset(range(D - count, D))
                else:
                    branch = "flood"
                    flood_until = adv.z + (L - progress_at_z)
                    leftover = progress_at_z - adv.alpha - adv.gamma
                    if flood_until + leftover > D + 1e-9:
                        raise InfeasibleAdversaryError(
                            "supplier cannot finish: flood leftover does not fit before D")
            if branch == "hide":
                spot = t in hidden_spots
            else:
                spot = t < flood_until
        sim.step(spot)

    alg_cost, trace, log = sim.finish(seed)
    adv_cost = L + (K - 1) * adv.gamma
    extras = {
        "branch": branch or "completed-in-phase-one",
        "progress_at_z": progress_at_z,
        "epsilon": (L - progress_at_z if branch == "flood" else 0.0),
    }
    return CosimResult(alg_cost, adv_cost, alg_cost / adv_cost, trace, log, extras)


def parametric_expected_ratio(adv: ParametricAdversary, job: Job, cost_model: CostModel,
                              base_seed: int, runs: int, warmup: str = "greedy",
                              crosscheck: int = 0) -> float:
    """Mean realized ratio over `runs` seeds, computed in closed form per draw.

    Valid when the warm-up exits immediately (D >= threshold * L), where the
    scheduler is exactly the one-window process: each draw's cost depends on
    the interval start alone, so the per-seed co-simulation collapses to a
    formula. `crosscheck` seeds are additionally run through
    `build_parametric_run` and must agree exactly.
    """
    adv.validate(job)
    _require_delay_free(cost_model)
    L, D = int(job.compute_length), int(job.deadline)
    K = cost_model.cost_ratio
    from .core import critical_threshold
    if D < critical_threshold(K) * L:
        raise ValueError("closed-form path requires the loose-deadline regime")
    if adv.z != L:
        raise ValueError("closed-form path assumes phase one spans the full window (z == L)")

    od_len = math.ceil(L / (1 + math.sqrt(K)))
    phase1 = spread_evenly(adv.alpha, adv.z)
    prefix = [0] * (L + 1)
    for i in range(L):
        prefix[i + 1] = prefix[i] + (1 if i in phase1 else 0)

    def realized_cost(start: int) -> float:
        overlap = prefix[start + od_len] - prefix[start]
        caught = adv.alpha - overlap
        progress = od_len + caught
        if progress >= L:
            return K * od_len + (L - od_len)
        if adv.gamma >= progress - adv.alpha - 1e-9:
            return K * od_len + caught + K * (L - progress)
        return K * od_len + (L - od_len)

    total = 0.0
    for i in range(runs):
        start = random.Random(base_seed + i).randint(0, L - od_len)
        total += realized_cost(start)
    mean_ratio = (total / runs) / (L + (K - 1) * adv.gamma)

    for i in range(crosscheck):
        res = build_parametric_run(adv, job, cost_model, base_seed + i, warmup)
        start = random.Random(base_seed + i).randint(0, L - od_len)
        expect = realized_cost(start)
        if abs(res.alg_cost - expect) > 1e-6:
            raise AssertionError(
                f"closed form ({expect}) disagrees with co-simulation ({res.alg_cost}) "
                f"at seed {base_seed + i}")
    return mean_ratio


def run_tight_deadline_adversary(policy: Policy, prefix: int, job: Job,
                                 cost_model: CostModel, seed: int = 0) -> CosimResult:
    """Full spot on [0, prefix), then spot only at the policy's on-demand steps.

    The supplier matches the policy on the prefix, pulls the plug, and places
    its remaining work exactly where the policy is paying K anyway, so its own
    cost is L (all spot). One wrinkle of step granularity: the policy's very
    first forced step is always stealable (it would still grab spot there), so
    the supplier may come up at most one unit short and tops it up on-demand;
    any larger shortfall is a construction failure and raises.
    """
    _require_delay_free(cost_model)
    L, D = int(job.compute_length), int(job.deadline)
    if not 0 <= prefix <= D:
        raise ValueError(f"prefix must lie in [0, D], got {prefix}")

    sim = _Cosim(policy, job, cost_model, seed)
    supplied_late = 0
    while not sim.done():
        if sim.overran():
            raise RuntimeError("policy overran the deadline inside the tight co-simulation")
        if sim.t < prefix:
            spot = True
        else:
            spot = sim.probe(True) is Action.RUN_ON_DEMAND
        effective = sim.step(spot)
        if spot and sim.t > prefix and effective is Action.RUN_ON_DEMAND:
            supplied_late += 1

    alg_cost, trace, log = sim.finish(seed)
    adv_spot = min(prefix, L) + supplied_late
    shortfall = max(0, L - adv_spot)
    if shortfall > 1:
        raise InfeasibleAdversaryError(
            f"supplier completes only {adv_spot} of {L} units on spot; prefix too short")
    adv_cost = float(L) + (cost_model.cost_ratio - 1) * shortfall
    return CosimResult(alg_cost, adv_cost, alg_cost / adv_cost, trace, log,
                       {"prefix": prefix, "late_supply": supplied_late,
                        "on_demand_topup": shortfall})


def generate_synthetic_trace(kind: str, horizon: int, step_seconds: float,
                             seed: int, **params) -> SpotTrace:
    """Reproducible synthetic availability.

    kinds: 'bernoulli' (p), 'markov' (p_up, p_down), 'segments'
    (mean_on, mean_off geometric run lengths).
    """
    if horizon < 1:
        raise ValueError("horizon must be at least one step")
    rng = random.Random(seed)
    meta = {"generator": kind, "seed": seed, **params}

    if kind == "bernoulli":
        p = params["p"]
        if not 0 <= p <= 1:
            raise ValueError(f"p must be in [0, 1], got {p}")
        bits = tuple(rng.random() < p for _ in range(horizon))
    elif kind == "markov":
        p_up, p_down = params["p_up"], params["p_down"]
        if not (0 <= p_up <= 1 and 0 <= p_down <= 1):
            raise ValueError("transition probabilities must be in [0, 1]")
        stationary_up = p_up / (p_up + p_down) if p_up + p_down > 0 else 0.0
        state = rng.random() < stationary_up
        out = []
        for _ in range(horizon):
            out.append(state)
            state = (rng.random() >= p_down) if state else (rng.random() < p_up)
        bits = tuple(out)
    elif kind == "segments":
        # alternating on/off runs; lengths geometric around the given means, or
        # uniform over [lo, hi] ranges when dist="uniform"
        dist = params.get("dist", "geometric")
        out = []
        if dist == "geometric":
            mean_on, mean_off = params["mean_on"], params["mean_off"]
            if mean_on < 1 or mean_off < 1:
                raise ValueError("mean segment lengths must be at least one step")
            state = rng.random() < mean_on / (mean_on + mean_off)
            while len(out) < horizon:
                mean = mean_on if state else mean_off
                length = (1 + math.floor(math.log(1 - rng.random()) / math.log(1 - 1 / mean))
                          if mean > 1 else 1)
                out.extend([state] * length)
                state = not state
        elif dist == "uniform":
            on_lo, on_hi = params["on_range"]
            off_lo, off_hi = params["off_range"]
            if on_lo < 1 or off_lo < 1 or on_hi < on_lo or off_hi < off_lo:
                raise ValueError("segment ranges must be ordered and at least one step")
            mean_on, mean_off = (on_lo + on_hi) / 2, (off_lo + off_hi) / 2
            state = rng.random() < mean_on / (mean_on + mean_off)
            # random phase so job starts land anywhere inside a run
            burn = rng.randint(0, int(mean_on + mean_off))
            while len(out) < horizon + burn:
                lo, hi = (on_lo, on_hi) if state else (off_lo, off_hi)
                out.extend([state] * rng.randint(lo, hi))
                state = not state
            out = out[burn:]
        else:
            raise ValueError(f"unknown segment length distribution {dist!r}")
        bits = tuple(out[:horizon])
    else:
        raise ValueError(f"unknown generator kind {kind!r}")

    return SpotTrace(step_seconds=step_seconds, availability=bits, origin_meta=meta)
