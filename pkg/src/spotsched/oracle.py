"""Hindsight-optimal costs and numeric verification of the closed-form game.

Two kinds of oracle live here. The trace oracles (`opt_cost_delay_free`,
`opt_cost_with_delays`) compute what an omniscient scheduler would pay under
exactly the engine's rules. The game oracles (`expected_alg_cost`,
`cr_function`, `delta_star`, `minimax_search`, `fluid_lower_bound`) evaluate
the fluid two-player game that yields the sqrt(K) and tight-deadline values;
they are pure real-valued math, deliberately independent of the step engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import CostModel, Job, SpotTrace, critical_threshold


def opt_cost_delay_free(trace: SpotTrace, job: Job, cost_ratio: float) -> float:
    """Cheapest completion with full foresight and free switching.

    Ride every available spot step up to L, buy the remainder on-demand:
    min(L, A) * 1 + max(0, L - A) * K with A the spot time inside [0, D].
    """
    L, D = int(job.compute_length), int(job.deadline)
    if len(trace.availability) < D:
        raise ValueError("trace shorter than the deadline")
    available = sum(trace.availability[:D])
    return min(L, available) * 1.0 + max(0, L - available) * cost_ratio


def opt_cost_with_delays(trace: SpotTrace, job: Job, cost_model: CostModel) -> float:
    """Cheapest completion with full foresight under the engine's changeover rules.

    Forward value iteration over (progress, rental state, changeover left),
    one step of the trace at a time; numpy carries the progress axis. The
    d = 0 case degenerates to the closed form above.
    """
    if cost_model.changeover_steps == 0:
        return opt_cost_delay_free(trace, job, cost_model.cost_ratio)

    L, D = int(job.compute_length), int(job.deadline)
    if len(trace.availability) < D:
        raise ValueError("trace shorter than the deadline")
    d = cost_model.changeover_steps
    K = cost_model.cost_ratio
    billed = cost_model.bill_during_changeover
    avail = trace.availability

    IDLE, SPOT, OD = 0, 1, 2
    rates = (0.0, 1.0, K)
    INF = math.inf

    # value[phi, state, chg] = min cost to reach this configuration at time t
    value = np.full((L + 1, 3, d + 1), INF)
    value[0, IDLE, 0] = 0.0
    best_done = INF

    for t in range(D):
        spot_ok = avail[t]
        new = np.full_like(value, INF)
        for state in (IDLE, SPOT, OD):
            for chg in range(d + 1):
                col = value[:, state, chg]
                if not np.isfinite(col).any():
                    continue
                targets = [IDLE, OD] + ([SPOT] if spot_ok else [])
                for target in targets:
                    c = d if target != state else chg
                    if c > 0:
                        step_cost = rates[target] if billed else 0.0
                        cand = col + step_cost
                        dst = new[:, target, c - 1]
                        np.minimum(dst, cand, out=dst)
                    else:
                        if target == IDLE:
                            dst = new[:, IDLE, 0]
                            np.minimum(dst, col, out=dst)
                        else:
                            cand = col + rates[target]
                            dst = new[1:, target, 0]
                            np.minimum(dst, cand[:-1], out=dst)
        value = new
        done = value[L].min()
        if done < best_done:
            best_done = done
        value[L] = INF  # completed mass is absorbed; do not extend it

    if not math.isfinite(best_done):
        raise ValueError("no feasible schedule: trace/deadline cannot fit the job")
    return float(best_done)


def expected_alg_cost(z: float, delta: float, alpha: float, gamma: float,
                      cost_ratio: float, compute: float) -> float:
    """Closed-form expected cost of the three-phase randomized scheduler.

    The supplier either hides all late spot behind the scheduler's forced
    commitment (possible when gamma >= gamma* = delta * (1 - alpha/z)) or must
    leak it early where the scheduler rides along.
    """
    K, L = cost_ratio, compute
    gamma_star = delta * (1 - alpha / z)
    if gamma >= gamma_star:
        return L + (K - 1) * (L - alpha * (1 - delta / z))
    return L + (K - 1) * delta


def cr_function(cost_ratio: float, alpha: float, z: float, delta: float, compute: float) -> float:
    """Worst cost ratio over the supplier's two candidate plays.

    S1 runs pure spot (gamma = 0); S2 spends gamma* on-demand to starve the
    scheduler of late spot. Returns the larger ratio.
    """
    K, L = cost_ratio, compute
    gamma_star = delta * (1 - alpha / z)
    s1 = expected_alg_cost(z, delta, alpha, 0.0, K, L) / L
    s2 = expected_alg_cost(z, delta, alpha, gamma_star, K, L) / (L + (K - 1) * gamma_star)
    return max(s1, s2)


def delta_star(z: float, cost_ratio: float, compute: float) -> float:
    """Window length equalizing the two supplier plays: the positive root of
    rho^2 + rho*((K+1)/((K-1)(z/L)) - 1) - 1/((K-1)(z/L)) = 0 scaled by z."""
    if z <= 0:
        return 0.0
    K, L = cost_ratio, compute
    a = L * (K + 1) / (K - 1) - z
    return -0.5 * a + 0.5 * math.sqrt(a * a + 4 * z * L / (K - 1))


def delta_star_residual(z: float, cost_ratio: float, compute: float) -> float:
    """Value of the equalizing quadratic at rho = delta_star(z)/z; zero at the root."""
    K, L = cost_ratio, compute
    rho = delta_star(z, K, L) / z
    zl = z / L
    return rho * rho + rho * ((K + 1) / ((K - 1) * zl) - 1) - 1 / ((K - 1) * zl)


@dataclass(frozen=True, slots=True)
class MinimaxPoint:
    z: float
    delta: float
    rho: float
    value: float


def minimax_search(cost_ratio: float, compute: float, deadline: float,
                   resolution: float | None = None, full_gamma_grid: bool = False) -> dict:
    """Grid search of min over (z, delta) of max over (alpha, gamma) of the cost ratio.

    Scheduler cells must satisfy z <= D - L + delta so all three phases fit;
    at that boundary the supplier's full-availability play adds the term
    1 + (K-1)(1 + delta/L - z/L). For each z the grid also carries the
    equalizing window length delta_star(z), so the saddle stays representable
    however coarse the resolution. Returns a JSON-ready certificate.
    """
    K, L, D = cost_ratio, compute, deadline
    if resolution is None:
        resolution = 0.02 * L
    if resolution <= 0:
        raise ValueError("resolution must be positive")

    zs = np.arange(resolution, L + resolution / 2, resolution)
    best: MinimaxPoint | None = None
    for z in zs:
        deltas = np.arange(resolution, z + resolution / 2, resolution)
        equalizer = delta_star(z, K, L)
        if 0 < equalizer <= z:
            deltas = np.append(deltas, equalizer)
        deltas = deltas[z <= D - L + deltas + 1e-12]  # three-phase feasibility
        if deltas.size == 0:
            continue
        alphas = np.linspace(0.0, z, 21)
        for delta in deltas:
            worst = max(cr_function(K, a, z, delta, L) for a in alphas)
            if full_gamma_grid:
                for a in alphas:
                    for g in np.linspace(0.0, L - a, 11):
                        ratio = expected_alg_cost(z, delta, a, g, K, L) / (L + (K - 1) * g)
                        worst = max(worst, ratio)
            if best is None or worst < best.value:
                best = MinimaxPoint(z=float(z), delta=float(delta),
                                    rho=float(delta / z), value=float(worst))

    if best is None:
        raise ValueError("no feasible (z, delta) cell; deadline too tight for the grid")

    loose = D >= critical_threshold(K) * L
    theory = math.sqrt(K) if loose else 1 + (K - 1) * (2 - D / L)
    return {
        "inputs": {"K": K, "L": L, "D": D, "resolution": resolution},
        "regime": "loose" if loose else "tight",
        "argmin": {"z": best.z, "delta": best.delta, "rho": best.rho},
        "value": best.value,
        "theory_value": theory,
        "theory_z": min(L, D - L + L / (1 + math.sqrt(K))),
        "theory_delta": L / (1 + math.sqrt(K)),
        "value_rel_err": abs(best.value - theory) / theory,
    }


@dataclass(frozen=True, slots=True)
class OnDemandProfile:
    """Step-indexed on-demand probabilities with a last random step T."""

    p: tuple[float, ...]
    T: int

    def __post_init__(self) -> None:
        if not 0 <= self.T <= len(self.p):
            raise ValueError("T must index into the profile")
        if any(not 0 <= x <= 1 for x in self.p):
            raise ValueError("probabilities must lie in [0, 1]")
        if any(x != 1.0 for x in self.p[self.T:]):
            raise ValueError("profile must be deterministic (p = 1) from T onward")


def fluid_lower_bound(profile: OnDemandProfile, cost_ratio: float,
                      compute: float, deadline: float) -> float:
    """Lower bound on any online policy's ratio given its on-demand profile.

    Both supplier plays depend on the profile only through the scalar
    s = (1/L) * sum of p over the random phase [0, T): pure spot supply costs
    the policy 1 + (K-1)s, starving it costs at least K / (1 + (K-1)s). Under
    a tight deadline the profile must also satisfy T <= D - L + sum_{t<T} p to
    survive an empty supply, and matching the prefix entirely with spot then
    forces at least 1 + (K-1)(2 - D/L).
    """
    K, L, D = cost_ratio, compute, deadline
    s = sum(profile.p[:profile.T]) / L
    bound = max(1 + (K - 1) * s, K / (1 + (K - 1) * s))
    if D < critical_threshold(K) * L:
        head = sum(profile.p[:profile.T])
        if profile.T > D - L + head + 1e-9:
            raise ValueError("profile misses the deadline against an empty supply")
        bound = max(bound, 1 + (K - 1) * (2 - D / L))
    return bound
