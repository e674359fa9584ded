"""Domain types and the closed-form scheduling math shared by every other module.

Time is measured in abstract units. The simulation engine additionally
requires all durations to be whole numbers of trace steps; the conversion
helpers here round conservatively (work up, deadline down, delay up) so a
schedule that is feasible after rounding is feasible in the original units.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field


class Rental(enum.Enum):
    """What the scheduler is currently renting (or nothing)."""

    IDLE = "idle"
    SPOT = "spot"
    ON_DEMAND = "on-demand"


@dataclass(frozen=True, slots=True)
class Job:
    """A single job: `compute_length` units of work, due `deadline` units after t=0.

    Invariants: compute_length > 0 and deadline >= compute_length. A job that
    cannot fit before its deadline is rejected here rather than somewhere deep
    in a simulation.
    """

    compute_length: float
    deadline: float

    def __post_init__(self) -> None:
        if self.compute_length <= 0:
            raise ValueError(f"compute_length must be positive, got {self.compute_length}")
        if self.deadline < self.compute_length:
            raise ValueError(
                f"infeasible job: deadline {self.deadline} < compute length {self.compute_length}"
            )

    @classmethod
    def from_seconds(cls, compute_seconds: float, deadline_seconds: float, step_seconds: float) -> "Job":
        """Build a step-aligned job, rounding work up and the deadline down."""
        if step_seconds <= 0:
            raise ValueError("step_seconds must be positive")
        return cls(
            compute_length=math.ceil(compute_seconds / step_seconds),
            deadline=math.floor(deadline_seconds / step_seconds),
        )


@dataclass(frozen=True, slots=True)
class CostModel:
    """Pricing and switching friction.

    Spot costs 1 per unit time, on-demand costs `cost_ratio` (K > 1).
    `changeover_steps` is the progress-free delay inserted at every
    idle/spot/on-demand transition, already quantised to whole steps.
    """

    cost_ratio: float
    changeover_steps: int = 0
    bill_during_changeover: bool = True
    spot_rate: float = 1.0

    def __post_init__(self) -> None:
        if self.cost_ratio <= 1:
            raise ValueError(f"cost_ratio must exceed 1, got {self.cost_ratio}")
        if self.spot_rate != 1.0:
            raise ValueError("spot_rate is fixed at 1")
        if self.changeover_steps < 0 or int(self.changeover_steps) != self.changeover_steps:
            raise ValueError("changeover_steps must be a non-negative integer")

    def rate(self, rental: Rental) -> float:
        if rental is Rental.SPOT:
            return self.spot_rate
        if rental is Rental.ON_DEMAND:
            return self.cost_ratio
        return 0.0

    @staticmethod
    def changeover_steps_for(compute_steps: int, fraction: float = 0.01) -> int:
        """Default delay: ~1% of the compute length, rounded up to whole steps."""
        return math.ceil(fraction * compute_steps)


@dataclass(frozen=True, slots=True)
class SpotTrace:
    """Step-sampled availability of one spot offering."""

    step_seconds: float
    availability: tuple[bool, ...]
    origin_meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.step_seconds <= 0:
            raise ValueError("step_seconds must be positive")
        if len(self.availability) == 0:
            raise ValueError("availability must be non-empty")

    def __len__(self) -> int:
        return len(self.availability)

    @property
    def horizon_seconds(self) -> float:
        return len(self.availability) * self.step_seconds

    def available_steps(self, upto: int | None = None) -> int:
        part = self.availability if upto is None else self.availability[:upto]
        return sum(part)


@dataclass(slots=True)
class ProgressState:
    """Mutable per-run execution state."""

    t: float
    phi: float
    current_rental: Rental = Rental.IDLE
    changeover_remaining: float = 0.0


def slack(job: Job, state: ProgressState) -> float:
    """Spare time before the deadline binds: (D - t) - (L - phi)."""
    return (job.deadline - state.t) - (job.compute_length - state.phi)


def point_of_no_return_reached(job: Job, state: ProgressState, cost_model: CostModel) -> bool:
    """True once slack is down to the switching reserve.

    The reserve is one changeover delay while not already on on-demand, so the
    forced switch itself cannot push completion past the deadline.
    """
    reserve = 0 if state.current_rental is Rental.ON_DEMAND else cost_model.changeover_steps
    return slack(job, state) <= reserve


def critical_threshold(cost_ratio: float) -> float:
    """Deadline-to-remaining-work ratio at which the randomized window fits: (1+2*sqrt(K))/(1+sqrt(K))."""
    if cost_ratio <= 1:
        raise ValueError(f"cost_ratio must exceed 1, got {cost_ratio}")
    root = math.sqrt(cost_ratio)
    return (1 + 2 * root) / (1 + root)


def theoretical_cr_ross(job: Job, cost_ratio: float) -> float:
    """Worst-case expected cost ratio of the randomized policy.

    sqrt(K) when the deadline leaves room for the full randomized window,
    1 + (K-1)(2 - D/L) when it does not. The two branches agree at the
    threshold deadline.
    """
    if cost_ratio <= 1:
        raise ValueError(f"cost_ratio must exceed 1, got {cost_ratio}")
    L, D = job.compute_length, job.deadline
    if D >= critical_threshold(cost_ratio) * L:
        return math.sqrt(cost_ratio)
    return 1 + (cost_ratio - 1) * (2 - D / L)


def theoretical_cr_lower_bound(job: Job, cost_ratio: float) -> float:
    """Best possible ratio of any online policy; matches the upper bound."""
    return theoretical_cr_ross(job, cost_ratio)
