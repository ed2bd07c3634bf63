"""Discrete-time stochastic epidemic among students who share classes.

One step is one class meeting (two steps per week). Within a step:
  1. every infectious student infects each susceptible classmate with
     probability p, independently per shared class;
  2. every infectious student then enters quarantine with probability
     quarantine_prob and is removed for good;
  3. students infected in this step become infectious from the next step.

Statuses are closed: susceptible -> infectious -> quarantined.
"""

import logging
import re
from typing import Optional, TypedDict

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from campus_epi.classes import ClassSchedule
from campus_epi.records import RunRow
from campus_epi.sim.enrollment import Enrollment, SeedLike, _as_generator, sample_enrollment

logger = logging.getLogger(__name__)

SUSCEPTIBLE, INFECTIOUS, QUARANTINED = 0, 1, 2

STEPS_PER_WEEK = 2

_INITIAL_PATTERN = re.compile(r"^(random|all|student:\d+|class:\d+)$")


class SimConfig(BaseModel):
    """One stochastic campus epidemic."""

    model_config = ConfigDict(frozen=True)

    schedule: ClassSchedule
    p: float = Field(ge=0.0, le=1.0)
    quarantine_prob: float = Field(default=0.5, ge=0.0, le=1.0)
    # random | all | student:<index> | class:<index>
    initial: str = "random"
    max_steps: int = Field(default=500, ge=1)
    seed: int = Field(default=0, ge=0)
    freeze_enrollment: bool = False

    @field_validator("initial")
    @classmethod
    def _check_initial(cls, value: str) -> str:
        if not _INITIAL_PATTERN.match(value):
            raise ValueError(f"initial must be random, all, student:<i> or class:<j>; got {value!r}")
        return value


class SimState(TypedDict):
    """Status of every student after `step` class meetings."""
    step: int
    status: np.ndarray


class Trace(BaseModel):
    """Per-step counts of one run; index 0 is the initial state."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    infectious: np.ndarray
    cumulative: np.ndarray
    extinction_step: int

    @property
    def final_size(self) -> int:
        return int(self.cumulative[-1])

    @property
    def steps(self) -> int:
        return len(self.cumulative) - 1

    @property
    def weeks(self) -> np.ndarray:
        return np.arange(len(self.cumulative)) / STEPS_PER_WEEK

    @property
    def peak_step(self) -> int:
        return int(np.argmax(self.infectious))

    @property
    def peak_infectious(self) -> int:
        return int(self.infectious.max())

    def rows(self) -> list[RunRow]:
        return [
            {"step": t, "week": float(w), "infectious": int(i), "cumulative": int(c)}
            for t, (w, i, c) in enumerate(zip(self.weeks, self.infectious, self.cumulative))
        ]


def initial_state(config: SimConfig, enrollment: Enrollment, rng: np.random.Generator) -> SimState:
    status = np.full(enrollment.num_students, SUSCEPTIBLE, dtype=np.int8)
    kind, _, index = config.initial.partition(":")
    if kind == "all":
        status[:] = INFECTIOUS
    elif kind == "student":
        status[int(index) % enrollment.num_students] = INFECTIOUS
    elif kind == "class":
        roster = enrollment.roster(int(index) % enrollment.num_classes)
        status[roster[rng.integers(roster.size)]] = INFECTIOUS
    else:
        status[rng.integers(enrollment.num_students)] = INFECTIOUS
    return {"step": 0, "status": status}


def step(state: SimState, enrollment: Enrollment, config: SimConfig, rng: np.random.Generator) -> SimState:
    """Advance one class meeting."""
    status = state["status"]
    infectious = status == INFECTIOUS

    # infectious seats per class, then per student the number of
    # (infector, shared class) trials they face
    per_class = np.bincount(enrollment.classes[infectious].ravel(), minlength=enrollment.num_classes)
    exposure = per_class[enrollment.classes].sum(axis=1)
    escape = (1.0 - config.p) ** exposure

    infected = (status == SUSCEPTIBLE) & (rng.random(status.size) >= escape)
    quarantined = infectious & (rng.random(status.size) < config.quarantine_prob)

    nxt = status.copy()
    nxt[quarantined] = QUARANTINED
    nxt[infected] = INFECTIOUS
    return {"step": state["step"] + 1, "status": nxt}


def run(
    config: SimConfig,
    rng: Optional[SeedLike] = None,
    enrollment: Optional[Enrollment] = None,
) -> Trace:
    """Simulate until nobody is infectious or max_steps is reached.

    Deterministic for a fixed seed. A fresh enrollment is drawn from the same
    stream unless one is supplied.
    """
    rng = _as_generator(config.seed if rng is None else rng)
    if enrollment is None:
        enrollment = sample_enrollment(config.schedule, rng)

    state = initial_state(config, enrollment, rng)
    n = enrollment.num_students
    infectious = [int(np.count_nonzero(state["status"] == INFECTIOUS))]
    cumulative = [infectious[0]]

    while infectious[-1] > 0 and state["step"] < config.max_steps:
        state = step(state, enrollment, config, rng)
        status = state["status"]
        infectious.append(int(np.count_nonzero(status == INFECTIOUS)))
        cumulative.append(n - int(np.count_nonzero(status == SUSCEPTIBLE)))

    extinction = state["step"] if infectious[-1] == 0 else config.max_steps
    return Trace(
        infectious=np.asarray(infectious, dtype=np.int64),
        cumulative=np.asarray(cumulative, dtype=np.int64),
        extinction_step=extinction,
    )
