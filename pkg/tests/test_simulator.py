"""
Single stochastic runs of the class-meeting epidemic.

Categories:
  1. Degenerate parameters
  2. Trace invariants
  3. Exact small-campus distribution
"""

import math
from functools import lru_cache

import numpy as np
import pytest
from pydantic import ValidationError

from campus_epi.classes import ClassSchedule
from campus_epi.schedules import preset
from campus_epi.sim.ensemble import run_traces
from campus_epi.sim.enrollment import sample_enrollment
from campus_epi.sim.simulator import (
    INFECTIOUS,
    QUARANTINED,
    SUSCEPTIBLE,
    SimConfig,
    initial_state,
    run,
    step,
)


# ═══════════════════════════════════════════════════════════
# TEST CATEGORY 1: Degenerate parameters
# ═══════════════════════════════════════════════════════════

def test_no_transmission_means_no_spread():
    for seed in range(5):
        trace = run(SimConfig(schedule=preset("scenario1"), p=0.0, seed=seed))
        assert trace.final_size == 1
        assert trace.infectious[-1] == 0


def test_certain_quarantine_lasts_one_step():
    trace = run(SimConfig(schedule=preset("scenario1"), p=0.0, quarantine_prob=1.0, seed=4))
    np.testing.assert_array_equal(trace.infectious, [1, 0])
    assert trace.extinction_step == 1
    assert trace.steps == 1


def test_everyone_infected_initially():
    trace = run(SimConfig(schedule=preset("scenario2"), p=0.2, initial="all", seed=1))
    assert trace.cumulative[0] == 1000
    assert trace.final_size == 1000


def test_initial_case_in_chosen_class():
    schedule = preset("scenario2")
    enrollment = sample_enrollment(schedule, seed=0)
    config = SimConfig(schedule=schedule, p=0.01, initial="class:7")
    state = initial_state(config, enrollment, np.random.default_rng(0))
    (index,) = np.flatnonzero(state["status"] == INFECTIOUS)
    assert 7 in enrollment.classes[index]


def test_initial_spec_validated():
    with pytest.raises(ValidationError):
        SimConfig(schedule=preset("scenario1"), p=0.01, initial="nobody")
    with pytest.raises(ValidationError):
        SimConfig(schedule=preset("scenario1"), p=1.5)


# ═══════════════════════════════════════════════════════════
# TEST CATEGORY 2: Trace invariants
# ═══════════════════════════════════════════════════════════

def test_trace_invariants():
    for seed in range(10):
        trace = run(SimConfig(schedule=preset("scenario2"), p=0.02, seed=seed))
        assert trace.cumulative[0] == trace.infectious[0] == 1
        assert np.all(np.diff(trace.cumulative) >= 0)
        assert np.all(trace.infectious <= trace.cumulative)
        assert trace.final_size <= 1000
        assert trace.extinction_step == trace.steps
        np.testing.assert_array_equal(trace.weeks, np.arange(trace.steps + 1) / 2)
        assert [row["week"] for row in trace.rows()] == trace.weeks.tolist()


def test_statuses_only_move_forward():
    schedule = preset("scenario1")
    config = SimConfig(schedule=schedule, p=0.05)
    rng = np.random.default_rng(8)
    enrollment = sample_enrollment(schedule, rng)
    state = initial_state(config, enrollment, rng)
    for _ in range(20):
        nxt = step(state, enrollment, config, rng)
        before, after = state["status"], nxt["status"]
        assert np.all(after[before == QUARANTINED] == QUARANTINED)
        assert np.all(after[before == INFECTIOUS] != SUSCEPTIBLE)
        assert nxt["step"] == state["step"] + 1
        state = nxt


def test_same_seed_same_trace():
    config = SimConfig(schedule=preset("scenario1"), p=0.01, seed=17)
    a, b = run(config), run(config)
    np.testing.assert_array_equal(a.cumulative, b.cumulative)
    np.testing.assert_array_equal(a.infectious, b.infectious)


def test_max_steps_truncates():
    trace = run(SimConfig(schedule=preset("scenario1"), p=0.0, quarantine_prob=0.0, max_steps=6, seed=2))
    assert trace.steps == 6
    assert trace.infectious[-1] == 1
    assert trace.extinction_step == 6


def test_index_case_first_step_infections():
    # each step the index case meets 87 classmate seats
    config = SimConfig(schedule=preset("scenario1"), p=0.01, max_steps=1, freeze_enrollment=True, seed=3)
    new = np.array([t.cumulative[1] - 1 for t in run_traces(config, 4000, workers=1)])
    expected = 87 * 0.01
    assert new.mean() == pytest.approx(expected, abs=4 * math.sqrt(expected / 4000) + 0.01)


# ═══════════════════════════════════════════════════════════
# TEST CATEGORY 3: Exact small-campus distribution
# ═══════════════════════════════════════════════════════════

def _final_size_distribution(p: float, q: float) -> dict[int, float]:
    """Three students sharing all three classes, as a Markov chain on
    (susceptible, infectious)."""

    def binom(n: int, k: int, prob: float) -> float:
        return math.comb(n, k) * prob ** k * (1 - prob) ** (n - k)

    @lru_cache(maxsize=None)
    def absorb(s: int, i: int) -> tuple[float, float, float]:
        if i == 0:
            out = [0.0, 0.0, 0.0]
            out[3 - s - 1] = 1.0
            return tuple(out)
        hit = 1 - (1 - p) ** (3 * i)
        self_loop = 0.0
        total = np.zeros(3)
        for new in range(s + 1):
            for stay in range(i + 1):
                weight = binom(s, new, hit) * binom(i, stay, 1 - q)
                if new == 0 and stay == i:
                    self_loop += weight
                else:
                    total += weight * np.asarray(absorb(s - new, stay + new))
        return tuple(total / (1 - self_loop))

    return dict(zip((1, 2, 3), absorb(2, 1)))


def test_small_campus_matches_markov_chain():
    p, q, runs = 0.3, 0.5, 100_000
    exact = _final_size_distribution(p, q)
    assert sum(exact.values()) == pytest.approx(1.0)

    config = SimConfig(schedule=ClassSchedule(sizes=(3, 3, 3)), p=p, quarantine_prob=q, seed=21)
    sizes = np.array([t.final_size for t in run_traces(config, runs)])
    for size, prob in exact.items():
        se = math.sqrt(prob * (1 - prob) / runs)
        assert np.mean(sizes == size) == pytest.approx(prob, abs=3 * se + 1e-3)
