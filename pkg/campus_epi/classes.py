"""Mean-infection matrix for a class schedule and R0 as its spectral radius.

Every student takes three classes. An infected student in class i infects
Poisson((c_i - 1) p) classmates in class i, and each of their two alter egos
(their presence in another class) lands in class j with probability
2 c_j / (S - c_i), where S is the total number of seats. Hence

    m[i, i] = c_i - 1
    m[i, j] = 2 c_j (c_j - 1) / (S - c_i)      (i != j)

per unit infection probability p, and R0 = p * rho(m). Moving classes of
size > k online zeroes their columns.
"""

import logging
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from campus_epi.errors import ConvergenceError, InvalidScheduleError, ScheduleShapeError
from campus_epi.records import CutoffRow

logger = logging.getLogger(__name__)

POWER_TOLERANCE = 1e-12
POWER_MAX_ITERATIONS = 100_000

# p * rho <= 1 within this band counts as safe
SAFE_BAND = 1e-9


class ClassSchedule(BaseModel):
    """Class sizes c_1..c_m; every student takes exactly three classes."""

    model_config = ConfigDict(frozen=True)

    sizes: tuple[int, ...]
    name: str = "custom"

    @model_validator(mode="after")
    def _check_schedule(self) -> "ClassSchedule":
        if len(self.sizes) < 2:
            raise InvalidScheduleError(f"schedule needs at least two classes, got {len(self.sizes)}")
        if min(self.sizes) < 1:
            raise InvalidScheduleError(f"class sizes must be positive, got {min(self.sizes)}")
        if sum(self.sizes) % 3 != 0:
            raise InvalidScheduleError(
                f"total seats {sum(self.sizes)} is not divisible by 3 (three classes per student)"
            )
        return self

    @property
    def num_classes(self) -> int:
        return len(self.sizes)

    @property
    def total_seats(self) -> int:
        return sum(self.sizes)

    @property
    def num_students(self) -> int:
        return self.total_seats // 3

    @property
    def distinct_sizes(self) -> list[int]:
        return sorted(set(self.sizes))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.sizes, dtype=float)


class MeanMatrix(BaseModel):
    """p-free matrix of expected infections in class j per infected in class i."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    entries: np.ndarray
    schedule: ClassSchedule
    cutoff: Optional[int] = None


class CutoffPolicy(BaseModel):
    """Classes of size > k meet online."""

    model_config = ConfigDict(frozen=True)

    k: int = Field(ge=0)


def build_mean_matrix(schedule: ClassSchedule) -> MeanMatrix:
    c = schedule.as_array()
    seats = float(schedule.total_seats)
    # row i: placement probability 2 c_j / (S - c_i) times (c_j - 1) infections
    entries = np.outer(2.0 / (seats - c), c * (c - 1.0))
    np.fill_diagonal(entries, c - 1.0)
    return MeanMatrix(entries=entries, schedule=schedule)


def apply_cutoff(matrix: MeanMatrix, policy: CutoffPolicy) -> MeanMatrix:
    """Zero the column of every class larger than k; other entries unchanged."""
    online = matrix.schedule.as_array() > policy.k
    entries = matrix.entries.copy()
    entries[:, online] = 0.0
    return MeanMatrix(entries=entries, schedule=matrix.schedule, cutoff=policy.k)


def spectral_radius(
    matrix: MeanMatrix | np.ndarray,
    tolerance: float = POWER_TOLERANCE,
    max_iterations: int = POWER_MAX_ITERATIONS,
) -> float:
    """Dominant eigenvalue of a nonnegative matrix by power iteration on M + I.

    The unit shift keeps the Perron root strictly dominant when cutoffs make
    M reducible or zero; the start vector is all ones.
    """
    entries = matrix.entries if isinstance(matrix, MeanMatrix) else np.asarray(matrix, dtype=float)
    if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
        raise ValueError(f"spectral radius needs a square matrix, got shape {entries.shape}")
    if np.any(entries < 0):
        raise ValueError("spectral radius by power iteration needs a nonnegative matrix")

    shifted = entries + np.eye(entries.shape[0])
    x = np.ones(entries.shape[0])
    previous = None
    for iteration in range(1, max_iterations + 1):
        y = shifted @ x
        quotient = float(x @ y) / float(x @ x)
        x = y / np.linalg.norm(y)
        if previous is not None and abs(quotient - previous) <= tolerance * abs(quotient):
            logger.debug(f"Power iteration converged after {iteration} iterations")
            return quotient - 1.0
        previous = quotient
    raise ConvergenceError(
        f"power iteration did not converge in {max_iterations} iterations",
        iterations=max_iterations,
    )


def row_sum_bounds(matrix: MeanMatrix) -> tuple[float, float]:
    """(min row sum, max row sum): the Perron root lies between them."""
    sums = matrix.entries.sum(axis=1)
    return float(sums.min()), float(sums.max())


def uniform_spectral_radius(size: int, num_classes: int) -> float:
    """Closed form for m equal classes of size c: (c - 1)(1 + 2 (m - 1) c / (S - c))."""
    seats = size * num_classes
    return (size - 1) * (1.0 + 2.0 * (num_classes - 1) * size / (seats - size))


def reduced_two_block(schedule: ClassSchedule) -> np.ndarray:
    """Collapse a two-size schedule to its 2x2 block matrix, larger size first.

    The Perron vector is constant on classes of equal size, so the block
    entries are the row sums of m restricted to each size group.
    """
    distinct = schedule.distinct_sizes
    if len(distinct) != 2:
        raise ScheduleShapeError(f"two-block reduction needs exactly two distinct sizes, got {distinct}")
    seats = schedule.total_seats
    sizes = sorted(distinct, reverse=True)
    counts = [schedule.sizes.count(s) for s in sizes]

    block = np.zeros((2, 2))
    for a, (ci, ni) in enumerate(zip(sizes, counts)):
        for b, (cj, nj) in enumerate(zip(sizes, counts)):
            cross = 2.0 * cj * (cj - 1.0) / (seats - ci)
            if a == b:
                block[a, b] = (ci - 1.0) + (ni - 1) * cross
            else:
                block[a, b] = nj * cross
    return block


def block_eigenvalues(block: np.ndarray) -> tuple[float, float]:
    """Both eigenvalues of a 2x2 block, larger first."""
    trace = float(block[0, 0] + block[1, 1])
    det = float(block[0, 0] * block[1, 1] - block[0, 1] * block[1, 0])
    disc = np.sqrt(max(trace * trace / 4.0 - det, 0.0))
    return trace / 2.0 + disc, trace / 2.0 - disc


# ── Online-class cutoffs ─────────────────────────────────

class CutoffAnalysis:
    """Spectral radius of one schedule under varying cutoffs, cached per k."""

    def __init__(self, schedule: ClassSchedule):
        self.schedule = schedule
        self.matrix = build_mean_matrix(schedule)
        self._sizes = schedule.as_array()
        self._rho: dict[int, float] = {}

    def rho(self, k: int) -> float:
        # the matrix only changes when k crosses a class size
        kept = self._sizes[self._sizes <= k]
        key = int(kept.max()) if kept.size else -1
        if key not in self._rho:
            self._rho[key] = 0.0 if key < 0 else spectral_radius(apply_cutoff(self.matrix, CutoffPolicy(k=key)))
        return self._rho[key]

    def r0(self, p: float, k: int) -> float:
        return p * self.rho(k)


def cutoff_sweep(schedule: ClassSchedule, p_values: Sequence[float], k_values: Sequence[int]) -> list[CutoffRow]:
    """R0 = p * rho(apply_cutoff(M, k)) for every (p, k) cell, p-major order."""
    if not p_values or not k_values:
        raise ValueError("cutoff sweep grids must be nonempty")
    if any(not 0.0 < p <= 1.0 for p in p_values):
        raise ValueError("infection probabilities must lie in (0, 1]")
    analysis = CutoffAnalysis(schedule)
    logger.info(f"Cutoff sweep on '{schedule.name}': {len(p_values)} p x {len(k_values)} k")
    return [{"p": p, "k": int(k), "r0": analysis.r0(p, int(k))} for p in p_values for k in k_values]


def max_safe_cutoff(schedule: ClassSchedule, p: float, analysis: Optional[CutoffAnalysis] = None) -> int:
    """Largest k with p * rho(apply_cutoff(M, k)) <= 1.

    Never below min(c) - 1, where every class is online and R0 = 0.
    """
    if not 0.0 < p <= 1.0:
        raise ValueError(f"infection probability must lie in (0, 1], got {p!r}")
    analysis = analysis or CutoffAnalysis(schedule)

    def safe(k: int) -> bool:
        return analysis.r0(p, k) <= 1.0 + SAFE_BAND

    sizes = schedule.distinct_sizes
    if safe(sizes[-1]):
        return sizes[-1]
    # R0 is nondecreasing in k: bisect for the smallest unsafe size
    lo, hi = -1, len(sizes) - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if safe(sizes[mid]):
            lo = mid
        else:
            hi = mid
    return sizes[hi] - 1
