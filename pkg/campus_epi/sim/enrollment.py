"""Random student-to-class enrollment.

Configuration-model assignment: shuffle the multiset of seats, deal three to
each student, then repair students holding two seats in the same class by
random pairwise seat swaps.
"""

import logging
from typing import Union

import numpy as np
from pydantic import BaseModel, ConfigDict

from campus_epi.classes import ClassSchedule
from campus_epi.errors import InfeasibleScheduleError

logger = logging.getLogger(__name__)

CLASSES_PER_STUDENT = 3
MAX_REPAIR_SWAPS = 1_000_000

SeedLike = Union[int, np.random.Generator, np.random.SeedSequence]


class Enrollment(BaseModel):
    """classes[s] holds the three distinct class indices of student s."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    classes: np.ndarray
    sizes: tuple[int, ...]

    @property
    def num_students(self) -> int:
        return int(self.classes.shape[0])

    @property
    def num_classes(self) -> int:
        return len(self.sizes)

    def roster_sizes(self) -> np.ndarray:
        return np.bincount(self.classes.ravel(), minlength=self.num_classes)

    def roster(self, class_index: int) -> np.ndarray:
        """Students enrolled in one class."""
        return np.flatnonzero((self.classes == class_index).any(axis=1))

    def violations(self) -> list[str]:
        problems = []
        if self.classes.shape[1] != CLASSES_PER_STUDENT:
            problems.append(f"students hold {self.classes.shape[1]} seats, expected {CLASSES_PER_STUDENT}")
        if np.any(_duplicate_counts(self.classes) > 0):
            problems.append("some student holds two seats in one class")
        if not np.array_equal(self.roster_sizes(), np.asarray(self.sizes)):
            problems.append("roster sizes differ from the schedule")
        return problems


def _duplicate_counts(table: np.ndarray) -> np.ndarray:
    """Per row: 3 minus the number of distinct classes."""
    s = np.sort(table, axis=1)
    return (s[:, 1:] == s[:, :-1]).sum(axis=1)


def _row_duplicates(row: np.ndarray) -> int:
    return CLASSES_PER_STUDENT - len(set(row.tolist()))


def _as_generator(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_enrollment(schedule: ClassSchedule, seed: SeedLike) -> Enrollment:
    """Draw an enrollment with rosters of exactly c_i students each.

    Deterministic for a given seed. Raises InfeasibleScheduleError when a
    class has more seats than there are students, or when repair exceeds
    MAX_REPAIR_SWAPS swap attempts.
    """
    rng = _as_generator(seed)
    n = schedule.num_students
    largest = max(schedule.sizes)
    if largest > n:
        raise InfeasibleScheduleError(
            f"class of size {largest} exceeds the {n} students available; no student may hold two of its seats"
        )

    seats = rng.permutation(np.repeat(np.arange(schedule.num_classes), schedule.sizes))
    table = seats.reshape(n, CLASSES_PER_STUDENT)

    bad = set(np.flatnonzero(_duplicate_counts(table)).tolist())
    swaps = 0
    passes = 0
    while bad:
        passes += 1
        for student in sorted(bad):
            if student not in bad:
                continue
            row = table[student]
            # slot holding a repeated class
            col = 1 if row[1] == row[0] else 2
            other = int(rng.integers(n))
            ocol = int(rng.integers(CLASSES_PER_STUDENT))
            swaps += 1
            if swaps > MAX_REPAIR_SWAPS:
                worst = max(schedule.sizes[c] for c in table[sorted(bad)].ravel())
                raise InfeasibleScheduleError(
                    f"enrollment repair gave up after {MAX_REPAIR_SWAPS} swaps; "
                    f"{len(bad)} students still doubled up (largest class involved: size {worst})"
                )
            if other == student:
                continue
            before = _row_duplicates(table[student]) + _row_duplicates(table[other])
            table[student, col], table[other, ocol] = table[other, ocol], table[student, col]
            after = _row_duplicates(table[student]) + _row_duplicates(table[other])
            if after > before:
                table[student, col], table[other, ocol] = table[other, ocol], table[student, col]
                continue
            for s in (student, other):
                if _row_duplicates(table[s]):
                    bad.add(s)
                else:
                    bad.discard(s)

    logger.debug(f"Enrollment repaired in {passes} passes, {swaps} swap attempts")
    return Enrollment(classes=table, sizes=schedule.sizes)
