"""Row schemas for the tables every analysis emits.

Each TypedDict is one CSV row; key order is the column order.
"""

from typing import TypedDict


class ZetaRow(TypedDict):
    """Large-epidemic probability at one (local spread, N p_G) grid point."""
    variant: str        # single | double
    local: float        # n p_D (single) or 2 n1 p_D (double)
    pl: float           # roommate infection probability (0 for single rooms)
    npg: float          # N p_G
    zeta: float         # nan when the solver failed
    error: str          # solver message, empty on success


class GdRow(TypedDict):
    """One point of a within-dorm epidemic-size generating function."""
    variant: str
    local: float
    pl: float
    z: float
    gd: float


class ClassRow(TypedDict):
    """Spectral radius of a schedule's mean matrix and R0 at one p."""
    schedule: str
    p: float
    rho: float
    r0: float


class CutoffRow(TypedDict):
    """R0 after moving classes larger than k online."""
    p: float
    k: int
    r0: float


class PercentileRow(TypedDict):
    """Ensemble percentiles of cumulative infections at one step."""
    step: int
    week: float
    p25: float
    p50: float
    p75: float


class SummaryRow(TypedDict):
    """Outbreak probabilities and final-size percentiles of an ensemble."""
    runs: int
    p_no_community: float
    p_no_major: float
    final_size_p25: float
    final_size_p50: float
    final_size_p75: float
    final_size_mean: float


class RunRow(TypedDict):
    """One step of a single simulated epidemic."""
    step: int
    week: float
    infectious: int
    cumulative: int


class FinalSizeRow(TypedDict):
    run: int
    final_size: int
