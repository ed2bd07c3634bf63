"""Household-model analysis of college dorms.

A dorm is a household: within-dorm spread is a branching process whose total
progeny has generating function G_D, and each infected student makes
Poisson(N * p_G) campus-wide infections. Two room layouts are compared at
equal dorm population:

  single rooms: offspring ~ Poisson(lambda1),  lambda1 = n * p_D
  double rooms: offspring ~ p_L Poisson(2a) + (1 - p_L) Poisson(a),
                a = 2 * n1 * p_D, lambda2 = (1 + p_L) * a
"""

import logging
import math
from typing import Callable, Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from campus_epi.config import get_settings
from campus_epi.errors import CampusEpiError, SupercriticalError
from campus_epi.pgf import (
    ArrayLike,
    FixedPointConfig,
    TabulatedPgf,
    TwoPoissonMixturePgf,
    _like,
    _unit_interval,
    lambert_w0,
    solve_pgf_at,
    solve_pgf_recursion,
)
from campus_epi.records import GdRow, ZetaRow

logger = logging.getLogger(__name__)

Variant = Literal["single", "double"]

# Largest-root search for 1 - zeta = G_D(exp(-N p_G zeta))
ZETA_SCAN_STEP = 1e-4
ZETA_TOLERANCE = 1e-10
ZETA_POSITIVE_SLACK = 1e-12


# ── Parameters ───────────────────────────────────────────

class SingleDormParams(BaseModel):
    """m dorms of n single rooms."""

    model_config = ConfigDict(frozen=True)

    num_dorms: int = Field(gt=0)
    rooms_per_dorm: int = Field(gt=0)
    p_d: float = Field(ge=0.0, le=1.0)
    p_g: float = Field(ge=0.0, le=1.0)

    @property
    def population(self) -> int:
        return self.num_dorms * self.rooms_per_dorm

    @property
    def lambda1(self) -> float:
        return self.rooms_per_dorm * self.p_d

    @property
    def npg(self) -> float:
        return self.population * self.p_g

    @classmethod
    def from_rates(
        cls,
        local: float,
        npg: float,
        rooms_per_dorm: Optional[int] = None,
        num_dorms: Optional[int] = None,
    ) -> "SingleDormParams":
        """Build params from n * p_D and N * p_G on a campus of the configured shape."""
        settings = get_settings()
        n = rooms_per_dorm or settings.dorm_size
        m = num_dorms or settings.num_dorms
        return cls(num_dorms=m, rooms_per_dorm=n, p_d=local / n, p_g=npg / (m * n))


class DoubleDormParams(BaseModel):
    """m1 dorms of n1 double rooms."""

    model_config = ConfigDict(frozen=True)

    num_dorms: int = Field(gt=0)
    double_rooms_per_dorm: int = Field(gt=0)
    p_l: float = Field(ge=0.0, le=1.0)
    p_d: float = Field(ge=0.0, le=1.0)
    p_g: float = Field(ge=0.0, le=1.0)

    @property
    def population(self) -> int:
        return 2 * self.num_dorms * self.double_rooms_per_dorm

    @property
    def local_rate(self) -> float:
        """2 * n1 * p_D, mean dorm-wide infections per student."""
        return 2 * self.double_rooms_per_dorm * self.p_d

    @property
    def lambda2(self) -> float:
        return (1.0 + self.p_l) * 2 * self.double_rooms_per_dorm * self.p_d

    @property
    def npg(self) -> float:
        return self.population * self.p_g

    @classmethod
    def from_rates(
        cls,
        local: float,
        npg: float,
        p_l: float,
        double_rooms_per_dorm: Optional[int] = None,
        num_dorms: Optional[int] = None,
    ) -> "DoubleDormParams":
        """Build params from 2 * n1 * p_D and N * p_G; dorm population matches the single layout."""
        settings = get_settings()
        n1 = double_rooms_per_dorm or max(settings.dorm_size // 2, 1)
        m1 = num_dorms or settings.num_dorms
        return cls(
            num_dorms=m1,
            double_rooms_per_dorm=n1,
            p_l=p_l,
            p_d=local / (2 * n1),
            p_g=npg / (2 * m1 * n1),
        )


class DormAnalysis(BaseModel):
    """R0 and large-epidemic probability for one dorm layout."""

    lam: float
    mu: Optional[float] = None
    r0: Optional[float] = None
    zeta: float = Field(ge=0.0, le=1.0)


# ── Shared pieces ────────────────────────────────────────

def total_progeny_mean(lam: float) -> float:
    """1 + lam + lam^2 + ... for a subcritical offspring mean."""
    if lam >= 1.0:
        raise SupercriticalError(f"offspring mean {lam:.6g} >= 1: mean total progeny is infinite")
    return 1.0 / (1.0 - lam)


def household_r0(mean_cluster_size: float, npg: float) -> float:
    """R0 = mu * N * p_G: each member of a dorm cluster seeds global infections."""
    return mean_cluster_size * npg


def largest_root(f: Callable[[np.ndarray], np.ndarray]) -> float:
    """Largest zeta in [0, 1] with f(zeta) = 0 for f(zeta) = 1 - zeta - phi(zeta).

    Scans downward from 1 for the last point where f is positive, then
    bisects. zeta = 0 is returned when f is nowhere positive.
    """
    grid = np.linspace(0.0, 1.0, int(round(1.0 / ZETA_SCAN_STEP)) + 1)
    values = np.asarray(f(grid))
    positive = np.flatnonzero(values > ZETA_POSITIVE_SLACK)
    if positive.size == 0:
        return 0.0
    k = int(positive[-1])
    if k == grid.size - 1:
        return 1.0
    lo, hi = float(grid[k]), float(grid[k + 1])
    while hi - lo > ZETA_TOLERANCE:
        mid = 0.5 * (lo + hi)
        if float(np.asarray(f(np.array([mid])))[0]) > ZETA_POSITIVE_SLACK:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ── Single rooms ─────────────────────────────────────────

def mu_single(params: SingleDormParams) -> float:
    return total_progeny_mean(params.lambda1)


def r0_single(params: SingleDormParams) -> float:
    """N p_G / (1 - n p_D)."""
    return household_r0(mu_single(params), params.npg)


def gd_from_rate(z: ArrayLike, lam: float) -> ArrayLike:
    """Closed form -W0(z * (-lam e^{-lam})) / lam of the Poisson total-progeny pgf."""
    arr = _unit_interval(z)
    if lam == 0.0:
        return _like(arr, z)
    w = np.asarray(lambert_w0(arr * (-lam * math.exp(-lam))))
    return _like(-w / lam, z)


def gd_single(z: ArrayLike, params: SingleDormParams) -> ArrayLike:
    """Generating function of the within-dorm epidemic size, single rooms."""
    return gd_from_rate(z, params.lambda1)


def zeta_single(params: SingleDormParams) -> float:
    """Largest root of 1 - zeta = G1_D(exp(-N p_G zeta))."""
    lam, npg = params.lambda1, params.npg
    return largest_root(lambda zeta: 1.0 - zeta - np.asarray(gd_from_rate(np.exp(-npg * zeta), lam)))


def analyze_single(params: SingleDormParams) -> DormAnalysis:
    lam = params.lambda1
    subcritical = lam < 1.0
    return DormAnalysis(
        lam=lam,
        mu=mu_single(params) if subcritical else None,
        r0=r0_single(params) if subcritical else None,
        zeta=zeta_single(params),
    )


# ── Double rooms ─────────────────────────────────────────

def double_room_pgf(params: DoubleDormParams) -> TwoPoissonMixturePgf:
    """Offspring pgf: the roommate is infected with probability p_L, then each
    infected roommate makes Poisson(2 n1 p_D) dorm-wide infections."""
    a = params.local_rate
    return TwoPoissonMixturePgf(weight=params.p_l, lambda_pair=(2.0 * a, a))


def mu_double(params: DoubleDormParams) -> float:
    return total_progeny_mean(params.lambda2)


def r0_double(params: DoubleDormParams) -> float:
    """N p_G / (1 - (1 + p_L) 2 n1 p_D)."""
    return household_r0(mu_double(params), params.npg)


def g2b(z: ArrayLike, params: DoubleDormParams) -> ArrayLike:
    """p_L exp(2 n1 p_D (z - 1))^2 + (1 - p_L) exp(2 n1 p_D (z - 1))."""
    return double_room_pgf(params)(z)


def gd_double(z: ArrayLike, params: DoubleDormParams, cfg: Optional[FixedPointConfig] = None) -> ArrayLike:
    """Solve G2_D(z) = z G2_b(G2_D(z)) by iteration."""
    return solve_pgf_at(double_room_pgf(params), z, cfg)


def gd_double_table(params: DoubleDormParams, cfg: Optional[FixedPointConfig] = None) -> TabulatedPgf:
    return solve_pgf_recursion(double_room_pgf(params), cfg)


def zeta_double(params: DoubleDormParams, cfg: Optional[FixedPointConfig] = None) -> float:
    """Largest root of 1 - zeta = G2_D(exp(-N p_G zeta))."""
    cfg = cfg or FixedPointConfig.from_settings()
    base = double_room_pgf(params)
    npg = params.npg
    return largest_root(lambda zeta: 1.0 - zeta - np.asarray(solve_pgf_at(base, np.exp(-npg * zeta), cfg)))


def analyze_double(params: DoubleDormParams, cfg: Optional[FixedPointConfig] = None) -> DormAnalysis:
    lam = params.lambda2
    subcritical = lam < 1.0
    return DormAnalysis(
        lam=lam,
        mu=mu_double(params) if subcritical else None,
        r0=r0_double(params) if subcritical else None,
        zeta=zeta_double(params, cfg),
    )


def critical_pd_double(p_l: float) -> float:
    """Value of 2 n1 p_D at which lambda2 = 1."""
    if not 0.0 <= p_l <= 1.0:
        raise ValueError(f"p_L must lie in [0, 1], got {p_l!r}")
    return 1.0 / (1.0 + p_l)


# ── Sweeps ───────────────────────────────────────────────

def zeta_for_rates(
    variant: Variant,
    local: float,
    npg: float,
    p_l: float = 0.0,
    cfg: Optional[FixedPointConfig] = None,
) -> float:
    if variant == "single":
        return zeta_single(SingleDormParams.from_rates(local, npg))
    return zeta_double(DoubleDormParams.from_rates(local, npg, p_l), cfg)


def sweep_zeta(
    variant: Variant,
    local_values: Sequence[float],
    npg_values: Sequence[float],
    p_l: float = 0.7,
    cfg: Optional[FixedPointConfig] = None,
) -> list[ZetaRow]:
    """One row per (local, N p_G) grid point, in grid order.

    Solver failures are recorded in the row's error column.
    """
    if not local_values or not npg_values:
        raise ValueError("sweep grids must be nonempty")
    cfg = cfg or FixedPointConfig.from_settings()
    pl = p_l if variant == "double" else 0.0
    rows: list[ZetaRow] = []
    logger.info(f"Sweeping {variant} zeta over {len(local_values)} x {len(npg_values)} grid")
    for local in local_values:
        for npg in npg_values:
            try:
                zeta = zeta_for_rates(variant, local, npg, pl, cfg)
                error = ""
            except CampusEpiError as exc:
                logger.warning(f"zeta failed at local={local}, npg={npg}: {exc}")
                zeta, error = math.nan, str(exc)
            rows.append({"variant": variant, "local": local, "pl": pl, "npg": npg, "zeta": zeta, "error": error})
    return rows


def gd_curves(
    variant: Variant,
    local_values: Sequence[float],
    p_l: float = 0.7,
    cfg: Optional[FixedPointConfig] = None,
) -> list[GdRow]:
    """G_D on the evaluation grid for each local-spread value."""
    cfg = cfg or FixedPointConfig.from_settings()
    grid = cfg.grid()
    pl = p_l if variant == "double" else 0.0
    rows: list[GdRow] = []
    for local in local_values:
        if variant == "single":
            values = np.asarray(gd_from_rate(grid, local))
        else:
            values = gd_double_table(DoubleDormParams.from_rates(local, 0.0, pl), cfg).values
        rows.extend(
            {"variant": variant, "local": local, "pl": pl, "z": float(z), "gd": float(v)}
            for z, v in zip(grid, values)
        )
    return rows
