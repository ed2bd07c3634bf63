"""Probability generating functions and the fixed-point machinery shared by
both dorm models.

Covers:
  - Poisson, two-Poisson mixture and tabulated pgfs evaluated on [0, 1]
  - the principal branch of the Lambert W function (Halley iteration)
  - the monotone iteration h_l(z) = z * base(h_{l-1}(z)) for the generating
    function of total progeny in a branching process
"""

import logging
import math
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from campus_epi.config import get_settings
from campus_epi.errors import ConvergenceError, PgfDomainError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

INV_E = math.exp(-1.0)

# Rounding slack tolerated below the branch point and outside [0, 1]
DOMAIN_SLACK = 1e-12

# Iterates may rise by floating-point noise only
MONOTONE_SLACK = 1e-12

# Points 1 - 2^-k probed for a sign change of base(s) - s
PROBE_DEPTH = 52

HALLEY_MAX_STEPS = 64


# ── Domain helpers ───────────────────────────────────────

def _unit_interval(z: ArrayLike) -> np.ndarray:
    """Validate and clip pgf arguments to [0, 1]."""
    arr = np.asarray(z, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < -DOMAIN_SLACK) or np.any(arr > 1.0 + DOMAIN_SLACK):
        raise PgfDomainError(f"pgf argument outside [0, 1]: {np.min(arr)!r}..{np.max(arr)!r}")
    return np.clip(arr, 0.0, 1.0)


def _like(values: np.ndarray, template: ArrayLike) -> ArrayLike:
    """Return a float for scalar input, an array otherwise."""
    if np.ndim(template) == 0:
        return float(values)
    return values


# ── Generating functions ─────────────────────────────────

class Pgf(BaseModel):
    """A probability generating function evaluatable on [0, 1]."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    def __call__(self, z: ArrayLike) -> ArrayLike:
        arr = _unit_interval(z)
        return _like(self._evaluate(arr), z)

    def _evaluate(self, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def mean(self) -> float:
        """Derivative at z = 1 (offspring mean when used as a base pgf)."""
        raise NotImplementedError

    def shape_violations(self, points: int = 1001, tolerance: float = 1e-9) -> list[str]:
        """Check the pgf invariants on a uniform grid; empty list means valid.

        Normalization G(1) = 1 is only checked for proper pgfs (mean <= 1 for
        progeny pgfs); supercritical progeny pgfs are defective at z = 1.
        """
        grid = np.linspace(0.0, 1.0, points)
        values = np.asarray(self(grid))
        problems = []
        if np.any(values < -tolerance) or np.any(values > 1.0 + tolerance):
            problems.append("values outside [0, 1]")
        if np.any(np.diff(values) < -tolerance):
            problems.append("not nondecreasing")
        if np.any(np.diff(values, 2) < -tolerance):
            problems.append("not convex")
        if self.is_proper and abs(values[-1] - 1.0) > max(tolerance, 1e-8):
            problems.append(f"G(1) = {values[-1]!r} != 1")
        return problems

    @property
    def is_proper(self) -> bool:
        return True


class PoissonPgf(Pgf):
    """exp(lam * (z - 1))."""

    kind: Literal["poisson"] = "poisson"
    lam: float = Field(ge=0.0)

    def _evaluate(self, z: np.ndarray) -> np.ndarray:
        return np.exp(self.lam * (z - 1.0))

    @property
    def mean(self) -> float:
        return self.lam


class TwoPoissonMixturePgf(Pgf):
    """weight * Poisson(lambda_pair[0]) + (1 - weight) * Poisson(lambda_pair[1])."""

    kind: Literal["mixture"] = "mixture"
    weight: float = Field(ge=0.0, le=1.0)
    lambda_pair: tuple[float, float]

    @field_validator("lambda_pair")
    @classmethod
    def _nonnegative_rates(cls, pair: tuple[float, float]) -> tuple[float, float]:
        if min(pair) < 0:
            raise ValueError(f"Poisson rates must be nonnegative, got {pair}")
        return pair

    def _evaluate(self, z: np.ndarray) -> np.ndarray:
        first, second = self.lambda_pair
        return self.weight * np.exp(first * (z - 1.0)) + (1.0 - self.weight) * np.exp(second * (z - 1.0))

    @property
    def mean(self) -> float:
        first, second = self.lambda_pair
        return self.weight * first + (1.0 - self.weight) * second


class TabulatedPgf(Pgf):
    """Pgf known on a grid of [0, 1]; linear interpolation in between."""

    kind: Literal["tabulated"] = "tabulated"
    grid: np.ndarray
    values: np.ndarray
    proper: bool = True

    @field_validator("grid", "values", mode="before")
    @classmethod
    def _as_array(cls, raw) -> np.ndarray:
        return np.asarray(raw, dtype=float)

    @model_validator(mode="after")
    def _check_table(self) -> "TabulatedPgf":
        if self.grid.ndim != 1 or self.grid.shape != self.values.shape:
            raise ValueError("grid and values must be 1-D arrays of equal length")
        if self.grid[0] != 0.0 or self.grid[-1] != 1.0:
            raise ValueError("grid must include the endpoints 0 and 1")
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        if np.any(self.values < -DOMAIN_SLACK) or np.any(self.values > 1.0 + DOMAIN_SLACK):
            raise ValueError("tabulated values must lie in [0, 1]")
        return self

    def _evaluate(self, z: np.ndarray) -> np.ndarray:
        return np.interp(z, self.grid, self.values)

    @property
    def mean(self) -> float:
        # one-sided slope at 1; accurate to the grid spacing
        return float((self.values[-1] - self.values[-2]) / (self.grid[-1] - self.grid[-2]))

    @property
    def is_proper(self) -> bool:
        return self.proper


def poisson_pgf_eval(lam: float, z: ArrayLike) -> ArrayLike:
    """Generating function of Poisson(lam) at z."""
    if lam < 0 or math.isnan(lam):
        raise PgfDomainError(f"Poisson rate must be nonnegative, got {lam!r}")
    return PoissonPgf(lam=lam)(z)


# ── Lambert W ────────────────────────────────────────────

def _halley_start(x: np.ndarray) -> np.ndarray:
    """Piecewise initial guess: branch-point series, log1p, asymptotic log."""
    p = np.sqrt(np.maximum(2.0 * (math.e * x + 1.0), 0.0))
    near_branch = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3
    middle = np.log1p(np.maximum(x, -0.25))
    big = np.maximum(x, math.e)
    l1 = np.log(big)
    l2 = np.log(l1)
    asymptotic = l1 - l2 + l2 / l1
    return np.where(x < -0.25, near_branch, np.where(x <= math.e, middle, asymptotic))


def lambert_w0(x: ArrayLike) -> ArrayLike:
    """Principal branch W0 of the Lambert W function, W(x) * exp(W(x)) = x.

    Defined for x >= -1/e; returns w >= -1. Accepts scalars or arrays.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < -INV_E - DOMAIN_SLACK):
        raise PgfDomainError(f"Lambert W0 undefined below the branch point -1/e: got {np.min(arr)!r}")
    arr = np.maximum(arr, -INV_E)

    at_branch = math.e * arr + 1.0 <= 1e-15
    w = _halley_start(arr)
    w = np.where(at_branch, -1.0, w)
    active = ~at_branch

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for _ in range(HALLEY_MAX_STEPS):
            if not np.any(active):
                break
            ew = np.exp(w)
            f = w * ew - arr
            wp1 = w + 1.0
            denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
            step = np.where(active & (denom != 0) & np.isfinite(denom), f / denom, 0.0)
            w = w - step
            # Halley can overshoot below the branch value very close to -1/e
            w = np.maximum(w, -1.0)
            active = active & (np.abs(step) > 4e-16 * (1.0 + np.abs(w)))

    return _like(w, x)


# ── Fixed-point iteration ────────────────────────────────

class FixedPointConfig(BaseModel):
    """Stopping rule and evaluation grid for h_l(z) = z * base(h_{l-1}(z))."""

    model_config = ConfigDict(frozen=True)

    tolerance: float = Field(default=1e-10, gt=0.0)
    max_iterations: int = Field(default=10_000, ge=1)
    grid_size: int = Field(default=1001, ge=2)

    @classmethod
    def from_settings(cls) -> "FixedPointConfig":
        settings = get_settings()
        return cls(
            tolerance=settings.fixed_point_tolerance,
            max_iterations=settings.fixed_point_max_iterations,
            grid_size=settings.fixed_point_grid_size,
        )

    def grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.grid_size)


def extinction_probability(base: Pgf, cfg: Optional[FixedPointConfig] = None) -> float:
    """Smallest root of s = base(s): extinction probability of the branching
    process with offspring pgf `base`.

    base(s) - s is convex, nonnegative at 0 and negative just below 1 when
    the mean exceeds 1, so the root is bracketed by probing s = 1 - 2^-k and
    then bisected.
    """
    cfg = cfg or FixedPointConfig.from_settings()
    if base.mean <= 1.0:
        return 1.0

    def excess(s: float) -> float:
        return float(base(s)) - s

    lo, hi = 0.0, None
    for k in range(1, PROBE_DEPTH + 1):
        s = 1.0 - 2.0 ** -k
        if excess(s) < 0.0:
            hi = s
            break
        lo = s
    if hi is None:
        raise ConvergenceError(
            f"extinction probability for offspring mean {base.mean:.12g} is not resolvable below 1",
            iterations=PROBE_DEPTH,
        )

    for iteration in range(1, cfg.max_iterations + 1):
        if hi - lo < cfg.tolerance * 0.1:
            logger.debug(f"Extinction probability {0.5 * (lo + hi):.12g} after {iteration} bisections")
            return 0.5 * (lo + hi)
        mid = 0.5 * (lo + hi)
        if excess(mid) >= 0.0:
            lo = mid
        else:
            hi = mid
    raise ConvergenceError(
        f"extinction probability did not converge in {cfg.max_iterations} iterations",
        iterations=cfg.max_iterations,
    )


def solve_pgf_at(base: Pgf, z: ArrayLike, cfg: Optional[FixedPointConfig] = None) -> ArrayLike:
    """Solve h(z) = z * base(h(z)) at arbitrary points z in [0, 1].

    Iterates from h_0(z) = z; the sequence decreases to the generating
    function of the total progeny. For a supercritical base the progeny
    pgf is defective and h(1) is the extinction probability.
    """
    cfg = cfg or FixedPointConfig.from_settings()
    points = _unit_interval(z)
    h = points.copy()

    if base.mean == 0.0:
        return _like(h, z)

    for iteration in range(1, cfg.max_iterations + 1):
        nxt = points * np.asarray(base(h))
        if np.any(nxt > h + MONOTONE_SLACK):
            raise ConvergenceError(
                f"iteration {iteration} increased h(z); base pgf is not valid",
                iterations=iteration,
            )
        change = float(np.max(np.abs(nxt - h))) if h.size else 0.0
        h = nxt
        if change < cfg.tolerance:
            logger.debug(f"Fixed point reached after {iteration} iterations (change {change:.2e})")
            break
    else:
        raise ConvergenceError(
            f"fixed point not reached in {cfg.max_iterations} iterations",
            iterations=cfg.max_iterations,
        )

    if base.mean > 1.0:
        h = np.where(points == 1.0, extinction_probability(base, cfg), h)

    residual = np.abs(h - points * np.asarray(base(h)))
    if residual.size and float(np.max(residual)) >= 10.0 * cfg.tolerance:
        raise ConvergenceError(
            f"fixed-point residual {float(np.max(residual)):.3e} exceeds {10.0 * cfg.tolerance:.1e}",
            iterations=iteration,
        )
    return _like(h, z)


def solve_pgf_recursion(base: Pgf, cfg: Optional[FixedPointConfig] = None) -> TabulatedPgf:
    """Tabulate the total-progeny pgf h = z * base(h) on the configured grid."""
    cfg = cfg or FixedPointConfig.from_settings()
    grid = cfg.grid()
    values = solve_pgf_at(base, grid, cfg)
    return TabulatedPgf(grid=grid, values=values, proper=base.mean <= 1.0)


def poisson_survival_probability(mean: float) -> float:
    """Survival probability of a Poisson(mean) branching process.

    Largest root of 1 - zeta = exp(-mean * zeta); zero unless mean > 1.
    """
    if mean < 0:
        raise PgfDomainError(f"offspring mean must be nonnegative, got {mean!r}")
    if mean <= 1.0:
        return 0.0
    return 1.0 + float(lambert_w0(-mean * math.exp(-mean))) / mean
