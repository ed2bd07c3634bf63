"""Monte-Carlo ensembles of campus epidemics.

Run r draws from the r-th child of SeedSequence(config.seed), so the result
is identical for any worker count. Traces of different length are padded
with their final values before percentiles are taken.
"""

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict
from tqdm import tqdm

from campus_epi.config import get_settings
from campus_epi.errors import CampusEpiError, SimulationError
from campus_epi.records import FinalSizeRow, PercentileRow, SummaryRow
from campus_epi.sim.enrollment import Enrollment, sample_enrollment
from campus_epi.sim.simulator import STEPS_PER_WEEK, SimConfig, Trace, run

logger = logging.getLogger(__name__)

# "no major outbreak": no more than this many students ever infected
MAJOR_OUTBREAK_THRESHOLD = 20

CHUNK_SIZE = 250


class EnsembleStats(BaseModel):
    """Aggregates over independent runs of one configuration."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    runs: int
    cumulative_p25: np.ndarray
    cumulative_p50: np.ndarray
    cumulative_p75: np.ndarray
    infectious_p25: np.ndarray
    infectious_p50: np.ndarray
    infectious_p75: np.ndarray
    final_sizes: np.ndarray
    peak_infectious: np.ndarray
    peak_steps: np.ndarray

    @property
    def p_no_community_infection(self) -> float:
        return float(np.mean(self.final_sizes == 1))

    @property
    def p_no_major_outbreak(self) -> float:
        return float(np.mean(self.final_sizes <= MAJOR_OUTBREAK_THRESHOLD))

    @property
    def major_final_sizes(self) -> np.ndarray:
        return np.sort(self.final_sizes[self.final_sizes > MAJOR_OUTBREAK_THRESHOLD])

    def final_size_histogram(self, bins: int = 20) -> tuple[np.ndarray, np.ndarray]:
        """Histogram of final sizes given a major outbreak: (counts, edges)."""
        return np.histogram(self.major_final_sizes, bins=bins)

    def percentile_rows(self) -> list[PercentileRow]:
        return [
            {"step": t, "week": t / STEPS_PER_WEEK, "p25": float(a), "p50": float(b), "p75": float(c)}
            for t, (a, b, c) in enumerate(zip(self.cumulative_p25, self.cumulative_p50, self.cumulative_p75))
        ]

    def summary_row(self) -> SummaryRow:
        p25, p50, p75 = np.percentile(self.final_sizes, [25, 50, 75])
        return {
            "runs": self.runs,
            "p_no_community": self.p_no_community_infection,
            "p_no_major": self.p_no_major_outbreak,
            "final_size_p25": float(p25),
            "final_size_p50": float(p50),
            "final_size_p75": float(p75),
            "final_size_mean": float(np.mean(self.final_sizes)),
        }

    def final_size_rows(self) -> list[FinalSizeRow]:
        return [{"run": r, "final_size": int(s)} for r, s in enumerate(self.final_sizes)]


def _run_chunk(
    config: SimConfig,
    first_index: int,
    seeds: list[np.random.SeedSequence],
    enrollment: Optional[Enrollment],
) -> list[Trace]:
    traces = []
    for offset, seed in enumerate(seeds):
        try:
            traces.append(run(config, np.random.default_rng(seed), enrollment))
        except CampusEpiError as exc:
            raise SimulationError(f"run {first_index + offset}: {exc}", exit_code=exc.exit_code) from exc
    return traces


def _pad(series: list[np.ndarray], horizon: int, fill_last: bool) -> np.ndarray:
    out = np.zeros((len(series), horizon), dtype=np.int64)
    for r, values in enumerate(series):
        out[r, : values.size] = values
        if fill_last:
            out[r, values.size:] = values[-1]
    return out


def resolve_workers(workers: Optional[int] = None) -> int:
    if workers is not None:
        return max(1, workers)
    return get_settings().threads or os.cpu_count() or 1


def run_traces(
    config: SimConfig,
    runs: int,
    workers: Optional[int] = None,
    progress: bool = False,
) -> list[Trace]:
    """All traces of an ensemble, in run order."""
    if runs < 1:
        raise ValueError(f"runs must be positive, got {runs}")
    workers = resolve_workers(workers)

    root = np.random.SeedSequence(config.seed)
    enrollment_seed, runs_seed = root.spawn(2)
    enrollment = sample_enrollment(config.schedule, enrollment_seed) if config.freeze_enrollment else None
    seeds = runs_seed.spawn(runs)
    chunks = [(start, seeds[start:start + CHUNK_SIZE]) for start in range(0, runs, CHUNK_SIZE)]

    logger.info(
        f"Ensemble: {runs} runs of '{config.schedule.name}' at p={config.p}, "
        f"quarantine={config.quarantine_prob}, workers={workers}"
    )
    traces: list[Trace] = []
    with tqdm(total=runs, desc="Runs", disable=not progress) as bar:
        if workers == 1 or len(chunks) == 1:
            for start, chunk in chunks:
                traces.extend(_run_chunk(config, start, chunk, enrollment))
                bar.update(len(chunk))
        else:
            with ProcessPoolExecutor(max_workers=min(workers, len(chunks))) as pool:
                futures = [pool.submit(_run_chunk, config, start, chunk, enrollment) for start, chunk in chunks]
                # collect in submission order
                for future in futures:
                    result = future.result()
                    traces.extend(result)
                    bar.update(len(result))
    return traces


def summarize(traces: list[Trace]) -> EnsembleStats:
    horizon = max(t.cumulative.size for t in traces)
    cumulative = _pad([t.cumulative for t in traces], horizon, fill_last=True)
    infectious = _pad([t.infectious for t in traces], horizon, fill_last=False)
    cq = np.percentile(cumulative, [25, 50, 75], axis=0)
    iq = np.percentile(infectious, [25, 50, 75], axis=0)
    return EnsembleStats(
        runs=len(traces),
        cumulative_p25=cq[0],
        cumulative_p50=cq[1],
        cumulative_p75=cq[2],
        infectious_p25=iq[0],
        infectious_p50=iq[1],
        infectious_p75=iq[2],
        final_sizes=np.asarray([t.final_size for t in traces], dtype=np.int64),
        peak_infectious=np.asarray([t.peak_infectious for t in traces], dtype=np.int64),
        peak_steps=np.asarray([t.peak_step for t in traces], dtype=np.int64),
    )


def ensemble(
    config: SimConfig,
    runs: int,
    workers: Optional[int] = None,
    progress: bool = False,
) -> EnsembleStats:
    """Aggregate `runs` independent simulations of `config`."""
    stats = summarize(run_traces(config, runs, workers, progress))
    logger.info(
        f"Ensemble done: P(no community infection)={stats.p_no_community_infection:.3f}, "
        f"P(no major outbreak)={stats.p_no_major_outbreak:.3f}"
    )
    return stats
