"""Monte Carlo SER estimation.

Trials are cut into fixed chunks of ``CHUNK`` symbols.  Chunk ``j`` of grid
point ``i`` always draws from the stream seeded by
``SeedSequence([seed, i, j])``, whichever worker runs it, and chunk error
counts are integers, so the result does not depend on the number of workers
or on scheduling order.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from .analytic_ser import SerScenario
from .channel import noise_variance, sample_channel, transmit
from .detectors import (DEGENERATE_ENERGY, DetectorKind, apply_phase_noise, detect,
                        phase_noise_variance)
from .exceptions import DomainError
from .specfun import chebyshev_rule

__all__ = ["McConfig", "SerPoint", "SerCurve", "run_point", "run_curve", "wilson_interval",
           "CHUNK", "default_workers",
           "zeta_histogram"]

CHUNK = 1 << 16
MIN_TRIALS = 1000


def default_workers() -> int:
    """Worker count from ``AC_MASK_WORKERS``, else 1."""
    raw = os.environ.get("AC_MASK_WORKERS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise DomainError(f"AC_MASK_WORKERS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise DomainError(f"AC_MASK_WORKERS must be a positive integer, got {raw!r}")
    return n


@dataclass(frozen=True)
class McConfig:
    """Monte Carlo settings.

    ``phase_noise_level`` is the severity level mapped by
    :func:`acmask.detectors.phase_noise_variance`.
    """

    trials: int = 10**6
    seed: int = 0
    workers: int = 1
    confidence_level: float = 0.95
    phase_noise_level: float = 0.0

    def __post_init__(self):
        if int(self.trials) != self.trials or self.trials < MIN_TRIALS:
            raise DomainError(f"trials must be an integer >= {MIN_TRIALS}, got {self.trials}")
        if int(self.workers) != self.workers or self.workers < 1:
            raise DomainError(f"workers must be a positive integer, got {self.workers}")
        if not 0.0 < self.confidence_level < 1.0:
            raise DomainError("confidence_level must lie in (0, 1)")
        if self.phase_noise_level < 0:
            raise DomainError("phase_noise_level must be >= 0")
        if not 0 <= int(self.seed) < 2**64:
            raise DomainError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class SerPoint:
    snr_db: float
    ser: float
    ci_low: float
    ci_high: float
    errors: int
    trials: int
    rejected: int = 0

    @property
    def std_error(self) -> float:
        """Binomial standard error ``sqrt(p (1 - p) / n)``."""
        p = self.ser
        return math.sqrt(max(p * (1.0 - p), 0.0) / self.trials)


@dataclass(frozen=True)
class SerCurve:
    detector: DetectorKind
    M: int
    N: int
    K: float
    omega: float
    phase_noise_level: float
    points: tuple[SerPoint, ...] = field(default_factory=tuple)

    def __post_init__(self):
        snrs = [p.snr_db for p in self.points]
        if any(b <= a for a, b in zip(snrs, snrs[1:])):
            raise DomainError("SerCurve points must have strictly increasing snr_db")

    @property
    def snr_db(self) -> np.ndarray:
        return np.array([p.snr_db for p in self.points])

    @property
    def ser(self) -> np.ndarray:
        return np.array([p.ser for p in self.points])


def wilson_interval(errors: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise DomainError("trials must be positive")
    z = float(stats.norm.isf(0.5 * (1.0 - level)))
    p = errors / trials
    z2n = z * z / trials
    centre = (p + 0.5 * z2n) / (1.0 + z2n)
    half = z * math.sqrt(p * (1.0 - p) / trials + 0.25 * z2n / trials) / (1.0 + z2n)
    lo = max(0.0, centre - half)
    hi = min(1.0, centre + half)
    # keep the interval around the point estimate in floating point
    return min(lo, p), max(hi, p)


def _chunk_errors(args) -> tuple[int, int]:
    kind, sc, seed, point_index, chunk_index, n, pn_var = args
    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence([seed, point_index, chunk_index])))
    c = sc.c
    m = rng.integers(0, c.M, size=n)
    ch = sample_channel(sc.p, sc.N, rng, size=n)
    r = transmit(c, m, ch, sc.sigma_n_sq, rng)
    if pn_var > 0:
        r = apply_phase_noise(r, pn_var, rng)
    rejected = 0
    if kind is DetectorKind.AC_HEURISTIC:
        ok = np.sum(ch.alpha**2, axis=-1) >= DEGENERATE_ENERGY
        rejected = int(n - ok.sum())
        if rejected:
            ch = type(ch)(ch.alpha[ok], ch.theta[ok])
            r, m = r[ok], m[ok]
    d = detect(kind, r, ch, sc.p, sc.sigma_n_sq, c, chebyshev_rule(sc.series.quad_order))
    return int(np.count_nonzero(d != m)), rejected


def _chunk_sizes(trials: int) -> list[int]:
    full, rest = divmod(trials, CHUNK)
    return [CHUNK] * full + ([rest] if rest else [])


def run_point(kind, sc: SerScenario, mc: McConfig, point_index: int = 0) -> SerPoint:
    """Estimate the SER of detector ``kind`` at scenario ``sc``.

    Symbols are uniform over the alphabet.  Trials whose channel energy is
    degenerate for the heuristic detector are rejected and reported in
    ``SerPoint.rejected``; they are excluded from ``trials``.
    """
    kind = DetectorKind.parse(kind)
    pn_var = phase_noise_variance(mc.phase_noise_level)
    jobs = [(kind, sc, int(mc.seed), int(point_index), j, n, pn_var)
            for j, n in enumerate(_chunk_sizes(int(mc.trials)))]
    if mc.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=mc.workers) as pool:
            results = list(pool.map(_chunk_errors, jobs, chunksize=1))
    else:
        results = [_chunk_errors(j) for j in jobs]
    errors = sum(e for e, _ in results)
    rejected = sum(r for _, r in results)
    trials = int(mc.trials) - rejected
    lo, hi = wilson_interval(errors, trials, mc.confidence_level)
    return SerPoint(sc.snr_db, errors / trials, lo, hi, errors, trials, rejected)


def run_curve(kind, sc: SerScenario, snr_grid, mc: McConfig) -> SerCurve:
    """One :func:`run_point` per SNR; point ``i`` uses stream index ``i``."""
    grid = [float(s) for s in snr_grid]
    if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
        raise DomainError("snr_grid must be nonempty and strictly increasing")
    kind = DetectorKind.parse(kind)
    points = []
    for i, snr in enumerate(grid):
        sci = replace(sc, sigma_n_sq=noise_variance(snr, sc.p.omega))
        pt = run_point(kind, sci, mc, point_index=i)
        points.append(replace(pt, snr_db=snr))
    return SerCurve(kind, sc.M, sc.N, sc.p.K, sc.p.omega, mc.phase_noise_level, tuple(points))


def _chunk_zeta_counts(args) -> np.ndarray:
    sc, m, edges, seed, chunk_index, n = args
    # stream key carries the symbol so traces for different m are independent
    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence([seed, int(m), chunk_index])))
    ch = sample_channel(sc.p, sc.N, rng, size=n)
    r = transmit(sc.c, m, ch, sc.sigma_n_sq, rng)
    zeta = np.sum(np.abs(r) ** 2, axis=-1) / np.sum(ch.alpha**2, axis=-1)
    counts, _ = np.histogram(zeta, bins=edges)
    return counts.astype(np.int64)


def zeta_histogram(m: int, sc: SerScenario, edges, trials: int, seed: int = 0,
                   workers: int = 1) -> np.ndarray:
    """Counts of simulated ``zeta`` given symbol ``m`` over the bins ``edges``.

    Samples falling outside ``[edges[0], edges[-1]]`` are not counted.  The
    chunking and seeding follow :func:`run_point`.
    """
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise DomainError("edges must be a strictly increasing 1-D array")
    sc.energy(m)
    jobs = [(sc, int(m), edges, int(seed), j, n) for j, n in enumerate(_chunk_sizes(int(trials)))]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_chunk_zeta_counts, jobs, chunksize=1))
    else:
        parts = [_chunk_zeta_counts(j) for j in jobs]
    return np.sum(parts, axis=0)
