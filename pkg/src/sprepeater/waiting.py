"""Monte-Carlo waiting times for a nested repeater with restart-on-failure.

Time is counted in slots of one elementary-link attempt (``L0 / c``).

* every elementary link retries once per slot and succeeds with ``P0``;
* a level-``i`` swap starts as soon as both children exist, takes no extra
  time and succeeds with ``P_i``; on failure both children are rebuilt;
* the optional final stage waits for two independent end-to-end chains and
  succeeds with ``P_pr``; on failure both chains are rebuilt.

Samples are drawn in fixed-size blocks, each with its own RNG stream, so the
result depends only on ``(config, seed)`` and not on how blocks are spread
over worker processes.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidParameterError

BLOCK_SIZE = 256
HISTOGRAM_BINS = 50


@dataclass(frozen=True)
class SimConfig:
    """``p_levels`` holds ``P0..Pn``; ``p_pr=None`` drops the final two-chain stage."""

    p_levels: tuple[float, ...]
    slot_duration: float = 1.0
    trials: int = 100_000
    seed: int = 0
    p_pr: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "p_levels", tuple(float(p) for p in self.p_levels))
        probs = list(self.p_levels) + ([] if self.p_pr is None else [self.p_pr])
        if not self.p_levels:
            raise InvalidParameterError("need at least P0")
        if any(not 0.0 < p <= 1.0 for p in probs):
            raise InvalidParameterError(f"probabilities must lie in (0, 1], got {probs}")
        if self.trials < 1:
            raise InvalidParameterError("trials must be >= 1")
        if self.slot_duration <= 0:
            raise InvalidParameterError("slot_duration must be positive")

    @property
    def n(self) -> int:
        return len(self.p_levels) - 1


@dataclass(frozen=True)
class SimResult:
    mean_T: float
    stderr: float
    histogram: tuple[np.ndarray, np.ndarray] = field(repr=False)
    trials: int = 0
    seed: int = 0


def rng_stream(seed: int, stream_id: int) -> np.random.Generator:
    """Independent generator for ``(seed, stream_id)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream_id,))))


def _repeat_until_success(p: float, size: int, rng, child) -> np.ndarray:
    """Total time of ``Geom(p)`` rounds, each lasting the max of two ``child`` samples."""
    rounds = rng.geometric(p, size)
    total = int(rounds.sum())
    attempts = child(2 * total).reshape(total, 2).max(axis=1)
    starts = np.cumsum(rounds) - rounds
    return np.add.reduceat(attempts, starts)


def _sample_level(levels: Sequence[float], level: int, size: int, rng) -> np.ndarray:
    if level == 0:
        return rng.geometric(levels[0], size)
    return _repeat_until_success(
        levels[level], size, rng, lambda m: _sample_level(levels, level - 1, m, rng)
    )


def sample_slots(config: SimConfig, size: int, rng: np.random.Generator) -> np.ndarray:
    """Waiting times in slots for ``size`` independent trials."""
    top = config.n
    if config.p_pr is None:
        return _sample_level(config.p_levels, top, size, rng)
    return _repeat_until_success(
        config.p_pr, size, rng, lambda m: _sample_level(config.p_levels, top, m, rng)
    )


def _run_block(args) -> np.ndarray:
    config, block = args
    size = min(BLOCK_SIZE, config.trials - block * BLOCK_SIZE)
    return sample_slots(config, size, rng_stream(config.seed, block)).astype(np.int64)


def simulate(config: SimConfig, workers: int = 1) -> SimResult:
    blocks = [(config, b) for b in range(math.ceil(config.trials / BLOCK_SIZE))]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_block, blocks))
    else:
        parts = [_run_block(b) for b in blocks]
    slots = np.concatenate(parts)
    # exact integer moments keep the aggregate independent of block grouping
    s1 = sum(int(p.sum()) for p in parts)
    s2 = sum(int(np.dot(p, p)) for p in parts)
    n = config.trials
    mean_slots = s1 / n
    var = (s2 - s1 * s1 / n) / (n - 1) if n > 1 else 0.0
    stderr = math.sqrt(max(var, 0.0) / n) * config.slot_duration
    times = slots * config.slot_duration
    hist = np.histogram(times, bins=HISTOGRAM_BINS)
    return SimResult(mean_slots * config.slot_duration, stderr, hist, n, config.seed)


def predicted_mean(config: SimConfig) -> float:
    """Heuristic mean: a factor 3/2 for every stage that waits on two parents."""
    stages = config.n + (0 if config.p_pr is None else 1)
    probs = math.prod(config.p_levels) * (1.0 if config.p_pr is None else config.p_pr)
    return 1.5**stages * config.slot_duration / probs


def minimum_time(config: SimConfig) -> float:
    """Waiting time when every step succeeds at the first try."""
    return config.slot_duration
