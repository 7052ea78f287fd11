"""Seeded Monte Carlo with results independent of the worker count.

Samples are drawn in fixed-size blocks; block ``i`` uses the generator seeded by
``SeedSequence(root_seed, spawn_key=(i,))``.  Workers only decide which thread
evaluates a block, and partial sums are reduced in block order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

DEFAULT_SAMPLES = 100_000
BLOCK_SIZE = 8192


@dataclass(frozen=True)
class Sampler:
    samples: int = DEFAULT_SAMPLES
    seed: int = 0
    workers: int = 1
    confidence: float = 0.99
    method: str = "iid"  # or "stratified"

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be positive")
        if self.workers < 1:
            raise ValueError("workers must be positive")
        if not 0 < self.confidence < 1:
            raise ValueError("confidence must lie in (0, 1)")
        if self.method not in ("iid", "stratified"):
            raise ValueError(f"unknown sampling method {self.method!r}")


def hoeffding_halfwidth(n: int, value_range: float, confidence: float = 0.99) -> float:
    """Two-sided Hoeffding half-width for the mean of ``n`` variables in an interval of width ``value_range``."""
    return value_range * math.sqrt(math.log(2.0 / (1.0 - confidence)) / (2.0 * n))


def block_rng(root_seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(root_seed, spawn_key=(block,)))


def blocked_sum(sampler: Sampler, fn: Callable[[np.random.Generator, int, int], float]) -> float:
    """Sum of ``fn(rng, block_index, size)`` over all blocks, reduced in block order."""
    sizes = []
    remaining = sampler.samples
    while remaining > 0:
        sizes.append(min(BLOCK_SIZE, remaining))
        remaining -= sizes[-1]

    def run(i: int) -> float:
        return float(fn(block_rng(sampler.seed, i), i, sizes[i]))

    if sampler.workers == 1:
        parts = [run(i) for i in range(len(sizes))]
    else:
        with ThreadPoolExecutor(max_workers=sampler.workers) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    total = 0.0
    for p in parts:
        total += p
    return total
