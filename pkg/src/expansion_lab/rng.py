"""Seeded random streams.

Every stochastic operation draws from numpy's counter-based ``Philox``
bit generator keyed by ``SeedSequence([seed, task])``.  Tasks are
numbered by the caller, so results never depend on execution order.
"""
from __future__ import annotations

import os

import numpy as np

RNG_NAME = "numpy.Philox-4x64-10/SeedSequence"


def task_rng(seed: int, task: int = 0) -> np.random.Generator:
    """Generator for task ``task`` under master seed ``seed``."""
    if seed is None:
        raise ValueError("a seed is required")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed) & (2 ** 64 - 1), int(task)])))


def thread_cap() -> int:
    """Value of ``EXPANSION_LAB_THREADS`` (default 1).

    Work is currently executed serially; the cap is read so reports can
    record it.
    """
    try:
        return max(1, int(os.environ.get("EXPANSION_LAB_THREADS", "1")))
    except ValueError:
        return 1
