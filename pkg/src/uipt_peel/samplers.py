"""Reproducible samplers for the step law, the peeling kernel, Boltzmann volumes and clocks.

Every sampler takes an :class:`RngStream`.  Batch variants (``*_many``) run
the same compiled kernel in a loop and consume the stream exactly as the same
number of scalar calls would.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numba import njit

from . import _core
from .exact_laws import default_step_law


class RngStream:
    """A Philox stream keyed by (master_seed, stream_id).

    The key is hashed through numpy's SeedSequence, so streams for different
    ids are statistically independent and each can be rebuilt in isolation.
    """

    __slots__ = ("master_seed", "stream_id", "generator")

    def __init__(self, master_seed: int, stream_id: int = 0):
        if master_seed < 0 or stream_id < 0:
            raise ValueError("seed and stream id must be nonnegative")
        self.master_seed = int(master_seed)
        self.stream_id = int(stream_id)
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_id,))
        self.generator = np.random.Generator(np.random.Philox(seq))

    def uniform(self, size=None):
        return self.generator.random(size)

    def __repr__(self):
        return f"RngStream(master_seed={self.master_seed}, stream_id={self.stream_id})"


@dataclass(frozen=True)
class StepSamplerTables:
    """Inversion table for the step law; draws past its end invert the closed-form tail."""

    table_size: int = 1 << 20
    cumulative: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.table_size == default_step_law().table_size:
            cum = default_step_law().cumulative
        else:
            cum = _core.build_step_table(self.table_size)
        object.__setattr__(self, "cumulative", cum)


@lru_cache(maxsize=None)
def default_tables() -> StepSamplerTables:
    return StepSamplerTables()


def _cum(tables):
    return (tables or default_tables()).cumulative


def sample_step(rng: RngStream, tables: StepSamplerTables | None = None) -> int:
    return int(_core.sample_step(rng.generator, _cum(tables)))


def sample_conditioned_step(rng: RngStream, n: int, tables: StepSamplerTables | None = None) -> int:
    """Next boundary size from n by rejection against the unconditioned step law."""
    if n < 2:
        raise ValueError("boundary size must be >= 2")
    return int(_core.sample_conditioned_step(rng.generator, _cum(tables), int(n)))


def sample_boltzmann_volume(rng: RngStream, jump: int, limit: int | None = None) -> int:
    """Volume swallowed by a boundary step of size ``jump``.

    An upward step adds exactly one vertex.  A step of -j fills a (j+1)-gon
    with a free Boltzmann triangulation.  With ``limit`` the result is
    censored: values above ``limit`` come back as ``limit + 1``.
    """
    if jump == 0 or jump > 1:
        raise ValueError("jump must be +1 or negative")
    lim = _core.VOLUME_CEILING if limit is None else int(limit)
    if lim < 0:
        raise ValueError("limit must be nonnegative")
    return int(_core.jump_volume(rng.generator, int(jump), lim))


def sample_coloring(rng: RngStream) -> int:
    """1 (red) or 0 (blue), each with probability 1/2."""
    return 1 if rng.generator.random() < 0.5 else 0


def sample_exponential(rng: RngStream, rate: float) -> float:
    if not rate > 0:
        raise ValueError("rate must be positive")
    return float(rng.generator.standard_exponential()) / rate


@njit(cache=True)
def _steps_many(gen, cum, size):
    out = np.empty(size, np.int64)
    for i in range(size):
        out[i] = _core.sample_step(gen, cum)
    return out


@njit(cache=True)
def _conditioned_many(gen, cum, n, size):
    out = np.empty(size, np.int64)
    for i in range(size):
        out[i] = _core.sample_conditioned_step(gen, cum, n)
    return out


@njit(cache=True)
def _volumes_many(gen, jump, size, limit):
    out = np.empty(size, np.int64)
    for i in range(size):
        out[i] = _core.jump_volume(gen, jump, limit)
    return out


def sample_steps(rng: RngStream, size: int, tables: StepSamplerTables | None = None) -> np.ndarray:
    return _steps_many(rng.generator, _cum(tables), int(size))


def sample_conditioned_steps(rng: RngStream, n: int, size: int,
                             tables: StepSamplerTables | None = None) -> np.ndarray:
    if n < 2:
        raise ValueError("boundary size must be >= 2")
    return _conditioned_many(rng.generator, _cum(tables), int(n), int(size))


def sample_boltzmann_volumes(rng: RngStream, jump: int, size: int, limit: int | None = None) -> np.ndarray:
    if jump == 0 or jump > 1:
        raise ValueError("jump must be +1 or negative")
    lim = _core.VOLUME_CEILING if limit is None else int(limit)
    return _volumes_many(rng.generator, int(jump), int(size), lim)


def sample_colorings(rng: RngStream, size: int) -> np.ndarray:
    return (rng.generator.random(size) < 0.5).astype(np.int8)


def sample_exponentials(rng: RngStream, rate: float, size: int) -> np.ndarray:
    if not rate > 0:
        raise ValueError("rate must be positive")
    return rng.generator.standard_exponential(size) / rate


def sample_annealed_volumes(rng: RngStream, size: int, limit: int | None = None,
                            tables: StepSamplerTables | None = None) -> np.ndarray:
    """Boltzmann volume of a (1 - xi)-gon with xi from the step law; upward steps give 1."""
    lim = _core.VOLUME_CEILING if limit is None else int(limit)
    out = np.empty(int(size), np.int64)
    _core.annealed_block(rng.generator, _cum(tables), int(size), lim, out)
    return out
