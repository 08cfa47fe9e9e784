"""Reproducible Brownian increments from counter-based substreams.

Paths are grouped into fixed blocks of ``BLOCK`` consecutive path indices.
Block ``b`` of seed ``s`` draws from ``Philox(SeedSequence(s, spawn_key=(b,)))``
in path-major order, so the increments of path ``i`` depend only on
``(seed, i, n_steps)``; never on how many paths are requested or how the
work is split between threads.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

BLOCK = 64
SEED_MAX = 2**64 - 1


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= SEED_MAX:
        raise DomainError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def block_generator(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(_check_seed(seed),
                                                                       spawn_key=(block,))))


def standard_normals(seed: int, first_path: int, n_paths: int, n_steps: int) -> np.ndarray:
    """Standard normals of shape ``(n_steps, n_paths)`` for paths ``first_path ...``."""
    out = np.empty((n_paths, n_steps))
    end = first_path + n_paths
    b = first_path // BLOCK
    while b * BLOCK < end:
        z = block_generator(seed, b).standard_normal((BLOCK, n_steps))
        lo = max(first_path, b * BLOCK)
        hi = min(end, (b + 1) * BLOCK)
        out[lo - first_path:hi - first_path] = z[lo - b * BLOCK:hi - b * BLOCK]
        b += 1
    return np.ascontiguousarray(out.T)


@dataclass(frozen=True)
class BrownianIncrements:
    """Increments dW_k ~ N(0, step) on a uniform grid; ``dw`` has shape (n_steps,) or (n_steps, n_paths)."""

    step: float
    dw: np.ndarray

    def __post_init__(self):
        if not self.step > 0:
            raise DomainError(f"increment step must be positive, got {self.step}")
        dw = np.array(self.dw, dtype=float)
        if dw.ndim not in (1, 2) or dw.shape[0] == 0:
            raise DomainError("increments must be a non-empty 1-D or 2-D array")
        dw.flags.writeable = False
        object.__setattr__(self, "dw", dw)

    @property
    def n_steps(self) -> int:
        return self.dw.shape[0]

    @property
    def horizon(self) -> float:
        return self.n_steps * self.step

    @classmethod
    def generate(cls, seed: int, n_steps: int, step: float, path_index: int = 0) -> "BrownianIncrements":
        z = standard_normals(seed, path_index, 1, n_steps)[:, 0]
        return cls(step, z * np.sqrt(step))

    def coarsen(self, factor: int) -> "BrownianIncrements":
        """Sum groups of ``factor`` increments (same Brownian path, coarser grid)."""
        if self.n_steps % factor:
            raise DomainError(f"{self.n_steps} steps are not divisible by {factor}")
        shape = (self.n_steps // factor, factor) + self.dw.shape[1:]
        return BrownianIncrements(self.step * factor, self.dw.reshape(shape).sum(axis=1))
