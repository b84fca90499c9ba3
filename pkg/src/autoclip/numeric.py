"""Deterministic numerics: labeled RNG streams, Gaussian sampling,
Poisson subsampling, and layer-partition norm utilities.

All arrays are float64. Randomness is counter-based (Philox) and keyed by
a hash of ``(seed, label)``, so a draw depends only on its own label, never
on how many draws happened before it. Two pipelines that share a label see
the identical sample sequence.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from ._kernels import row_norms

__all__ = [
    "RngStream",
    "LayerPartition",
    "gaussian_vector",
    "poisson_subsample",
    "group_norms",
]


@dataclass(frozen=True)
class RngStream:
    """Immutable descriptor of a random substream.

    The stream is identified by ``(seed, label)``; distinct labels give
    statistically independent streams, identical pairs give bit-identical
    sequences.
    """

    seed: int
    label: str = ""

    def child(self, suffix: str) -> "RngStream":
        label = f"{self.label}/{suffix}" if self.label else suffix
        return RngStream(self.seed, label)

    def generator(self) -> np.random.Generator:
        digest = hashlib.sha256(
            f"{self.seed}\x1f{self.label}".encode()
        ).digest()
        key = np.frombuffer(digest[:16], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class LayerPartition:
    """Ordered half-open index ranges covering [0, dim) exactly once."""

    ranges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if not self.ranges:
            raise InvalidArgumentError("partition must have at least one range")
        prev = 0
        for lo, hi in self.ranges:
            if lo != prev or hi <= lo:
                raise InvalidArgumentError(
                    f"ranges must be sorted, disjoint and gap-free; got {self.ranges}"
                )
            prev = hi

    @property
    def dim(self) -> int:
        return self.ranges[-1][1]

    def __len__(self) -> int:
        return len(self.ranges)

    @staticmethod
    def uniform(dim: int, n_layers: int) -> "LayerPartition":
        """Split [0, dim) into n_layers near-equal contiguous ranges."""
        bounds = np.linspace(0, dim, n_layers + 1).astype(int)
        return LayerPartition(
            tuple((int(bounds[i]), int(bounds[i + 1])) for i in range(n_layers))
        )


def gaussian_vector(rng: RngStream, dim: int, std: float) -> np.ndarray:
    """Length-``dim`` vector of i.i.d. N(0, std^2) draws, deterministic in rng."""
    if dim < 1:
        raise InvalidArgumentError(f"dim must be >= 1, got {dim}")
    if not math.isfinite(std) or std < 0:
        raise InvalidArgumentError(f"std must be finite and >= 0, got {std}")
    return std * rng.generator().standard_normal(dim)


def poisson_subsample(rng: RngStream, n: int, p: float) -> np.ndarray:
    """Indices of {0..n-1}, each included independently with probability p."""
    if not 0.0 <= p <= 1.0:
        raise InvalidArgumentError(f"p must be in [0, 1], got {p}")
    if p == 1.0:
        return np.arange(n)
    return np.flatnonzero(rng.generator().random(n) < p)


def group_norms(v: np.ndarray, part: LayerPartition) -> np.ndarray:
    """Per-range l2 norms of v; their squared sum equals ||v||^2."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or part.dim != v.shape[0]:
        raise InvalidArgumentError(
            f"partition covers [0,{part.dim}) but vector has length {v.shape[0]}"
        )
    return np.array([np.sqrt(np.dot(v[lo:hi], v[lo:hi])) for lo, hi in part.ranges])


def batch_row_norms(grads: np.ndarray) -> np.ndarray:
    """l2 norm of each row of a B x d matrix."""
    grads = np.ascontiguousarray(grads, dtype=np.float64)
    return row_norms(grads)
