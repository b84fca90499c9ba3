"""Per-sample clipping policies and the privatization step.

A policy maps a per-sample gradient norm to a scale factor C_i with
``||C_i g_i|| <= R`` (or <= 1 for the threshold-free automatic policy), and
privatization adds Gaussian noise to the clipped sum. The automatic
policies replace the min-based clip with pure normalization, optionally
softened by a stability constant so small gradients keep their magnitudes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .numeric import LayerPartition, RngStream, batch_row_norms
from ._kernels import weighted_row_sum

__all__ = [
    "Abadi", "ReParam", "GlobalClip", "AutoV", "AutoS", "AutoSFree",
    "PerLayer", "PrivatizedGrad",
    "clip_factor", "clip_and_sum", "privatize", "noise_to_signal",
]


def _check_r(r):
    if not r > 0:
        raise InvalidArgumentError(f"threshold R must be > 0, got {r}")


def _check_gamma(g):
    if not g > 0:
        raise InvalidArgumentError(f"stability constant must be > 0, got {g}")


@dataclass(frozen=True)
class Abadi:
    """min(R/||g||, 1): the classical norm clip."""
    r: float

    def __post_init__(self):
        _check_r(self.r)


@dataclass(frozen=True)
class ReParam:
    """min(1/||g||, 1/R): Abadi rescaled by R."""
    r: float

    def __post_init__(self):
        _check_r(self.r)


@dataclass(frozen=True)
class GlobalClip:
    """Indicator I(||g|| < R): keep small gradients whole, drop the rest."""
    r: float

    def __post_init__(self):
        _check_r(self.r)


@dataclass(frozen=True)
class AutoV:
    """R/||g||: pure per-sample normalization."""
    r: float

    def __post_init__(self):
        _check_r(self.r)


@dataclass(frozen=True)
class AutoS:
    """R/(||g|| + gamma): normalization with a stability constant."""
    r: float
    gamma: float

    def __post_init__(self):
        _check_r(self.r)
        _check_gamma(self.gamma)


@dataclass(frozen=True)
class AutoSFree:
    """1/(||g|| + gamma): the threshold-free automatic policy."""
    gamma: float

    def __post_init__(self):
        _check_gamma(self.gamma)


ClipPolicy = Abadi | ReParam | GlobalClip | AutoV | AutoS | AutoSFree


@dataclass(frozen=True)
class PerLayer:
    """Per-layer clipping: one threshold per parameter range.

    ``thresholds=None`` means the uniform rule R_l = R / sqrt(L) derived
    from the base policy's R.
    """
    partition: LayerPartition
    thresholds: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.thresholds is not None:
            if len(self.thresholds) != len(self.partition):
                raise InvalidArgumentError("one threshold per partition range")
            if any(not t > 0 for t in self.thresholds):
                raise InvalidArgumentError("per-layer thresholds must be > 0")

    def resolve(self, policy: ClipPolicy) -> tuple[float, ...]:
        if self.thresholds is not None:
            return self.thresholds
        if isinstance(policy, AutoSFree):
            raise InvalidArgumentError(
                "uniform per-layer mode needs a threshold-bearing policy"
            )
        L = len(self.partition)
        return tuple(policy.r / np.sqrt(L) for _ in range(L))


@dataclass
class PrivatizedGrad:
    ghat: np.ndarray
    clip_factors: np.ndarray
    clip_fraction: float
    noise_std_used: float


def _threshold(policy: ClipPolicy) -> float:
    """Sensitivity bound of a single clipped gradient."""
    return 1.0 if isinstance(policy, AutoSFree) else policy.r


def clip_factor(policy: ClipPolicy, norm):
    """Scale factor for a gradient of the given norm. Vectorized over norm."""
    norm = np.asarray(norm, dtype=np.float64)
    if np.any(norm < 0):
        raise InvalidArgumentError("norms must be >= 0")
    safe = np.maximum(norm, np.finfo(np.float64).tiny)
    if isinstance(policy, Abadi):
        out = np.minimum(policy.r / safe, 1.0)
    elif isinstance(policy, ReParam):
        out = np.minimum(1.0 / safe, 1.0 / policy.r)
    elif isinstance(policy, GlobalClip):
        out = np.where(norm < policy.r, 1.0, 0.0)
    elif isinstance(policy, AutoV):
        # singular at 0; a zero gradient stays zero, matching the
        # gamma -> 0 limit of the stabilized policy
        out = np.where(norm > 0, policy.r / safe, 0.0)
    elif isinstance(policy, AutoS):
        out = policy.r / (norm + policy.gamma)
    elif isinstance(policy, AutoSFree):
        out = 1.0 / (norm + policy.gamma)
    else:
        raise InvalidArgumentError(f"unknown policy {policy!r}")
    return out if out.ndim else float(out)


def _with_r(policy: ClipPolicy, r: float) -> ClipPolicy:
    if isinstance(policy, AutoS):
        return AutoS(r, policy.gamma)
    if isinstance(policy, AutoSFree):
        raise InvalidArgumentError("threshold-free policy has no R to override")
    return type(policy)(r)


def clip_and_sum(policy: ClipPolicy, grads: np.ndarray,
                 per_layer: PerLayer | None = None):
    """Sum of clipped rows; returns (sum, factors, clip_fraction).

    clip_fraction is the share of rows with ||g_i|| above the policy's
    sensitivity threshold (the regime where the classical min() saturates),
    reported uniformly for every policy so runs are comparable.
    """
    grads = np.asarray(grads, dtype=np.float64)
    if grads.ndim != 2 or grads.shape[0] < 1:
        raise InvalidArgumentError("grads must be a nonempty B x d matrix")

    if per_layer is None:
        norms = batch_row_norms(grads)
        factors = np.asarray(clip_factor(policy, norms))
        total = weighted_row_sum(grads, np.ascontiguousarray(factors))
        frac = float(np.mean(norms > _threshold(policy)))
        return total, factors, frac

    part = per_layer.partition
    if part.dim != grads.shape[1]:
        raise InvalidArgumentError(
            f"partition covers [0,{part.dim}) but gradients have width {grads.shape[1]}"
        )
    thresholds = per_layer.resolve(policy)
    b = grads.shape[0]
    factors = np.empty((b, len(part)))
    total = np.zeros(grads.shape[1])
    clipped_any = np.zeros(b, dtype=bool)
    for l, ((lo, hi), r_l) in enumerate(zip(part.ranges, thresholds)):
        block = np.ascontiguousarray(grads[:, lo:hi])
        norms = batch_row_norms(block)
        layer_policy = _with_r(policy, r_l)
        f_l = np.asarray(clip_factor(layer_policy, norms))
        factors[:, l] = f_l
        total[lo:hi] = weighted_row_sum(block, np.ascontiguousarray(f_l))
        clipped_any |= norms > r_l
    return total, factors, float(np.mean(clipped_any))


def privatize(policy: ClipPolicy, grads: np.ndarray, sigma: float,
              rng: RngStream, per_layer: PerLayer | None = None) -> PrivatizedGrad:
    """Clipped sum plus Gaussian noise scaled to the policy's sensitivity.

    The raw noise vector depends only on ``rng``; the std scaling is applied
    after sampling, so runs with different thresholds can share one noise
    realization.
    """
    if sigma < 0:
        raise InvalidArgumentError(f"noise multiplier must be >= 0, got {sigma}")
    total, factors, frac = clip_and_sum(policy, grads, per_layer)
    if per_layer is not None:
        thresholds = np.asarray(per_layer.resolve(policy))
        noise_std = sigma * float(np.sqrt(np.sum(thresholds ** 2)))
    else:
        noise_std = sigma * _threshold(policy)
    z = rng.generator().standard_normal(total.shape[0])
    return PrivatizedGrad(total + noise_std * z, factors, frac, noise_std)


def noise_to_signal(thresholds, sigma: float) -> np.ndarray:
    """Per-layer ratio of total noise std to that layer's signal cap."""
    r = np.asarray(thresholds, dtype=np.float64)
    if np.any(r <= 0):
        raise InvalidArgumentError("thresholds must be > 0")
    return sigma * np.sqrt(np.sum(r ** 2)) / r
