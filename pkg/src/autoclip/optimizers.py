"""Optimizer update rules consuming a privatized gradient.

Non-adaptive kinds (sgd, heavyball, nag) scale linearly with the gradient,
so a threshold baked into the private gradient trades off exactly against
the learning rate. Adaptive kinds (adagrad, adam, adamw) divide first
moments by second moments, so the threshold cancels outright.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidArgumentError, InvalidStateError

__all__ = ["OptimizerConfig", "OptimizerState", "init_state", "step",
           "paired_config", "equivalence_pair_run"]

KINDS = ("sgd", "heavyball", "nag", "adagrad", "adam", "adamw")
NON_ADAPTIVE = ("sgd", "heavyball", "nag")
ADAPTIVE = ("adagrad", "adam", "adamw")


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str
    eta: float
    weight_decay: float = 0.0
    momentum: float = 0.9          # heavyball / nag
    beta1: float = 0.9             # adam family
    beta2: float = 0.999
    eps: float = 1e-12
    decoupled_wd: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgumentError(f"unknown optimizer kind {self.kind!r}")
        if not self.eta > 0:
            raise InvalidArgumentError("learning rate must be > 0")
        if self.weight_decay < 0:
            raise InvalidArgumentError("weight decay must be >= 0")
        for name, b in (("momentum", self.momentum), ("beta1", self.beta1),
                        ("beta2", self.beta2)):
            if not 0.0 <= b < 1.0:
                raise InvalidArgumentError(f"{name} must be in [0, 1)")
        if not self.eps > 0:
            raise InvalidArgumentError("eps must be > 0")


@dataclass
class OptimizerState:
    kind: str
    t: int
    m: np.ndarray | None = None   # first moment / momentum buffer
    v: np.ndarray | None = None   # second moment


def init_state(config: OptimizerConfig, dim: int) -> OptimizerState:
    m = np.zeros(dim) if config.kind != "sgd" else None
    v = np.zeros(dim) if config.kind in ("adagrad", "adam", "adamw") else None
    return OptimizerState(config.kind, 0, m, v)


def step(config: OptimizerConfig, state: OptimizerState,
         w: np.ndarray, ghat: np.ndarray):
    """One update; returns (w', state'). Inputs are not mutated."""
    if state.kind != config.kind:
        raise InvalidStateError(
            f"state built for {state.kind!r}, stepped with {config.kind!r}"
        )
    if ghat.shape != w.shape:
        raise InvalidArgumentError("gradient and parameters disagree on dim")
    eta, lam = config.eta, config.weight_decay
    decoupled = config.decoupled_wd or config.kind == "adamw"
    grad = ghat if (decoupled or lam == 0.0) else ghat + lam * w
    t = state.t + 1
    m, v = state.m, state.v

    if config.kind == "sgd":
        w2 = w - eta * grad
    elif config.kind == "heavyball":
        m = config.momentum * m + grad
        w2 = w - eta * m
    elif config.kind == "nag":
        m = config.momentum * m + grad
        w2 = w - eta * (grad + config.momentum * m)
    elif config.kind == "adagrad":
        v = v + grad ** 2
        w2 = w - eta * grad / (np.sqrt(v) + config.eps)
    else:  # adam / adamw
        m = config.beta1 * m + (1.0 - config.beta1) * grad
        v = config.beta2 * v + (1.0 - config.beta2) * grad ** 2
        mhat = m / (1.0 - config.beta1 ** t)
        vhat = v / (1.0 - config.beta2 ** t)
        w2 = w - eta * mhat / (np.sqrt(vhat) + config.eps)

    if decoupled and lam > 0.0:
        w2 = w2 - eta * lam * w
    return w2, OptimizerState(config.kind, t,
                              None if m is None else m.copy(),
                              None if v is None else v.copy())


def paired_config(config: OptimizerConfig, r: float) -> OptimizerConfig:
    """Hyperparameters for the threshold-free twin of a run at threshold r.

    Non-adaptive: (eta, lam) -> (eta*r, lam/r). Adaptive with coupled decay:
    (eta, lam) -> (eta, lam/r). Decoupled adamw: unchanged.
    """
    if config.kind in NON_ADAPTIVE:
        return replace(config, eta=config.eta * r,
                       weight_decay=config.weight_decay / r)
    if config.decoupled_wd or config.kind == "adamw":
        return config
    return replace(config, weight_decay=config.weight_decay / r)


def equivalence_pair_run(kind: str, steps: int, seed: int, r: float,
                         eta: float, lam: float, gamma: float,
                         spec, dataset, sigma: float = 1.0,
                         negative_control: bool = False,
                         control_r2: float | None = None) -> float:
    """Max relative trajectory deviation between a threshold-dependent run
    and its threshold-free twin under shared noise.

    With ``negative_control=True`` the pairing instead uses the classical
    min-clip at thresholds r and control_r2 with the learning rate scaled
    by r/control_r2; on data with unclipped samples this pairing is NOT
    an identity and the deviation is expected to be large.
    """
    from .clipping import Abadi, AutoS, AutoSFree, privatize
    from .models import init_params, param_dim, per_sample_gradients
    from .numeric import RngStream

    base = OptimizerConfig(kind, eta, lam, decoupled_wd=(kind == "adamw"))
    if negative_control:
        r2 = control_r2 if control_r2 is not None else 2.0 * r
        policy_a, policy_b = Abadi(r), Abadi(r2)
        cfg_a, cfg_b = base, replace(base, eta=eta * r / r2)
    else:
        policy_a, policy_b = AutoS(r, gamma), AutoSFree(gamma)
        cfg_a, cfg_b = base, paired_config(base, r)

    rng = RngStream(seed)
    d = param_dim(spec, dataset.features.shape[1])
    w0 = init_params(spec, dataset.features.shape[1], rng.child("init"))
    wa, wb = w0.copy(), w0.copy()
    sa, sb = init_state(cfg_a, d), init_state(cfg_b, d)
    worst = 0.0
    for t in range(steps):
        noise = rng.child(f"noise/step/{t}")
        ga = per_sample_gradients(spec, wa, dataset.features, dataset.labels)
        gb = per_sample_gradients(spec, wb, dataset.features, dataset.labels)
        pa = privatize(policy_a, ga, sigma, noise)
        pb = privatize(policy_b, gb, sigma, noise)
        wa, sa = step(cfg_a, sa, wa, pa.ghat)
        wb, sb = step(cfg_b, sb, wb, pb.ghat)
        scale = max(1.0, float(np.max(np.abs(wa))))
        worst = max(worst, float(np.max(np.abs(wa - wb))) / scale)
    return worst
