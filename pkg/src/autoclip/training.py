"""Private training loop: Poisson sampling, per-sample clipping, noise,
optimizer step, and per-step metric logging.

The run is fully determined by (config, dataset): every random draw is
addressed by a label under the config seed, so repeated runs produce
identical trajectories and logs.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__ as _version
from .accounting import PrivacySpec, calibrate_sigma, gdp_epsilon, gdp_mu
from .clipping import (Abadi, AutoS, AutoSFree, AutoV, GlobalClip, ReParam,
                       privatize)
from .errors import InvalidArgumentError, NumericAbortError
from .models import (Dataset, ModelSpec, batch_loss_accuracy, init_params,
                     param_dim, per_sample_gradients)
from .numeric import RngStream, gaussian_vector, poisson_subsample
from .optimizers import OptimizerConfig, init_state, step

__all__ = ["RunConfig", "StepLog", "RunManifest", "run_training",
           "policy_to_dict", "policy_from_dict", "METRICS_HEADER"]

METRICS_HEADER = "step,loss,accuracy,grad_norm_mean,clip_fraction,sigma,eps_spent_gdp"

_POLICY_NAMES = {
    "abadi": Abadi, "reparam": ReParam, "global": GlobalClip,
    "auto_v": AutoV, "auto_s": AutoS, "auto_s_free": AutoSFree,
}


def policy_to_dict(policy) -> dict:
    for name, cls in _POLICY_NAMES.items():
        if type(policy) is cls:
            return {"name": name, **asdict(policy)}
    raise InvalidArgumentError(f"unknown policy {policy!r}")


def policy_from_dict(d: dict):
    d = dict(d)
    name = d.pop("name", None)
    if name not in _POLICY_NAMES:
        raise InvalidArgumentError(f"unknown policy name {name!r}")
    return _POLICY_NAMES[name](**d)


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce a run; JSON round-trips bit-exactly."""
    name: str
    model: ModelSpec
    data: dict                 # synthetic spec or file source, see resolve_dataset
    policy: object             # one of the clipping policy dataclasses
    optimizer: OptimizerConfig
    seed: int
    sample_rate: float
    steps: int
    sigma: float | None = None          # explicit noise multiplier, or
    privacy: PrivacySpec | None = None  # a budget to calibrate against
    accounting_method: str = "rdp"
    out_dir: str = "."

    def __post_init__(self):
        if not 0.0 < self.sample_rate <= 1.0:
            raise InvalidArgumentError("sample_rate must be in (0, 1]")
        if self.steps < 1:
            raise InvalidArgumentError("steps must be >= 1")
        if (self.sigma is None) == (self.privacy is None):
            raise InvalidArgumentError(
                "exactly one of sigma and privacy must be given"
            )
        if self.sigma is not None and self.sigma < 0:
            raise InvalidArgumentError("sigma must be >= 0")

    def to_json(self) -> str:
        doc = {
            "name": self.name,
            "model": asdict(self.model),
            "data": self.data,
            "policy": policy_to_dict(self.policy),
            "optimizer": asdict(self.optimizer),
            "seed": self.seed,
            "sample_rate": self.sample_rate,
            "steps": self.steps,
            "sigma": self.sigma,
            "privacy": None if self.privacy is None else asdict(self.privacy),
            "accounting_method": self.accounting_method,
            "out_dir": self.out_dir,
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "RunConfig":
        doc = json.loads(text)
        model = doc["model"]
        model["layer_sizes"] = tuple(model.get("layer_sizes", ()))
        return RunConfig(
            name=doc["name"],
            model=ModelSpec(**model),
            data=doc["data"],
            policy=policy_from_dict(doc["policy"]),
            optimizer=OptimizerConfig(**doc["optimizer"]),
            seed=doc["seed"],
            sample_rate=doc["sample_rate"],
            steps=doc["steps"],
            sigma=doc.get("sigma"),
            privacy=None if doc.get("privacy") is None
            else PrivacySpec(**doc["privacy"]),
            accounting_method=doc.get("accounting_method", "rdp"),
            out_dir=doc.get("out_dir", "."),
        )


@dataclass
class StepLog:
    step: int
    loss: float
    accuracy: float | None
    grad_norm_mean: float
    clip_fraction: float
    sigma: float
    eps_spent_gdp: float


@dataclass
class RunManifest:
    config_json: str
    sigma: float
    version: str
    steps: list = field(default_factory=list)   # StepLog entries
    wall_time: float = 0.0
    final_params: np.ndarray | None = None

    def metrics_csv(self) -> str:
        rows = [METRICS_HEADER]
        for s in self.steps:
            acc = "" if s.accuracy is None else f"{s.accuracy:.17g}"
            rows.append(
                f"{s.step},{s.loss:.17g},{acc},{s.grad_norm_mean:.17g},"
                f"{s.clip_fraction:.17g},{s.sigma:.17g},{s.eps_spent_gdp:.17g}"
            )
        return "\n".join(rows) + "\n"


def resolve_dataset(data: dict, seed: int) -> Dataset:
    """Materialize the dataset described by a RunConfig data block."""
    from .data_io import load_dataset
    from .models import gen_synthetic

    kind = data.get("kind")
    if kind == "synthetic":
        return gen_synthetic(data["name"], data.get("seed", seed),
                             data["n_per_class"], data.get("dims", 1),
                             data.get("means"))
    if kind == "file":
        return load_dataset(data["path"], data["format"],
                            data.get("labels_path"))
    raise InvalidArgumentError(f"unknown data source kind {kind!r}")


def resolve_sigma(config: RunConfig) -> float:
    if config.sigma is not None:
        return config.sigma
    return calibrate_sigma(config.privacy, method=config.accounting_method)


def run_training(config: RunConfig, dataset: Dataset | None = None,
                 eval_data: Dataset | None = None) -> RunManifest:
    """Execute the private loop; returns a manifest with per-step logs.

    Metrics are evaluated on ``eval_data`` if given, otherwise on the
    training set. A non-finite loss or parameter aborts the run.
    """
    t0 = time.monotonic()
    data = dataset if dataset is not None else resolve_dataset(config.data,
                                                               config.seed)
    sigma = resolve_sigma(config)
    spec, opt = config.model, config.optimizer
    want_acc = not (spec.kind == "linear"
                    or (spec.kind == "mlp" and spec.loss == "mse"))
    rng = RngStream(config.seed)
    d = param_dim(spec, data.features.shape[1])
    w = init_params(spec, data.features.shape[1], rng.child("init"))
    state = init_state(opt, d)
    monitor = eval_data if eval_data is not None else data
    manifest = RunManifest(config.to_json(), sigma, _version)

    for t in range(config.steps):
        idx = poisson_subsample(rng.child(f"batch/{t}"), data.n,
                                config.sample_rate)
        noise_rng = rng.child(f"noise/step/{t}")
        if idx.size > 0:
            grads = per_sample_gradients(spec, w, data.features[idx],
                                         data.labels[idx])
            priv = privatize(config.policy, grads, sigma, noise_rng)
            ghat, frac = priv.ghat, priv.clip_fraction
            gnorm = float(np.mean(np.sqrt(np.sum(grads ** 2, axis=1))))
        else:
            std = sigma * (1.0 if isinstance(config.policy, AutoSFree)
                           else config.policy.r)
            ghat = gaussian_vector(noise_rng, d, std)
            frac, gnorm = 0.0, 0.0
        w, state = step(opt, state, w, ghat)

        loss, acc = batch_loss_accuracy(spec, w, monitor,
                                        want_accuracy=want_acc)
        if not (math.isfinite(loss) and np.isfinite(w).all()):
            raise NumericAbortError(
                f"non-finite loss or parameters at step {t}: loss={loss}"
            )
        mu = gdp_mu(sigma, config.sample_rate, t + 1) if sigma > 0 else 0.0
        eps_gdp = gdp_epsilon(mu, config.privacy.delta) \
            if config.privacy is not None else \
            gdp_epsilon(mu, 1e-5)
        manifest.steps.append(
            StepLog(t, loss, acc, gnorm, frac, sigma, eps_gdp))

    manifest.wall_time = time.monotonic() - t0
    manifest.final_params = w
    return manifest
