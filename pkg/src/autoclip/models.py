"""Small differentiable models with exact per-sample gradients.

Kinds:

* ``linear``      -- scalar prediction x.w with squared loss 0.5*(x.w - y)^2
* ``logistic1d``  -- single intercept theta, P(y=1|x) = sigmoid(x + theta),
                     labels in {-1,+1}
* ``logistic``    -- x.w logit, labels in {-1,+1}, log-loss
* ``mlp``         -- fully connected net, relu/tanh hidden activations,
                     softmax cross-entropy / squared / multi-label BCE head

Gradients are computed per example (closed form where available, reverse
accumulation for the MLP); no batched tricks, so everything is auditable
against finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, UnsupportedMetricError
from .numeric import RngStream
from ._kernels import logistic_grads

__all__ = [
    "Dataset",
    "ModelSpec",
    "param_dim",
    "init_params",
    "sample_loss",
    "per_sample_gradients",
    "batch_loss_accuracy",
    "gen_synthetic",
]

KINDS = ("linear", "logistic1d", "logistic", "mlp")
LOSSES = ("mse", "binary_ce", "softmax_ce", "multilabel_bce")
ACTIVATIONS = ("relu", "tanh")
CLASSIFICATION_KINDS = ("logistic1d", "logistic", "mlp")


@dataclass
class Dataset:
    features: np.ndarray  # n x m
    labels: np.ndarray    # length n (or n x k for multi-label)
    name: str = ""

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels)
        if self.features.ndim != 2 or self.features.shape[0] < 1:
            raise InvalidArgumentError("features must be a nonempty n x m matrix")
        if self.labels.shape[0] != self.features.shape[0]:
            raise InvalidArgumentError("labels and features disagree on n")
        if not np.isfinite(self.features).all():
            raise InvalidArgumentError("features contain NaN/Inf")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.features[idx], self.labels[idx], self.name)


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    layer_sizes: tuple[int, ...] = ()  # mlp only, includes input and output
    activation: str = "relu"
    loss: str = "binary_ce"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgumentError(f"unknown model kind {self.kind!r}")
        if self.loss not in LOSSES:
            raise InvalidArgumentError(f"unknown loss {self.loss!r}")
        if self.activation not in ACTIVATIONS:
            raise InvalidArgumentError(f"unknown activation {self.activation!r}")
        if self.kind == "mlp" and len(self.layer_sizes) < 2:
            raise InvalidArgumentError("mlp needs at least [input, output] sizes")


def param_dim(spec: ModelSpec, n_features: int) -> int:
    if spec.kind == "logistic1d":
        return 1
    if spec.kind in ("linear", "logistic"):
        return n_features
    sizes = spec.layer_sizes
    if sizes[0] != n_features:
        raise InvalidArgumentError(
            f"mlp input size {sizes[0]} != feature width {n_features}"
        )
    return sum(sizes[i + 1] * sizes[i] + sizes[i + 1] for i in range(len(sizes) - 1))


def init_params(spec: ModelSpec, n_features: int, rng: RngStream) -> np.ndarray:
    d = param_dim(spec, n_features)
    if spec.kind != "mlp":
        return np.zeros(d)
    gen = rng.generator()
    sizes = spec.layer_sizes
    chunks = []
    for i in range(len(sizes) - 1):
        fan_in, fan_out = sizes[i], sizes[i + 1]
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        chunks.append(gen.uniform(-bound, bound, fan_out * fan_in))
        chunks.append(np.zeros(fan_out))
    return np.concatenate(chunks)


def _sigmoid(z):
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))),
                    np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))


def _log1pexp(z):
    # log(1 + e^z), stable on both sides
    z = np.asarray(z, dtype=np.float64)
    return np.where(z > 0, z + np.log1p(np.exp(-np.abs(z))), np.log1p(np.exp(-np.abs(z))))


def _unpack_mlp(spec: ModelSpec, w: np.ndarray):
    sizes = spec.layer_sizes
    mats, offset = [], 0
    for i in range(len(sizes) - 1):
        fan_in, fan_out = sizes[i], sizes[i + 1]
        W = w[offset:offset + fan_out * fan_in].reshape(fan_out, fan_in)
        offset += fan_out * fan_in
        b = w[offset:offset + fan_out]
        offset += fan_out
        mats.append((W, b))
    return mats


def _mlp_forward(spec, mats, x):
    acts = [x]
    pre = []
    for li, (W, b) in enumerate(mats):
        z = W @ acts[-1] + b
        pre.append(z)
        if li < len(mats) - 1:
            # relu subgradient at 0 is taken as 0
            a = np.maximum(z, 0.0) if spec.activation == "relu" else np.tanh(z)
        else:
            a = z
        acts.append(a)
    return acts, pre


def _mlp_head(spec, out, y):
    """Loss value and d(loss)/d(output) at the network output."""
    if spec.loss == "softmax_ce":
        shifted = out - out.max()
        logz = np.log(np.sum(np.exp(shifted)))
        p = np.exp(shifted - logz)
        k = int(y)
        loss = logz - shifted[k]
        dout = p.copy()
        dout[k] -= 1.0
    elif spec.loss == "mse":
        target = np.atleast_1d(np.asarray(y, dtype=np.float64))
        r = out - target
        loss = 0.5 * float(r @ r)
        dout = r
    elif spec.loss == "multilabel_bce":
        target = np.asarray(y, dtype=np.float64)
        loss = float(np.sum(_log1pexp(out) - target * out))
        dout = _sigmoid(out) - target
    else:
        raise InvalidArgumentError(f"loss {spec.loss!r} unsupported for mlp")
    return loss, dout


def _mlp_sample_grad(spec, mats, x, y):
    acts, pre = _mlp_forward(spec, mats, x)
    loss, delta = _mlp_head(spec, acts[-1], y)
    grads = []
    for li in range(len(mats) - 1, -1, -1):
        W, _ = mats[li]
        grads.append((np.outer(delta, acts[li]), delta))
        if li > 0:
            delta = W.T @ delta
            if spec.activation == "relu":
                delta = delta * (pre[li - 1] > 0)
            else:
                delta = delta * (1.0 - np.tanh(pre[li - 1]) ** 2)
    flat = []
    for gW, gb in reversed(grads):
        flat.append(gW.ravel())
        flat.append(gb)
    return loss, np.concatenate(flat)


def sample_loss(spec: ModelSpec, w: np.ndarray, x: np.ndarray, y) -> float:
    """Loss of a single example; the quantity per_sample_gradients differentiates."""
    x = np.asarray(x, dtype=np.float64)
    if spec.kind == "linear":
        return 0.5 * float((x @ w - y) ** 2)
    if spec.kind == "logistic1d":
        return float(_log1pexp(-y * (x[0] + w[0])))
    if spec.kind == "logistic":
        return float(_log1pexp(-y * (x @ w)))
    mats = _unpack_mlp(spec, w)
    acts, _ = _mlp_forward(spec, mats, x)
    loss, _ = _mlp_head(spec, acts[-1], y)
    return loss


def per_sample_gradients(spec: ModelSpec, w: np.ndarray,
                         features: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """B x d matrix; row i is the gradient of example i's loss at w."""
    X = np.ascontiguousarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1:
        raise InvalidArgumentError("batch must be a nonempty matrix")
    d = param_dim(spec, X.shape[1])
    if w.shape != (d,):
        raise InvalidArgumentError(f"expected {d} parameters, got {w.shape}")
    if spec.kind == "linear":
        r = X @ w - np.asarray(labels, dtype=np.float64)
        return r[:, None] * X
    if spec.kind == "logistic1d":
        z = X[:, 0] + w[0]
        y = np.asarray(labels, dtype=np.float64)
        return (-y * _sigmoid(-y * z))[:, None]
    if spec.kind == "logistic":
        y = np.ascontiguousarray(labels, dtype=np.float64)
        return logistic_grads(X, y, np.ascontiguousarray(w))
    out = np.empty((X.shape[0], d))
    mats = _unpack_mlp(spec, w)
    for i in range(X.shape[0]):
        _, out[i] = _mlp_sample_grad(spec, mats, X[i], labels[i])
    return out


def _predictions(spec: ModelSpec, w: np.ndarray, data: Dataset):
    X = data.features
    if spec.kind == "logistic1d":
        return X[:, 0] + w[0]
    if spec.kind in ("linear", "logistic"):
        return X @ w
    mats = _unpack_mlp(spec, w)
    return np.stack([_mlp_forward(spec, mats, X[i])[0][-1] for i in range(data.n)])


def batch_loss_accuracy(spec: ModelSpec, w: np.ndarray, data: Dataset,
                        want_accuracy: bool = True):
    """Mean per-sample loss and (for classification kinds) accuracy."""
    if spec.kind == "linear" or (spec.kind == "mlp" and spec.loss == "mse"):
        if want_accuracy:
            raise UnsupportedMetricError("accuracy is undefined for regression")
        losses = [sample_loss(spec, w, data.features[i], data.labels[i])
                  for i in range(data.n)]
        return float(np.mean(losses)), None

    z = _predictions(spec, w, data)
    y = data.labels
    if spec.kind in ("logistic", "logistic1d"):
        loss = float(np.mean(_log1pexp(-y.astype(np.float64) * z)))
        acc = float(np.mean(np.where(z >= 0, 1.0, -1.0) == y))
    elif spec.loss == "softmax_ce":
        shifted = z - z.max(axis=1, keepdims=True)
        logz = np.log(np.sum(np.exp(shifted), axis=1))
        loss = float(np.mean(logz - shifted[np.arange(data.n), y.astype(int)]))
        acc = float(np.mean(np.argmax(z, axis=1) == y.astype(int)))
    elif spec.loss == "multilabel_bce":
        t = y.astype(np.float64)
        loss = float(np.mean(np.sum(_log1pexp(z) - t * z, axis=1)))
        acc = float(np.mean((z >= 0) == (t > 0.5)))
    else:
        raise InvalidArgumentError(f"no evaluation rule for {spec.kind}/{spec.loss}")
    return loss, (acc if want_accuracy else None)


def gen_synthetic(kind: str, seed: int, n_per_class: int,
                  dims: int = 1, means=None) -> Dataset:
    """Deterministic synthetic datasets.

    * ``logistic_lazy`` -- labels +-1, n_per_class each, x ~ N(label, 1), 1-d.
    * ``mean_est``      -- unit feature, target x ~ N(+-4, 1), half each;
                           fit with the ``linear`` kind to estimate the mean.
    * ``gauss2class``   -- dims-d Gaussians centered at +means / -means.
    """
    if n_per_class < 1:
        raise InvalidArgumentError("n_per_class must be >= 1")
    gen = RngStream(seed, f"data/{kind}").generator()
    if kind == "logistic_lazy":
        y = np.concatenate([np.ones(n_per_class), -np.ones(n_per_class)])
        x = gen.normal(y, 1.0)
        return Dataset(x[:, None], y, "logistic_lazy")
    if kind == "mean_est":
        x = np.concatenate([gen.normal(4.0, 1.0, n_per_class),
                            gen.normal(-4.0, 1.0, n_per_class)])
        return Dataset(np.ones((2 * n_per_class, 1)), x, "mean_est")
    if kind == "gauss2class":
        m = np.full(dims, 2.0 / np.sqrt(dims)) if means is None \
            else np.asarray(means, dtype=np.float64)
        if m.shape != (dims,):
            raise InvalidArgumentError("means must have length dims")
        y = np.concatenate([np.ones(n_per_class), -np.ones(n_per_class)])
        x = gen.normal(0.0, 1.0, (2 * n_per_class, dims)) + y[:, None] * m
        perm = gen.permutation(2 * n_per_class)
        return Dataset(x[perm], y[perm], "gauss2class")
    raise InvalidArgumentError(f"unknown synthetic kind {kind!r}")
