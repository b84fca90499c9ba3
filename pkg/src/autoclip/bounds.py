"""Numerics for the gradient-norm convergence machinery.

The central object is the two-term descent factor

    f(c, s; G) = (1+sc)/(sqrt(s^2+2sc+1)+G) + (1-sc)/(sqrt(s^2-2sc+1)+G)

where s is a noise-to-signal ratio, c a cosine, and G a stability-to-signal
ratio. Its minimum over c drives a distance measure whose (inverse /
envelope) form yields an upper bound on the smallest expected gradient
norm after T private steps. The threshold-free automatic policy makes the
bound vanish at rate T^(-1/4); the unstabilized variant floors at the
gradient-noise level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AuditFailureError, DomainError, InvalidArgumentError

__all__ = [
    "TheoryParams", "descent_factor", "min_descent_factor",
    "min_descent_factor_numeric", "descent_distance", "descent_distance_inv",
    "distance_inv_sup", "PiecewiseLinear", "envelope",
    "grad_norm_bound", "grad_norm_bound_curve",
    "bound_input", "optimal_lr", "sgd_baseline",
    "lemma_audit", "AuditReport",
]


@dataclass(frozen=True)
class TheoryParams:
    """Constants feeding the bound functions.

    xi: per-sample gradient-noise bound; gamma: stability constant;
    lipschitz: smoothness constant; loss_gap: initial minus optimal loss;
    dim / batch / sigma / steps as in training; mu / n_data for the
    Gaussian-DP parameterization.
    """
    xi: float
    gamma: float
    lipschitz: float
    loss_gap: float
    dim: int
    batch: float
    sigma: float
    steps: float
    mu: float | None = None
    n_data: int | None = None

    def __post_init__(self):
        vals = [self.xi, self.gamma, self.lipschitz, self.loss_gap,
                self.dim, self.batch, self.sigma, self.steps]
        if not all(math.isfinite(v) for v in vals):
            raise InvalidArgumentError("all parameters must be finite")
        if self.xi < 0 or self.gamma < 0 or self.loss_gap < 0:
            raise InvalidArgumentError("xi, gamma, loss_gap must be >= 0")
        if not self.lipschitz > 0:
            raise InvalidArgumentError("smoothness constant must be > 0")


def descent_factor(c, s, gamma_ratio):
    """The two-term factor; vectorized. c in [0, 1], s > 0, gamma_ratio >= 0.

    At c=0 the two terms coincide (value 2/(sqrt(s^2+1)+G)); at c=1, s=1
    the second term has a vanishing numerator and is taken as its limit 0.
    """
    c = np.asarray(c, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    g = np.asarray(gamma_ratio, dtype=np.float64)
    if np.any(c < 0) or np.any(c > 1):
        raise InvalidArgumentError("c must lie in [0, 1]")
    if np.any(g < 0):
        raise InvalidArgumentError("gamma_ratio must be >= 0")
    plus = np.sqrt(s * s + 2 * s * c + 1.0)
    minus_sq = np.maximum(s * s - 2 * s * c + 1.0, 0.0)  # >= (s-c)^2
    minus = np.sqrt(minus_sq)
    t1 = (1.0 + s * c) / (plus + g)
    num2 = 1.0 - s * c
    den2 = minus + g
    t2 = np.where(den2 > 0, num2 / np.where(den2 > 0, den2, 1.0), 0.0)
    out = t1 + t2
    return out if out.ndim else float(out)


def min_descent_factor_numeric(ratio: float, gamma_ratio: float,
                               tol: float = 1e-10) -> float:
    """Golden-section minimum of the factor over c in (0, 1]."""
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    lo, hi = 1e-12, 1.0
    c1 = hi - phi * (hi - lo)
    c2 = lo + phi * (hi - lo)
    f1 = descent_factor(c1, ratio, gamma_ratio)
    f2 = descent_factor(c2, ratio, gamma_ratio)
    while hi - lo > tol:
        if f1 > f2:
            lo, c1, f1 = c1, c2, f2
            c2 = lo + phi * (hi - lo)
            f2 = descent_factor(c2, ratio, gamma_ratio)
        else:
            hi, c2, f2 = c2, c1, f1
            c1 = hi - phi * (hi - lo)
            f1 = descent_factor(c1, ratio, gamma_ratio)
    cm = 0.5 * (lo + hi)
    # the minimum may sit on the c=1 boundary
    return float(min(descent_factor(cm, ratio, gamma_ratio),
                     descent_factor(1.0, ratio, gamma_ratio)))


def min_descent_factor(ratio: float, gamma_ratio: float) -> float:
    """min over c in (0,1]; closed form for ratio >= 1, numeric below."""
    if ratio >= 1.0:
        if gamma_ratio == 0.0:
            return 0.0
        g = gamma_ratio
        return g / (ratio + g - 1.0) - g / (ratio + g + 1.0)
    return min_descent_factor_numeric(ratio, gamma_ratio)


def descent_distance(x, r: float, xi: float, gamma: float):
    """Distance the expected loss drop buys at gradient norm x + xi/r.

    Closed form, valid for r > 1 and gamma > 0; increasing in x with image
    [0, gamma/(r-1) - gamma/(r+1)).
    """
    if not (r > 1.0 and gamma > 0.0):
        raise InvalidArgumentError("closed form needs r > 1 and gamma > 0")
    x = np.asarray(x, dtype=np.float64)
    if np.any(x < 0):
        raise InvalidArgumentError("x must be >= 0")
    g_norm = x + xi / r
    out = (gamma / ((r - 1.0) * g_norm + gamma)
           - gamma / ((r + 1.0) * g_norm + gamma)) * x
    return out if out.ndim else float(out)


def distance_inv_sup(r: float, gamma: float) -> float:
    """Supremum of the inverse's domain (image of the distance measure)."""
    return gamma / (r - 1.0) - gamma / (r + 1.0)


def descent_distance_inv(y, r: float, xi: float, gamma: float):
    """Inverse of descent_distance on [0, distance_inv_sup(r, gamma))."""
    if not (r > 1.0 and gamma > 0.0):
        raise InvalidArgumentError("closed form needs r > 1 and gamma > 0")
    y = np.asarray(y, dtype=np.float64)
    sup = distance_inv_sup(r, gamma)
    if np.any(y < 0) or np.any(y >= sup):
        raise DomainError(f"argument must lie in [0, {sup}); got {y}")
    a = xi / r
    num = (-a * gamma + (r * r - 1.0) * a * y + r * gamma * y
           + gamma * np.sqrt(a * a + 2.0 * xi * y + 2.0 * gamma * y + y * y))
    den = 2.0 * gamma - (r * r - 1.0) * y
    out = num / den
    return out if out.ndim else float(out)


@dataclass
class PiecewiseLinear:
    """Piecewise-linear function on [xs[0], xs[-1]]."""
    xs: np.ndarray
    ys: np.ndarray

    def __call__(self, x):
        return np.interp(x, self.xs, self.ys)


def _upper_hull(xs, ys):
    hull = [0]
    for i in range(1, len(xs)):
        while len(hull) >= 2:
            i1, i2 = hull[-2], hull[-1]
            cross = ((xs[i2] - xs[i1]) * (ys[i] - ys[i1])
                     - (xs[i] - xs[i1]) * (ys[i2] - ys[i1]))
            if cross >= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return hull


def envelope(points, mode: str) -> PiecewiseLinear:
    """Convex-hull envelope of sampled (x, y) points.

    ``lower_convex`` is <= the samples everywhere, ``upper_concave`` >=.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
        raise InvalidArgumentError("need >= 2 (x, y) points")
    xs, ys = pts[:, 0], pts[:, 1]
    if np.any(np.diff(xs) <= 0):
        raise InvalidArgumentError("x values must be strictly increasing")
    if mode == "upper_concave":
        idx = _upper_hull(xs, ys)
    elif mode == "lower_convex":
        idx = _upper_hull(xs, -ys)
    else:
        raise InvalidArgumentError(f"unknown envelope mode {mode!r}")
    return PiecewiseLinear(xs[idx], ys[idx])


_R_GRID_S = np.logspace(math.log10(1.001), 6.0, 512)
_R_GRID_V = np.linspace(0.01, 0.999, 512)


def _refine_grid(grid, i, n=64):
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    if hi <= lo:
        return grid[i:i + 1]
    return np.logspace(math.log10(lo), math.log10(hi), n)


def grad_norm_bound(x: float, xi: float, gamma: float, mode: str) -> float:
    """Upper bound on the smallest expected gradient norm.

    ``x`` is the 1/sqrt(T)-scale argument; the bound is the minimum over a
    log-spaced ratio grid (with one refinement pass) of xi/ratio plus the
    mode-specific correction term.
    """
    if x < 0:
        raise InvalidArgumentError("x must be >= 0")
    if mode == "auto_s":
        if not gamma > 0:
            raise InvalidArgumentError("auto_s mode needs gamma > 0")
        coarse = np.array([_bound_auto_s_single(x, xi, gamma, r)
                           for r in _R_GRID_S])
        i = int(np.argmin(coarse))
        fine = _refine_grid(_R_GRID_S, i)
        vals = [_bound_auto_s_single(x, xi, gamma, r) for r in fine]
        return float(min(coarse[i], min(vals)))
    if mode == "auto_v":
        inv_minf = np.array([1.0 / min_descent_factor(r, 0.0)
                             for r in _R_GRID_V])
        coarse = xi / _R_GRID_V + x * inv_minf
        i = int(np.argmin(coarse))
        fine = _refine_grid(_R_GRID_V, i)
        vals = [xi / r + x / min_descent_factor(r, 0.0) for r in fine]
        return float(min(coarse[i], min(vals)))
    raise InvalidArgumentError(f"unknown mode {mode!r}")


def _bound_auto_s_single(x: float, xi: float, gamma: float, r: float) -> float:
    if x == 0.0:
        return xi / r
    sup = distance_inv_sup(r, gamma)
    if x >= 0.999 * sup:
        return math.inf
    return xi / r + descent_distance_inv(x, r, xi, gamma)


def grad_norm_bound_curve(xs, xi: float, gamma: float, mode: str) -> np.ndarray:
    """grad_norm_bound over an array of x values, sharing grid setup."""
    xs = np.asarray(xs, dtype=np.float64)
    if mode == "auto_v":
        inv_minf = np.array([1.0 / min_descent_factor(r, 0.0)
                             for r in _R_GRID_V])
        out = np.empty(xs.shape)
        for k, x in enumerate(xs):
            coarse = xi / _R_GRID_V + x * inv_minf
            i = int(np.argmin(coarse))
            fine = _refine_grid(_R_GRID_V, i)
            out[k] = min(float(coarse[i]),
                         min(xi / r + x / min_descent_factor(r, 0.0)
                             for r in fine))
        return out
    return np.array([grad_norm_bound(float(x), xi, gamma, mode) for x in xs])


def bound_input(params: TheoryParams, mode: str = "direct") -> float:
    """The 1/sqrt(T)-scale argument fed to grad_norm_bound.

    ``direct`` uses the known noise multiplier; ``gdp`` derives it from the
    Gaussian-DP parameter via sigma^2 = 1/log(1 + mu^2 n^2 / (B^2 T)).
    """
    p = params
    if mode == "direct":
        inflate = 1.0 + p.sigma ** 2 * p.dim / p.batch ** 2
        return 4.0 / math.sqrt(p.steps) * math.sqrt(
            p.loss_gap * p.lipschitz * inflate)
    if mode == "gdp":
        if p.mu is None or not p.mu > 0 or p.n_data is None:
            raise InvalidArgumentError("gdp mode needs mu > 0 and n_data")
        sigma_sq = 1.0 / math.log1p(
            p.mu ** 2 * p.n_data ** 2 / (p.batch ** 2 * p.steps))
        inflate = 1.0 + sigma_sq * p.dim / p.batch ** 2
        return 4.0 * math.sqrt(p.loss_gap * p.lipschitz * inflate / p.steps)
    raise InvalidArgumentError(f"unknown mode {mode!r}")


def optimal_lr(params: TheoryParams, mode: str = "direct") -> float:
    """Base learning rate minimizing the descent hyperbola."""
    p = params
    if mode == "direct":
        inflate = 1.0 + p.sigma ** 2 * p.dim / p.batch ** 2
        return math.sqrt(p.loss_gap / (p.lipschitz * inflate))
    if mode == "gdp":
        if p.mu is None or not p.mu > 0 or p.n_data is None:
            raise InvalidArgumentError("gdp mode needs mu > 0 and n_data")
        mn2 = p.mu ** 2 * p.n_data ** 2
        return math.sqrt(p.loss_gap * mn2
                         / (p.lipschitz * (mn2 + p.dim * p.steps)))
    raise InvalidArgumentError(f"unknown mode {mode!r}")


def hyperbola(eta0: float, params: TheoryParams) -> float:
    """2*loss_gap/eta0 + 2*L*eta0*(1 + sigma^2 d / B^2); minimized at optimal_lr."""
    p = params
    inflate = 1.0 + p.sigma ** 2 * p.dim / p.batch ** 2
    return 2.0 * p.loss_gap / eta0 + 2.0 * p.lipschitz * eta0 * inflate


def sgd_baseline(steps: float, loss_gap: float, lipschitz: float,
                 xi: float, batch: float) -> float:
    """Non-private SGD bound: T^(-1/4) * sqrt(2*loss_gap*L + xi^2/B)."""
    if batch < 1:
        raise InvalidArgumentError("batch must be >= 1")
    if steps <= 0 or loss_gap < 0 or lipschitz < 0 or xi < 0:
        raise InvalidArgumentError("arguments must be nonnegative, steps > 0")
    return steps ** -0.25 * math.sqrt(
        2.0 * loss_gap * lipschitz + xi ** 2 / batch)


# -- grid audit of the monotonicity inequalities ----------------------------

def _quad_a(c, s):
    plus = np.sqrt(s * s + 2 * c * s + 1.0)
    minus = np.sqrt(s * s - 2 * c * s + 1.0)
    return (plus * (3 * c ** 2 * s - 2 * c * (s ** 2 + 1) + s)
            + minus * (3 * c ** 2 * s + 2 * c * (s ** 2 + 1) + s))


def _quad_a_prime(c, s):
    plus = np.sqrt(s * s + 2 * c * s + 1.0)
    minus = np.sqrt(s * s - 2 * c * s + 1.0)
    return (s * s + 3 * c * s + 2.0) * minus - (s * s - 3 * c * s + 2.0) * plus


@dataclass
class AuditReport:
    checked: int
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def lemma_audit(n_c: int = 100, n_s: int = 100, n_gamma: int = 10,
                fd_step: float = 1e-6) -> AuditReport:
    """Grid check of the proven inequalities behind the distance measure.

    On c in (0,1), s in (0,10], gamma_ratio in [0,5]: the quadratic
    coefficients A and A' are positive (A' for s > 1), and finite
    differences confirm the factor decreases in s everywhere and in c for
    s > 1. Raises AuditFailureError listing offending points if any check
    fails.
    """
    if n_c < 2 or n_s < 2:
        raise InvalidArgumentError("grid resolution too small")
    cs = np.linspace(0.0, 1.0, n_c + 2)[1:-1]
    ss = np.linspace(10.0 / n_s, 10.0, n_s)
    gs = np.linspace(0.0, 5.0, n_gamma)
    report = AuditReport(checked=0)

    c2, s2 = np.meshgrid(cs, ss, indexing="ij")
    a_vals = _quad_a(c2, s2)
    bad = ~(a_vals > 0)
    for i, j in zip(*np.nonzero(bad)):
        report.violations.append(("A", float(c2[i, j]), float(s2[i, j])))
    mask_s1 = s2 > 1.0
    ap_vals = _quad_a_prime(c2, s2)
    bad = mask_s1 & ~(ap_vals > 0)
    for i, j in zip(*np.nonzero(bad)):
        report.violations.append(("A'", float(c2[i, j]), float(s2[i, j])))
    report.checked += 2 * c2.size

    c3 = c2[:, :, None]
    s3 = s2[:, :, None]
    g3 = gs[None, None, :]
    h_s = fd_step * np.maximum(s3, 1.0)
    df_ds = (descent_factor(c3, s3 + h_s, g3)
             - descent_factor(c3, s3 - h_s, g3)) / (2.0 * h_s)
    bad = ~(df_ds < 0)
    for i, j, k in zip(*np.nonzero(bad)):
        report.violations.append(
            ("df/ds", float(cs[i]), float(ss[j]), float(gs[k])))
    h_c = np.minimum(fd_step, np.minimum(c3, 1.0 - c3) / 2.0)
    df_dc = (descent_factor(c3 + h_c, s3, g3)
             - descent_factor(c3 - h_c, s3, g3)) / (2.0 * h_c)
    bad = (s3 > 1.0) & ~(df_dc < 0)
    for i, j, k in zip(*np.nonzero(bad)):
        report.violations.append(
            ("df/dc", float(cs[i]), float(ss[j]), float(gs[k])))
    report.checked += 2 * c3.size * len(gs)

    if report.violations:
        raise AuditFailureError(
            f"{len(report.violations)} violations: {report.violations[:10]}"
        )
    return report
