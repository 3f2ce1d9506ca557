"""Gradient oracles, variance-reduced gradient estimates and the perturbed
local quadratic model used by the escape step.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._rng import stream
from .linalg import coordinate_median

Array = np.ndarray
DEFAULT_XI = 1e-8
DEFAULT_FAIL_PROB = 0.01
MEDIAN_GROUP_CONSTANT = 1.0


@dataclass(eq=False)
class OracleBundle:
    """Access to an objective through its value and (stochastic) gradient.

    Parameters
    ----------
    value : callable
        Exact objective value ``f(x)``.
    gradient : callable
        Exact gradient ``grad f(x)``. Stochastic samples are this plus noise.
    L, rho : float
        Lipschitz constants of the gradient and of the Hessian.
    sigma : float
        Bound on ``E ||g(x) - grad f(x)||^2 ** 0.5`` for one sample.
    sampler : callable, optional
        ``sampler(x, rng)`` returning one stochastic gradient sample. When
        omitted and ``sigma > 0``, samples are ``gradient(x)`` plus isotropic
        Gaussian noise of total variance ``sigma**2``.
    """

    value: Callable[[Array], float]
    gradient: Callable[[Array], Array]
    L: float
    rho: float
    sigma: float = 0.0
    sampler: Optional[Callable[[Array, np.random.Generator], Array]] = None
    grad_calls: int = field(default=0, init=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False)

    def __post_init__(self):
        if not (self.L > 0 and self.rho > 0):
            raise ValueError("L and rho must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")

    def stochastic_gradient(self, x, rng: Optional[np.random.Generator] = None) -> Array:
        """One gradient sample at ``x``; counts as one oracle call."""
        with self._lock:
            self.grad_calls += 1
        x = np.asarray(x, dtype=float)
        if self.sampler is not None:
            return np.asarray(self.sampler(x, rng), dtype=float)
        g = np.asarray(self.gradient(x), dtype=float)
        if self.sigma > 0:
            if rng is None:
                raise ValueError("a noisy oracle needs a random generator")
            g = g + (self.sigma / math.sqrt(g.shape[0])) * rng.standard_normal(g.shape[0])
        return g

    def radius(self, delta: float) -> float:
        """Trust radius ``(delta / rho) ** (1/3)``."""
        return float(np.cbrt(delta / self.rho))


def median_groups(d: int, fail_prob: float, c: float = MEDIAN_GROUP_CONSTANT) -> int:
    """Number of groups ``ceil(c log(d / fail_prob))`` for the median trick."""
    return max(1, math.ceil(c * math.log(d / fail_prob)))


def group_size(sigma: float, sigma_tilde: float) -> int:
    """Samples per group ``ceil(2 sigma^2 / sigma_tilde^2)``."""
    return max(1, math.ceil(2.0 * sigma * sigma / (sigma_tilde * sigma_tilde)))


def vrsg(bundle: OracleBundle, x, sigma_tilde: float, fail_prob: float = DEFAULT_FAIL_PROB,
         rng_seed=0) -> Array:
    """Variance-reduced gradient estimate with error below ``sigma_tilde``
    with probability at least ``1 - fail_prob``.

    With an exact oracle this is a single call. Otherwise the coordinate-wise
    median of ``median_groups`` group means, each over ``group_size``
    samples, is returned.
    """
    if not sigma_tilde > 0:
        raise ValueError("sigma_tilde must be positive")
    x = np.asarray(x, dtype=float)
    if bundle.sigma == 0:
        return bundle.stochastic_gradient(x)
    rng = stream(rng_seed, "vrsg")
    K = group_size(bundle.sigma, sigma_tilde)
    n_groups = median_groups(x.shape[0], fail_prob)
    means = []
    for _ in range(n_groups):
        acc = np.zeros(x.shape[0])
        for _ in range(K):
            acc += bundle.stochastic_gradient(x, rng)
        means.append(acc / K)
    return coordinate_median(means)


def _hessian_and_gradient(bundle, x, theta, sigma_tilde, fail_prob, rng_seed):
    d = x.shape[0]
    g0 = vrsg(bundle, x, sigma_tilde, fail_prob, (rng_seed, "hessian", 0))
    H = np.empty((d, d))
    for i in range(d):
        xi = x.copy()
        xi[i] += theta
        gi = vrsg(bundle, xi, sigma_tilde, fail_prob, (rng_seed, "hessian", i + 1))
        H[:, i] = (gi - g0) / theta
    return 0.5 * (H + H.T), g0


def estimate_hessian(bundle: OracleBundle, x, theta: float, sigma_tilde: float,
                     fail_prob: float = DEFAULT_FAIL_PROB, rng_seed=0) -> Array:
    """Symmetrized forward-difference Hessian from ``d + 1`` gradient estimates."""
    if not theta > 0:
        raise ValueError("theta must be positive")
    return _hessian_and_gradient(bundle, np.asarray(x, dtype=float), theta, sigma_tilde,
                                 fail_prob, rng_seed)[0]


@dataclass(frozen=True, eq=False)
class QuadraticModel:
    """Local model ``f(base) + h.v + h.M h / 2`` valid on ``B(base, r)``."""

    base: Array
    base_value: float
    v: Array
    M: Array
    delta: float
    r: float
    xi: float

    def __call__(self, h) -> float:
        h = np.asarray(h, dtype=float)
        return float(self.base_value + h @ self.v + 0.5 * h @ (self.M @ h))

    def value_at(self, x) -> float:
        """Model value at the ambient point ``x``."""
        return self(np.asarray(x, dtype=float) - self.base)


def build_model(bundle: OracleBundle, x, delta: float, xi: float = DEFAULT_XI, rng_seed=0,
                fail_prob: float = DEFAULT_FAIL_PROB) -> QuadraticModel:
    """Perturbed quadratic model of ``f`` around ``x``.

    The Hessian comes from forward differences with step ``r / (4 sqrt d)``
    of gradient estimates accurate to ``rho r^2 / (16 d)``. The gradient
    estimate at ``x`` from that computation is reused for the linear term; it
    is more accurate than the ``delta / (12 r)`` the model needs. A Gaussian
    perturbation of per-coordinate scale ``xi delta / (r sqrt d)`` is added to
    the linear term and a uniform shift in ``[-xi, xi]`` to the diagonal.
    """
    if not (delta > 0 and xi > 0):
        raise ValueError("delta and xi must be positive")
    x = np.asarray(x, dtype=float)
    d = x.shape[0]
    r = bundle.radius(delta)
    theta = r / (4.0 * math.sqrt(d))
    sigma_h = bundle.rho * r * r / (16.0 * d)
    H, g = _hessian_and_gradient(bundle, x, theta, sigma_h, fail_prob, rng_seed)
    zeta = stream(rng_seed, "zeta").standard_normal(d) * (xi * delta / (r * math.sqrt(d)))
    gamma = stream(rng_seed, "gamma").uniform(-xi, xi)
    M = H + gamma * np.eye(d)
    M = 0.5 * (M + M.T)
    return QuadraticModel(base=x.copy(), base_value=float(bundle.value(x)), v=g + zeta, M=M,
                          delta=float(delta), r=float(r), xi=float(xi))
