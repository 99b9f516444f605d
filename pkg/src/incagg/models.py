"""Synthetic data models: perturbed uniform densities and the Gaussian-Bernoulli RBM."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, InputError
from .kernels import ScoreModel, gaussian_score_model

# --------------------------------------------------------------------------
# perturbed uniform densities on [0, 1]^d


def _smooth_bump(s):
    """``exp(-1 / (1 - s^2))`` on (-1, 1), zero elsewhere; peak value 1/e at 0."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


def cell_profile(t):
    """Mean-zero C-infinity profile on [0, 1], supported in (0, 1), ranging over [-1, 1].

    A positive bump on (0, 1/2) followed by its negative mirror on (1/2, 1).
    """
    t = np.asarray(t, dtype=float)
    return math.e * (_smooth_bump(4.0 * t - 1.0) - _smooth_bump(4.0 * t - 3.0))


@dataclass(frozen=True, eq=False)
class PerturbedUniformSpec:
    """Uniform density on ``[0, 1]^d`` plus ``P^d`` signed product bumps.

    The density is ``1 + (1/S) * sign(cell) * prod_i profile(P u_i - cell_i)``
    and takes values in ``[1 - 1/S, 1 + 1/S]``.  Because every factor
    integrates to zero along its axis, all lower-dimensional marginals are
    uniform.  ``S = inf`` gives the plain uniform density.
    """

    d: int
    P: int
    S: float
    signs: np.ndarray

    def __post_init__(self):
        if self.d < 1 or self.P < 1:
            raise ConfigError("d and P must be positive integers")
        if not self.S >= 1:
            raise ConfigError(f"S must be >= 1, got {self.S}")
        signs = np.asarray(self.signs, dtype=float).ravel()
        if signs.size != self.P**self.d or not np.all(np.abs(signs) == 1):
            raise ConfigError(f"need {self.P ** self.d} signs in {{-1, +1}}")
        object.__setattr__(self, "signs", signs)

    @classmethod
    def random_signs(cls, d: int, P: int, S: float, seed=None) -> "PerturbedUniformSpec":
        rng = np.random.default_rng(seed)
        return cls(d, P, S, rng.choice([-1.0, 1.0], size=P**d))

    @classmethod
    def uniform(cls, d: int) -> "PerturbedUniformSpec":
        return cls(d, 1, math.inf, np.ones(1))

    @property
    def amplitude(self) -> float:
        return 0.0 if math.isinf(self.S) else 1.0 / self.S


def perturbed_uniform_density(spec: PerturbedUniformSpec, u) -> np.ndarray | float:
    """Density at one point (returns float) or at the rows of an (n, d) array."""
    U = np.asarray(u, dtype=float)
    single = U.ndim <= 1
    U = U.reshape(1, -1) if single else U
    if U.shape[1] != spec.d:
        raise InputError(f"points must have dimension {spec.d}")
    if np.any(U < 0) or np.any(U > 1):
        raise InputError("points must lie in the unit cube")
    out = np.ones(len(U))
    if spec.amplitude:
        scaled = U * spec.P
        cells = np.minimum(np.floor(scaled).astype(int), spec.P - 1)
        local = scaled - cells
        flat = np.ravel_multi_index(cells.T, (spec.P,) * spec.d) if spec.d > 1 else cells[:, 0]
        out += spec.amplitude * spec.signs[flat] * np.prod(cell_profile(local), axis=1)
    return float(out[0]) if single else out


def sample_perturbed_uniform(spec: PerturbedUniformSpec, n: int, rng) -> np.ndarray:
    """``n`` i.i.d. draws by rejection from the uniform proposal."""
    rng = np.random.default_rng(rng)
    bound = 1.0 + spec.amplitude
    out = np.empty((0, spec.d))
    while len(out) < n:
        m = int(1.2 * (n - len(out)) * bound) + 16
        prop = rng.random((m, spec.d))
        keep = rng.random(m) * bound <= perturbed_uniform_density(spec, prop)
        out = np.vstack([out, prop[keep]])
    return out[:n]


def sample_independence_pair(spec: PerturbedUniformSpec, d_x: int, d_y: int, n: int, rng) -> np.ndarray:
    """Joint draws on ``[0, 1]^(d_x + d_y)``; columns ``[:d_x]`` are X, the rest Y."""
    if spec.d != d_x + d_y:
        raise ConfigError(f"spec dimension {spec.d} must equal d_x + d_y = {d_x + d_y}")
    return sample_perturbed_uniform(spec, n, rng)


# --------------------------------------------------------------------------
# Gaussian-Bernoulli restricted Boltzmann machine, hidden units in {-1, +1}


def _log_2cosh(a):
    return np.logaddexp(a, -a)


@dataclass(frozen=True, eq=False)
class GBRBMSpec:
    """GBRBM with joint density ``exp(x^T B h + b^T x + c^T h - |x|^2 / 2)``."""

    b: np.ndarray
    c: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.b, dtype=float).ravel()
        c = np.asarray(self.c, dtype=float).ravel()
        B = np.asarray(self.B, dtype=float)
        if B.shape != (b.size, c.size):
            raise ConfigError(f"B must have shape ({b.size}, {c.size}), got {B.shape}")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "B", B)

    @property
    def d_x(self) -> int:
        return self.b.size

    @property
    def d_h(self) -> int:
        return self.c.size

    @classmethod
    def random(cls, d_x: int, d_h: int, seed=None) -> "GBRBMSpec":
        """``b, c ~ N(0, I)`` and ``B`` with i.i.d. uniform {-1, +1} entries."""
        rng = np.random.default_rng(seed)
        b = rng.standard_normal(d_x)
        c = rng.standard_normal(d_h)
        B = rng.choice([-1.0, 1.0], size=(d_x, d_h))
        return cls(b, c, B)

    def perturbed(self, sigma: float, seed=None) -> "GBRBMSpec":
        """Same model with ``N(0, sigma^2)`` noise added to every entry of ``B``."""
        if sigma < 0:
            raise ConfigError("sigma must be >= 0")
        rng = np.random.default_rng(seed)
        return GBRBMSpec(self.b, self.c, self.B + sigma * rng.standard_normal(self.B.shape))

    def to_json(self) -> str:
        return json.dumps({"b": self.b.tolist(), "c": self.c.tolist(), "B": self.B.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "GBRBMSpec":
        obj = json.loads(text)
        return cls(obj["b"], obj["c"], obj["B"])

    def score_model(self) -> ScoreModel:
        return ScoreModel(self.d_x, lambda X: gbrbm_score(self, X), name="gbrbm")


def _check_x(spec: GBRBMSpec, x):
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != spec.d_x:
        raise InputError(f"points must have dimension {spec.d_x}, got {X.shape[1]}")
    return X, single


def gbrbm_log_density_unnormalized(spec: GBRBMSpec, x):
    """``b^T x - |x|^2/2 + sum_j log(2 cosh((B^T x + c)_j))``."""
    X, single = _check_x(spec, x)
    out = X @ spec.b - 0.5 * np.sum(X * X, axis=1) + _log_2cosh(X @ spec.B + spec.c).sum(axis=1)
    return float(out[0]) if single else out


def gbrbm_score(spec: GBRBMSpec, x):
    """``b - x + B tanh(B^T x + c)``."""
    X, single = _check_x(spec, x)
    out = spec.b - X + np.tanh(X @ spec.B + spec.c) @ spec.B.T
    return out[0] if single else out


def gbrbm_sample(spec: GBRBMSpec, n: int, rng, burn_in: int = 200, thinning: int = 10) -> np.ndarray:
    """Block-Gibbs chain; keeps every ``thinning``-th state after ``burn_in`` sweeps.

    ``h_j | x`` is +1 with probability ``logistic(2 (B^T x + c)_j)`` and
    ``x | h ~ N(B h + b, I)``.
    """
    if burn_in < 1 or thinning < 1:
        raise ConfigError("burn_in and thinning must be positive")
    rng = np.random.default_rng(rng)
    steps = burn_in + n * thinning
    unif = rng.random((steps, spec.d_h))
    noise = rng.standard_normal((steps, spec.d_x))
    x = spec.b + rng.standard_normal(spec.d_x)
    out = np.empty((n, spec.d_x))
    k = 0
    for t in range(steps):
        a = x @ spec.B + spec.c
        h = np.where(unif[t] < 0.5 * (1.0 + np.tanh(a)), 1.0, -1.0)  # logistic(2a)
        x = spec.B @ h + spec.b + noise[t]
        if t >= burn_in and (t - burn_in) % thinning == thinning - 1:
            out[k] = x
            k += 1
    return out


def builtin_score_model(name: str, params: dict | None = None) -> ScoreModel:
    """Score model by name: ``"gaussian"`` (params: ``d`` or ``mean``) or ``"gbrbm"`` (``b``, ``c``, ``B``)."""
    params = params or {}
    if name == "gaussian":
        if "mean" in params:
            mean = np.asarray(params["mean"], dtype=float)
            return gaussian_score_model(mean.size, mean)
        if "d" not in params:
            raise ConfigError("gaussian score model needs 'd' or 'mean'")
        return gaussian_score_model(int(params["d"]))
    if name == "gbrbm":
        try:
            return GBRBMSpec(params["b"], params["c"], params["B"]).score_model()
        except KeyError as exc:
            raise ConfigError(f"gbrbm score model needs parameter {exc}") from None
    raise ConfigError(f"unknown score model {name!r}; expected 'gaussian' or 'gbrbm'")
