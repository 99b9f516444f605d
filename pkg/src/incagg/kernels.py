"""Base kernels, their derivatives, and the second-order U-statistic kernels.

Both base kernels are radial in the scaled squared distance

    s(x, y) = sum_i (x_i - y_i)**2 / lambda_i**2

with profile ``g(s) = exp(-s)`` (Gaussian) or ``g(s) = (1 + s)**(-beta)``
(IMQ).  All derivatives needed by the Stein kernel follow from ``g``, ``g'``
and ``g''`` by the chain rule, so both families share one code path.

Scalar functions (``eval_kernel``, ``h_mmd``, ``h_hsic``, ``h_ksd``) take
single points.  The ``*_rows`` variants take row-aligned arrays and return
one value per row; the estimators use those.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.spatial.distance import pdist

from .exceptions import ConfigError, DegenerateDataError, InputError

FAMILIES = ("gaussian", "imq")


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """Kernel family plus one bandwidth per input dimension.

    Parameters
    ----------
    family : {"gaussian", "imq"}
    bandwidths : array_like of shape (d,)
        Strictly positive per-dimension bandwidths.
    imq_exponent : float
        Exponent ``beta`` of the IMQ kernel, in (0, 1).  Ignored for Gaussian.
    """

    family: str
    bandwidths: np.ndarray
    imq_exponent: float = 0.5

    def __post_init__(self):
        family = str(self.family).lower()
        if family not in FAMILIES:
            raise ConfigError(f"unknown kernel family {self.family!r}; expected one of {FAMILIES}")
        bw = np.atleast_1d(np.asarray(self.bandwidths, dtype=float))
        if bw.ndim != 1 or bw.size == 0:
            raise ConfigError("bandwidths must be a non-empty 1-d vector")
        if not np.all(np.isfinite(bw)) or np.any(bw <= 0):
            raise ConfigError(f"bandwidths must be finite and strictly positive, got {bw}")
        if family == "imq" and not 0 < self.imq_exponent < 1:
            raise ConfigError(f"imq_exponent must lie in (0, 1), got {self.imq_exponent}")
        bw.setflags(write=False)
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "bandwidths", bw)

    @classmethod
    def isotropic(cls, family: str, bandwidth: float, d: int, imq_exponent: float = 0.5) -> "KernelSpec":
        """Same scalar bandwidth replicated over ``d`` dimensions."""
        return cls(family, np.full(int(d), float(bandwidth)), imq_exponent)

    @property
    def dim(self) -> int:
        return self.bandwidths.size

    def scaled(self, factor: float) -> "KernelSpec":
        return KernelSpec(self.family, self.bandwidths * factor, self.imq_exponent)

    def to_dict(self) -> dict:
        out = {"family": self.family, "bandwidths": self.bandwidths.tolist()}
        if self.family == "imq":
            out["imq_exponent"] = self.imq_exponent
        return out

    def __repr__(self):
        bw = self.bandwidths
        shown = f"{bw[0]:.6g}x{bw.size}" if np.all(bw == bw[0]) else np.array2string(bw, precision=4)
        return f"KernelSpec({self.family}, {shown})"


@dataclass(frozen=True)
class ScoreModel:
    """Model density known through its score ``x -> grad log p(x)``.

    ``score`` must accept an array of shape (n, d) and return shape (n, d).
    """

    dimension: int
    score: Callable[[np.ndarray], np.ndarray]
    name: str = "custom"

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X2 = np.atleast_2d(X)
        if X2.shape[1] != self.dimension:
            raise InputError(f"score model has dimension {self.dimension}, got points of dimension {X2.shape[1]}")
        out = np.asarray(self.score(X2), dtype=float)
        if out.shape != X2.shape:
            raise InputError(f"score returned shape {out.shape}, expected {X2.shape}")
        return out[0] if single else out


def gaussian_score_model(d: int, mean=None) -> ScoreModel:
    """Score of N(mean, I_d): ``mean - x``."""
    mu = np.zeros(d) if mean is None else np.asarray(mean, dtype=float)
    return ScoreModel(d, lambda X: mu - X, name="gaussian")


# --------------------------------------------------------------------------
# radial profile and its derivatives


def _profile(spec: KernelSpec, s):
    """Return ``g(s), g'(s), g''(s)`` for the kernel family."""
    if spec.family == "gaussian":
        g = np.exp(-s)
        return g, -g, g
    beta = spec.imq_exponent
    u = 1.0 + s
    g = u**-beta
    return g, -beta * g / u, beta * (beta + 1) * g / (u * u)


def _check_dims(spec: KernelSpec, *arrays):
    for a in arrays:
        if a.shape[-1] != spec.dim:
            raise InputError(f"point dimension {a.shape[-1]} does not match kernel dimension {spec.dim}")


def scaled_sqdist_rows(spec: KernelSpec, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Row-wise ``sum_i (a_i - b_i)**2 / lambda_i**2``."""
    inv = 1.0 / spec.bandwidths**2
    diff = A - B
    return (diff * diff) @ inv


def kernel_rows(spec: KernelSpec, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Row-wise kernel values ``k(A[t], B[t])``."""
    s = scaled_sqdist_rows(spec, A, B)
    if spec.family == "gaussian":
        return np.exp(-s)
    return (1.0 + s) ** -spec.imq_exponent


def eval_kernel(spec: KernelSpec, x, y) -> float:
    """Evaluate the base kernel at two points.

    Gaussian: ``exp(-s)``; IMQ: ``(1 + s)**(-beta)``, with ``s`` the scaled
    squared distance.  Values lie in (0, 1] and equal 1 iff ``x == y``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    _check_dims(spec, x, y)
    return float(kernel_rows(spec, x[None, :], y[None, :])[0])


def kernel_gradients(spec: KernelSpec, x, y):
    """Analytic ``(grad_x k, grad_y k, sum_i d2k/dx_i dy_i)`` at one pair."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    _check_dims(spec, x, y)
    inv = 1.0 / spec.bandwidths**2
    r = x - y
    s = float(r * r @ inv)
    _, g1, g2 = _profile(spec, s)
    ds = 2.0 * r * inv  # ds/dx; ds/dy = -ds/dx
    grad_x = g1 * ds
    trace = float(-g2 * (ds @ ds) - 2.0 * g1 * inv.sum())
    return grad_x, -grad_x, trace


def h_mmd(spec: KernelSpec, x1, x2, y1, y2) -> float:
    """``k(x1,x2) - k(x1,y2) - k(x2,y1) + k(y1,y2)``."""
    return (
        eval_kernel(spec, x1, x2)
        - eval_kernel(spec, x1, y2)
        - eval_kernel(spec, x2, y1)
        + eval_kernel(spec, y1, y2)
    )


def h_mmd_rows(spec: KernelSpec, X1, X2, Y1, Y2) -> np.ndarray:
    return kernel_rows(spec, X1, X2) - kernel_rows(spec, X1, Y2) - kernel_rows(spec, X2, Y1) + kernel_rows(spec, Y1, Y2)


def h_hsic(kspec: KernelSpec, lspec: KernelSpec, z1, z2, z3, z4) -> float:
    """Fourth-order HSIC kernel at four (x, y) pairs.

    Each ``z`` is a tuple ``(x, y)``; the value is a quarter of the product
    of the MMD kernels on the x-parts and on the y-parts.
    """
    xs = [np.atleast_1d(np.asarray(z[0], dtype=float)) for z in (z1, z2, z3, z4)]
    ys = [np.atleast_1d(np.asarray(z[1], dtype=float)) for z in (z1, z2, z3, z4)]
    return 0.25 * h_mmd(kspec, *xs) * h_mmd(lspec, *ys)


def h_hsic_rows(kspec, lspec, X1, X2, X3, X4, Y1, Y2, Y3, Y4) -> np.ndarray:
    return 0.25 * h_mmd_rows(kspec, X1, X2, X3, X4) * h_mmd_rows(lspec, Y1, Y2, Y3, Y4)


def stein_kernel_rows(spec: KernelSpec, X, Y, SX, SY) -> np.ndarray:
    """Row-wise Stein kernel given points and their precomputed scores."""
    inv = 1.0 / spec.bandwidths**2
    R = X - Y
    s = (R * R) @ inv
    g, g1, g2 = _profile(spec, s)
    # grad_x k = g' * 2 r / lambda^2,  grad_y k = -grad_x k
    RS = R * inv
    cross_y = 2.0 * np.einsum("td,td->t", SY, RS)
    cross_x = 2.0 * np.einsum("td,td->t", SX, RS)
    trace = -4.0 * g2 * ((RS * RS).sum(axis=1)) - 2.0 * g1 * inv.sum()
    return g * np.einsum("td,td->t", SX, SY) + g1 * (cross_y - cross_x) + trace


def h_ksd(spec: KernelSpec, model: ScoreModel, x, y) -> float:
    """Stein kernel ``h(x, y)`` for model score ``model`` and base kernel ``spec``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    _check_dims(spec, x, y)
    sx = model(x)
    sy = model(y)
    return float(stein_kernel_rows(spec, x[None], y[None], sx[None], sy[None])[0])


def median_bandwidth(points) -> float:
    """Median Euclidean distance over all unordered pairs of distinct indices.

    Raises
    ------
    InputError
        Fewer than two points.
    DegenerateDataError
        The median distance is zero (heavily duplicated data).
    """
    Z = np.asarray(points, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    if Z.ndim != 2 or Z.shape[0] < 2:
        raise InputError("median bandwidth needs at least 2 points")
    med = float(np.median(pdist(Z)))
    if med <= 0:
        raise DegenerateDataError("median pairwise distance is zero; data are degenerate")
    return med
