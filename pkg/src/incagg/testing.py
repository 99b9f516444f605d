"""Single and aggregated wild-bootstrap tests over a bandwidth collection.

Randomness layout for one test with seed ``s``: quantile replicates use
sign family 1, correction replicates family 2 (see
:func:`incagg.estimators.rademacher_signs`).  Within a family, replicate
``b`` uses the same sign vector for every bandwidth.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .design import Design
from .estimators import (
    HValueCache,
    PairedData,
    _quadratic_forms,
    cache_h_values,
    incomplete_statistic,
    rademacher_signs,
)
from .exceptions import ConfigError
from .kernels import KernelSpec, median_bandwidth

logger = logging.getLogger(__name__)

QUANTILE_FAMILY = 1
CORRECTION_FAMILY = 2


@dataclass(frozen=True)
class TestConfig:
    """Level and Monte Carlo sizes of an aggregated test."""

    __test__ = False  # keep pytest from collecting this class

    alpha: float = 0.05
    B1: int = 500
    B2: int = 500
    B3: int = 50

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        for name in ("B1", "B2", "B3"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v}")

    def theory_bounds_met(self, weights, beta: float = 0.05) -> bool:
        """Whether B1, B2, B3 meet the sufficient sizes of the power guarantee."""
        w = np.asarray(weights, dtype=float)
        a = self.alpha
        b1 = w.min() ** -2 * 12 / a**2 * (math.log(8 / beta) + a * (1 - a))
        b2 = 8 / a**2 * math.log(2 / beta)
        b3 = math.log2(4 / a / w.max())
        return self.B1 >= b1 and self.B2 >= b2 and self.B3 >= b3


@dataclass(frozen=True, eq=False)
class BandwidthCollection:
    """Kernels to aggregate over with their weights (sum of weights <= 1).

    Each entry of ``kernels`` is a :class:`KernelSpec`, or a pair of specs
    ``(k, l)`` for independence testing.
    """

    kernels: tuple
    weights: np.ndarray

    def __post_init__(self):
        kernels = tuple(self.kernels)
        w = np.asarray(self.weights, dtype=float)
        if not kernels:
            raise ConfigError("bandwidth collection is empty")
        if w.shape != (len(kernels),):
            raise ConfigError("one weight per kernel required")
        if np.any(w <= 0) or w.sum() > 1 + 1e-12:
            raise ConfigError(f"weights must be positive with sum <= 1, got sum {w.sum()}")
        object.__setattr__(self, "kernels", kernels)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, kernels) -> "BandwidthCollection":
        kernels = tuple(kernels)
        return cls(kernels, np.full(len(kernels), 1.0 / len(kernels)))

    def __len__(self):
        return len(self.kernels)


@dataclass
class SingleTestResult:
    statistic: float
    quantile: float
    level: float
    reject: bool


@dataclass
class BandwidthResult:
    """Diagnostics of one bandwidth inside an aggregated test."""

    kernel: dict
    weight: float
    statistic: float
    quantile: float
    level: float
    reject: bool


@dataclass
class AggTestResult:
    reject: bool
    u_alpha: float
    per_bandwidth: list[BandwidthResult]
    l_used: int
    seed: int
    problem: str = ""
    n_items: int = 0
    design: str = ""
    alpha: float = 0.05
    degenerate: bool = False
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    CSV_FIELDS = ("problem", "design", "n_items", "l_used", "alpha", "seed", "u_alpha", "reject", "n_bandwidths", "n_single_rejects")

    def csv_row(self) -> str:
        vals = {
            "problem": self.problem,
            "design": self.design,
            "n_items": self.n_items,
            "l_used": self.l_used,
            "alpha": self.alpha,
            "seed": self.seed,
            "u_alpha": repr(self.u_alpha),
            "reject": int(self.reject),
            "n_bandwidths": len(self.per_bandwidth),
            "n_single_rejects": sum(b.reject for b in self.per_bandwidth),
        }
        return ",".join(str(vals[k]) for k in self.CSV_FIELDS)


# --------------------------------------------------------------------------
# quantiles


def quantile_rank(B1: int, level: float) -> int:
    """1-based rank ``ceil(B1 * (1 - level))`` among ``B1 + 1`` sorted values."""
    # rounding guards against products like 500 * 0.95 landing just above an integer
    return max(1, math.ceil(round(B1 * (1.0 - level), 9)))


def bootstrap_quantile(statistics, level: float) -> float:
    """Monte Carlo ``(1 - level)``-quantile from ``B1`` replicates plus the original.

    ``statistics`` has length ``B1 + 1`` (the original statistic included);
    the result is its ``ceil(B1 * (1 - level))``-th smallest element.
    """
    if not 0 < level < 1:
        raise ConfigError(f"level must lie in (0, 1), got {level}")
    vals = np.sort(np.asarray(statistics, dtype=float))
    B1 = vals.size - 1
    if B1 < 1:
        raise ConfigError("need at least one bootstrap replicate")
    return float(vals[quantile_rank(B1, level) - 1])


def single_test_from_cache(cache: HValueCache, alpha: float, B1: int, seed: int) -> SingleTestResult:
    stat = incomplete_statistic(cache)
    signs = rademacher_signs(cache.n_items, B1, seed, QUANTILE_FAMILY)
    reps = _quadratic_forms(cache, signs)
    q = bootstrap_quantile(np.append(reps, stat), alpha)
    return SingleTestResult(stat, q, alpha, bool(stat > q))


def single_test(data: PairedData, design: Design, alpha: float = 0.05, B1: int = 500, seed: int = 0) -> SingleTestResult:
    """Reject iff the incomplete statistic strictly exceeds its bootstrap quantile."""
    TestConfig(alpha=alpha, B1=B1)
    return single_test_from_cache(cache_h_values(data, design), alpha, B1, seed)


# --------------------------------------------------------------------------
# level correction


def _sorted_quantile_table(originals, q_replicates) -> np.ndarray:
    originals = np.asarray(originals, dtype=float)
    q = np.asarray(q_replicates, dtype=float)
    return np.sort(np.column_stack([q, originals]), axis=1)


def exceedance_fraction(u: float, sorted_q: np.ndarray, c_replicates, weights) -> float:
    """Fraction of correction replicates exceeding some per-bandwidth threshold at level ``u * w``."""
    B1 = sorted_q.shape[1] - 1
    ranks = np.array([quantile_rank(B1, u * w) for w in weights])
    thresholds = sorted_q[np.arange(len(weights)), ranks - 1]
    c = np.asarray(c_replicates, dtype=float)
    return float(np.mean(np.max(c - thresholds[:, None], axis=0) > 0))


def compute_u_alpha(originals, q_replicates, c_replicates, weights, alpha: float, B3: int) -> float:
    """Largest ``u`` in ``(0, 1/max w)`` keeping the simulated aggregated rejection rate <= alpha.

    ``q_replicates`` has shape ``(n_bandwidths, B1)``; ``c_replicates`` has
    shape ``(n_bandwidths, B2)`` and its column ``b`` must come from one
    shared sign vector.  The supremum is approximated by ``B3`` bisection
    steps on ``[0, 1/max w]``; returns 0 if no probed ``u`` qualifies.
    """
    w = np.asarray(weights, dtype=float)
    sorted_q = _sorted_quantile_table(originals, q_replicates)
    lo, hi = 0.0, float(1.0 / w.max())
    for _ in range(B3):
        mid = 0.5 * (lo + hi)
        if exceedance_fraction(mid, sorted_q, c_replicates, w) <= alpha:
            lo = mid
        else:
            hi = mid
    return lo


# --------------------------------------------------------------------------
# aggregated test


def _kernel_dict(kernel) -> dict:
    if isinstance(kernel, KernelSpec):
        return kernel.to_dict()
    return {"k": kernel[0].to_dict(), "l": kernel[1].to_dict()}


def aggregated_test_from_caches(caches: Sequence[HValueCache], collection: BandwidthCollection,
                                config: TestConfig, seed: int, problem: str = "") -> AggTestResult:
    """Aggregated test given one h-value cache per kernel, all on the same design."""
    if len(caches) != len(collection):
        raise ConfigError("one cache per kernel in the collection is required")
    design = caches[0].design
    if any(c.design is not design for c in caches):
        raise ConfigError("all caches must share one design")
    n = design.n_items
    S1 = rademacher_signs(n, config.B1, seed, QUANTILE_FAMILY).astype(float)
    S2 = rademacher_signs(n, config.B2, seed, CORRECTION_FAMILY).astype(float)
    originals = np.array([incomplete_statistic(c) for c in caches])
    q_reps = np.array([_quadratic_forms(c, S1) for c in caches])
    c_reps = np.array([_quadratic_forms(c, S2) for c in caches])
    w = collection.weights
    u = compute_u_alpha(originals, q_reps, c_reps, w, config.alpha, config.B3)
    degenerate = u == 0.0
    if degenerate:
        logger.warning("no probed correction satisfies the level constraint; the test does not reject")
    sorted_q = _sorted_quantile_table(originals, q_reps)
    per = []
    for k, kernel in enumerate(collection.kernels):
        level = float(u * w[k])
        if degenerate:
            quant, rej = math.inf, False
        else:
            quant = float(sorted_q[k, quantile_rank(config.B1, level) - 1])
            rej = bool(originals[k] > quant)
        per.append(BandwidthResult(_kernel_dict(kernel), float(w[k]), float(originals[k]), quant, level, rej))
    return AggTestResult(
        reject=any(b.reject for b in per),
        u_alpha=u,
        per_bandwidth=per,
        l_used=design.size,
        seed=int(seed),
        problem=problem,
        n_items=n,
        design=design.describe(),
        alpha=config.alpha,
        degenerate=degenerate,
        config=asdict(config),
    )


def aggregated_test(paired: Sequence[PairedData], design: Design, collection: BandwidthCollection,
                    config: TestConfig = TestConfig(), seed: int = 0) -> AggTestResult:
    """Reject iff some kernel's statistic exceeds its quantile at level ``u_alpha * w``.

    ``paired[k]`` pairs the raw data with ``collection.kernels[k]``.
    """
    caches = [cache_h_values(p, design) for p in paired]
    problem = paired[0].problem if paired else ""
    return aggregated_test_from_caches(caches, collection, config, seed, problem)


# --------------------------------------------------------------------------
# bandwidth collections


def mmd_ksd_collection(Z, count: int = 4, family: str = "gaussian", imq_exponent: float = 0.5) -> BandwidthCollection:
    """``{2**i * median : i = -(count-1), ..., 0}`` with uniform weights."""
    Z = np.asarray(Z, dtype=float)
    Z = Z[:, None] if Z.ndim == 1 else Z
    med = median_bandwidth(Z)
    d = Z.shape[1]
    kernels = [KernelSpec.isotropic(family, 2.0**i * med, d, imq_exponent) for i in range(-(count - 1), 1)]
    return BandwidthCollection.uniform(kernels)


def hsic_collection(X, Y, exponents=(-2, -1, 0), family: str = "gaussian") -> BandwidthCollection:
    """All pairs ``(2**i * median_x, 2**j * median_y)`` with uniform weights."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    X = X[:, None] if X.ndim == 1 else X
    Y = Y[:, None] if Y.ndim == 1 else Y
    mx, my = median_bandwidth(X), median_bandwidth(Y)
    kernels = [
        (KernelSpec.isotropic(family, 2.0**i * mx, X.shape[1]), KernelSpec.isotropic(family, 2.0**j * my, Y.shape[1]))
        for i in exponents
        for j in exponents
    ]
    return BandwidthCollection.uniform(kernels)


def theoretical_levels(L: int, N: int, d: int) -> int:
    """Number of dyadic bandwidth levels ``ceil((2/d) log2((L/N) / ln ln(L/N)))``."""
    ratio = L / N
    if ratio <= math.e:
        raise ConfigError(f"theoretical collection needs L/N > e, got {ratio:.4g}")
    ell_max = math.ceil(2.0 / d * math.log2(ratio / math.log(math.log(ratio))))
    if ell_max < 1:
        raise ConfigError(f"theoretical collection is empty for L/N = {ratio:.4g}, d = {d}")
    return ell_max


def theoretical_collection(L: int, N: int, d: int, family: str = "gaussian", split: int | None = None) -> BandwidthCollection:
    """Dyadic bandwidths ``2**-l`` on every coordinate with weights ``6 / (pi**2 l**2)``.

    ``d`` is the total dimension.  With ``split = d_x`` each entry is a pair
    of specs over the first ``d_x`` and the remaining coordinates.
    """
    ell_max = theoretical_levels(L, N, d)
    ells = np.arange(1, ell_max + 1)
    if split is None:
        kernels = [KernelSpec.isotropic(family, 2.0**-ell, d) for ell in ells]
    else:
        kernels = [
            (KernelSpec.isotropic(family, 2.0**-ell, split), KernelSpec.isotropic(family, 2.0**-ell, d - split))
            for ell in ells
        ]
    return BandwidthCollection(kernels, 6.0 / (math.pi**2 * ells.astype(float) ** 2))
