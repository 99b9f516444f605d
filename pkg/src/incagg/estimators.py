"""Pairing of raw samples, incomplete/complete U-statistics, wild bootstrap.

Every problem is reduced to the same second-order form: ``n_items`` items
and a symmetric function ``h(i, j)`` on index pairs.  A design picks which
pairs are evaluated; the h values are cached once and reused by all
bootstrap replicates.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .design import Design
from .exceptions import InputError
from .kernels import (
    KernelSpec,
    ScoreModel,
    h_hsic_rows,
    h_mmd_rows,
    kernel_rows,
    stein_kernel_rows,
)

logger = logging.getLogger(__name__)

PROBLEMS = ("two_sample", "independence", "goodness_of_fit")

# pairs evaluated per vectorised chunk; bounds temporary memory to a few MB per column
_CHUNK = 1 << 16
_GEMM_BLOCK = 64


def as_matrix(a, name="data") -> np.ndarray:
    """Coerce to a finite 2-d float array (1-d input becomes one column)."""
    try:
        arr = np.asarray(a, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{name} is not numeric: {exc}") from None
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise InputError(f"{name} must be 2-d, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains NaN or infinite values")
    return arr


@dataclass(frozen=True, eq=False)
class PairedData:
    """Raw samples arranged so that pair ``(i, j)`` maps to one h value.

    ``evaluate(rows, cols)`` is vectorised over index arrays;
    ``item_eval(i, j)`` is the scalar convenience form.
    """

    problem: str
    n_items: int
    evaluate: Callable[[np.ndarray, np.ndarray], np.ndarray]

    def item_eval(self, i: int, j: int) -> float:
        return float(self.evaluate(np.array([i]), np.array([j]))[0])


def pair_two_sample(X, Y, spec: KernelSpec) -> PairedData:
    """Pair ``X_i`` with ``Y_i``; ``h(i, j) = h_mmd(X_i, X_j; Y_i, Y_j)``.

    The larger sample is truncated to ``min(m, n)`` rows.
    """
    X = as_matrix(X, "X")
    Y = as_matrix(Y, "Y")
    if X.shape[1] != Y.shape[1]:
        raise InputError(f"X and Y dimensions differ: {X.shape[1]} vs {Y.shape[1]}")
    if min(len(X), len(Y)) < 2:
        raise InputError("two-sample pairing needs at least 2 samples on each side")
    if X.shape[1] != spec.dim:
        raise InputError(f"kernel dimension {spec.dim} does not match data dimension {X.shape[1]}")
    n = min(len(X), len(Y))
    X, Y = X[:n], Y[:n]

    def evaluate(rows, cols):
        return h_mmd_rows(spec, X[rows], X[cols], Y[rows], Y[cols])

    return PairedData("two_sample", n, evaluate)


def pair_independence(Z, d_x: int, kspec: KernelSpec, lspec: KernelSpec) -> PairedData:
    """Pair ``Z_i`` with ``Z_{i + N//2}``; ``h(i, j) = h_hsic(Z_i, Z_j, Z_{i+N//2}, Z_{j+N//2})``.

    ``Z`` holds the x-part in its first ``d_x`` columns.  With odd ``N`` the
    last sample is unused.
    """
    Z = as_matrix(Z, "Z")
    if len(Z) < 4:
        raise InputError("independence pairing needs at least 4 samples")
    if not 0 < d_x < Z.shape[1]:
        raise InputError(f"d_x must lie in [1, {Z.shape[1] - 1}], got {d_x}")
    X, Y = Z[:, :d_x], Z[:, d_x:]
    if kspec.dim != X.shape[1] or lspec.dim != Y.shape[1]:
        raise InputError("kernel dimensions do not match the x/y parts of Z")
    half = len(Z) // 2

    def evaluate(rows, cols):
        r2, c2 = rows + half, cols + half
        return h_hsic_rows(kspec, lspec, X[rows], X[cols], X[r2], X[c2], Y[rows], Y[cols], Y[r2], Y[c2])

    return PairedData("independence", half, evaluate)


def pair_gof(Z, spec: KernelSpec, model: ScoreModel, scores=None) -> PairedData:
    """``h(i, j) = h_ksd(Z_i, Z_j)``.  Scores are evaluated once per sample.

    ``scores`` may be passed to reuse a precomputed ``model(Z)``.
    """
    Z = as_matrix(Z, "Z")
    if len(Z) < 2:
        raise InputError("goodness-of-fit pairing needs at least 2 samples")
    if Z.shape[1] != model.dimension or Z.shape[1] != spec.dim:
        raise InputError(
            f"data dimension {Z.shape[1]}, model dimension {model.dimension}, kernel dimension {spec.dim} must agree"
        )
    S = model(Z) if scores is None else as_matrix(scores, "scores")
    if S.shape != Z.shape:
        raise InputError("scores must have the same shape as Z")

    def evaluate(rows, cols):
        return stein_kernel_rows(spec, Z[rows], Z[cols], S[rows], S[cols])

    return PairedData("goodness_of_fit", len(Z), evaluate)


@dataclass(frozen=True, eq=False)
class HValueCache:
    """h values aligned index-wise with ``design`` pairs."""

    design: Design
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.design.size,):
            raise InputError("cache values must align with design pairs")
        self.values.setflags(write=False)

    @property
    def n_items(self) -> int:
        return self.design.n_items

    def scaled(self, factor: float) -> "HValueCache":
        return HValueCache(self.design, self.values * factor)


def cache_h_values(data: PairedData, design: Design) -> HValueCache:
    """Evaluate h once per design pair."""
    if design.n_items != data.n_items:
        raise InputError(f"design covers {design.n_items} items but data has {data.n_items}")
    out = np.empty(design.size)
    for start in range(0, design.size, _CHUNK):
        stop = start + _CHUNK
        out[start:stop] = data.evaluate(design.rows[start:stop], design.cols[start:stop])
    return HValueCache(design, out)


# --------------------------------------------------------------------------
# quadratic forms  sum_t eps_i eps_j v_t / L


def _use_dense(design: Design) -> bool:
    # dense BLAS costs ~B*n^2; only taken when that is within 8x of B*L
    n = design.n_items
    return 8 * design.size >= n * n


def _quadratic_forms(cache: HValueCache, signs: np.ndarray) -> np.ndarray:
    design = cache.design
    n = design.n_items
    if design.size == 0:
        raise InputError("design is empty")
    S = np.asarray(signs, dtype=float)
    if S.ndim != 2 or S.shape[1] != n:
        raise InputError(f"signs must have shape (B, {n}), got {S.shape}")
    # Each replicate's value must not depend on which batch it sits in, so that
    # constant sign vectors reproduce the statistic bit for bit.  GEMM results
    # depend on the operand shape, hence the fixed-size zero-padded blocks.
    if _use_dense(design):
        H = np.zeros((n, n))
        H[design.rows, design.cols] = cache.values
        q = np.empty(len(S))
        for a in range(0, len(S), _GEMM_BLOCK):
            blk = S[a:a + _GEMM_BLOCK]
            m = len(blk)
            if m < _GEMM_BLOCK:
                blk = np.vstack([blk, np.zeros((_GEMM_BLOCK - m, n))])
            q[a:a + m] = ((blk @ H) * blk).sum(axis=1)[:m]
    else:
        H = sp.csr_matrix((cache.values, (design.rows, design.cols)), shape=(n, n))
        T = np.ascontiguousarray((H @ S.T).T)
        q = (T * S).sum(axis=1)
    return q / design.size


def incomplete_statistic(cache: HValueCache) -> float:
    """Average of the cached h values over the design.

    Computed through the same quadratic form as the bootstrap with all signs
    equal to +1, so the all-ones replicate reproduces it bit for bit.
    """
    if cache.design.size == 0:
        raise InputError("design is empty")
    return float(_quadratic_forms(cache, np.ones((1, cache.n_items)))[0])


def rademacher_signs(n_items: int, n_replicates: int, seed: int, family: int = 0, start: int = 0) -> np.ndarray:
    """Rademacher sign matrix of shape ``(n_replicates, n_items)``.

    Row ``b`` comes from its own stream keyed by ``(seed, family, start + b)``,
    so any replicate can be regenerated independently of the others.
    """
    out = np.empty((n_replicates, n_items), dtype=np.int8)
    for b in range(n_replicates):
        ss = np.random.SeedSequence(seed, spawn_key=(family, start + b))
        out[b] = np.random.Generator(np.random.PCG64(ss)).integers(0, 2, n_items, dtype=np.int8)
    return 2 * out - 1


def wild_bootstrap_statistics(cache: HValueCache, B: int | None = None, seed: int | None = None, *,
                              family: int = 0, signs=None) -> np.ndarray:
    """Wild-bootstrap replicates ``(1/L) sum_{(i,j) in D} eps_i eps_j h_ij``.

    Either pass ``B`` and ``seed`` (signs drawn with :func:`rademacher_signs`)
    or an explicit ``signs`` matrix of shape ``(B, n_items)``.  No h values
    are recomputed.
    """
    if signs is None:
        if B is None or seed is None:
            raise InputError("pass either signs or both B and seed")
        if B < 1:
            raise InputError("B must be positive")
        signs = rademacher_signs(cache.n_items, B, seed, family)
    return _quadratic_forms(cache, signs)


# --------------------------------------------------------------------------
# complete (quadratic-time) U-statistics


def _gram(spec: KernelSpec, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    ii, jj = np.meshgrid(np.arange(len(A)), np.arange(len(B)), indexing="ij")
    return kernel_rows(spec, A[ii.ravel()], B[jj.ravel()]).reshape(len(A), len(B))


def complete_mmd(X, Y, spec: KernelSpec) -> float:
    """Two-sample U-statistic for MMD^2 (unequal sizes allowed)."""
    X = as_matrix(X, "X")
    Y = as_matrix(Y, "Y")
    m, n = len(X), len(Y)
    if m < 2 or n < 2:
        raise InputError("complete MMD needs at least 2 samples on each side")
    Kxx = _gram(spec, X, X)
    Kyy = _gram(spec, Y, Y)
    Kxy = _gram(spec, X, Y)
    return float(
        (Kxx.sum() - np.trace(Kxx)) / (m * (m - 1))
        + (Kyy.sum() - np.trace(Kyy)) / (n * (n - 1))
        - 2.0 * Kxy.mean()
    )


def complete_hsic(Z, d_x: int, kspec: KernelSpec, lspec: KernelSpec) -> float:
    """Quadratic-time closed form of the fourth-order HSIC U-statistic."""
    Z = as_matrix(Z, "Z")
    N = len(Z)
    if N < 4:
        raise InputError("complete HSIC needs at least 4 samples")
    X, Y = Z[:, :d_x], Z[:, d_x:]
    K = _gram(kspec, X, X)
    Lm = _gram(lspec, Y, Y)
    np.fill_diagonal(K, 0.0)
    np.fill_diagonal(Lm, 0.0)
    one_K = K.sum(axis=0)
    one_L = Lm.sum(axis=0)
    trace = float(np.sum(K * Lm))
    return (trace + one_K.sum() * one_L.sum() / ((N - 1) * (N - 2)) - 2.0 / (N - 2) * float(one_K @ one_L)) / (N * (N - 3))


def complete_ksd(Z, spec: KernelSpec, model: ScoreModel) -> float:
    """``1^T H~ 1 / (N (N-1))`` with ``H~`` the Stein Gram matrix, zero diagonal."""
    Z = as_matrix(Z, "Z")
    N = len(Z)
    if N < 2:
        raise InputError("complete KSD needs at least 2 samples")
    S = model(Z)
    ii, jj = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    H = stein_kernel_rows(spec, Z[ii.ravel()], Z[jj.ravel()], S[ii.ravel()], S[jj.ravel()]).reshape(N, N)
    np.fill_diagonal(H, 0.0)
    return float(H.sum() / (N * (N - 1)))
