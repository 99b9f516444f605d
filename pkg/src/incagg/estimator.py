"""Estimator-style wrappers: ``MMDAggInc``, ``HSICAggInc``, ``KSDAggInc``.

Each wrapper follows the scikit-learn conventions: hyperparameters are set in
``__init__`` and exposed through ``get_params``/``set_params``; ``fit`` runs
the test and stores fitted attributes with a trailing underscore.

>>> rng = np.random.default_rng(0)
>>> test = MMDAggInc(R=50, seed=1).fit(rng.normal(size=(300, 2)), rng.normal(1.0, 1.0, size=(300, 2)))
>>> bool(test.reject_)
True
"""

from __future__ import annotations

import logging
import warnings

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .design import Design, make_design
from .estimators import as_matrix, pair_gof, pair_independence, pair_two_sample
from .exceptions import ConfigError, InputError
from .kernels import ScoreModel
from .testing import (
    AggTestResult,
    BandwidthCollection,
    TestConfig,
    aggregated_test,
    hsic_collection,
    mmd_ksd_collection,
    theoretical_collection,
)

logger = logging.getLogger(__name__)


class _AggIncBase(BaseEstimator):
    _problem = ""

    def _config(self) -> TestConfig:
        return TestConfig(alpha=self.alpha, B1=self.B1, B2=self.B2, B3=self.B3)

    def _design(self, n_items: int) -> Design:
        kind = self.design
        if kind == "subdiagonal":
            if self.R is None or int(self.R) != self.R or self.R < 1:
                raise ConfigError(f"R must be a positive integer, got {self.R}")
            R = int(self.R)
            if R > n_items - 1:
                warnings.warn(f"R={R} exceeds n_items-1={n_items - 1}; using the full design", stacklevel=3)
                R = n_items - 1
            return make_design(n_items, R=R)
        if kind == "random":
            if self.L is None:
                raise ConfigError("design='random' requires L")
            return make_design(n_items, L=self.L, seed=self.seed)
        if kind == "full":
            return make_design(n_items, full=True)
        raise ConfigError(f"unknown design {kind!r}; expected 'subdiagonal', 'random' or 'full'")

    def _finish(self, result: AggTestResult, design: Design, collection: BandwidthCollection):
        self.result_ = result
        self.reject_ = result.reject
        self.u_alpha_ = result.u_alpha
        self.statistics_ = np.array([b.statistic for b in result.per_bandwidth])
        self.design_ = design
        self.collection_ = collection
        return self

    def decision(self) -> str:
        check_is_fitted(self, "result_")
        return "reject" if self.reject_ else "accept"


class MMDAggInc(_AggIncBase):
    """Aggregated two-sample test on an incomplete MMD U-statistic.

    Parameters
    ----------
    R : int, default=200
        Number of sub-diagonals when ``design="subdiagonal"``; clipped to
        ``N - 1`` with a warning.
    design : {"subdiagonal", "random", "full"}
    L : int, optional
        Number of random pairs when ``design="random"``.
    alpha : float, default=0.05
    B1, B2, B3 : int
        Quantile replicates, correction replicates, bisection steps.
    collection : {"median", "theoretical"} or BandwidthCollection
        ``"median"``: four dyadic fractions of the pooled median distance.
        ``"theoretical"``: dyadic bandwidths ``2**-l`` (data on ``[0, 1]^d``).
    n_bandwidths : int, default=4
        Size of the median collection.
    seed : int
        Seeds the Rademacher signs (and a random design).

    Attributes
    ----------
    result_ : AggTestResult
    reject_ : bool
    u_alpha_ : float
    """

    _problem = "two_sample"

    def __init__(self, R=200, design="subdiagonal", L=None, alpha=0.05, B1=500, B2=500, B3=50,
                 collection="median", n_bandwidths=4, seed=42):
        self.R = R
        self.design = design
        self.L = L
        self.alpha = alpha
        self.B1 = B1
        self.B2 = B2
        self.B3 = B3
        self.collection = collection
        self.n_bandwidths = n_bandwidths
        self.seed = seed

    def fit(self, X, Y):
        X = as_matrix(X, "X")
        Y = as_matrix(Y, "Y")
        if X.shape[1] != Y.shape[1]:
            raise InputError(f"X and Y dimensions differ: {X.shape[1]} vs {Y.shape[1]}")
        if len(X) != len(Y):
            logger.warning("unequal sample sizes %d and %d; truncating to %d", len(X), len(Y), min(len(X), len(Y)))
        config = self._config()
        n = min(len(X), len(Y))
        design = self._design(n)
        if isinstance(self.collection, BandwidthCollection):
            coll = self.collection
        elif self.collection == "median":
            coll = mmd_ksd_collection(np.vstack([X, Y]), count=self.n_bandwidths)
        elif self.collection == "theoretical":
            coll = theoretical_collection(design.size, n, X.shape[1])
        else:
            raise ConfigError(f"unknown collection {self.collection!r}")
        paired = [pair_two_sample(X, Y, k) for k in coll.kernels]
        return self._finish(aggregated_test(paired, design, coll, config, self.seed), design, coll)


class HSICAggInc(_AggIncBase):
    """Aggregated independence test on an incomplete HSIC U-statistic.

    ``fit(X, Y)`` takes paired samples (same number of rows).  The median
    collection uses all nine pairs ``(2**i med_x, 2**j med_y)``,
    ``i, j in {-2, -1, 0}``.  Other parameters as in :class:`MMDAggInc`.
    """

    _problem = "independence"

    def __init__(self, R=200, design="subdiagonal", L=None, alpha=0.05, B1=500, B2=500, B3=50,
                 collection="median", seed=42):
        self.R = R
        self.design = design
        self.L = L
        self.alpha = alpha
        self.B1 = B1
        self.B2 = B2
        self.B3 = B3
        self.collection = collection
        self.seed = seed

    def fit(self, X, Y):
        X = as_matrix(X, "X")
        Y = as_matrix(Y, "Y")
        if len(X) != len(Y):
            raise InputError(f"X and Y must be paired (same number of rows), got {len(X)} and {len(Y)}")
        config = self._config()
        Z = np.hstack([X, Y])
        d_x = X.shape[1]
        design = self._design(len(Z) // 2)
        if isinstance(self.collection, BandwidthCollection):
            coll = self.collection
        elif self.collection == "median":
            coll = hsic_collection(X, Y)
        elif self.collection == "theoretical":
            coll = theoretical_collection(design.size, len(Z), Z.shape[1], split=d_x)
        else:
            raise ConfigError(f"unknown collection {self.collection!r}")
        paired = [pair_independence(Z, d_x, k, l) for k, l in coll.kernels]
        return self._finish(aggregated_test(paired, design, coll, config, self.seed), design, coll)


class KSDAggInc(_AggIncBase):
    """Aggregated goodness-of-fit test on an incomplete KSD U-statistic.

    Parameters
    ----------
    score_model : ScoreModel
        Score ``grad log p`` of the model.
    kernel : {"imq", "gaussian"}, default="imq"
    imq_exponent : float, default=0.5

    Other parameters as in :class:`MMDAggInc`.  ``fit(X, scores=None)``
    accepts precomputed model scores of ``X``.
    """

    _problem = "goodness_of_fit"

    def __init__(self, score_model=None, kernel="imq", imq_exponent=0.5, R=200, design="subdiagonal", L=None,
                 alpha=0.05, B1=500, B2=500, B3=50, collection="median", n_bandwidths=4, seed=42):
        self.score_model = score_model
        self.kernel = kernel
        self.imq_exponent = imq_exponent
        self.R = R
        self.design = design
        self.L = L
        self.alpha = alpha
        self.B1 = B1
        self.B2 = B2
        self.B3 = B3
        self.collection = collection
        self.n_bandwidths = n_bandwidths
        self.seed = seed

    def fit(self, X, scores=None):
        if not isinstance(self.score_model, ScoreModel):
            raise ConfigError("KSDAggInc needs a ScoreModel")
        X = as_matrix(X, "X")
        config = self._config()
        scores = self.score_model(X) if scores is None else scores
        design = self._design(len(X))
        if isinstance(self.collection, BandwidthCollection):
            coll = self.collection
        elif self.collection == "median":
            coll = mmd_ksd_collection(X, count=self.n_bandwidths, family=self.kernel, imq_exponent=self.imq_exponent)
        elif self.collection == "theoretical":
            coll = theoretical_collection(design.size, len(X), X.shape[1], family=self.kernel)
        else:
            raise ConfigError(f"unknown collection {self.collection!r}")
        paired = [pair_gof(X, k, self.score_model, scores=scores) for k in coll.kernels]
        return self._finish(aggregated_test(paired, design, coll, config, self.seed), design, coll)
