import math

import numpy as np
import pytest
from scipy import integrate, stats

from incagg.exceptions import ConfigError, InputError
from incagg.models import (
    GBRBMSpec,
    PerturbedUniformSpec,
    builtin_score_model,
    cell_profile,
    gbrbm_log_density_unnormalized,
    gbrbm_sample,
    gbrbm_score,
    perturbed_uniform_density,
    sample_independence_pair,
    sample_perturbed_uniform,
)


def gauss_nodes(pieces, order=60):
    """Gauss-Legendre nodes and weights on [0, 1] split into equal pieces."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0, 1, pieces + 1)
    nodes = np.concatenate([(a + b) / 2 + (b - a) / 2 * x for a, b in zip(edges[:-1], edges[1:])])
    weights = np.concatenate([(b - a) / 2 * w for a, b in zip(edges[:-1], edges[1:])])
    return nodes, weights


class TestProfile:
    def test_mean_zero_and_range(self):
        val, _ = integrate.quad(lambda t: float(cell_profile(t)), 0, 1, points=[0.25, 0.5, 0.75], epsabs=1e-13)
        assert abs(val) < 1e-12
        t = np.linspace(0, 1, 10001)
        p = cell_profile(t)
        assert p.max() == pytest.approx(1.0, abs=1e-12) and p.min() == pytest.approx(-1.0, abs=1e-12)
        assert cell_profile(0.25) == pytest.approx(1.0, abs=1e-15)
        assert cell_profile(0.0) == 0.0 and cell_profile(1.0) == 0.0 and cell_profile(0.5) == 0.0


class TestPerturbedUniform:
    @pytest.mark.parametrize("P", [1, 2, 3])
    def test_integrates_to_one_1d(self, P):
        spec = PerturbedUniformSpec.random_signs(1, P, 1.5, seed=P)
        pts = [k / (4 * P) for k in range(1, 4 * P)]
        val, _ = integrate.quad(lambda u: perturbed_uniform_density(spec, [u]), 0, 1, points=pts, limit=200, epsabs=1e-12)
        assert val == pytest.approx(1.0, abs=1e-6)

    def test_integrates_to_one_2d_and_uniform_marginal(self):
        spec = PerturbedUniformSpec.random_signs(2, 2, 1.0, seed=0)
        u, w = gauss_nodes(8)
        U1, U2 = np.meshgrid(u, u, indexing="ij")
        f = perturbed_uniform_density(spec, np.column_stack([U1.ravel(), U2.ravel()])).reshape(U1.shape)
        marginal = f @ w
        np.testing.assert_allclose(marginal, 1.0, atol=1e-6)
        assert w @ marginal == pytest.approx(1.0, abs=1e-6)

    def test_bounds(self):
        spec = PerturbedUniformSpec.random_signs(2, 3, 2.0, seed=1)
        g = np.linspace(0, 1, 301)
        U = np.array(np.meshgrid(g, g)).reshape(2, -1).T
        f = perturbed_uniform_density(spec, U)
        assert f.min() >= 0.5 - 1e-12 and f.max() <= 1.5 + 1e-12
        assert f.max() == pytest.approx(1.5, abs=1e-3)

    def test_uniform_spec(self):
        spec = PerturbedUniformSpec.uniform(3)
        assert spec.amplitude == 0.0
        np.testing.assert_array_equal(perturbed_uniform_density(spec, np.random.default_rng(0).random((5, 3))), 1.0)

    def test_validation(self):
        with pytest.raises(ConfigError):
            PerturbedUniformSpec(1, 2, 0.5, [1, -1])
        with pytest.raises(ConfigError):
            PerturbedUniformSpec(1, 2, 2.0, [1, 1, 1])
        with pytest.raises(InputError):
            perturbed_uniform_density(PerturbedUniformSpec.uniform(1), [1.5])

    def test_sampler_ks(self):
        spec = PerturbedUniformSpec.random_signs(1, 2, 1.0, seed=3)
        grid = np.linspace(0, 1, 400_001)
        cum = integrate.cumulative_simpson(perturbed_uniform_density(spec, grid[:, None]), x=grid, initial=0.0)

        def cdf(x):
            return np.interp(x, grid, cum)

        sample = sample_perturbed_uniform(spec, 4000, np.random.default_rng(0))[:, 0]
        assert stats.kstest(sample, cdf).pvalue > 1e-3
        assert stats.kstest(sample, "uniform").pvalue < 1e-3

    def test_sampler_deterministic_and_shape(self):
        spec = PerturbedUniformSpec.random_signs(2, 2, 2.0, seed=3)
        a = sample_perturbed_uniform(spec, 100, np.random.default_rng(5))
        b = sample_perturbed_uniform(spec, 100, np.random.default_rng(5))
        assert a.shape == (100, 2)
        np.testing.assert_array_equal(a, b)
        assert np.all((a >= 0) & (a <= 1))

    def test_independence_pair_dimension(self):
        spec = PerturbedUniformSpec.random_signs(3, 2, 2.0, seed=0)
        assert sample_independence_pair(spec, 1, 2, 10, 0).shape == (10, 3)
        with pytest.raises(ConfigError):
            sample_independence_pair(spec, 1, 1, 10, 0)


class TestGBRBM:
    def test_hand_score(self):
        spec = GBRBMSpec([0.5], [-0.2], [[1.0]])
        assert gbrbm_score(spec, [0.3])[0] == pytest.approx(0.2 + math.tanh(0.1), abs=1e-15)
        expected = 0.5 * 0.3 - 0.045 + math.log(2 * math.cosh(0.1))
        assert gbrbm_log_density_unnormalized(spec, [0.3]) == pytest.approx(expected, abs=1e-15)

    def test_score_finite_differences(self):
        spec = GBRBMSpec.random(5, 3, seed=0)
        rng = np.random.default_rng(1)
        for _ in range(20):
            x = rng.normal(size=5) * 2
            fd = np.array([
                (gbrbm_log_density_unnormalized(spec, x + e) - gbrbm_log_density_unnormalized(spec, x - e)) / 2e-5
                for e in np.eye(5) * 1e-5
            ])
            s = gbrbm_score(spec, x)
            assert np.linalg.norm(fd - s) / np.linalg.norm(s) < 1e-5

    def test_zero_coupling_samples_gaussian(self):
        spec = GBRBMSpec([1.0, -2.0], [0.3], np.zeros((2, 1)))
        X = gbrbm_sample(spec, 3000, np.random.default_rng(0), burn_in=10, thinning=1)
        for k, mu in enumerate([1.0, -2.0]):
            assert stats.kstest(X[:, k], "norm", args=(mu, 1.0)).pvalue > 1e-3

    def test_gibbs_matches_mixture_marginal(self):
        b, c, B = 0.3, -0.4, 1.5
        spec = GBRBMSpec([b], [c], [[B]])
        # exp(b x - x^2/2) 2 cosh(B x + c) is a two-component Gaussian mixture
        lw = np.array([c + (b + B) ** 2 / 2, -c + (b - B) ** 2 / 2])
        w = np.exp(lw - lw.max())
        w /= w.sum()

        def cdf(x):
            return w[0] * stats.norm.cdf(x, b + B) + w[1] * stats.norm.cdf(x, b - B)

        X = gbrbm_sample(spec, 3000, np.random.default_rng(2))[:, 0]
        assert stats.kstest(X, cdf).pvalue > 1e-3

    def test_perturbed_and_json(self):
        p = GBRBMSpec.random(4, 2, seed=1)
        assert p.perturbed(0.0).B.tolist() == p.B.tolist()
        q = p.perturbed(0.5, seed=2)
        assert not np.array_equal(q.B, p.B)
        back = GBRBMSpec.from_json(q.to_json())
        np.testing.assert_array_equal(back.B, q.B)
        assert set(np.unique(p.B)) <= {-1.0, 1.0}

    def test_validation(self):
        with pytest.raises(ConfigError):
            GBRBMSpec([0.0, 0.0], [0.0], np.zeros((3, 1)))
        with pytest.raises(InputError):
            gbrbm_score(GBRBMSpec.random(3, 2, 0), np.zeros(4))
        with pytest.raises(ConfigError):
            gbrbm_sample(GBRBMSpec.random(3, 2, 0), 5, 0, burn_in=0)


class TestBuiltinModels:
    def test_gaussian(self):
        model = builtin_score_model("gaussian", {"mean": [1.0, 2.0]})
        np.testing.assert_array_equal(model(np.zeros((1, 2))), [[1.0, 2.0]])
        assert builtin_score_model("gaussian", {"d": 3}).dimension == 3

    def test_gbrbm(self):
        spec = GBRBMSpec.random(3, 2, seed=0)
        model = builtin_score_model("gbrbm", {"b": spec.b.tolist(), "c": spec.c.tolist(), "B": spec.B.tolist()})
        x = np.ones((2, 3))
        np.testing.assert_allclose(model(x), gbrbm_score(spec, x))

    @pytest.mark.parametrize("name, params", [("gaussian", {}), ("gbrbm", {"b": [0.0]}), ("cauchy", {})])
    def test_errors(self, name, params):
        with pytest.raises(ConfigError):
            builtin_score_model(name, params)
