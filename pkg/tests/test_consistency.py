import csv
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from posstrack.consistency import (
    ConsistencyIndex,
    build_index,
    lag_covariances,
    linearized_pair_consistency,
    numerical_jacobian,
    pair_consistency,
)
from posstrack.errors import UsageError
from posstrack.filtering import LinearGaussianModel, predict
from posstrack.model import MultiObjectParams, Path, Scenario

from helpers import crossing_scenario


def _random_scenario(rng, K=6):
    return Scenario(tuple(rng.uniform(-4, 4, size=(int(rng.integers(0, 4)), 2)) for _ in range(K)))


def _params(alpha_nd=0.3):
    return MultiObjectParams(alpha_nd=alpha_nd, model=LinearGaussianModel.ncv(sigma_a=0.3, sigma=0.5))


class TestPairConsistency:
    def test_direct_formula(self):
        """Birth posterior, ``l`` predictions, then the unnormalised Gaussian of the predicted observation."""
        params = _params(0.4)
        z, z2 = np.array([0.0, 1.0]), np.array([0.7, 1.5])
        g = params.birth.posterior(z, params.model)
        for _ in range(3):
            g = predict(g, params.model)
        H, R = params.model.H, params.model.R
        C = H @ g.cov @ H.T + R
        d = z2 - H @ g.mean
        expected = 0.4**2 * math.exp(-0.5 * d @ np.linalg.inv(C) @ d)
        assert pair_consistency(z, 2, z2, 5, params) == pytest.approx(expected, rel=1e-12)

    def test_requires_later_observation(self):
        with pytest.raises(UsageError):
            pair_consistency([0, 0], 3, [0, 0], 3, _params())

    def test_lag_covariances_start_at_birth(self):
        params = _params()
        covs = lag_covariances(params, 2)
        assert len(covs) == 3
        np.testing.assert_allclose(covs[0], params.birth.posterior([0, 0], params.model).cov)


class TestIndex:
    @given(st.integers(0, 2**32 - 1))
    def test_blocks_match_pairwise_formula(self, seed):
        rng = np.random.default_rng(seed)
        sc = _random_scenario(rng)
        params = _params(float(rng.uniform(0.05, 0.9)))
        idx = ConsistencyIndex(sc, params, tau_prime=1e-3)
        for (k, j), (k2, j2) in ((a, b) for a in sc.ids() for b in sc.ids() if b[0] > a[0]):
            lag = k2 - k
            expected = pair_consistency(sc.value((k, j)), k, sc.value((k2, j2)), k2, params) if lag <= idx.max_lag else 0.0
            assert idx.pair((k, j), (k2, j2)) == pytest.approx(expected, rel=1e-10, abs=1e-300)

    @pytest.mark.parametrize("alpha_nd,tau,expected", [(0.1, 1e-3, 3), (0.5, 0.1, 3), (0.1, 0.2, 0), (0.9, 1e-3, 9)])
    def test_lag_cutoff(self, alpha_nd, tau, expected):
        sc = Scenario(tuple(np.zeros((1, 2)) for _ in range(10)))
        idx = ConsistencyIndex(sc, _params(alpha_nd), tau_prime=tau)
        assert idx.max_lag == expected
        assert all(a <= expected for _, a in idx.blocks)
        assert alpha_nd**idx.max_lag >= tau

    def test_marginal_is_row_maximum(self):
        rng = np.random.default_rng(2)
        sc = _random_scenario(rng, K=5)
        idx = build_index(sc, _params(0.5))
        for obs in sc.ids():
            later = [idx.pair(obs, b) for b in sc.ids() if b[0] > obs[0]]
            assert idx.marginal_consistency(obs) == pytest.approx(max(later, default=0.0))

    def test_path_consistencies(self):
        sc, (a, b) = crossing_scenario(K=6)
        idx = ConsistencyIndex(sc, _params(0.5))
        obs = (3, 1)
        expected = max(idx.pair(o, obs) if o[0] < 3 else idx.pair(obs, o) for o in a.obs if o[0] != 3)
        assert idx.obs_path_consistency(obs, a) == pytest.approx(expected)
        assert idx.path_path_consistency(b, a) == pytest.approx(max(idx.obs_path_consistency(o, a) for o in b.obs))
        # an object's own next detection is far more consistent than a clutter point
        assert idx.pair((2, 0), (3, 0)) > 0.5

    def test_forward_consistency(self):
        sc, (a, b) = crossing_scenario(K=5)
        idx = ConsistencyIndex(sc, _params(0.5))
        fwd = idx.forward_consistency([a])
        for obs in sc.ids():
            k, j = obs
            expected = max((idx.pair(obs, o) for o in a.obs if o[0] > k), default=0.0)
            assert fwd[k - 1][j] == pytest.approx(expected)

    def test_csv(self, tmp_path):
        sc, _ = crossing_scenario(K=4)
        idx = ConsistencyIndex(sc, _params(0.5))
        out = tmp_path / "c.csv"
        idx.write_csv(out)
        with open(out) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == sum(int(np.count_nonzero(b)) for b in idx.blocks.values())
        r = rows[0]
        assert float(r["credibility"]) == idx.pair((int(r["k"]), int(r["j"])), (int(r["k_next"]), int(r["j_next"])))

    def test_bad_tau(self):
        with pytest.raises(UsageError):
            ConsistencyIndex(Scenario((np.zeros((1, 2)),)), _params(), tau_prime=0.0)


class TestLinearized:
    def test_linear_observation_reduces_to_pair_consistency(self):
        params = _params(0.6)
        model = params.model
        z, z2 = np.array([1.0, 0.0]), np.array([2.1, 0.4])
        g = params.birth.posterior(z, model)
        value = linearized_pair_consistency(g.mean, g.cov, z2, 2, model.F, model.Q, lambda x: model.H @ x,
                                            model.R, 0.6)
        assert value == pytest.approx(pair_consistency(z, 1, z2, 3, params), rel=1e-8)

    def test_numerical_matches_analytic_jacobian(self):
        def h(x):
            return np.array([math.hypot(x[0], x[1]), math.atan2(x[1], x[0])])

        def jac(x):
            r2 = x[0] ** 2 + x[1] ** 2
            r = math.sqrt(r2)
            return np.array([[x[0] / r, x[1] / r, 0, 0], [-x[1] / r2, x[0] / r2, 0, 0]])

        x = np.array([3.0, 4.0, 0.5, -0.2])
        np.testing.assert_allclose(numerical_jacobian(h, x), jac(x), atol=1e-8)
        model = LinearGaussianModel.ncv(sigma_a=0.2)
        args = (x, np.eye(4) * 0.3, [5.6, 0.9], 2, model.F, model.Q, h, np.diag([0.1, 0.01]), 0.5)
        assert linearized_pair_consistency(*args) == pytest.approx(linearized_pair_consistency(*args, jacobian=jac),
                                                                   rel=1e-6)
