import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from posstrack.errors import InvalidAssociationError, UsageError
from posstrack.filtering import BirthPrior, LinearGaussianModel
from posstrack.model import (
    MultiObjectParams,
    Path,
    PathScorer,
    Scenario,
    Track,
    birth_log,
    check_disjoint,
    false_alarm_log,
    kappa,
    path_log_credibility,
    path_marginal_log,
    track_set_log_possibility,
)

from helpers import kalman_oracle


def _line_scenario(K=6, extra=1, seed=0):
    rng = np.random.default_rng(seed)
    scans = []
    for k in range(1, K + 1):
        pts = [np.array([0.8 * k, 0.3 * k]) + 0.2 * rng.standard_normal(2)]
        pts += list(rng.uniform(-5, 5, size=(extra, 2)))
        scans.append(np.array(pts))
    return Scenario(tuple(scans))


def _oracle_loglik(path, gap, scenario, params):
    """Birth posterior then the textbook filter, summing ``-0.5 d' S^-1 d``."""
    model = params.model
    z0 = scenario.value(path.obs[0])
    S_v = params.birth.sigma_v**2 * np.eye(2)
    for _ in range(gap):
        S_v = S_v + model.Q[2:, 2:]
    m = np.concatenate([z0, np.zeros(2)])
    P = np.block([[model.R, np.zeros((2, 2))], [np.zeros((2, 2)), S_v]])
    total, k = 0.0, path.first
    for obs in path.obs[1:]:
        while k < obs[0]:
            m, P = model.F @ m, model.F @ P @ model.F.T + model.Q
            k += 1
        z = scenario.value(obs)
        S = model.H @ P @ model.H.T + model.R
        d = z - model.H @ m
        total += -0.5 * d @ np.linalg.inv(S) @ d
        m, P = kalman_oracle(m, P, z, model.H, model.R)
    return total


class TestTypes:
    def test_scenario(self):
        sc = Scenario((np.zeros((2, 2)), np.zeros((0, 2)), np.ones((1, 2))))
        assert sc.K == 3 and sc.dim == 2 and sc.n_obs == 3
        assert sc.size(2) == 0
        assert list(sc.ids()) == [(1, 0), (1, 1), (3, 0)]
        np.testing.assert_array_equal(sc.value((3, 0)), [1.0, 1.0])

    def test_scenario_dimension_mismatch(self):
        with pytest.raises(UsageError):
            Scenario((np.zeros((1, 2)), np.zeros((1, 3))))

    def test_path(self):
        p = Path(((2, 0), (5, 1)))
        assert p.first == 2 and p.last == 5 and len(p) == 2
        assert p.at(5) == (5, 1) and p.at(3) is None
        assert p.times == (2, 5)
        with pytest.raises(UsageError):
            Path(((3, 0), (3, 1)))
        with pytest.raises(UsageError):
            Path(())

    def test_track(self):
        p = Path(((2, 0), (4, 0)))
        assert Track(p, 1, 6).appear == 1
        with pytest.raises(UsageError):
            Track(p, 3, 6)
        with pytest.raises(UsageError):
            Track(p, 1, 3)

    def test_disjoint(self):
        a, b = Path(((1, 0), (2, 0))), Path(((2, 0),))
        with pytest.raises(InvalidAssociationError):
            check_disjoint([a, b])
        check_disjoint([a, Path(((2, 1),))])
        assert kappa([Track(a, 1, 2)]) == frozenset([a])

    def test_params(self):
        p = MultiObjectParams.from_probabilities(0.9, 0.99)
        assert p.alpha_nd == pytest.approx(0.1) and p.alpha_ns == pytest.approx(0.01)
        assert p.log_fa == math.log(1e-2) and p.log_birth == math.log(1e-4)
        with pytest.raises(UsageError):
            MultiObjectParams(alpha_fa=1.0)


class TestPathScore:
    @pytest.mark.parametrize("gap", [0, 2])
    def test_loglik_matches_textbook_filter(self, gap):
        sc = _line_scenario()
        params = MultiObjectParams(model=LinearGaussianModel.ncv(sigma_a=0.1, sigma=0.2), birth=BirthPrior(0.7))
        path = Path(((3, 0), (4, 0), (6, 0)))
        value = PathScorer(sc, params).loglik(path, gap)
        assert value == pytest.approx(_oracle_loglik(path, gap, sc, params), rel=1e-10)

    def test_single_detection_has_unit_likelihood(self):
        sc = _line_scenario()
        assert PathScorer(sc, MultiObjectParams()).loglik(Path(((2, 1),)), 1) == 0.0

    def test_interval_terms(self):
        sc = _line_scenario(K=8)
        params = MultiObjectParams(alpha_nd=0.2, alpha_ns=0.05)
        scorer = PathScorer(sc, params)
        path = Path(((3, 0), (5, 0)))
        ll = scorer.loglik(path, 1)
        # appear at 2, last at 6: missed at 2, 4, 6 and not surviving past 6
        expected = ll + 3 * math.log(0.2) + math.log(0.05)
        assert scorer.log_credibility(path, 2, 6) == pytest.approx(expected)
        # existing until K carries no non-survival term
        assert scorer.log_credibility(path, 3, 8) == pytest.approx(scorer.loglik(path, 0) + 4 * math.log(0.2))
        with pytest.raises(UsageError):
            scorer.log_credibility(path, 4, 6)

    @given(st.integers(0, 2**32 - 1), st.booleans())
    def test_best_interval_is_exhaustive_max(self, seed, damped):
        rng = np.random.default_rng(seed)
        K = int(rng.integers(3, 9))
        sc = _line_scenario(K=K, seed=seed)
        model = LinearGaussianModel.ncv(sigma_a=0.2)
        if damped:
            F = model.F.copy()
            F[2:, 2:] *= 0.7
            model = LinearGaussianModel(F, model.Q, model.H, model.R)
        params = MultiObjectParams(alpha_nd=float(rng.uniform(0.05, 0.9)), alpha_ns=float(rng.uniform(0.001, 0.9)),
                                   model=model, birth=BirthPrior(float(rng.uniform(0.2, 3))))
        times = sorted(rng.choice(np.arange(1, K + 1), size=int(rng.integers(1, K + 1)), replace=False))
        path = Path(tuple((int(k), 0) for k in times))
        scorer = PathScorer(sc, params)
        value, m, n = scorer.best_interval(path)
        brute = max(scorer.log_credibility(path, a, b)
                    for a in range(1, path.first + 1) for b in range(path.last, K + 1))
        assert value == pytest.approx(brute, abs=1e-10)
        assert scorer.log_credibility(path, m, n) == pytest.approx(value, abs=1e-12)

    def test_particle_scorer_is_deterministic_and_close(self):
        sc = _line_scenario(K=5)
        params = MultiObjectParams(model=LinearGaussianModel.ncv(sigma_a=0.1, sigma=0.3))
        path = Path(tuple((k, 0) for k in range(1, 6)))
        a = PathScorer(sc, params, particles=20000, seed=3).loglik(path)
        b = PathScorer(sc, params, particles=20000, seed=3).loglik(path)
        exact = PathScorer(sc, params).loglik(path)
        assert a == b
        assert a == pytest.approx(exact, abs=0.5)


class TestTargetPossibility:
    def test_hand_computed_track_set(self):
        sc = _line_scenario(K=4, extra=2)
        params = MultiObjectParams(alpha_nd=0.1, alpha_ns=0.01, alpha_fa=0.02, alpha_birth=1e-3)
        scorer = PathScorer(sc, params)
        p = Path(((1, 0), (2, 0), (4, 0)))
        q = Path(((3, 1),))
        T = [Track(p, 1, 4), Track(q, 2, 3)]
        expected = ((12 - 4) * math.log(0.02) + 2 * math.log(1e-3)
                    + scorer.loglik(p, 0) + math.log(0.1)
                    + 0.0 + math.log(0.1) + math.log(0.01))
        assert scorer.track_set_log_possibility(T) == pytest.approx(expected)
        assert track_set_log_possibility(T, sc, params) == pytest.approx(expected)
        assert false_alarm_log([p, q], sc, 0.02) == pytest.approx(8 * math.log(0.02))
        assert birth_log(T, 1e-3) == pytest.approx(2 * math.log(1e-3))
        assert path_log_credibility(p, 1, 4, sc, params) == pytest.approx(scorer.loglik(p, 0) + math.log(0.1))

    def test_overlapping_tracks_rejected(self):
        sc = _line_scenario(K=3)
        scorer = PathScorer(sc, MultiObjectParams())
        p = Path(((1, 0), (2, 0)))
        with pytest.raises(InvalidAssociationError):
            scorer.track_set_log_possibility([Track(p, 1, 3), Track(Path(((2, 0),)), 1, 2)])

    def test_empty_set_is_all_false_alarms(self):
        sc = _line_scenario(K=3, extra=2)
        params = MultiObjectParams(alpha_fa=0.05)
        value, tracks = path_marginal_log([], sc, params)
        assert value == pytest.approx(9 * math.log(0.05)) and tracks == frozenset()

    def test_path_marginal_is_max_over_intervals(self):
        sc = _line_scenario(K=5, extra=1)
        params = MultiObjectParams(alpha_nd=0.3, alpha_ns=0.1, alpha_fa=0.1, alpha_birth=0.01)
        scorer = PathScorer(sc, params)
        paths = [Path(((2, 0), (3, 0))), Path(((4, 1),))]
        value, best = scorer.path_marginal_log(paths)
        options = [[Track(p, m, n) for m in range(1, p.first + 1) for n in range(p.last, 6)] for p in paths]
        brute = max(scorer.track_set_log_possibility(T) for T in itertools.product(*options))
        assert value == pytest.approx(brute)
        assert scorer.track_set_log_possibility(best) == pytest.approx(value)
