import math
import os
import tempfile

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from posstrack.errors import DataError, UsageError
from posstrack.simulation import (
    FALSE_ALARM,
    PRESETS,
    SimParams,
    inference_params,
    load_scenario,
    preset,
    save_scenario,
    simulate,
    with_overrides,
)


class TestParams:
    @pytest.mark.parametrize("name,values", [("simple", (10, 0.1, 0.9)), ("high_fa", (100, 0.5, 0.8)),
                                             ("low_pd", (25, 0.5, 0.5))])
    def test_presets(self, name, values):
        p = preset(name)
        assert (p.lambda_fa, p.lambda_b, p.p_d) == values
        assert p.K == 50 and p.sigma_a == 0.05 and p.sigma == 0.3
        assert p.window == ((-60, 60), (-60, 60))

    def test_unknown_preset(self):
        with pytest.raises(UsageError):
            preset("busy")
        assert set(PRESETS) == {"simple", "high_fa", "low_pd"}

    def test_validation(self):
        with pytest.raises(UsageError):
            SimParams(K=0)
        with pytest.raises(UsageError):
            SimParams(p_d=0.0)
        with pytest.raises(UsageError):
            SimParams(x_min=1.0, x_max=0.0)

    def test_inference_params(self):
        mp = inference_params(preset("low_pd"))
        assert mp.alpha_nd == pytest.approx(0.5) and mp.alpha_ns == pytest.approx(0.01)
        assert mp.alpha_fa == 1e-2 and mp.alpha_birth == 1e-4
        assert inference_params(SimParams(p_d=1.0)).alpha_nd > 0


class TestSimulate:
    def test_reproducible(self):
        a_sc, a_truth = simulate(preset("simple"), seed=4)
        b_sc, b_truth = simulate(preset("simple"), seed=4)
        for x, y in zip(a_sc.scans, b_sc.scans):
            np.testing.assert_array_equal(x, y)
        for x, y in zip(a_truth.labels, b_truth.labels):
            np.testing.assert_array_equal(x, y)

    def test_empty_scenario(self):
        sc, truth = simulate(SimParams(lambda_fa=0.0, lambda_b=0.0), seed=0)
        assert sc.n_obs == 0 and sc.K == 50 and truth.objects == []

    def test_noise_free_trajectory(self):
        params = SimParams(K=15, lambda_fa=0.0, lambda_b=0.2, p_d=1.0, sigma=0.0, p_s=1.0)
        sc, truth = simulate(params, seed=1)
        assert truth.objects
        obs = truth.object_observations()
        for obj in truth.objects:
            assert len(obs[obj.ident]) == params.K - obj.birth + 1
            for k, j in obs[obj.ident]:
                np.testing.assert_array_equal(sc.value((k, j)), obj.states[k - obj.birth][:2])

    def test_clutter_mean(self):
        params = SimParams(K=10_000, lambda_b=0.0, lambda_fa=10.0)
        sc, truth = simulate(params, seed=0)
        counts = np.array([sc.size(k) for k in range(1, sc.K + 1)])
        assert abs(counts.mean() - 10.0) <= 3 * math.sqrt(10.0 / sc.K)
        assert all(np.all(lab == FALSE_ALARM) for lab in truth.labels)
        Z = np.concatenate(sc.scans)
        assert Z.min() >= -60 and Z.max() <= 60

    def test_birth_mean(self):
        params = SimParams(K=5000, lambda_b=0.5, lambda_fa=0.0, p_s=0.5)
        _, truth = simulate(params, seed=1)
        assert abs(len(truth.objects) / params.K - 0.5) <= 3 * math.sqrt(0.5 / params.K)

    def test_truth_tracks(self):
        sc, truth = simulate(preset("simple"), seed=2)
        tracks = truth.tracks()
        used = [o for t in tracks for o in t.path.obs]
        assert len(used) == len(set(used))
        for t in tracks:
            assert all(truth.label(o) == truth.label(t.path.obs[0]) >= 0 for o in t.path.obs)
        n_fa = sum(int(np.sum(lab == FALSE_ALARM)) for lab in truth.labels)
        assert n_fa + len(used) == sc.n_obs


class TestFiles:
    @given(st.integers(0, 1000))
    def test_round_trip(self, seed):
        params = with_overrides(preset("simple"), K=8, lambda_b=0.5)
        sc, truth = simulate(params, seed=seed)
        with tempfile.TemporaryDirectory() as d:
            fn = os.path.join(d, "s.txt")
            save_scenario(fn, sc, truth, params, seed)
            sc2, truth2, params2, seed2 = load_scenario(fn)
        assert params2 == params and seed2 == seed
        for x, y in zip(sc.scans, sc2.scans):
            np.testing.assert_array_equal(x, y)
        assert truth2.tracks() == truth.tracks()
        for a, b in zip(truth.objects, truth2.objects):
            np.testing.assert_array_equal(a.states, b.states)

    def test_without_truth(self, tmp_path):
        sc, _ = simulate(with_overrides(preset("simple"), K=3), seed=0)
        fn = tmp_path / "s.txt"
        save_scenario(fn, sc)
        sc2, truth2, _, seed2 = load_scenario(fn)
        assert seed2 is None and sc2.n_obs == sc.n_obs
        assert truth2.objects == []

    @pytest.mark.parametrize("body,line", [
        ("posstrack-scenario 1\nparam K 2\nobs 1 0.0\n", 3),
        ("posstrack-scenario 1\nparam K 2\nobs 3 0.0 0.0 fa\n", 3),
        ("posstrack-scenario 1\nparam K x\n", 2),
        ("posstrack-scenario 1\nparam K 2\n\nwhat 1\n", 4),
        ("posstrack-scenario 1\nparam K 3\nstate 0 1 0 0 0 0\nstate 0 3 0 0 0 0\n", 3),
        ("other 1\n", 1),
        ("", 1),
    ])
    def test_malformed(self, tmp_path, body, line):
        fn = tmp_path / "bad.txt"
        fn.write_text(body)
        with pytest.raises(DataError) as info:
            load_scenario(fn)
        assert info.value.line == line

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_scenario(tmp_path / "none.txt")
