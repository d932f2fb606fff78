import math
from collections import Counter, defaultdict

import numpy as np
import pytest

from posstrack.baseline import BASELINE_KINDS, _Moves, _State, run_baseline
from posstrack.consistency import ConsistencyIndex
from posstrack.errors import UsageError
from posstrack.mcmc import TRACE_FIELDS, TraceRecord
from posstrack.model import PathScorer

from helpers import crossing_scenario, enumerate_associations, flat_params, tiny_scenario

REVERSE = {"birth": "death", "death": "birth", "extend": "reduce", "reduce": "extend", "split": "merge",
           "merge": "split", "reassign": "reassign", "switch": "switch"}
DRAWS = 400


@pytest.fixture(scope="module")
def proposal_table():
    """Outcomes of every move kind from every association of the tiny scenario."""
    sc = tiny_scenario()
    params = flat_params()
    index = ConsistencyIndex(sc, params, tau_prime=1e-3)
    rng = np.random.default_rng(0)
    table = {}
    for A in enumerate_associations(sc):
        state = _State(sc)
        state.apply((), A)
        moves = _Moves(sc, index, state)
        for kind in BASELINE_KINDS:
            seen = defaultdict(list)
            none = 0
            for _ in range(DRAWS):
                prop = getattr(moves, kind)(rng)
                if prop is None:
                    none += 1
                    continue
                removed, added, log_fwd, log_rev = prop
                after = (A - frozenset(removed)) | frozenset(added)
                seen[after].append((log_fwd, log_rev))
            table[(A, kind)] = (dict(seen), none)
    return table


class TestMoves:
    def test_reported_probabilities_are_consistent(self, proposal_table):
        for (A, kind), (seen, _) in proposal_table.items():
            for after, values in seen.items():
                assert len(set(values)) == 1, (kind, A, after)
                assert after != A

    def test_forward_probabilities_match_frequencies(self, proposal_table):
        for (A, kind), (seen, _) in proposal_table.items():
            if kind in ("reassign", "switch"):
                continue
            total = 0.0
            for after, values in seen.items():
                p = math.exp(values[0][0])
                total += p
                freq = len(values) / DRAWS
                assert abs(freq - p) <= 5 * math.sqrt(p * (1 - p) / DRAWS) + 1e-9, (kind, A, after)
            assert total <= 1.0 + 1e-12

    def test_reverse_probabilities_match_reverse_moves(self, proposal_table):
        checked = 0
        for (A, kind), (seen, _) in proposal_table.items():
            for after, values in seen.items():
                log_fwd, log_rev = values[0]
                back, _ = proposal_table[(after, REVERSE[kind])]
                if log_rev == -math.inf:
                    assert A not in back
                    continue
                if A in back:
                    if kind in ("reassign", "switch"):
                        # relative ratios: only the difference is meaningful
                        assert back[A][0][0] - back[A][0][1] == pytest.approx(log_rev - log_fwd, abs=1e-12)
                    else:
                        assert back[A][0][0] == pytest.approx(log_rev, abs=1e-12)
                    checked += 1
                else:
                    # a reverse that was never drawn must be rare
                    assert kind in ("reassign", "switch") or math.exp(log_rev) < 0.05
        assert checked > 500

    def test_symmetric_kinds_by_frequency(self, proposal_table):
        """Relative kinds: empirical forward and backward frequencies follow the reported ratio."""
        for (A, kind), (seen, _) in proposal_table.items():
            if kind not in ("reassign", "switch"):
                continue
            for after, values in seen.items():
                back, _ = proposal_table[(after, kind)]
                n_fwd, n_back = len(values), len(back.get(A, ()))
                ratio = math.exp(values[0][0] - values[0][1])
                # binomial split of n_fwd + n_back draws
                p = ratio / (1 + ratio)
                n = n_fwd + n_back
                assert abs(n_fwd - n * p) <= 5 * math.sqrt(n * p * (1 - p)) + 1


class TestRun:
    def test_zero_iterations(self):
        sc, _ = crossing_scenario(K=4, clutter=1)
        params = flat_params()
        res = run_baseline(sc, params, iterations=0, seed=0)
        assert res.best_tracks == frozenset() and res.trace == []
        assert res.best_log_pi == pytest.approx(sc.n_obs * params.log_fa)

    def test_budget_required(self):
        with pytest.raises(UsageError):
            run_baseline(tiny_scenario(), flat_params())

    def test_trace_schema_and_best(self):
        sc, _ = crossing_scenario(K=6, clutter=1)
        params = flat_params()
        res = run_baseline(sc, params, iterations=500, seed=3, c=0.01)
        assert all(isinstance(r, TraceRecord) for r in res.trace)
        assert list(vars(res.trace[0])) == TRACE_FIELDS
        assert {r.move_kind for r in res.trace} <= set(BASELINE_KINDS)
        best = [r.log_pi_best for r in res.trace]
        assert all(b2 >= b1 for b1, b2 in zip(best, best[1:]))
        scorer = PathScorer(sc, params)
        assert res.log_pi == pytest.approx(scorer.path_marginal_log(res.paths)[0])
        assert res.best_log_pi == pytest.approx(best[-1])
        assert res.best_log_pi == pytest.approx(scorer.track_set_log_possibility(res.best_tracks))

    def test_deterministic(self):
        sc, _ = crossing_scenario(K=5, clutter=1)
        a = run_baseline(sc, flat_params(), iterations=300, seed=5)
        b = run_baseline(sc, flat_params(), iterations=300, seed=5)
        assert a.paths == b.paths and [r.log_pi_current for r in a.trace] == [r.log_pi_current for r in b.trace]

    def test_visits_follow_target(self):
        """Short run: the most visited association is the most credible one."""
        sc = tiny_scenario()
        params = flat_params()
        res = run_baseline(sc, params, iterations=60000, seed=1, c=0.0, record_visits=True, thin=10)
        scorer = PathScorer(sc, params)
        target = {A: scorer.path_marginal_log(A)[0] for A in enumerate_associations(sc)}
        assert set(res.visits) <= set(target)
        top = max(target, key=target.get)
        assert res.visits.most_common(1)[0][0] == top
