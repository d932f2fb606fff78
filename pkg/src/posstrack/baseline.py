"""Reference sampler with local moves only.

The chain runs on associations and targets the path marginal with the
intervals of existence maximised out.  Each iteration picks one of eight
move kinds uniformly; kinds come in reverse pairs (birth/death,
extend/reduce, split/merge) or are their own reverse (reassign, switch), so
the kind probabilities cancel in the acceptance ratio and only the
within-kind proposal probabilities are computed.

Births create two-observation paths, a uniformly drawn free observation
followed by a later one drawn in proportion to its consistency; deaths
remove two-observation paths.  Shorter and longer paths come from extend,
reduce, split and merge.
"""

from __future__ import annotations

import math
import time
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .consistency import ConsistencyIndex
from .errors import UsageError
from .mcmc import AnnealSchedule, TraceRecord, accept, accept_log_ratio, anneal_step
from .model import MultiObjectParams, Path, PathScorer, Scenario

__all__ = ["BASELINE_KINDS", "BaselineResult", "run_baseline"]

BASELINE_KINDS = ("birth", "death", "extend", "reduce", "split", "merge", "reassign", "switch")


@dataclass
class BaselineResult:
    best_tracks: frozenset
    best_log_pi: float
    paths: frozenset
    log_pi: float
    trace: list
    rejections: dict = field(default_factory=dict)
    visits: Counter | None = None
    partial: bool = False


def _pick(w, rng) -> int:
    i = int(np.searchsorted(np.cumsum(w), rng.random() * w.sum(), side="right"))
    return min(i, len(w) - 1)


class _State:
    """Association with bookkeeping of free observations."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.paths: set = set()
        self.free = [np.ones(scenario.size(k), dtype=bool) for k in range(1, scenario.K + 1)]
        self.n_free = scenario.n_obs

    def apply(self, removed, added):
        for p in removed:
            self.paths.discard(p)
            for k, j in p.obs:
                self.free[k - 1][j] = True
                self.n_free += 1
        for p in added:
            self.paths.add(p)
            for k, j in p.obs:
                self.free[k - 1][j] = False
                self.n_free -= 1


class _Moves:
    def __init__(self, scenario: Scenario, index: ConsistencyIndex, state: _State):
        self.scenario = scenario
        self.index = index
        self.state = state
        self.offsets = np.cumsum([0] + [scenario.size(k) for k in range(1, scenario.K + 1)])

    # each method returns (removed, added, log q_fwd, log q_rev) or None

    def _random_free(self, rng):
        st = self.state
        while True:
            flat = int(rng.integers(self.scenario.n_obs))
            k = int(np.searchsorted(self.offsets, flat, side="right"))
            j = flat - int(self.offsets[k - 1])
            if st.free[k - 1][j]:
                return k, j

    def birth(self, rng):
        """New two-observation path: a free observation and a consistent later one."""
        st = self.state
        if st.n_free < 2:
            return None
        z = self._random_free(rng)
        cands, w = self._extension_weights(Path((z,)), back=True)
        if not cands:
            return None
        i = _pick(w, rng)
        new = Path((z, cands[i]))
        n_pairs_after = sum(1 for p in st.paths if len(p) == 2) + 1
        return (), (new,), math.log(w[i] / w.sum()) - math.log(st.n_free), -math.log(n_pairs_after)

    def death(self, rng):
        st = self.state
        pairs = sorted(p for p in st.paths if len(p) == 2)
        if not pairs:
            return None
        p = pairs[int(rng.integers(len(pairs)))]
        z, z2 = p.obs
        cands, w = self._extension_weights(Path((z,)), back=True, extra_free=z2)
        if z2 not in cands:
            return (p,), (), -math.log(len(pairs)), -math.inf
        i = cands.index(z2)
        return (p,), (), -math.log(len(pairs)), math.log(w[i] / w.sum()) - math.log(st.n_free + 2)

    def _extension_weights(self, path: Path, back: bool, extra_free=None):
        """Candidate observations to extend ``path`` at one end, with consistency weights."""
        st = self.state
        cands, weights = [], []
        for lag in range(1, self.index.max_lag + 1):
            if back:
                k, j = path.obs[-1]
                block = self.index.blocks.get((k, lag))
                if block is None:
                    continue
                k2 = k + lag
                w = block[j].copy()
            else:
                k2 = path.first - lag
                block = self.index.blocks.get((k2, lag))
                if block is None:
                    continue
                w = block[:, path.obs[0][1]].copy()
            free = st.free[k2 - 1].copy()
            if extra_free is not None and extra_free[0] == k2:
                free[extra_free[1]] = True
            w[~free] = 0.0
            for j2 in np.flatnonzero(w):
                cands.append((k2, int(j2)))
                weights.append(w[j2])
        return cands, np.array(weights)

    def extend(self, rng):
        st = self.state
        if not st.paths:
            return None
        ordered = sorted(st.paths)
        p = ordered[int(rng.integers(len(ordered)))]
        back = bool(rng.integers(2))
        cands, w = self._extension_weights(p, back)
        if not cands:
            return None
        i = _pick(w, rng)
        z = cands[i]
        new = Path(p.obs + (z,)) if back else Path((z,) + p.obs)
        n_long_after = sum(1 for q in st.paths if len(q) >= 2) + (len(p) == 1)
        log_fwd = -math.log(len(ordered)) - math.log(2) + math.log(w[i] / w.sum())
        log_rev = -math.log(n_long_after) - math.log(2)
        return (p,), (new,), log_fwd, log_rev

    def reduce(self, rng):
        st = self.state
        longs = sorted(p for p in st.paths if len(p) >= 2)
        if not longs:
            return None
        p = longs[int(rng.integers(len(longs)))]
        back = bool(rng.integers(2))
        z = p.obs[-1] if back else p.obs[0]
        new = Path(p.obs[:-1]) if back else Path(p.obs[1:])
        cands, w = self._extension_weights(new, back, extra_free=z)
        if z not in cands:
            return (p,), (new,), -math.log(len(longs)) - math.log(2), -math.inf
        i = cands.index(z)
        log_fwd = -math.log(len(longs)) - math.log(2)
        log_rev = -math.log(len(st.paths)) - math.log(2) + math.log(w[i] / w.sum())
        return (p,), (new,), log_fwd, log_rev

    @staticmethod
    def _n_merge_pairs(paths) -> int:
        if len(paths) < 2:
            return 0
        lasts = np.sort([p.last for p in paths])
        firsts = np.array([p.first for p in paths])
        return int(np.searchsorted(lasts, firsts, side="left").sum())

    def split(self, rng):
        st = self.state
        longs = sorted(p for p in st.paths if len(p) >= 2)
        if not longs:
            return None
        p = longs[int(rng.integers(len(longs)))]
        cut = 1 + int(rng.integers(len(p) - 1))
        a, b = Path(p.obs[:cut]), Path(p.obs[cut:])
        after = (st.paths - {p}) | {a, b}
        log_fwd = -math.log(len(longs)) - math.log(len(p) - 1)
        return (p,), (a, b), log_fwd, -math.log(self._n_merge_pairs(after))

    def merge(self, rng):
        st = self.state
        ordered = sorted(st.paths)
        pairs = [(a, b) for a in ordered for b in ordered if a.last < b.first]
        if not pairs:
            return None
        a, b = pairs[int(rng.integers(len(pairs)))]
        new = Path(a.obs + b.obs)
        n_long_after = sum(1 for q in st.paths if len(q) >= 2) - (len(a) >= 2) - (len(b) >= 2) + 1
        log_rev = -math.log(n_long_after) - math.log(len(new) - 1)
        return (a, b), (new,), -math.log(len(pairs)), log_rev

    def reassign(self, rng):
        st = self.state
        if not st.paths:
            return None
        ordered = sorted(st.paths)
        p = ordered[int(rng.integers(len(ordered)))]
        i = int(rng.integers(len(p)))
        k, _ = p.obs[i]
        free = np.flatnonzero(st.free[k - 1])
        if free.size == 0:
            return None
        j2 = int(free[int(rng.integers(free.size))])
        new = Path(p.obs[:i] + ((k, j2),) + p.obs[i + 1:])
        # the reverse move sees the same number of paths, positions and free observations
        return (p,), (new,), 0.0, 0.0

    @staticmethod
    def _switch_outcomes(p: Path, q: Path) -> list:
        times = sorted(set(p.times) | set(q.times))
        out = []
        for t in times[:-1]:
            a = tuple(o for o in p.obs if o[0] <= t) + tuple(o for o in q.obs if o[0] > t)
            b = tuple(o for o in q.obs if o[0] <= t) + tuple(o for o in p.obs if o[0] > t)
            if not a or not b:
                continue
            pair = frozenset((Path(a), Path(b)))
            if pair != frozenset((p, q)):
                out.append(pair)
        return out

    def switch(self, rng):
        st = self.state
        if len(st.paths) < 2:
            return None
        ordered = sorted(st.paths)
        i, j = rng.choice(len(ordered), size=2, replace=False)
        p, q = ordered[int(i)], ordered[int(j)]
        outcomes = self._switch_outcomes(p, q)
        if not outcomes:
            return None
        pair = outcomes[int(rng.integers(len(outcomes)))]
        new_p, new_q = sorted(pair)
        back = self._switch_outcomes(new_p, new_q)
        old = frozenset((p, q))
        log_fwd = math.log(outcomes.count(pair) / len(outcomes))
        log_rev = math.log(back.count(old) / len(back))
        return (p, q), (new_p, new_q), log_fwd, log_rev


def run_baseline(scenario: Scenario, params: MultiObjectParams, iterations: int | None = None,
                 wall_secs: float | None = None, seed=None, c: float = 0.001, tau_prime: float = 1e-3,
                 index: ConsistencyIndex | None = None, scorer: PathScorer | None = None,
                 trace_every: int = 1, record_visits: bool = False, thin: int = 1) -> BaselineResult:
    """Local-move Metropolis-Hastings from the empty association.

    ``record_visits`` counts the association visited every ``thin``
    iterations, for checks against an enumerated target.
    """
    if iterations is None and wall_secs is None:
        raise UsageError("give an iteration budget, a wall-clock budget, or both")
    rng = np.random.default_rng(seed)
    if index is None:
        index = ConsistencyIndex(scenario, params, tau_prime)
    if scorer is None:
        scorer = PathScorer(scenario, params)
    state = _State(scenario)
    moves = _Moves(scenario, index, state)
    log_fa, log_birth = params.log_fa, params.log_birth

    def path_value(p):
        return scorer.best_interval(p)[0] + log_birth - len(p) * log_fa

    log_pi = scenario.n_obs * log_fa
    best, best_paths = log_pi, frozenset()
    schedule = AnnealSchedule(c)
    trace = []
    rejections = {}
    visits = Counter() if record_visits else None
    start = time.perf_counter()
    t = 0
    while True:
        if iterations is not None and t >= iterations:
            break
        if wall_secs is not None and time.perf_counter() - start >= wall_secs:
            break
        t += 1
        schedule = anneal_step(schedule)
        rho = schedule.rho
        kind = BASELINE_KINDS[int(rng.integers(len(BASELINE_KINDS)))]
        prop = getattr(moves, kind)(rng)
        accepted = False
        if prop is None:
            rejections["impossible"] = rejections.get("impossible", 0) + 1
        else:
            removed, added, log_fwd, log_rev = prop
            if log_rev == -math.inf:
                rejections["reverse-impossible"] = rejections.get("reverse-impossible", 0) + 1
            else:
                delta = sum(path_value(p) for p in added) - sum(path_value(p) for p in removed)
                if accept(accept_log_ratio(delta, 0.0, rho, log_rev, log_fwd), rng):
                    state.apply(removed, added)
                    log_pi += delta
                    accepted = True
                else:
                    rejections["ratio"] = rejections.get("ratio", 0) + 1
        if log_pi > best:
            best, best_paths = log_pi, frozenset(state.paths)
        if visits is not None and t % thin == 0:
            visits[frozenset(state.paths)] += 1
        if t % trace_every == 0:
            trace.append(TraceRecord(t, 1000.0 * (time.perf_counter() - start), log_pi, best, rho, kind,
                                     accepted, len(state.paths)))
    best_value, best_tracks = scorer.path_marginal_log(best_paths)
    paths = frozenset(state.paths)
    partial = iterations is not None and t < iterations
    return BaselineResult(best_tracks, best_value, paths, log_pi, trace, rejections, visits, partial)
