"""Path proposals from a modified possibilistic HISP filter.

Starting from seed observations, the filter grows one path per seed forward
in time.  At every step each live path draws one observation (or the empty
observation) from the maximum-entropy distribution bounded by its marginal
association credibility; a draw where two paths take the same observation
abandons the whole proposal.  The probability of the generated set of paths
is accumulated on the way, and the same computation can be replayed with
forced choices to evaluate the probability of any given set of paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import filtering
from .errors import UsageError
from .model import MultiObjectParams, Path, Scenario
from .possibility import max_entropy_weights

__all__ = [
    "LivePath",
    "FilterOutcome",
    "OVERLAP_REJECTED",
    "HispFilter",
    "survival_credibilities",
    "log_survival_credibilities",
    "log_phi_likelihood",
    "gamma_product",
    "leave_one_out_table",
    "association_log_credibilities",
    "run_filter",
    "evaluate_filter",
    "full_availability",
]


class _OverlapRejected:
    def __repr__(self):
        return "OVERLAP_REJECTED"

    def __bool__(self):
        return False


#: Returned by :func:`run_filter` when two paths drew the same observation.
OVERLAP_REJECTED = _OverlapRejected()


def survival_credibilities(gap: int, alpha_nd: float, alpha_ns: float) -> tuple[float, float]:
    """Credibility that the object survived / did not survive since its last detection."""
    if gap < 0:
        raise UsageError("gap must be non-negative")
    stay = alpha_nd**gap
    top = max(alpha_ns, stay)
    return stay / top, alpha_ns / top


def log_survival_credibilities(gap: int, params: MultiObjectParams) -> tuple[float, float]:
    stay = gap * params.log_nd
    top = max(params.log_ns, stay)
    return stay - top, params.log_ns - top


def log_phi_likelihood(gap: int, params: MultiObjectParams) -> float:
    """Log credibility of extending a path with the empty observation."""
    log_s, log_ns = log_survival_credibilities(gap, params)
    return max(log_ns, log_s + max(params.log_ns, params.log_nd))


def gamma_product(log_lik, log_lik_phi, log_fa: float) -> float:
    """Log credibility for paths to be associated with observations, in product form.

    ``log_lik[o, z]`` and ``log_lik_phi[o]`` are the log marginal likelihoods of
    each path for each observation and for the empty observation; every
    observation has false-alarm credibility ``exp(log_fa)``.
    """
    log_lik = np.asarray(log_lik, dtype=float)
    log_lik_phi = np.asarray(log_lik_phi, dtype=float)
    n_paths = log_lik_phi.size
    n_obs = log_lik.shape[1] if log_lik.ndim == 2 else 0
    total = n_obs * log_fa
    if n_paths == 0:
        return total
    if n_obs:
        per_path = np.maximum(log_lik_phi, (log_lik - log_fa).max(axis=1))
    else:
        per_path = log_lik_phi
    return total + float(per_path.sum())


def leave_one_out_table(log_lik, log_lik_phi, log_fa: float) -> np.ndarray:
    """All ``log Gamma(Z minus {z} | O minus {o})`` in ``O(|O| |Z|)``.

    Returns an array of shape ``(|O|, |Z| + 1)``; column 0 corresponds to
    removing the empty observation, i.e. keeping all of ``Z``.
    """
    log_lik = np.asarray(log_lik, dtype=float).reshape(len(log_lik_phi), -1)
    log_lik_phi = np.asarray(log_lik_phi, dtype=float)
    n_paths, n_obs = log_lik.shape
    table = np.empty((n_paths, n_obs + 1))
    if n_paths == 0:
        return table
    if n_obs == 0:
        total = log_lik_phi.sum()
        table[:, 0] = total - log_lik_phi
        return table
    ratio = log_lik - log_fa
    best = np.argmax(ratio, axis=1)
    rows = np.arange(n_paths)
    first = ratio[rows, best]
    if n_obs > 1:
        masked = ratio.copy()
        masked[rows, best] = -np.inf
        second = masked.max(axis=1)
    else:
        second = np.full(n_paths, -np.inf)
    full = np.maximum(log_lik_phi, first)
    minus = np.maximum(log_lik_phi, second)
    total = full.sum()
    # loss incurred at column z by every path whose best observation is z
    loss = np.bincount(best, weights=minus - full, minlength=n_obs)
    table[:, 0] = n_obs * log_fa + total - full
    own = np.broadcast_to(full[:, None], (n_paths, n_obs)).copy()
    own[rows, best] = minus
    table[:, 1:] = (n_obs - 1) * log_fa + total + loss[None, :] - own
    return table


def association_log_credibilities(log_lik, log_lik_phi, log_fa: float) -> np.ndarray:
    """Un-normalised log marginal association credibilities, column 0 for the empty observation."""
    log_lik = np.asarray(log_lik, dtype=float).reshape(len(log_lik_phi), -1)
    table = leave_one_out_table(log_lik, log_lik_phi, log_fa)
    own = np.concatenate([np.asarray(log_lik_phi, dtype=float)[:, None], log_lik], axis=1)
    return table + own


@dataclass
class LivePath:
    """A path being grown by the filter, with its current belief."""

    seed: tuple
    obs: list
    mean: np.ndarray
    cov: np.ndarray
    gap: int = 0


@dataclass(frozen=True)
class FilterOutcome:
    """Paths created from the seeds (in seed order) and the log probability of generating them."""

    created: tuple
    log_prob: float


def full_availability(scenario: Scenario) -> list:
    return [np.ones(scenario.size(k), dtype=bool) for k in range(1, scenario.K + 1)]


class HispFilter:
    """One run of the proposal filter, either sampling or replaying forced choices.

    Parameters
    ----------
    seeds : iterable of (k, j)
        Initial observations; one path is created per seed.
    available : list of boolean arrays
        ``available[k-1][j]`` is true when observation ``(k, j)`` may be used.
    forced : dict, optional
        Maps each seed to the target :class:`Path` to replay.
    """

    def __init__(self, scenario: Scenario, params: MultiObjectParams, seeds, available, forced=None):
        self.scenario = scenario
        self.params = params
        self.available = available
        seeds = sorted(tuple(s) for s in seeds)
        if len(set(seeds)) != len(seeds):
            raise UsageError("seeds must be distinct")
        for k, j in seeds:
            if not (1 <= k <= scenario.K and 0 <= j < scenario.size(k)):
                raise UsageError(f"seed {(k, j)} is not an observation of the scenario")
            if not available[k - 1][j]:
                raise UsageError(f"seed {(k, j)} is not available")
        self.seeds_at = {}
        for s in seeds:
            self.seeds_at.setdefault(s[0], []).append(s)
        self.forced = forced
        self.live: list[LivePath] = []
        self.log_prob = 0.0
        self.k = 0

    def step(self, rng=None):
        """Advance one time step.

        Returns the log-probability increment, ``-inf`` when a forced choice is
        impossible, or :data:`OVERLAP_REJECTED` when sampled paths collide.
        """
        self.k += 1
        k = self.k
        params = self.params
        model = params.model
        due = self.seeds_at.get(k, ())
        mask = self.available[k - 1]
        if due:
            mask = mask.copy()
            for _, j in due:
                mask[j] = False
        cand = np.flatnonzero(mask)
        increment = 0.0
        if self.live:
            Z = self.scenario.scans[k - 1][cand]
            n_live = len(self.live)
            log_lik = np.empty((n_live, cand.size))
            log_lik_phi = np.empty(n_live)
            predicted = []
            F, Q, H, R = model.F, model.Q, model.H, model.R
            for i, lp in enumerate(self.live):
                m, P = filtering._predict_arrays(lp.mean, lp.cov, F, Q)
                predicted.append((m, P))
                zhat, S = filtering._innovation(m, P, H, R)
                log_s, _ = log_survival_credibilities(lp.gap, params)
                if cand.size:
                    d = Z - zhat
                    maha = np.einsum("ij,ij->i", d, np.linalg.solve(S, d.T).T)
                    log_lik[i] = log_s - 0.5 * maha
                log_lik_phi[i] = log_phi_likelihood(lp.gap, params)
            log_gamma = association_log_credibilities(log_lik, log_lik_phi, params.log_fa)
            taken = set()
            choices = []
            for i, lp in enumerate(self.live):
                weights = np.exp(log_gamma[i] - log_gamma[i].max())
                p = max_entropy_weights(weights)
                if self.forced is None:
                    idx = int(np.searchsorted(np.cumsum(p), rng.random(), side="right"))
                    idx = min(idx, p.size - 1)
                    while p[idx] == 0:
                        idx -= 1
                else:
                    target = self.forced[lp.seed].at(k)
                    if target is None:
                        idx = 0
                    else:
                        pos = np.searchsorted(cand, target[1])
                        if pos >= cand.size or cand[pos] != target[1]:
                            return self._fail()
                        idx = int(pos) + 1
                    if p[idx] == 0:
                        return self._fail()
                increment += math.log(p[idx])
                if idx:
                    if idx in taken:
                        if self.forced is None:
                            self.log_prob = -math.inf
                            return OVERLAP_REJECTED
                        return self._fail()
                    taken.add(idx)
                choices.append(idx)
            for lp, (m, P), idx in zip(self.live, predicted, choices):
                if idx:
                    j = int(cand[idx - 1])
                    lp.mean, lp.cov, _ = filtering._update_arrays(m, P, self.scenario.scans[k - 1][j], H, R)
                    lp.obs.append((k, j))
                    lp.gap = 0
                else:
                    lp.mean, lp.cov = m, P
                    lp.gap += 1
        for seed in due:
            g = params.birth.posterior(self.scenario.value(seed), model)
            self.live.append(LivePath(seed, [seed], g.mean, g.cov))
        self.log_prob += increment
        return increment

    def _fail(self):
        self.log_prob = -math.inf
        return -math.inf

    def run(self, rng=None):
        """Run all steps; returns a :class:`FilterOutcome` or :data:`OVERLAP_REJECTED`."""
        while self.k < self.scenario.K:
            out = self.step(rng)
            if out is OVERLAP_REJECTED:
                return OVERLAP_REJECTED
            if out == -math.inf:
                return FilterOutcome((), -math.inf)
        created = tuple(Path(tuple(lp.obs)) for lp in self.live)
        return FilterOutcome(created, self.log_prob)


def run_filter(scenario: Scenario, params: MultiObjectParams, seeds, available, rng: np.random.Generator):
    """Sample one path per seed; returns a :class:`FilterOutcome` or :data:`OVERLAP_REJECTED`."""
    return HispFilter(scenario, params, seeds, available).run(rng)


def evaluate_filter(scenario: Scenario, params: MultiObjectParams, targets, available, seeds=None) -> float:
    """Log probability that :func:`run_filter` generates exactly ``targets``.

    Each target is seeded at its first observation.  Returns ``-inf`` if a
    target uses an unavailable observation, if targets overlap, or if any
    forced choice has zero probability.
    """
    targets = list(targets)
    first = [p.obs[0] for p in targets]
    if seeds is not None:
        seeds = {tuple(s) for s in seeds}
        missing = [s for s in first if s not in seeds]
        if missing or len(seeds) != len(first):
            raise UsageError(f"targets and seeds do not match: {missing or sorted(seeds)}")
    if len(set(first)) != len(first):
        return -math.inf
    for k, j in first:
        if not available[k - 1][j]:
            return -math.inf
    forced = {p.obs[0]: p for p in targets}
    out = HispFilter(scenario, params, first, available, forced=forced).run()
    return out.log_prob
