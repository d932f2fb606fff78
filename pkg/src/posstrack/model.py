"""Multi-object types and the target possibility over sets of tracks.

Observations are identified by ``(k, j)``: the 1-based time step and the
index within that scan.  A :class:`Path` lists the observations assigned to
one object; steps that are absent from it carry the empty observation.  A
:class:`Track` adds the appearance time and the last time of existence.

All credibilities are handled as unnormalised logarithms.
"""

from __future__ import annotations

import math
from collections.abc import Iterable
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import filtering
from .errors import InvalidAssociationError, UsageError
from .filtering import BirthPrior, LinearGaussianModel

__all__ = [
    "Scenario",
    "Path",
    "Track",
    "MultiObjectParams",
    "PathScorer",
    "kappa",
    "check_disjoint",
    "used_observations",
    "false_alarm_log",
    "birth_log",
    "path_log_credibility",
    "track_set_log_possibility",
    "path_marginal_log",
]

ObsId = tuple[int, int]


@dataclass(frozen=True, eq=False)
class Scenario:
    """Observation sets ``Z_1..Z_K``, one ``(n_k, d_z)`` array per step."""

    scans: tuple
    window: tuple | None = None

    def __post_init__(self):
        scans = tuple(np.asarray(s, dtype=float).reshape(len(s), -1) if len(s) else np.empty((0, 0))
                      for s in self.scans)
        dims = {s.shape[1] for s in scans if s.size}
        if len(dims) > 1:
            raise UsageError("all observations must share one dimension")
        dz = dims.pop() if dims else 2
        scans = tuple(s if s.size else np.empty((0, dz)) for s in scans)
        object.__setattr__(self, "scans", scans)

    @property
    def K(self) -> int:
        return len(self.scans)

    @property
    def dim(self) -> int:
        return self.scans[0].shape[1] if self.scans else 0

    def size(self, k: int) -> int:
        return self.scans[k - 1].shape[0]

    @cached_property
    def n_obs(self) -> int:
        return sum(s.shape[0] for s in self.scans)

    def value(self, obs: ObsId) -> np.ndarray:
        k, j = obs
        return self.scans[k - 1][j]

    def ids(self):
        for k, s in enumerate(self.scans, start=1):
            for j in range(s.shape[0]):
                yield (k, j)


@dataclass(frozen=True, order=True)
class Path:
    """Observations of one object, as ``(k, j)`` pairs in increasing time."""

    obs: tuple

    def __post_init__(self):
        obs = tuple((int(k), int(j)) for k, j in self.obs)
        if not obs:
            raise UsageError("a path needs at least one observation")
        times = [k for k, _ in obs]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise UsageError(f"path times must be strictly increasing, got {times}")
        object.__setattr__(self, "obs", obs)

    @property
    def first(self) -> int:
        return self.obs[0][0]

    @property
    def last(self) -> int:
        return self.obs[-1][0]

    @property
    def times(self) -> tuple:
        return tuple(k for k, _ in self.obs)

    def at(self, k: int):
        """Observation id at step ``k`` or ``None`` for the empty observation."""
        for obs in self.obs:
            if obs[0] == k:
                return obs
        return None

    def __len__(self):
        return len(self.obs)

    def __iter__(self):
        return iter(self.obs)


@dataclass(frozen=True, order=True)
class Track:
    """A path with appearance time ``appear`` and last time of existence ``last``."""

    path: Path
    appear: int
    last: int

    def __post_init__(self):
        if not (1 <= self.appear <= self.path.first and self.path.last <= self.last):
            raise UsageError(
                f"interval [{self.appear}, {self.last}] does not cover path times "
                f"[{self.path.first}, {self.path.last}]"
            )


def kappa(tracks: Iterable[Track]) -> frozenset:
    """Set of paths of a set of tracks."""
    return frozenset(t.path for t in tracks)


def used_observations(paths: Iterable[Path]) -> set:
    return {obs for p in paths for obs in p.obs}


def check_disjoint(paths: Iterable[Path]) -> None:
    seen = set()
    for p in paths:
        for obs in p.obs:
            if obs in seen:
                raise InvalidAssociationError(f"observation {obs} is used by two paths")
            seen.add(obs)


@dataclass(frozen=True, eq=False)
class MultiObjectParams:
    """Credibilities of the multi-object model and the single-object model.

    Detection and survival have credibility 1; ``alpha_nd`` and ``alpha_ns``
    are the (state-independent) credibilities of detection failure and of
    non-survival.
    """

    alpha_nd: float = 0.1
    alpha_ns: float = 0.01
    alpha_fa: float = 1e-2
    alpha_birth: float = 1e-4
    model: LinearGaussianModel = field(default_factory=LinearGaussianModel.ncv)
    birth: BirthPrior = field(default_factory=BirthPrior)

    def __post_init__(self):
        for name in ("alpha_nd", "alpha_ns", "alpha_fa", "alpha_birth"):
            value = getattr(self, name)
            if not 0 < value < 1:
                raise UsageError(f"{name} must lie in (0, 1), got {value}")

    @classmethod
    def from_probabilities(cls, p_d: float, p_s: float = 0.99, **kwargs):
        """Credibilities of failure set to one minus the simulation probabilities."""
        return cls(alpha_nd=1.0 - p_d, alpha_ns=1.0 - p_s, **kwargs)

    @property
    def log_nd(self) -> float:
        return math.log(self.alpha_nd)

    @property
    def log_ns(self) -> float:
        return math.log(self.alpha_ns)

    @property
    def log_fa(self) -> float:
        return math.log(self.alpha_fa)

    @property
    def log_birth(self) -> float:
        return math.log(self.alpha_birth)


class PathScorer:
    """Evaluates path and track credibilities for one scenario, with caching.

    ``particles > 0`` switches the single-object marginal likelihood from the
    Kalman recursion to the particle analogue; the particle stream for each
    path is seeded from the path itself so that the score stays a
    deterministic function of the path.
    """

    def __init__(self, scenario: Scenario, params: MultiObjectParams, particles: int = 0,
                 seed: int = 0, cache_size: int = 200_000):
        self.scenario = scenario
        self.params = params
        self.particles = int(particles)
        self.seed = seed
        self.cache_size = cache_size
        self._loglik = {}
        self._best = {}
        model = params.model
        dz = model.dim_obs
        Fvv, Fvp = model.F[dz:, dz:], model.F[dz:, :dz]
        # velocity covariance then grows monotonically with the gap
        self._monotone_gap = not np.any(Fvp) and np.array_equal(Fvv, np.eye(Fvv.shape[0]))
        if self.particles:
            self._sampler = filtering.gaussian_transition_sampler(model)
            self._particle_loglik = filtering.gaussian_log_likelihood(model)

    def _remember(self, cache, key, value):
        if len(cache) >= self.cache_size:
            cache.clear()
        cache[key] = value

    def loglik(self, path: Path, gap: int = 0) -> float:
        """Sum of log marginal likelihoods after the first detection.

        ``gap`` is the number of undetected steps between appearance and the
        first detection.
        """
        key = (path, gap)
        value = self._loglik.get(key)
        if value is None:
            value = self._particle_loglik_path(path, gap) if self.particles else self._kalman_loglik(path, gap)
            self._remember(self._loglik, key, value)
        return value

    def _kalman_loglik(self, path, gap):
        model = self.params.model
        F, Q, H, R = model.F, model.Q, model.H, model.R
        g = self.params.birth.posterior(self.scenario.value(path.obs[0]), model, gap)
        m, P = g.mean, g.cov
        total = 0.0
        k = path.first
        for obs in path.obs[1:]:
            while k < obs[0]:
                m, P = filtering._predict_arrays(m, P, F, Q)
                k += 1
            m, P, lm = filtering._update_arrays(m, P, self.scenario.value(obs), H, R)
            total += lm
        return total

    def _particle_loglik_path(self, path, gap):
        model = self.params.model
        rng = np.random.default_rng([self.seed, *np.array(path.obs).ravel().tolist(), gap])
        g = self.params.birth.posterior(self.scenario.value(path.obs[0]), model, gap)
        belief = filtering.particles_from_gaussian(g, self.particles, rng)
        total = 0.0
        k = path.first
        for obs in path.obs[1:]:
            while k < obs[0]:
                belief = filtering.particle_predict(belief, self._sampler, rng)
                k += 1
            belief, lm = filtering.particle_update(belief, self.scenario.value(obs), self._particle_loglik)
            total += lm
        return total

    def _interval_terms(self, path: Path, m: int, n: int) -> float:
        """Detection-failure and non-survival terms of the interval ``[m, n]``."""
        p = self.params
        K = self.scenario.K
        missed = (path.first - m) + (path.last - path.first + 1 - len(path)) + (n - path.last)
        return missed * p.log_nd + (p.log_ns if n < K else 0.0)

    def log_credibility(self, path: Path, m: int, n: int) -> float:
        """Log of the sup over trajectories of the joint credibility of ``(path, n)`` given ``m``."""
        if not (1 <= m <= path.first and path.last <= n <= self.scenario.K):
            raise UsageError(f"invalid interval [{m}, {n}] for path spanning [{path.first}, {path.last}]")
        return self.loglik(path, path.first - m) + self._interval_terms(path, m, n)

    def track_log_credibility(self, track: Track) -> float:
        return self.log_credibility(track.path, track.appear, track.last)

    def best_interval(self, path: Path) -> tuple[float, int, int]:
        """Maximise :meth:`log_credibility` over ``m`` and ``n``.

        Every ``n`` is scanned.  Appearance times are scanned from the first
        detection backwards; when the gap only widens the velocity prior, the
        likelihood at the largest gap bounds all others and the scan stops as
        soon as the detection-failure penalty alone exceeds the margin.
        """
        hit = self._best.get(path)
        if hit is not None:
            return hit
        p = self.params
        K = self.scenario.K
        n_best, n_val = path.last, -math.inf
        for n in range(path.last, K + 1):
            v = (n - path.last) * p.log_nd + (p.log_ns if n < K else 0.0)
            if v > n_val:
                n_best, n_val = n, v
        inner = (path.last - path.first + 1 - len(path)) * p.log_nd
        max_gap = path.first - 1
        bound = self.loglik(path, max_gap) if (self._monotone_gap and not self.particles) else 0.0
        best, m_best = -math.inf, path.first
        for gap in range(0, max_gap + 1):
            if gap * p.log_nd + bound < best:
                break
            v = gap * p.log_nd + self.loglik(path, gap)
            if v > best:
                best, m_best = v, path.first - gap
        result = (best + inner + n_val, m_best, n_best)
        self._remember(self._best, path, result)
        return result

    def false_alarm_log(self, paths: Iterable[Path]) -> float:
        used = sum(len(p) for p in paths)
        return (self.scenario.n_obs - used) * self.params.log_fa

    def track_set_log_possibility(self, tracks: Iterable[Track]) -> float:
        tracks = list(tracks)
        paths = [t.path for t in tracks]
        check_disjoint(paths)
        return (self.false_alarm_log(paths) + len(tracks) * self.params.log_birth
                + sum(self.track_log_credibility(t) for t in tracks))

    def path_marginal_log(self, paths: Iterable[Path]) -> tuple[float, frozenset]:
        paths = list(paths)
        check_disjoint(paths)
        total = self.false_alarm_log(paths) + len(paths) * self.params.log_birth
        tracks = []
        for path in paths:
            v, m, n = self.best_interval(path)
            total += v
            tracks.append(Track(path, m, n))
        return total, frozenset(tracks)


def false_alarm_log(paths: Iterable[Path], scenario: Scenario, alpha_fa: float) -> float:
    """``sum_k |Z_k,fa| log alpha_fa`` for the observations left unassigned by ``paths``."""
    paths = list(paths)
    check_disjoint(paths)
    return (scenario.n_obs - sum(len(p) for p in paths)) * math.log(alpha_fa)


def birth_log(tracks: Iterable[Track], alpha_birth: float) -> float:
    return sum(1 for _ in tracks) * math.log(alpha_birth)


def path_log_credibility(path: Path, m: int, n: int, scenario: Scenario, params: MultiObjectParams) -> float:
    return PathScorer(scenario, params).log_credibility(path, m, n)


def track_set_log_possibility(tracks: Iterable[Track], scenario: Scenario, params: MultiObjectParams) -> float:
    return PathScorer(scenario, params).track_set_log_possibility(tracks)


def path_marginal_log(paths: Iterable[Path], scenario: Scenario, params: MultiObjectParams):
    """Best log-possibility over track sets with the given paths, and the maximiser."""
    return PathScorer(scenario, params).path_marginal_log(paths)
