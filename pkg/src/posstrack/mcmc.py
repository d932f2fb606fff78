"""Annealed Metropolis-Hastings over data associations and track sets.

A move removes a few paths from the current association, picks seed
observations among the ones left free, regrows paths from the seeds with
the HISP proposal filter and puts the result back.  Every factor of the
proposal probability is evaluated both for the move and for its reverse,
which swaps the roles of the removed and created paths.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import hisp
from .consistency import ConsistencyIndex
from .errors import UsageError
from .model import MultiObjectParams, Path, PathScorer, Scenario, Track
from .possibility import max_entropy_weights

__all__ = [
    "PC_OPTIONS",
    "ProposalConfig",
    "AnnealSchedule",
    "anneal_step",
    "ChainConfig",
    "TraceRecord",
    "MoveRecord",
    "ChainResult",
    "MoveContext",
    "Proposal",
    "truncated_poisson_log_pmf",
    "counts_log_prob",
    "sample_counts",
    "select_reassign",
    "eval_select_reassign",
    "select_seeds",
    "eval_select_seeds",
    "propose",
    "interval_pmfs",
    "propose_intervals",
    "eval_intervals",
    "accept_log_ratio",
    "accept",
    "run_chain",
    "write_trace",
    "read_trace",
]

#: Distributions of the change in the number of paths, on (-1, 0, +1).
PC_OPTIONS = {
    "-1": (0.5, 0.25, 0.25),
    "0": (0.25, 0.5, 0.25),
    "+1": (0.25, 0.25, 0.5),
    "uniform": (1 / 3, 1 / 3, 1 / 3),
}


@dataclass(frozen=True)
class ProposalConfig:
    lambda_r: float = 1.0
    pc_tilde: tuple = PC_OPTIONS["-1"]

    def __post_init__(self):
        if not self.lambda_r > 0:
            raise UsageError("lambda_r must be positive")
        if len(self.pc_tilde) != 3 or min(self.pc_tilde) < 0 or abs(sum(self.pc_tilde) - 1) > 1e-12:
            raise UsageError("pc_tilde must be a probability vector on (-1, 0, +1)")


@dataclass(frozen=True)
class AnnealSchedule:
    """Inverse temperature ``rho_t = (1 - c)^-t``."""

    c: float = 0.001
    t: int = 0

    def __post_init__(self):
        if not 0 <= self.c < 1:
            raise UsageError(f"cooling constant must lie in [0, 1), got {self.c}")

    @property
    def rho(self) -> float:
        """Saturates to ``inf`` once the power overflows a float."""
        try:
            return (1.0 - self.c) ** (-self.t)
        except OverflowError:
            return math.inf


def anneal_step(schedule: AnnealSchedule) -> AnnealSchedule:
    return AnnealSchedule(schedule.c, schedule.t + 1)


# ---------------------------------------------------------------------------
# number of removed and created paths


def truncated_poisson_log_pmf(n: int, upper: int, lam: float) -> float:
    if not 0 <= n <= upper:
        return -math.inf
    logs = [i * math.log(lam) - math.lgamma(i + 1) for i in range(upper + 1)]
    top = max(logs)
    return logs[n] - (top + math.log(sum(math.exp(v - top) for v in logs)))


def counts_log_prob(s: int, n_r: int, n_c: int, config: ProposalConfig) -> float:
    """Log probability of removing ``n_r`` and creating ``n_c`` paths from an association of size ``s``."""
    log_r = truncated_poisson_log_pmf(n_r, s, config.lambda_r)
    if n_r == 0:
        return log_r if n_c == 1 else -math.inf
    delta = n_c - n_r
    if delta not in (-1, 0, 1) or config.pc_tilde[delta + 1] == 0:
        return -math.inf
    return log_r + math.log(config.pc_tilde[delta + 1])


def sample_counts(s: int, config: ProposalConfig, rng: np.random.Generator) -> tuple[int, int, float]:
    logs = np.array([truncated_poisson_log_pmf(n, s, config.lambda_r) for n in range(s + 1)])
    p = np.exp(logs - logs.max())
    n_r = _draw(p / p.sum(), rng)
    if n_r == 0:
        n_c = 1
    else:
        n_c = n_r + _draw(np.asarray(config.pc_tilde), rng) - 1
    return n_r, n_c, counts_log_prob(s, n_r, n_c, config)


def _draw(p, rng) -> int:
    idx = int(np.searchsorted(np.cumsum(p), rng.random() * p.sum(), side="right"))
    idx = min(idx, len(p) - 1)
    while p[idx] == 0:
        idx -= 1
    return idx


# ---------------------------------------------------------------------------
# sampling without replacement from max-entropy distributions


def _restricted_pmf(bound: np.ndarray, excluded) -> np.ndarray:
    """Max-entropy pmf bounded by ``bound`` with the ``excluded`` entries removed.

    The restricted bound is sup-normalised; when it vanishes everywhere the
    remaining entries are drawn uniformly.
    """
    b = bound.copy()
    excluded = list(excluded)
    b[excluded] = 0.0
    top = b.max()
    if top > 0:
        return max_entropy_weights(b / top)
    allowed = np.ones(b.size)
    allowed[excluded] = 0.0
    return allowed / allowed.sum()


class _SetProbability:
    """Probability that sequential draws without replacement produce a given set, in any order."""

    def __init__(self, bound, base=()):
        self.bound = np.asarray(bound, dtype=float)
        self.base = frozenset(base)
        self._pmf = {}
        self._prob = {frozenset(): 1.0}

    def pmf(self, chosen: frozenset) -> np.ndarray:
        p = self._pmf.get(chosen)
        if p is None:
            p = _restricted_pmf(self.bound, self.base | chosen)
            self._pmf[chosen] = p
        return p

    def __call__(self, subset: frozenset) -> float:
        hit = self._prob.get(subset)
        if hit is not None:
            return hit
        total = 0.0
        for x in subset:
            rest = subset - {x}
            total += self(rest) * self.pmf(rest)[x]
        self._prob[subset] = total
        return total

    def sample(self, n: int, rng) -> list:
        chosen = frozenset()
        for _ in range(n):
            x = _draw(self.pmf(chosen), rng)
            chosen = chosen | {x}
        return sorted(chosen)


class MoveContext:
    """Everything a move needs about the scenario, with caches shared across moves."""

    def __init__(self, scenario: Scenario, params: MultiObjectParams, index: ConsistencyIndex,
                 config: ProposalConfig = ProposalConfig()):
        self.scenario = scenario
        self.params = params
        self.index = index
        self.config = config
        self._pair = {}
        self._intervals = {}
        flat = [(k, j) for k in range(1, scenario.K + 1) for j in range(scenario.size(k))]
        self.obs_ids = flat
        self.offsets = np.cumsum([0] + [scenario.size(k) for k in range(1, scenario.K + 1)])
        self.marginal_flat = np.concatenate(index.marginal) if flat else np.zeros(0)

    def path_consistency(self, a: Path, b: Path) -> float:
        key = (a, b) if a <= b else (b, a)
        value = self._pair.get(key)
        if value is None:
            if len(self._pair) > 500_000:
                self._pair.clear()
            value = self.index.path_path_consistency(a, b)
            self._pair[key] = value
        return value

    def availability(self, kept) -> list:
        avail = hisp.full_availability(self.scenario)
        for path in kept:
            for k, j in path.obs:
                avail[k - 1][j] = False
        return avail


def _path_bound(ctx: MoveContext, paths: list, first: int) -> np.ndarray:
    ref = paths[first]
    return np.array([0.0 if i == first else ctx.path_consistency(ref, p) for i, p in enumerate(paths)])


def select_reassign(paths: list, n_r: int, ctx: MoveContext, rng) -> tuple[list, float]:
    """Pick ``n_r`` paths: the first uniformly, the others near it.

    ``paths`` must be in a canonical order (sorted).  Returns the chosen
    paths and the log probability of the chosen set.
    """
    if n_r == 0:
        return [], 0.0
    if n_r > len(paths):
        raise UsageError("cannot remove more paths than present")
    first = int(rng.integers(len(paths)))
    setprob = _SetProbability(_path_bound(ctx, paths, first), base={first})
    rest = setprob.sample(n_r - 1, rng)
    chosen = [paths[i] for i in sorted([first, *rest])]
    return chosen, eval_select_reassign(paths, chosen, ctx)


def eval_select_reassign(paths: list, chosen, ctx: MoveContext) -> float:
    chosen = list(chosen)
    if not chosen:
        return 0.0
    pos = {p: i for i, p in enumerate(paths)}
    try:
        idx = [pos[p] for p in chosen]
    except KeyError as exc:
        raise UsageError("removed paths must belong to the association") from exc
    total = 0.0
    for first in idx:
        setprob = _SetProbability(_path_bound(ctx, paths, first), base={first})
        total += setprob(frozenset(idx) - {first})
    total /= len(paths)
    return math.log(total) if total > 0 else -math.inf


def _seed_bound(ctx: MoveContext, removed: list, avail: list):
    if removed:
        per_scan = ctx.index.forward_consistency(removed)
    else:
        per_scan = ctx.index.marginal
    flat_bound = np.concatenate(per_scan) if per_scan else np.zeros(0)
    flat_avail = np.concatenate(avail) if avail else np.zeros(0, dtype=bool)
    cand = np.flatnonzero(flat_avail)
    return cand, flat_bound[cand]


def select_seeds(avail: list, removed: list, n_c: int, ctx: MoveContext, rng):
    """Draw ``n_c`` distinct available seed observations.

    Returns ``(seeds, log_prob)`` or ``None`` when fewer than ``n_c``
    observations are available.
    """
    if n_c == 0:
        return [], 0.0
    cand, bound = _seed_bound(ctx, removed, avail)
    if cand.size < n_c:
        return None
    setprob = _SetProbability(bound)
    picks = setprob.sample(n_c, rng)
    prob = setprob(frozenset(picks))
    seeds = [ctx.obs_ids[cand[i]] for i in picks]
    return seeds, (math.log(prob) if prob > 0 else -math.inf)


def eval_select_seeds(avail: list, removed: list, seeds, ctx: MoveContext) -> float:
    seeds = list(seeds)
    if not seeds:
        return 0.0
    cand, bound = _seed_bound(ctx, removed, avail)
    where = {int(c): i for i, c in enumerate(cand)}
    picks = []
    for k, j in seeds:
        i = where.get(int(ctx.offsets[k - 1] + j))
        if i is None:
            return -math.inf
        picks.append(i)
    prob = _SetProbability(bound)(frozenset(picks))
    return math.log(prob) if prob > 0 else -math.inf


# ---------------------------------------------------------------------------
# global move


@dataclass
class Proposal:
    paths: frozenset
    removed: tuple
    created: tuple
    seeds: tuple
    n_r: int
    n_c: int
    log_fwd: float
    log_rev: float
    log_pc: float


def propose(paths: frozenset, ctx: MoveContext, rng):
    """Draw a new association from ``paths``.

    Returns a :class:`Proposal`, or a string naming why the draw was
    rejected during construction.
    """
    config = ctx.config
    ordered = sorted(paths)
    n_r, n_c, log_counts = sample_counts(len(ordered), config, rng)
    removed, log_r = select_reassign(ordered, n_r, ctx, rng)
    removed_set = frozenset(removed)
    kept = paths - removed_set
    avail = ctx.availability(kept)
    drawn = select_seeds(avail, removed, n_c, ctx, rng)
    if drawn is None:
        return "no-seeds"
    seeds, log_seeds = drawn
    out = hisp.run_filter(ctx.scenario, ctx.params, seeds, avail, rng)
    if out is hisp.OVERLAP_REJECTED:
        return "overlap"
    created = frozenset(out.created)
    if created & removed_set:
        return "recreated"
    new_paths = kept | created
    log_fwd = out.log_prob + log_seeds + log_r + log_counts
    log_rev = reverse_log_prob(paths, new_paths, removed, out.created, avail, ctx)
    if log_rev == -math.inf or log_fwd == -math.inf:
        return "reverse-impossible"
    return Proposal(new_paths, tuple(removed), out.created, tuple(seeds), n_r, n_c, log_fwd, log_rev,
                    out.log_prob)


def reverse_log_prob(old: frozenset, new: frozenset, removed, created, avail, ctx: MoveContext) -> float:
    """Log probability of proposing ``old`` from ``new``, with created and removed paths swapped."""
    log_counts = counts_log_prob(len(new), len(created), len(removed), ctx.config)
    if log_counts == -math.inf:
        return -math.inf
    log_r = eval_select_reassign(sorted(new), created, ctx)
    if log_r == -math.inf:
        return -math.inf
    seeds = [p.obs[0] for p in removed]
    log_seeds = eval_select_seeds(avail, list(created), seeds, ctx)
    if log_seeds == -math.inf:
        return -math.inf
    log_pc = hisp.evaluate_filter(ctx.scenario, ctx.params, removed, avail)
    return log_pc + log_seeds + log_r + log_counts


# ---------------------------------------------------------------------------
# intervals of existence


def interval_pmfs(path: Path, ctx: MoveContext):
    """Pmfs of the appearance lag and of the termination lag for ``path``."""
    key = (path.first, path.last)
    hit = ctx._intervals.get(key)
    if hit is not None:
        return hit
    params = ctx.params
    trailing = ctx.scenario.K - path.last
    lags = np.arange(trailing + 1)
    log_bound = lags * params.log_nd + np.where(lags < trailing, params.log_ns, 0.0)
    p_end = max_entropy_weights(np.exp(log_bound - log_bound.max()))
    p_start = max_entropy_weights(np.exp(np.arange(path.first) * params.log_nd))
    ctx._intervals[key] = (p_start, p_end)
    return p_start, p_end


def propose_intervals(paths, ctx: MoveContext, rng) -> tuple[frozenset, float]:
    """Draw appearance and last existence times for every path, independently."""
    tracks = []
    total = 0.0
    for path in sorted(paths):
        p_start, p_end = interval_pmfs(path, ctx)
        lag_start = _draw(p_start, rng)
        lag_end = _draw(p_end, rng)
        total += math.log(p_start[lag_start]) + math.log(p_end[lag_end])
        tracks.append(Track(path, path.first - lag_start, path.last + lag_end))
    return frozenset(tracks), total


def eval_intervals(tracks, ctx: MoveContext) -> float:
    total = 0.0
    for t in tracks:
        p_start, p_end = interval_pmfs(t.path, ctx)
        p = p_start[t.path.first - t.appear] * p_end[t.last - t.path.last]
        if p == 0:
            return -math.inf
        total += math.log(p)
    return total


# ---------------------------------------------------------------------------
# acceptance


def accept_log_ratio(log_target_new, log_target_old, rho, log_rev=0.0, log_fwd=0.0) -> float:
    gap = log_target_new - log_target_old
    # an infinite rho leaves equal targets to the proposal ratio
    return (rho * gap if gap else 0.0) + log_rev - log_fwd


def accept(log_ratio: float, rng) -> bool:
    """Metropolis-Hastings test for a log acceptance ratio."""
    if log_ratio >= 0:
        return True
    return math.log(rng.random()) < log_ratio


# ---------------------------------------------------------------------------
# chain


@dataclass(frozen=True)
class ChainConfig:
    """Settings of the HISP-proposal sampler.

    ``level`` selects the target: ``"track"`` samples track sets (the
    default), ``"path"`` samples associations with intervals maximised out.
    ``interval_every`` interleaves an interval-only move every that many
    iterations on the track level (0 disables them).
    """

    lambda_r: float = 1.0
    pc_tilde: tuple = PC_OPTIONS["-1"]
    c: float = 0.001
    tau_prime: float = 1e-3
    level: str = "track"
    interval_every: int = 2
    check_every: int = 1000
    particles: int = 0

    def proposal(self) -> ProposalConfig:
        return ProposalConfig(self.lambda_r, tuple(self.pc_tilde))


@dataclass
class TraceRecord:
    iteration: int
    wall_ms: float
    log_pi_current: float
    log_pi_best: float
    rho: float
    move_kind: str
    accepted: bool
    n_tracks: int


TRACE_FIELDS = [f.name for f in fields(TraceRecord)]


@dataclass
class MoveRecord:
    kind: str
    before: frozenset
    after: frozenset
    removed: tuple
    created: tuple
    log_fwd: float
    log_rev: float
    log_pc: float
    accepted: bool


@dataclass
class ChainResult:
    best_tracks: frozenset
    best_log_pi: float
    tracks: frozenset
    log_pi: float
    trace: list
    rejections: dict = field(default_factory=dict)
    moves: list = field(default_factory=list)
    partial: bool = False


class _Budget:
    def __init__(self, iterations, wall_secs):
        if iterations is None and wall_secs is None:
            raise UsageError("give an iteration budget, a wall-clock budget, or both")
        self.iterations = iterations
        self.wall_secs = wall_secs
        self.start = time.perf_counter()

    def elapsed_ms(self) -> float:
        return 1000.0 * (time.perf_counter() - self.start)

    def exhausted(self, t) -> bool:
        if self.iterations is not None and t >= self.iterations:
            return True
        return self.wall_secs is not None and time.perf_counter() - self.start >= self.wall_secs


def run_chain(scenario: Scenario, params: MultiObjectParams, config: ChainConfig = ChainConfig(),
              iterations: int | None = None, wall_secs: float | None = None, seed=None,
              index: ConsistencyIndex | None = None, scorer: PathScorer | None = None,
              record_moves: bool = False) -> ChainResult:
    """Run the HISP-proposal sampler from the empty association and keep the best track set."""
    rng = np.random.default_rng(seed)
    budget = _Budget(iterations, wall_secs)
    if index is None:
        index = ConsistencyIndex(scenario, params, config.tau_prime)
    if scorer is None:
        scorer = PathScorer(scenario, params, particles=config.particles)
    ctx = MoveContext(scenario, params, index, config.proposal())
    track_level = config.level == "track"
    if config.level not in ("track", "path"):
        raise UsageError(f"unknown chain level {config.level!r}")

    def target(paths):
        if track_level:
            return scorer.track_set_log_possibility(paths), paths
        return scorer.path_marginal_log(paths)

    schedule = AnnealSchedule(config.c)
    tracks = frozenset()
    paths = frozenset()
    log_pi, _ = target(tracks) if track_level else target(paths)
    log_psi = 0.0
    best_tracks, best = frozenset(), log_pi
    trace = []
    rejections = {}
    moves = []
    t = 0
    while not budget.exhausted(t):
        t += 1
        schedule = anneal_step(schedule)
        rho = schedule.rho
        interval_move = track_level and config.interval_every and t % config.interval_every == 0 and paths
        accepted = False
        if interval_move:
            kind = "interval"
            new_tracks, log_psi_new = propose_intervals(paths, ctx, rng)
            new_log_pi = scorer.track_set_log_possibility(new_tracks)
            ratio = accept_log_ratio(new_log_pi, log_pi, rho, log_psi, log_psi_new)
            if accept(ratio, rng):
                tracks, log_pi, log_psi, accepted = new_tracks, new_log_pi, log_psi_new, True
        else:
            kind = "hisp"
            prop = propose(paths, ctx, rng)
            if isinstance(prop, str):
                rejections[prop] = rejections.get(prop, 0) + 1
            else:
                if track_level:
                    new_tracks, log_psi_new = propose_intervals(prop.paths, ctx, rng)
                    new_log_pi = scorer.track_set_log_possibility(new_tracks)
                    ratio = accept_log_ratio(new_log_pi, log_pi, rho, prop.log_rev + log_psi,
                                             prop.log_fwd + log_psi_new)
                else:
                    new_log_pi, new_tracks = target(prop.paths)
                    log_psi_new = 0.0
                    ratio = accept_log_ratio(new_log_pi, log_pi, rho, prop.log_rev, prop.log_fwd)
                if accept(ratio, rng):
                    if record_moves:
                        moves.append(MoveRecord(kind, paths, prop.paths, prop.removed, prop.created,
                                                prop.log_fwd, prop.log_rev, prop.log_pc, True))
                    paths, tracks, log_pi, log_psi, accepted = prop.paths, new_tracks, new_log_pi, log_psi_new, True
                else:
                    rejections["ratio"] = rejections.get("ratio", 0) + 1
                    if record_moves:
                        moves.append(MoveRecord(kind, paths, prop.paths, prop.removed, prop.created,
                                                prop.log_fwd, prop.log_rev, prop.log_pc, False))
        if log_pi > best:
            best, best_tracks = log_pi, tracks
        if config.check_every and t % config.check_every == 0:
            _check_cache(scenario, params, config, track_level, tracks, paths, log_pi)
        trace.append(TraceRecord(t, budget.elapsed_ms(), log_pi, best, rho, kind, accepted, len(paths)))
    partial = iterations is not None and t < iterations
    return ChainResult(best_tracks, best, tracks, log_pi, trace, rejections, moves, partial)


def _check_cache(scenario, params, config, track_level, tracks, paths, log_pi):
    fresh = PathScorer(scenario, params, particles=config.particles)
    value = fresh.track_set_log_possibility(tracks) if track_level else fresh.path_marginal_log(paths)[0]
    if abs(value - log_pi) > 1e-9 * max(1.0, abs(value)):
        raise AssertionError(f"cached log-possibility drifted: {log_pi} vs {value}")


def write_trace(trace, filename) -> None:
    with open(filename, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=TRACE_FIELDS)
        writer.writeheader()
        for rec in trace:
            row = asdict(rec)
            for key in ("wall_ms", "log_pi_current", "log_pi_best", "rho"):
                row[key] = repr(float(row[key]))
            row["accepted"] = int(row["accepted"])
            writer.writerow(row)


def read_trace(filename) -> list:
    out = []
    with open(filename, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(TraceRecord(int(row["iteration"]), float(row["wall_ms"]), float(row["log_pi_current"]),
                                   float(row["log_pi_best"]), float(row["rho"]), row["move_kind"],
                                   bool(int(row["accepted"])), int(row["n_tracks"])))
    return out
