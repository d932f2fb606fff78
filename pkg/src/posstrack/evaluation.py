"""Association-quality metrics, track-set files, trace tables and parameter sweeps."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, replace

import numpy as np

from .consistency import ConsistencyIndex
from .errors import DataError
from .mcmc import PC_OPTIONS, TRACE_FIELDS, ChainConfig, read_trace, run_chain
from .model import MultiObjectParams, Path, PathScorer, Scenario, Track, kappa
from .simulation import FALSE_ALARM, GroundTruth

__all__ = [
    "MetricsReport",
    "association_accuracy",
    "clutter_scores",
    "evaluate",
    "save_tracks",
    "load_tracks",
    "tidy_traces",
    "average_traces",
    "write_tidy",
    "check_tracks_fit",
    "sweep",
    "SWEEP_GRID",
]

RESULT_TAG = "posstrack-tracks"


@dataclass
class MetricsReport:
    best_log_pi: float
    truth_log_pi: float
    accuracy: float
    track_count_error: int
    n_tracks: int
    n_truth_tracks: int
    clutter_precision: float
    clutter_recall: float

    def as_dict(self) -> dict:
        return asdict(self)


def association_accuracy(paths, truth: GroundTruth) -> float:
    """Fraction of object-originated observations assigned to their object's plurality path.

    The plurality path of an object is the estimated path holding most of
    its observations; observations left unassigned never count as correct.
    """
    owner = {}
    for i, p in enumerate(sorted(paths)):
        for obs in p.obs:
            owner[obs] = i
    correct = total = 0
    for obs_list in truth.object_observations().values():
        total += len(obs_list)
        counts = {}
        for obs in obs_list:
            i = owner.get(obs)
            if i is not None:
                counts[i] = counts.get(i, 0) + 1
        if counts:
            correct += max(counts.values())
    return 1.0 if total == 0 else correct / total


def clutter_scores(paths, truth: GroundTruth, scenario: Scenario) -> tuple[float, float]:
    """Precision and recall of the observations left unassigned, as false-alarm detections."""
    used = {obs for p in paths for obs in p.obs}
    predicted = {obs for obs in scenario.ids() if obs not in used}
    actual = {obs for obs in scenario.ids() if truth.label(obs) == FALSE_ALARM}
    hit = len(predicted & actual)
    precision = hit / len(predicted) if predicted else 1.0
    recall = hit / len(actual) if actual else 1.0
    return precision, recall


def evaluate(tracks, truth: GroundTruth, scenario: Scenario, params: MultiObjectParams,
             best_log_pi: float | None = None) -> MetricsReport:
    scorer = PathScorer(scenario, params)
    tracks = frozenset(tracks)
    truth_tracks = truth.tracks()
    paths = kappa(tracks)
    if best_log_pi is None:
        best_log_pi = scorer.track_set_log_possibility(tracks)
    precision, recall = clutter_scores(paths, truth, scenario)
    return MetricsReport(
        best_log_pi=float(best_log_pi),
        truth_log_pi=scorer.track_set_log_possibility(truth_tracks),
        accuracy=association_accuracy(paths, truth),
        track_count_error=abs(len(tracks) - len(truth_tracks)),
        n_tracks=len(tracks),
        n_truth_tracks=len(truth_tracks),
        clutter_precision=precision,
        clutter_recall=recall,
    )


def save_tracks(filename, tracks, log_pi: float | None = None, partial: bool = False) -> None:
    """Write a track set: ``track <appear> <last> k:j k:j ...`` per line."""
    lines = [f"{RESULT_TAG} 1"]
    if log_pi is not None:
        lines.append(f"log_pi {float(log_pi)!r}")
    lines.append(f"partial {int(partial)}")
    for t in sorted(tracks):
        lines.append(f"track {t.appear} {t.last} " + " ".join(f"{k}:{j}" for k, j in t.path.obs))
    with open(filename, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_tracks(filename) -> tuple[frozenset, float | None, bool]:
    try:
        with open(filename) as fh:
            text = fh.read().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {filename}: {exc.strerror}") from exc
    tracks, log_pi, partial = [], None, False
    for lineno, raw in enumerate(text, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if lineno == 1:
                if parts != [RESULT_TAG, "1"]:
                    raise DataError(f"expected '{RESULT_TAG} 1' header", lineno)
            elif parts[0] == "log_pi":
                log_pi = float(parts[1])
            elif parts[0] == "partial":
                partial = bool(int(parts[1]))
            elif parts[0] == "track":
                obs = tuple(tuple(int(v) for v in item.split(":")) for item in parts[3:])
                if any(len(o) != 2 for o in obs):
                    raise DataError("observations must be written k:j", lineno)
                tracks.append(Track(Path(obs), int(parts[1]), int(parts[2])))
            else:
                raise DataError(f"unknown record {parts[0]!r}", lineno)
        except (ValueError, IndexError) as exc:
            if isinstance(exc, DataError):
                raise
            raise DataError(f"cannot parse {line!r}: {exc}", lineno) from None
    if not text:
        raise DataError("empty track file", 1)
    return frozenset(tracks), log_pi, partial


def check_tracks_fit(tracks, scenario: Scenario) -> None:
    """Raise :class:`DataError` when tracks use observations outside ``scenario`` or share one."""
    seen = set()
    for t in tracks:
        if t.last > scenario.K:
            raise DataError(f"track ends at {t.last} beyond K = {scenario.K}")
        for k, j in t.path.obs:
            if not (1 <= k <= scenario.K and 0 <= j < scenario.size(k)):
                raise DataError(f"observation {k}:{j} is not in the scenario")
            if (k, j) in seen:
                raise DataError(f"observation {k}:{j} is used by two tracks")
            seen.add((k, j))


def tidy_traces(filenames) -> list:
    """Rows ``{source, **trace fields}`` for every record of every trace file."""
    rows = []
    for name in filenames:
        try:
            records = read_trace(name)
        except (OSError, KeyError, ValueError) as exc:
            raise DataError(f"cannot read trace {name}: {exc}") from None
        for rec in records:
            rows.append({"source": str(name), **asdict(rec)})
    return rows


def average_traces(traces, length: int | None = None) -> np.ndarray:
    """Mean best log-possibility per iteration across traces.

    Shorter traces are extended with their final value so traces stopped by
    a wall-clock budget remain comparable.
    """
    traces = [t for t in traces if t]
    if not traces:
        return np.zeros(0)
    if length is None:
        length = max(len(t) for t in traces)
    out = np.empty((len(traces), length))
    for i, t in enumerate(traces):
        vals = np.array([r.log_pi_best for r in t[:length]])
        out[i, : vals.size] = vals
        out[i, vals.size:] = vals[-1]
    return out.mean(axis=0)


def write_tidy(rows, filename) -> None:
    with open(filename, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["source", *TRACE_FIELDS])
        writer.writeheader()
        for row in rows:
            writer.writerow({**row, "accepted": int(row["accepted"])})


SWEEP_GRID = {
    "c": (0.0005, 0.001, 0.002),
    "lambda_r": (0.5, 1.0, 1.5),
    "pc_focus": ("-1", "0", "+1", "uniform"),
}


def sweep(scenario: Scenario, params: MultiObjectParams, grid: dict | None = None, repeats: int = 1,
          iterations: int | None = 1000, wall_secs: float | None = None, seed: int = 0,
          base: ChainConfig = ChainConfig()) -> dict:
    """One-factor-at-a-time sweep around ``base``.

    Returns ``{(name, value): averaged best-log-possibility trace}``; every
    setting uses the same seeds, so the traces are directly comparable.
    """
    grid = SWEEP_GRID if grid is None else grid
    index = ConsistencyIndex(scenario, params, base.tau_prime)
    scorer = PathScorer(scenario, params, particles=base.particles)
    out = {}
    for name, values in grid.items():
        for value in values:
            if name == "pc_focus":
                config = replace(base, pc_tilde=PC_OPTIONS[value])
            else:
                config = replace(base, **{name: value})
            traces = [run_chain(scenario, params, config, iterations, wall_secs, seed=seed + r, index=index,
                                scorer=scorer).trace for r in range(repeats)]
            out[(name, value)] = average_traces(traces)
    return out

