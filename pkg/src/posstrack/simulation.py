"""Ground-truth scenario generator and its text file format.

Objects follow a nearly-constant-velocity model, are born by a Poisson
process with uniform positions in the window, survive each step with
probability ``p_s`` and are detected with probability ``p_d``.  Clutter is
Poisson with uniform positions in the window.

File format (one record per line, whitespace separated, ``#`` comments)::

    posstrack-scenario 1
    param <name> <value>          # every SimParams field
    seed <int | none>
    obs <k> <x> <y> <label>       # label: object id, 'fa' or '?'
    state <object> <k> <x> <y> <vx> <vy>

Observations of scan ``k`` are listed in index order.  Floats are written
with ``repr`` so a save/load round trip is exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import DataError, UsageError
from .filtering import BirthPrior, LinearGaussianModel
from .model import MultiObjectParams, Path, Scenario, Track

__all__ = ["SimParams", "TruthObject", "GroundTruth", "preset", "PRESETS", "simulate", "inference_params",
           "save_scenario", "load_scenario"]

FORMAT_TAG = "posstrack-scenario"
FORMAT_VERSION = "1"
FALSE_ALARM = -1
UNKNOWN = -2


@dataclass(frozen=True)
class SimParams:
    K: int = 50
    dt: float = 1.0
    sigma_a: float = 0.05
    sigma: float = 0.3
    x_min: float = -60.0
    x_max: float = 60.0
    y_min: float = -60.0
    y_max: float = 60.0
    p_d: float = 0.9
    lambda_fa: float = 10.0
    lambda_b: float = 0.1
    p_s: float = 0.99
    sigma_v: float = 0.5

    def __post_init__(self):
        if self.K < 1:
            raise UsageError("K must be at least 1")
        if not (0 < self.p_d <= 1 and 0 < self.p_s <= 1):
            raise UsageError("p_d and p_s must lie in (0, 1]")
        if self.lambda_fa < 0 or self.lambda_b < 0:
            raise UsageError("Poisson rates must be non-negative")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise UsageError("empty window")
        if self.dt <= 0 or self.sigma_a < 0 or self.sigma < 0 or self.sigma_v < 0:
            raise UsageError("dt must be positive and noise scales non-negative")

    @property
    def window(self) -> tuple:
        return ((self.x_min, self.x_max), (self.y_min, self.y_max))

    def model(self) -> LinearGaussianModel:
        """Inference model with the simulation's dynamics; needs ``sigma > 0``."""
        return LinearGaussianModel.ncv(self.dt, self.sigma_a, self.sigma)


def inference_params(params: SimParams, alpha_fa: float = 1e-2, alpha_birth: float = 1e-4,
                     sigma_v: float = 1.0) -> MultiObjectParams:
    """Possibilistic model matched to a simulation: failure credibilities are ``1 - p``."""
    return MultiObjectParams(
        alpha_nd=max(1.0 - params.p_d, 1e-12),
        alpha_ns=max(1.0 - params.p_s, 1e-12),
        alpha_fa=alpha_fa,
        alpha_birth=alpha_birth,
        model=params.model(),
        birth=BirthPrior(sigma_v),
    )


PRESETS = {
    "simple": dict(lambda_fa=10.0, lambda_b=0.1, p_d=0.9),
    "high_fa": dict(lambda_fa=100.0, lambda_b=0.5, p_d=0.8),
    "low_pd": dict(lambda_fa=25.0, lambda_b=0.5, p_d=0.5),
}


def preset(name: str) -> SimParams:
    try:
        return SimParams(**PRESETS[name])
    except KeyError:
        raise UsageError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


@dataclass
class TruthObject:
    """States of one object from its birth step to its last step of existence."""

    ident: int
    birth: int
    states: np.ndarray

    @property
    def death(self) -> int:
        return self.birth + len(self.states) - 1


@dataclass
class GroundTruth:
    objects: list = field(default_factory=list)
    labels: list = field(default_factory=list)

    def label(self, obs) -> int:
        k, j = obs
        return int(self.labels[k - 1][j])

    def object_observations(self) -> dict:
        out = {}
        for k, lab in enumerate(self.labels, start=1):
            for j, o in enumerate(lab):
                if o >= 0:
                    out.setdefault(int(o), []).append((k, j))
        return out

    def tracks(self) -> frozenset:
        """Ground-truth track set; objects that were never detected have no track."""
        by_obj = self.object_observations()
        lifetimes = {o.ident: (o.birth, o.death) for o in self.objects}
        out = []
        for ident, obs in by_obj.items():
            birth, death = lifetimes.get(ident, (obs[0][0], obs[-1][0]))
            out.append(Track(Path(tuple(obs)), birth, death))
        return frozenset(out)


def simulate(params: SimParams, seed=None) -> tuple[Scenario, GroundTruth]:
    rng = np.random.default_rng(seed)
    F = np.array(LinearGaussianModel.ncv(params.dt, params.sigma_a, 1.0).F)
    Q = params.sigma_a**2 * np.block([[params.dt**4 / 4 * np.eye(2), params.dt**3 / 2 * np.eye(2)],
                                      [params.dt**3 / 2 * np.eye(2), params.dt**2 * np.eye(2)]])
    vals, vecs = np.linalg.eigh(Q)
    root = vecs * np.sqrt(np.clip(vals, 0.0, None))
    lo = np.array([params.x_min, params.y_min])
    hi = np.array([params.x_max, params.y_max])
    alive = {}
    history = {}
    births = {}
    next_id = 0
    scans, labels = [], []
    for k in range(1, params.K + 1):
        for ident in list(alive):
            if rng.random() >= params.p_s:
                del alive[ident]
                continue
            alive[ident] = F @ alive[ident] + root @ rng.standard_normal(4)
            history[ident].append(alive[ident])
        for _ in range(rng.poisson(params.lambda_b)):
            x = np.concatenate([rng.uniform(lo, hi), params.sigma_v * rng.standard_normal(2)])
            alive[next_id] = x
            history[next_id] = [x]
            births[next_id] = k
            next_id += 1
        obs, lab = [], []
        for ident, x in alive.items():
            if rng.random() < params.p_d:
                obs.append(x[:2] + params.sigma * rng.standard_normal(2))
                lab.append(ident)
        for _ in range(rng.poisson(params.lambda_fa)):
            obs.append(rng.uniform(lo, hi))
            lab.append(FALSE_ALARM)
        order = rng.permutation(len(obs))
        scans.append(np.array(obs, dtype=float).reshape(-1, 2)[order])
        labels.append(np.array(lab, dtype=int)[order])
    objects = [TruthObject(i, births[i], np.array(history[i])) for i in sorted(history)]
    return Scenario(tuple(scans), params.window), GroundTruth(objects, labels)


def save_scenario(filename, scenario: Scenario, truth: GroundTruth | None = None,
                  params: SimParams | None = None, seed=None) -> None:
    if params is None:
        params = SimParams(K=scenario.K)
    if params.K != scenario.K:
        raise UsageError("params.K differs from the scenario length")
    lines = [f"{FORMAT_TAG} {FORMAT_VERSION}"]
    for f in fields(SimParams):
        lines.append(f"param {f.name} {getattr(params, f.name)!r}")
    lines.append(f"seed {seed if seed is not None else 'none'}")
    for k, scan in enumerate(scenario.scans, start=1):
        for j, z in enumerate(scan):
            if truth is None:
                lab = "?"
            else:
                o = truth.label((k, j))
                lab = "fa" if o == FALSE_ALARM else ("?" if o == UNKNOWN else str(o))
            lines.append(f"obs {k} {' '.join(repr(float(v)) for v in z)} {lab}")
    if truth is not None:
        for obj in truth.objects:
            for i, x in enumerate(obj.states):
                lines.append(f"state {obj.ident} {obj.birth + i} {' '.join(repr(float(v)) for v in x)}")
    with open(filename, "w") as fh:
        fh.write("\n".join(lines) + "\n")


_PARAM_TYPES = {f.name: (int if f.name == "K" else float) for f in fields(SimParams)}


def load_scenario(filename) -> tuple[Scenario, GroundTruth, SimParams, int | None]:
    """Read a scenario file; malformed content raises :class:`DataError` with the line number."""
    try:
        with open(filename) as fh:
            text = fh.read().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {filename}: {exc.strerror}") from exc
    values = {}
    seed = None
    obs = {}
    states = {}
    header = False
    for lineno, raw in enumerate(text, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        tag = parts[0]
        try:
            if not header:
                if parts != [FORMAT_TAG, FORMAT_VERSION]:
                    raise DataError(f"expected '{FORMAT_TAG} {FORMAT_VERSION}' header", lineno)
                header = True
            elif tag == "param":
                if len(parts) != 3 or parts[1] not in _PARAM_TYPES:
                    raise DataError(f"bad parameter record {line!r}", lineno)
                values[parts[1]] = _PARAM_TYPES[parts[1]](parts[2])
            elif tag == "seed":
                if len(parts) != 2:
                    raise DataError("bad seed record", lineno)
                seed = None if parts[1] == "none" else int(parts[1])
            elif tag == "obs":
                if len(parts) != 5:
                    raise DataError("obs records need: k x y label", lineno)
                k = int(parts[1])
                z = (float(parts[2]), float(parts[3]))
                lab = parts[4]
                label = FALSE_ALARM if lab == "fa" else (UNKNOWN if lab == "?" else int(lab))
                if label < 0 and lab not in ("fa", "?"):
                    raise DataError(f"bad label {lab!r}", lineno)
                obs.setdefault(k, []).append((z, label, lineno))
            elif tag == "state":
                if len(parts) != 7:
                    raise DataError("state records need: object k x y vx vy", lineno)
                ident, k = int(parts[1]), int(parts[2])
                states.setdefault(ident, []).append((k, [float(v) for v in parts[3:]], lineno))
            else:
                raise DataError(f"unknown record {tag!r}", lineno)
        except ValueError as exc:
            if isinstance(exc, DataError):
                raise
            raise DataError(f"cannot parse {line!r}: {exc}", lineno) from None
    if not header:
        raise DataError("empty scenario file", 1)
    try:
        params = SimParams(**values)
    except UsageError as exc:
        raise DataError(f"invalid parameters: {exc}", 1) from None
    K = params.K
    scans, labels = [], []
    for k, records in obs.items():
        if not 1 <= k <= K:
            raise DataError(f"time {k} outside 1..{K}", records[0][2])
    for k in range(1, K + 1):
        records = obs.get(k, [])
        scans.append(np.array([r[0] for r in records], dtype=float).reshape(-1, 2))
        labels.append(np.array([r[1] for r in records], dtype=int))
    objects = []
    for ident in sorted(states):
        recs = states[ident]
        times = [r[0] for r in recs]
        if times != list(range(times[0], times[0] + len(times))):
            raise DataError(f"object {ident} states must cover consecutive times", recs[0][2])
        objects.append(TruthObject(ident, times[0], np.array([r[1] for r in recs])))
    return Scenario(tuple(scans), params.window), GroundTruth(objects, labels), params, seed


def with_overrides(params: SimParams, **kwargs) -> SimParams:
    return replace(params, **kwargs)
