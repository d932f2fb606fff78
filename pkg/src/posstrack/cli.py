"""Command-line entry point: ``posstrack simulate | smooth | evaluate | trace-export``.

Exit codes: 0 on success, 2 on usage errors, 3 on unreadable or malformed
input files.

Config files hold one ``key = value`` per line (``#`` starts a comment).
Recognised keys are every simulation parameter (``K``, ``dt``, ``sigma_a``,
``sigma``, ``x_min``, ``x_max``, ``y_min``, ``y_max``, ``p_d``,
``lambda_fa``, ``lambda_b``, ``p_s``, ``sigma_v``), the inference
credibilities ``alpha_fa``, ``alpha_birth`` and the prior velocity scale
``prior_sigma_v``, and the run settings ``sampler``, ``iters``,
``wall_secs``, ``repeats``, ``seed``, ``lambda_r``, ``c``, ``tau_prime``,
``pc_focus``, ``particles`` and ``level``.  Command-line flags override the
file.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import fields, replace

from .baseline import run_baseline
from .consistency import ConsistencyIndex
from .errors import DataError, UsageError
from .evaluation import (average_traces, check_tracks_fit, evaluate, load_tracks, save_tracks, tidy_traces,
                         write_tidy)
from .mcmc import PC_OPTIONS, ChainConfig, read_trace, run_chain, write_trace
from .model import PathScorer
from .simulation import PRESETS, SimParams, inference_params, load_scenario, preset, save_scenario, simulate

EXIT_USAGE = 2
EXIT_DATA = 3

DEFAULTS = {
    "sampler": "hisp",
    "iters": 50_000,
    "wall_secs": None,
    "repeats": 1,
    "seed": 0,
    "lambda_r": 1.0,
    "c": 0.001,
    "tau_prime": 1e-3,
    "pc_focus": "-1",
    "particles": 0,
    "level": "track",
    "alpha_fa": 1e-2,
    "alpha_birth": 1e-4,
    "prior_sigma_v": 1.0,
}

_SIM_KEYS = {f.name: (int if f.name == "K" else float) for f in fields(SimParams)}
_RUN_TYPES = {
    "sampler": str, "iters": int, "wall_secs": float, "repeats": int, "seed": int, "lambda_r": float,
    "c": float, "tau_prime": float, "pc_focus": str, "particles": int, "level": str, "alpha_fa": float,
    "alpha_birth": float, "prior_sigma_v": float,
}


def read_config(filename) -> dict:
    """Parse a flat ``key = value`` file into typed values."""
    try:
        with open(filename) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read config {filename}: {exc.strerror}") from exc
    out = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"expected 'key = value', got {line!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        cast = _SIM_KEYS.get(key) or _RUN_TYPES.get(key)
        if cast is None:
            raise DataError(f"unknown key {key!r}", lineno)
        try:
            out[key] = None if value.lower() == "none" else cast(value)
        except ValueError:
            raise DataError(f"bad value for {key}: {value!r}", lineno) from None
    return out


def _settings(args) -> dict:
    settings = dict(DEFAULTS)
    if getattr(args, "config", None):
        settings.update(read_config(args.config))
    for key in _RUN_TYPES:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    return settings


def _sim_params(args, settings) -> SimParams:
    base = preset(args.preset) if getattr(args, "preset", None) else SimParams()
    overrides = {k: v for k, v in settings.items() if k in _SIM_KEYS}
    return replace(base, **overrides)


def cmd_simulate(args) -> int:
    settings = _settings(args)
    params = _sim_params(args, settings)
    scenario, truth = simulate(params, settings["seed"])
    save_scenario(args.out, scenario, truth, params, settings["seed"])
    print(f"wrote {args.out}: K={scenario.K}, {scenario.n_obs} observations, {len(truth.tracks())} detected objects")
    return 0


def _chain_config(settings) -> ChainConfig:
    if settings["pc_focus"] not in PC_OPTIONS:
        raise UsageError(f"--pc-focus must be one of {sorted(PC_OPTIONS)}")
    return ChainConfig(lambda_r=settings["lambda_r"], pc_tilde=PC_OPTIONS[settings["pc_focus"]], c=settings["c"],
                       tau_prime=settings["tau_prime"], level=settings["level"], particles=settings["particles"])


def cmd_smooth(args) -> int:
    settings = _settings(args)
    if settings["repeats"] < 1:
        raise UsageError("--repeats must be at least 1")
    iters, wall = settings["iters"], settings["wall_secs"]
    if (iters is not None and iters < 0) or (wall is not None and wall <= 0):
        raise UsageError("budget must be positive")
    if settings["sampler"] not in ("hisp", "baseline", "both"):
        raise UsageError("--sampler must be hisp, baseline or both")
    config = _chain_config(settings)
    os.makedirs(args.out, exist_ok=True)
    if args.scenario:
        scenario, truth, sim, _ = load_scenario(args.scenario)
    else:
        sim = _sim_params(args, settings)
        scenario, truth = simulate(sim, settings["seed"])
        save_scenario(os.path.join(args.out, "scenario.txt"), scenario, truth, sim, settings["seed"])
    params = inference_params(sim, settings["alpha_fa"], settings["alpha_birth"], settings["prior_sigma_v"])
    index = ConsistencyIndex(scenario, params, config.tau_prime)
    scorer = PathScorer(scenario, params, particles=config.particles)
    samplers = ("hisp", "baseline") if settings["sampler"] == "both" else (settings["sampler"],)
    summary = []
    for sampler in samplers:
        for r in range(settings["repeats"]):
            seed = settings["seed"] + r
            if sampler == "hisp":
                res = run_chain(scenario, params, config, iters, wall, seed=seed, index=index, scorer=scorer)
            else:
                res = run_baseline(scenario, params, iters, wall, seed=seed, c=config.c, index=index, scorer=scorer)
            stem = os.path.join(args.out, f"{sampler}_r{r}")
            write_trace(res.trace, stem + "_trace.csv")
            save_tracks(stem + "_tracks.txt", res.best_tracks, res.best_log_pi, res.partial)
            last = res.trace[-1] if res.trace else None
            summary.append({"sampler": sampler, "repeat": r, "seed": seed, "best_log_pi": repr(res.best_log_pi),
                            "iterations": last.iteration if last else 0, "wall_ms": last.wall_ms if last else 0.0,
                            "n_tracks": len(res.best_tracks), "partial": int(res.partial)})
            print(f"{sampler} repeat {r}: best log-possibility {res.best_log_pi:.3f}, {len(res.best_tracks)} tracks")
    with open(os.path.join(args.out, "summary.csv"), "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(summary[0]))
        writer.writeheader()
        writer.writerows(summary)
    return 0


def cmd_evaluate(args) -> int:
    settings = _settings(args)
    scenario, truth, sim, _ = load_scenario(args.scenario)
    params = inference_params(sim, settings["alpha_fa"], settings["alpha_birth"], settings["prior_sigma_v"])
    reports = {}
    for name in args.results:
        tracks, log_pi, _ = load_tracks(name)
        check_tracks_fit(tracks, scenario)
        reports[name] = evaluate(tracks, truth, scenario, params, log_pi).as_dict()
    if len(reports) > 1:
        keys = ("best_log_pi", "accuracy", "track_count_error", "clutter_precision", "clutter_recall")
        reports["mean"] = {k: sum(r[k] for r in reports.values()) / len(reports) for k in keys}
    text = json.dumps(reports, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


def cmd_trace_export(args) -> int:
    rows = tidy_traces(args.traces)
    write_tidy(rows, args.out)
    if args.average:
        mean = average_traces([read_trace(t) for t in args.traces])
        with open(args.average, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "mean_log_pi_best"])
            for i, v in enumerate(mean, start=1):
                writer.writerow([i, repr(float(v))])
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def _add_run_flags(p, with_budget=True):
    p.add_argument("--config", help="flat key = value settings file")
    p.add_argument("--seed", type=int)
    if with_budget:
        p.add_argument("--sampler", choices=["hisp", "baseline", "both"])
        p.add_argument("--iters", type=int, help="iteration budget per run")
        p.add_argument("--wall-secs", dest="wall_secs", type=float, help="wall-clock budget per run")
        p.add_argument("--repeats", type=int)
        p.add_argument("--lambda-r", dest="lambda_r", type=float)
        p.add_argument("--c", type=float, help="cooling constant")
        p.add_argument("--tau-prime", dest="tau_prime", type=float)
        p.add_argument("--pc-focus", dest="pc_focus", choices=sorted(PC_OPTIONS))
        p.add_argument("--particles", type=int, help="particles per path likelihood (0: Kalman)")
        p.add_argument("--level", choices=["track", "path"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="posstrack", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a scenario with ground truth")
    p.add_argument("--preset", choices=sorted(PRESETS), default="simple")
    p.add_argument("--out", required=True, help="scenario file to write")
    _add_run_flags(p, with_budget=False)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("smooth", help="run the samplers and write traces and best track sets")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--scenario", help="scenario file")
    src.add_argument("--preset", choices=sorted(PRESETS), help="simulate this preset with --seed")
    p.add_argument("--out", required=True, help="output directory")
    _add_run_flags(p)
    p.set_defaults(func=cmd_smooth)

    p = sub.add_parser("evaluate", help="score track files against a scenario's ground truth")
    p.add_argument("--scenario", required=True)
    p.add_argument("results", nargs="+", help="track files written by smooth")
    p.add_argument("--out", help="JSON report file")
    p.add_argument("--config")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("trace-export", help="merge trace files into one tidy table")
    p.add_argument("traces", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--average", help="also write the mean best trace per iteration")
    p.set_defaults(func=cmd_trace_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"posstrack: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except UsageError as exc:
        print(f"posstrack: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
