"""The command-line workflow: simulate, smooth, evaluate and export traces.

Equivalent shell commands::

    posstrack simulate --preset simple --seed 4 --out scenario.txt
    posstrack smooth --scenario scenario.txt --sampler both --iters 400 --repeats 2 --out run
    posstrack evaluate --scenario scenario.txt run/hisp_r0_tracks.txt run/baseline_r0_tracks.txt
    posstrack trace-export run/*_trace.csv --out traces.csv --average mean.csv
"""

import glob
import os
import tempfile

from posstrack.cli import main


def run(*argv):
    print("$ posstrack", " ".join(argv))
    code = main(list(argv))
    print(f"(exit {code})\n")


def walkthrough():
    with tempfile.TemporaryDirectory() as d:
        scen = os.path.join(d, "scenario.txt")
        out = os.path.join(d, "run")
        cfg = os.path.join(d, "short.cfg")
        with open(cfg, "w") as fh:
            fh.write("# a shorter scenario for the walkthrough\nK = 20\n")
        run("simulate", "--preset", "simple", "--seed", "4", "--config", cfg, "--out", scen)
        run("smooth", "--scenario", scen, "--sampler", "both", "--iters", "400", "--repeats", "2", "--out", out)
        run("evaluate", "--scenario", scen, os.path.join(out, "hisp_r0_tracks.txt"),
            os.path.join(out, "baseline_r0_tracks.txt"))
        run("trace-export", *sorted(glob.glob(os.path.join(out, "*_trace.csv"))), "--out",
            os.path.join(d, "traces.csv"), "--average", os.path.join(d, "mean.csv"))
        run("evaluate", "--scenario", os.path.join(d, "missing.txt"), "x")


if __name__ == "__main__":
    walkthrough()
