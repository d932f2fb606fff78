"""One-factor-at-a-time sweep over the sampler settings.

Varies the cooling constant, the mean number of removed paths and the
distribution of the change in the number of paths, with shared seeds, and
prints the averaged best credibility at a few checkpoints.
"""

from posstrack.evaluation import SWEEP_GRID, sweep
from posstrack.simulation import inference_params, preset, simulate, with_overrides


def main(iterations=600, repeats=2):
    sim = with_overrides(preset("simple"), K=25)
    sc, _ = simulate(sim, seed=3)
    out = sweep(sc, inference_params(sim), SWEEP_GRID, repeats=repeats, iterations=iterations)
    marks = [iterations // 4, iterations // 2, iterations - 1]
    print("setting".ljust(20), "".join(f"{'it ' + str(m + 1):>9s}" for m in marks))
    for (name, value), trace in out.items():
        print(f"{name}={value}".ljust(20), "".join(f"{trace[m]:9.1f}" for m in marks))


if __name__ == "__main__":
    main()
