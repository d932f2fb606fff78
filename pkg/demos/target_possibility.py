"""Scoring track sets on a crossing scenario.

Two objects move on straight lines that cross.  The correct association
scores far higher than the one that swaps the objects after the crossing,
and either is far better than declaring every observation a false alarm.
"""

import numpy as np

from posstrack.filtering import LinearGaussianModel
from posstrack.model import MultiObjectParams, Path, PathScorer, Scenario


def crossing(K=12, seed=0):
    rng = np.random.default_rng(seed)
    scans = []
    for k in range(1, K + 1):
        t = k - (K + 1) / 2
        scans.append(np.array([[t, 0.5 * t], [t, -0.5 * t + 0.1]]) + 0.05 * rng.standard_normal((2, 2)))
    return Scenario(tuple(scans))


def main():
    sc = crossing()
    params = MultiObjectParams(alpha_nd=0.1, alpha_ns=0.01, model=LinearGaussianModel.ncv(sigma_a=0.1, sigma=0.1))
    scorer = PathScorer(sc, params)
    a = Path(tuple((k, 0) for k in range(1, 13)))
    b = Path(tuple((k, 1) for k in range(1, 13)))
    swapped = [Path(a.obs[:6] + b.obs[6:]), Path(b.obs[:6] + a.obs[6:])]
    for name, paths in (("all false alarms", []), ("correct", [a, b]), ("swapped after crossing", swapped),
                        ("first object only", [a])):
        value, tracks = scorer.path_marginal_log(paths)
        spans = sorted((t.appear, t.last) for t in tracks)
        print(f"{name:24s} log-possibility {value:9.2f}  intervals {spans}")

    value, m, n = scorer.best_interval(Path(((3, 0), (4, 0), (5, 0))))
    print(f"\na short path seen at 3..5 is best explained as existing from {m} to {n} ({value:.2f})")


if __name__ == "__main__":
    main()
