"""Which observations could plausibly follow which.

For each pair of observations a few steps apart the index stores the
credibility that the later one is the next detection of an object first
seen at the earlier one.  Gaps long enough that missed detections alone
make the pair implausible are not stored.
"""

import numpy as np

from posstrack.consistency import ConsistencyIndex
from posstrack.simulation import inference_params, preset, simulate, with_overrides


def main():
    sim = with_overrides(preset("simple"), K=10)
    sc, truth = simulate(sim, seed=1)
    params = inference_params(sim)
    index = ConsistencyIndex(sc, params, tau_prime=1e-3)
    print(f"{sc.n_obs} observations, lags stored up to {index.max_lag}")
    stored = sum(int(np.count_nonzero(b > 1e-6)) for b in index.blocks.values())
    total = sum(b.size for b in index.blocks.values())
    print(f"{stored} of {total} pairs have credibility above 1e-6")
    for track in sorted(truth.tracks())[:2]:
        obs = track.path.obs
        pairs = [index.pair(o, o2) for o, o2 in zip(obs, obs[1:]) if o2[0] - o[0] <= index.max_lag]
        print("consecutive detections of one object:", np.round(pairs, 3))
    clutter = [o for o in sc.ids() if truth.label(o) < 0][:5]
    print("marginal consistency of some false alarms:", [round(index.marginal_consistency(o), 4) for o in clutter])


if __name__ == "__main__":
    main()
