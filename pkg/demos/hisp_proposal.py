"""Growing paths from seed observations, and replaying them.

The proposal filter extends one path per seed forward in time, drawing at
every step an observation or a miss from a max-entropy distribution.  The
probability of the drawn paths is accumulated on the way, and replaying
the same paths through the filter gives exactly the same number.
"""

import numpy as np

from posstrack.hisp import OVERLAP_REJECTED, evaluate_filter, full_availability, run_filter
from posstrack.simulation import inference_params, preset, simulate, with_overrides


def main():
    sim = with_overrides(preset("simple"), K=15, lambda_b=0.5)
    sc, truth = simulate(sim, seed=2)
    params = inference_params(sim)
    avail = full_availability(sc)
    rng = np.random.default_rng(0)
    tracks = sorted(truth.tracks(), key=lambda t: -len(t.path))[:2]
    seeds = [t.path.obs[0] for t in tracks]
    print("seeds at the first detections of two objects:", seeds)
    for attempt in range(5):
        out = run_filter(sc, params, seeds, avail, rng)
        if out is OVERLAP_REJECTED:
            print(f"attempt {attempt}: two paths drew the same observation, proposal abandoned")
            continue
        for path, t in zip(out.created, tracks):
            hit = len(set(path.obs) & set(t.path.obs))
            print(f"attempt {attempt}: path of length {len(path)} shares {hit}/{len(t.path)} detections with its object")
        replay = evaluate_filter(sc, params, out.created, avail, seeds)
        print(f"  log probability {out.log_prob:.4f}, replayed {replay:.4f}, identical: {replay == out.log_prob}")


if __name__ == "__main__":
    main()
