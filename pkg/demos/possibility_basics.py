"""Possibility functions: credibilities, probability bounds and max-entropy pmfs.

A possibility function gives each outcome a credibility in [0, 1] with a
maximum of 1.  The credibility of an event bounds its probability from
above, and the least committed probability distribution compatible with
those bounds is found by water-filling.
"""

import numpy as np

from posstrack.possibility import (GaussianPossibility, argmax_expectation, max_entropy_pmf, max_expectation,
                                   probability_bounds)


def main():
    g = GaussianPossibility([0.0, 0.0], np.eye(2))
    print("Gaussian possibility at its mean:", g([0.0, 0.0]))
    print("... and at (3, 4):", g([3.0, 4.0]), "= exp(-12.5)")

    f = {"car": 1.0, "bike": 0.2, "clutter": 0.2}
    print("\nmost credible outcome:", argmax_expectation(f))
    print("probability of {bike} lies in", probability_bounds(f, {"bike"}))
    print("probability of {car, bike} lies in", probability_bounds(f, {"car", "bike"}))
    print("max expected cost with costs (0, 5, 10):", max_expectation(f, {"car": 0, "bike": 5, "clutter": 10}))

    p = max_entropy_pmf(f)
    print("\nmax-entropy pmf under these bounds:", {k: round(v, 3) for k, v in p.items()})
    print("every outcome with a small credibility sits on its bound; the rest share the remaining mass")


if __name__ == "__main__":
    main()
