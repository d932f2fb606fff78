"""Possibilistic filtering of one object with a nearly-constant-velocity model.

The update has the Kalman form; the log marginal likelihood is the
unnormalised Gaussian exponent, so a detection exactly at the predicted
position scores 0.  A new object's belief starts from its first detection
with an uninformative position and a velocity prior.
"""

import numpy as np

from posstrack.filtering import (BirthPrior, LinearGaussianModel, gaussian_log_likelihood, particle_update,
                                 particles_from_gaussian, predict, update)


def main():
    model = LinearGaussianModel.ncv(dt=1.0, sigma_a=0.1, sigma=0.3)
    rng = np.random.default_rng(0)
    truth = np.array([0.0, 0.0, 1.0, 0.5])
    belief = BirthPrior(1.0).posterior(truth[:2] + 0.3 * rng.standard_normal(2), model)
    print("birth belief mean", belief.mean.round(2), "velocity sd", np.sqrt(belief.cov[2, 2]).round(2))
    for k in range(2, 7):
        truth = model.F @ truth
        z = truth[:2] + 0.3 * rng.standard_normal(2)
        belief, log_marginal = update(predict(belief, model), z, model)
        print(f"k={k}: log marginal {log_marginal:7.3f}  estimate {belief.mean.round(2)}  truth {truth.round(2)}")

    far = truth[:2] + np.array([5.0, 0.0])
    _, log_far = update(predict(belief, model), far, model)
    print("\na detection 5 units away from the prediction scores", round(log_far, 1))

    # particles reproduce the Gaussian marginal from below
    pred = predict(belief, model)
    z = (model.F @ truth)[:2]
    _, exact = update(pred, z, model)
    cloud = particles_from_gaussian(pred, 50_000, rng)
    _, approx = particle_update(cloud, z, gaussian_log_likelihood(model))
    print(f"marginal with 50k particles {approx:.4f} vs closed form {exact:.4f}")


if __name__ == "__main__":
    main()
