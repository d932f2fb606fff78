"""Single-object possibilistic filtering.

Gaussian possibility functions are closed under sup-prediction through a
linear-Gaussian transition and under conditioning on a linear-Gaussian
observation, giving the usual Kalman recursions.  The only difference with the
probabilistic filter is the marginal likelihood, which carries no
determinant prefactor and equals 1 when the observation sits at the
predicted mode.

The particle functions implement the max-normalised analogue of the bootstrap
filter used when the model is not linear-Gaussian.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateBeliefError, UsageError
from .possibility import GaussianPossibility

__all__ = [
    "LinearGaussianModel",
    "BirthPrior",
    "ParticleBelief",
    "predict",
    "update",
    "particle_predict",
    "particle_update",
    "particles_from_gaussian",
    "gaussian_transition_sampler",
    "gaussian_log_likelihood",
]


def _symmetrize(P):
    return 0.5 * (P + P.T)


@dataclass(frozen=True, eq=False)
class LinearGaussianModel:
    """Transition ``x' ~ N(F x, Q)`` and observation ``z ~ N(H x, R)``.

    ``Q`` only needs to be positive semi-definite: the discretised
    nearly-constant-velocity noise is rank deficient.
    """

    F: np.ndarray
    Q: np.ndarray
    H: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        F, Q, H, R = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (self.F, self.Q, self.H, self.R))
        dx, dz = F.shape[0], H.shape[0]
        if F.shape != (dx, dx) or Q.shape != (dx, dx) or H.shape != (dz, dx) or R.shape != (dz, dz):
            raise UsageError("inconsistent model dimensions")
        if not (np.allclose(Q, Q.T) and np.allclose(R, R.T)):
            raise UsageError("Q and R must be symmetric")
        if np.linalg.eigvalsh(Q).min() < -1e-12 * max(1.0, np.abs(Q).max()):
            raise UsageError("Q must be positive semi-definite")
        if np.linalg.eigvalsh(R).min() <= 0:
            raise UsageError("R must be positive definite")
        for name, value in zip("FQHR", (F, Q, H, R)):
            object.__setattr__(self, name, value)

    @property
    def dim_state(self) -> int:
        return self.F.shape[0]

    @property
    def dim_obs(self) -> int:
        return self.H.shape[0]

    @classmethod
    def ncv(cls, dt: float = 1.0, sigma_a: float = 0.05, sigma: float = 0.3, ndim: int = 2):
        """Nearly-constant-velocity model with direct position observations.

        The state is ordered as positions then velocities,
        ``(x, y, vx, vy)`` for ``ndim=2``.
        """
        eye = np.eye(ndim)
        zero = np.zeros((ndim, ndim))
        F = np.block([[eye, dt * eye], [zero, eye]])
        Q = sigma_a**2 * np.block([[dt**4 / 4 * eye, dt**3 / 2 * eye], [dt**3 / 2 * eye, dt**2 * eye]])
        H = np.hstack([eye, zero])
        R = sigma**2 * eye
        return cls(F, Q, H, R)


def _predict_arrays(m, P, F, Q):
    return F @ m, _symmetrize(F @ P @ F.T + Q)


def _innovation(m, P, H, R):
    """Predicted observation mean and innovation covariance."""
    return H @ m, _symmetrize(H @ P @ H.T + R)


def _update_arrays(m, P, z, H, R):
    zhat, S = _innovation(m, P, H, R)
    d = z - zhat
    Sinv_d = np.linalg.solve(S, d)
    log_marginal = -0.5 * float(d @ Sinv_d)
    K = np.linalg.solve(S, H @ P).T
    m_post = m + K @ d
    A = np.eye(m.size) - K @ H
    P_post = _symmetrize(A @ P @ A.T + K @ R @ K.T)
    return m_post, P_post, log_marginal


def predict(belief: GaussianPossibility, model: LinearGaussianModel) -> GaussianPossibility:
    """Sup-propagation of ``belief`` through the transition: ``N(F m, F P F' + Q)``."""
    if belief.dim != model.dim_state:
        raise UsageError("belief and model dimensions differ")
    return GaussianPossibility(*_predict_arrays(belief.mean, belief.cov, model.F, model.Q))


def update(belief: GaussianPossibility, z, model: LinearGaussianModel) -> tuple[GaussianPossibility, float]:
    """Condition ``belief`` on observation ``z``.

    Returns the posterior and the log marginal likelihood
    ``log N(z; H m, H P H' + R)`` without normalising constant, which is
    always ``<= 0``.  A singular innovation covariance raises
    :class:`numpy.linalg.LinAlgError`.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if z.shape != (model.dim_obs,):
        raise UsageError(f"observation of shape {z.shape}, expected ({model.dim_obs},)")
    if not np.all(np.isfinite(z)):
        raise UsageError("observation must be finite")
    m, P, log_marginal = _update_arrays(belief.mean, belief.cov, z, model.H, model.R)
    return GaussianPossibility(m, P), log_marginal


@dataclass(frozen=True)
class BirthPrior:
    """Prior for an appearing object: uninformative position, ``N(0, sigma_v^2 I)`` velocity.

    Assumes the state is ``(position, velocity)`` with the observation picking
    out the position block.
    """

    sigma_v: float = 1.0

    def __post_init__(self):
        if not self.sigma_v > 0:
            raise UsageError("sigma_v must be positive")

    def velocity_cov(self, model: LinearGaussianModel, gap: int = 0) -> np.ndarray:
        """Velocity covariance after ``gap`` undetected steps since appearance.

        With the position unconstrained, sup-marginalising it out leaves the
        velocity block of the recursion, which needs ``F`` to have no
        position-to-velocity coupling.
        """
        dz, dx = model.dim_obs, model.dim_state
        S = self.sigma_v**2 * np.eye(dx - dz)
        if gap:
            Fvv, Fvp = model.F[dz:, dz:], model.F[dz:, :dz]
            if np.any(Fvp != 0):
                raise UsageError("gap > 0 needs a transition without position-to-velocity terms")
            Qvv = model.Q[dz:, dz:]
            for _ in range(gap):
                S = _symmetrize(Fvv @ S @ Fvv.T + Qvv)
        return S

    def posterior(self, z, model: LinearGaussianModel, gap: int = 0) -> GaussianPossibility:
        """Belief right after the first detection ``z``.

        The marginal likelihood of that detection is 1 since the position is
        uninformative.
        """
        dz, dx = model.dim_obs, model.dim_state
        if not np.array_equal(model.H, np.hstack([np.eye(dz), np.zeros((dz, dx - dz))])):
            raise UsageError("birth prior assumes the observation selects the leading state components")
        z = np.atleast_1d(np.asarray(z, dtype=float))
        mean = np.concatenate([z, np.zeros(dx - dz)])
        cov = np.zeros((dx, dx))
        cov[:dz, :dz] = model.R
        cov[dz:, dz:] = self.velocity_cov(model, gap)
        return GaussianPossibility(mean, cov)


@dataclass(frozen=True, eq=False)
class ParticleBelief:
    """Weighted particles ``(w_i, x_i)`` with ``max_i w_i = 1``."""

    weights: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        x = np.asarray(self.states, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if w.ndim != 1 or w.size == 0 or x.shape[0] != w.size:
            raise UsageError("need one weight per particle and at least one particle")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "states", x)

    @property
    def n(self) -> int:
        return self.weights.size

    def mode(self) -> np.ndarray:
        """State of the heaviest particle (the max-expectation point estimate)."""
        return self.states[int(np.argmax(self.weights))].copy()


def _renormalize_max(w):
    top = w.max()
    if not top > 0:
        raise DegenerateBeliefError("all particle weights are zero")
    return w / top


def particles_from_gaussian(g: GaussianPossibility, n: int, rng: np.random.Generator) -> ParticleBelief:
    """Sample ``n`` states from ``N(m, P)`` weighted by the possibility ``g``."""
    L = np.linalg.cholesky(g.cov)
    eps = rng.standard_normal((n, g.dim))
    states = g.mean + eps @ L.T
    logw = -0.5 * np.sum(eps**2, axis=1)
    return ParticleBelief(np.exp(logw - logw.max()), states)


def gaussian_transition_sampler(model: LinearGaussianModel) -> Callable:
    """Exact transition sampler ``x' = F x + w``, ``w ~ N(0, Q)``; handles singular ``Q``."""
    vals, vecs = np.linalg.eigh(model.Q)
    root = vecs * np.sqrt(np.clip(vals, 0.0, None))

    def sample(states, rng):
        noise = rng.standard_normal(states.shape) @ root.T
        return states @ model.F.T + noise

    return sample


def gaussian_log_likelihood(model: LinearGaussianModel) -> Callable:
    """``(z, states) -> log N(z; H x_i, R)`` for every particle, without normaliser."""
    Rinv = np.linalg.inv(model.R)

    def loglik(z, states):
        d = np.asarray(z, dtype=float) - states @ model.H.T
        return -0.5 * np.einsum("ij,jk,ik->i", d, Rinv, d)

    return loglik


def particle_predict(belief: ParticleBelief, sampler: Callable, rng: np.random.Generator) -> ParticleBelief:
    """Move every particle with ``sampler(states, rng)``; weights are unchanged."""
    return ParticleBelief(_renormalize_max(belief.weights), sampler(belief.states, rng))


def particle_update(belief: ParticleBelief, z, loglik: Callable) -> tuple[ParticleBelief, float]:
    """Reweight by the likelihood of ``z``.

    Returns the max-renormalised belief and ``log max_i w_i l(z | x_i)``.
    Raises :class:`DegenerateBeliefError` if every weight vanishes.
    """
    with np.errstate(divide="ignore"):
        logw = np.log(belief.weights) + np.asarray(loglik(z, belief.states), dtype=float)
    top = logw.max()
    if not np.isfinite(top):
        raise DegenerateBeliefError("all particle weights are zero after the update")
    return ParticleBelief(np.exp(logw - top), belief.states), float(top)
