"""Independent oracles shared by the tests."""

import itertools
import math

import numpy as np

from posstrack.filtering import LinearGaussianModel
from posstrack.model import MultiObjectParams, Path, Scenario


def kalman_oracle(m, P, z, H, R):
    """Textbook Kalman update with the simple covariance form and an explicit inverse."""
    S = H @ P @ H.T + R
    K = P @ H.T @ np.linalg.inv(S)
    m_post = m + K @ (z - H @ m)
    P_post = (np.eye(len(m)) - K @ H) @ P
    return m_post, P_post


def random_spd(rng, d, scale=1.0):
    A = rng.standard_normal((d, d))
    return scale * (A @ A.T + 0.1 * np.eye(d))


def maxent_oracle(f):
    """Entropy maximisation under ``p <= f`` with a generic conic solver, then KKT polishing.

    The solver identifies which entries sit on their bound; the free entries
    of the exact optimum share one value fixed by the sum constraint, which
    is checked against the solver output and the multiplier signs.
    """
    import cvxpy as cp

    f = np.asarray(f, dtype=float)
    n = f.size
    p = cp.Variable(n)
    prob = cp.Problem(cp.Maximize(cp.sum(cp.entr(p))), [p <= f, cp.sum(p) == 1, p >= 0])
    prob.solve(solver=cp.CLARABEL)
    raw = np.asarray(p.value).ravel()
    active = raw >= f - 1e-5
    active &= f < f.max()  # the largest entries are never all on the bound
    free = ~active
    level = (1.0 - f[active].sum()) / free.sum()
    out = np.where(active, f, level)
    # optimality: the common level must not exceed any free entry's bound
    # and must dominate every active bound
    assert np.all(f[free] >= level - 1e-9)
    assert np.all(f[active] <= level + 1e-9)
    assert np.max(np.abs(out - raw)) < 1e-4
    return out


def brute_gamma(log_lik, log_lik_phi, log_fa):
    """``max`` over injective partial assignments of paths to observations, in log."""
    n_paths, n_obs = log_lik.shape
    best = -math.inf
    for sigma in itertools.product(range(-1, n_obs), repeat=n_paths):
        used = [s for s in sigma if s >= 0]
        if len(set(used)) != len(used):
            continue
        value = (n_obs - len(used)) * log_fa
        value += sum(log_lik_phi[i] if s < 0 else log_lik[i, s] for i, s in enumerate(sigma))
        best = max(best, value)
    return best


def domination_holds(log_lik):
    """Every pair of paths has, for each observation, an alternative observation at least as good."""
    L = np.exp(log_lik)
    n_paths, n_obs = L.shape
    for o in range(n_paths):
        for o2 in range(n_paths):
            if o == o2:
                continue
            for z in range(n_obs):
                lhs = L[o, z] * L[o2, z]
                if not any(lhs <= L[o, z] * L[o2, zp] for zp in range(n_obs) if zp != z):
                    return False
    return True


def enumerate_paths(scenario):
    ids = list(scenario.ids())
    out = []
    for r in range(1, len(ids) + 1):
        for combo in itertools.combinations(ids, r):
            times = [k for k, _ in combo]
            if len(set(times)) == len(times):
                out.append(Path(tuple(sorted(combo))))
    return out


def enumerate_associations(scenario):
    """All sets of pairwise-disjoint paths, including the empty set."""
    paths = enumerate_paths(scenario)
    ids = set(scenario.ids())
    out = []

    def rec(remaining, chosen, start):
        out.append(frozenset(chosen))
        for i in range(start, len(paths)):
            p = paths[i]
            if set(p.obs) <= remaining:
                rec(remaining - set(p.obs), chosen + [p], i + 1)

    rec(ids, [], 0)
    return out


def tiny_scenario():
    """Three scans with sizes 2, 1, 2: 136 associations."""
    return Scenario((np.array([[0.0, 0.0], [1.0, 0.0]]), np.array([[0.5, 0.2]]),
                     np.array([[1.0, 0.1], [0.2, 0.3]])))


def flat_params():
    """Credibilities close to one another so that every association has visible mass."""
    model = LinearGaussianModel.ncv(1.0, 0.5, 1.0)
    return MultiObjectParams(alpha_nd=0.5, alpha_ns=0.3, alpha_fa=0.3, alpha_birth=0.3, model=model)


def crossing_scenario(K=12, clutter=0, seed=0):
    """Two objects on crossing straight lines, detected at every step, plus optional clutter.

    Returns the scenario and the two true paths.
    """
    rng = np.random.default_rng(seed)
    scans, paths = [], ([], [])
    for k in range(1, K + 1):
        t = k - (K + 1) / 2
        a = np.array([t, 0.5 * t])
        b = np.array([t, -0.5 * t + 0.1])
        pts = [a + 0.05 * rng.standard_normal(2), b + 0.05 * rng.standard_normal(2)]
        pts += list(rng.uniform(-30, 30, size=(clutter, 2)))
        scans.append(np.array(pts))
        paths[0].append((k, 0))
        paths[1].append((k, 1))
    return Scenario(tuple(scans)), (Path(tuple(paths[0])), Path(tuple(paths[1])))


def gamma_instance(rng, max_paths=3, max_obs=5):
    """A geometric instance ``(log_lik, log_lik_phi, log_fa)`` satisfying the domination assumption.

    Path predictions and observations are points in the plane with Gaussian
    likelihoods; instances are redrawn until the assumption holds.
    """
    while True:
        n_paths = int(rng.integers(0, max_paths + 1))
        n_obs = int(rng.integers(0, max_obs + 1))
        pred = rng.uniform(-3, 3, size=(n_paths, 2))
        obs = rng.uniform(-3, 3, size=(n_obs, 2))
        scale = rng.uniform(0.3, 2.0, size=n_paths)
        d2 = ((obs[None, :, :] - pred[:, None, :]) ** 2).sum(axis=2)
        log_lik = np.log(rng.uniform(0.05, 1.0, size=(n_paths, 1))) - 0.5 * d2 / scale[:, None] ** 2
        log_lik_phi = np.log(rng.uniform(0.001, 1.0, size=n_paths))
        log_fa = math.log(rng.uniform(1e-3, 0.5))
        if domination_holds(log_lik):
            return log_lik.reshape(n_paths, n_obs), log_lik_phi, log_fa
