"""Spatio-temporal consistency between observations and between paths.

The credibility that ``z'`` at step ``k' = k + l`` is the next detection of an
object first seen at ``z`` (step ``k``) is

    a_nd^(l-1) * N(z'; H F^l m_z, H S_l H' + R)

where ``(m_z, S_0)`` is the birth posterior at ``z`` and ``S_l`` the covariance
after ``l`` predictions through an upper-bounding transition ``(F, Q)``.  Gaps
with ``a_nd^l < tau_prime`` are not computed and count as credibility 0.
"""

from __future__ import annotations

import csv
import math
from collections.abc import Callable, Iterable

import numpy as np

from .errors import UsageError
from .model import MultiObjectParams, Path, Scenario

__all__ = [
    "ConsistencyIndex",
    "build_index",
    "pair_consistency",
    "lag_covariances",
    "linearized_pair_consistency",
    "numerical_jacobian",
]


def lag_covariances(params: MultiObjectParams, max_lag: int, F=None, Q=None) -> list:
    """``[S_0, S_1, ...]`` for the birth posterior propagated through ``(F, Q)``."""
    model = params.model
    F = model.F if F is None else np.asarray(F, dtype=float)
    Q = model.Q if Q is None else np.asarray(Q, dtype=float)
    S = params.birth.posterior(np.zeros(model.dim_obs), model).cov
    out = [S]
    for _ in range(max_lag):
        S = F @ S @ F.T + Q
        S = 0.5 * (S + S.T)
        out.append(S)
    return out


def pair_consistency(z, k: int, z_next, k_next: int, params: MultiObjectParams, F=None, Q=None) -> float:
    """Credibility that ``z_next`` at ``k_next`` is the next detection after ``z`` at ``k``."""
    if not k < k_next:
        raise UsageError(f"need k < k', got {k} and {k_next}")
    model = params.model
    F = model.F if F is None else np.asarray(F, dtype=float)
    lag = k_next - k
    S = lag_covariances(params, lag, F, Q)[lag]
    m = params.birth.posterior(z, model).mean
    mean = model.H @ np.linalg.matrix_power(F, lag) @ m
    C = model.H @ S @ model.H.T + model.R
    d = np.asarray(z_next, dtype=float) - mean
    return params.alpha_nd ** (lag - 1) * math.exp(-0.5 * float(d @ np.linalg.solve(C, d)))


def numerical_jacobian(h: Callable, x, scale: float = 1.0) -> np.ndarray:
    """Central-difference Jacobian of ``h`` at ``x`` with step ``1e-5 * scale``."""
    x = np.asarray(x, dtype=float)
    step = 1e-5 * scale
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        cols.append((np.atleast_1d(h(x + e)) - np.atleast_1d(h(x - e))) / (2 * step))
    return np.stack(cols, axis=1)


def linearized_pair_consistency(m_z, cov_z, z_next, lag: int, F, Q, h: Callable, R, a_nd: float,
                                jacobian: Callable | None = None) -> float:
    """Pair consistency for a non-linear observation function ``h``.

    The observation is linearised at the predicted mode ``F^lag m_z``; without
    an analytic ``jacobian`` a central-difference one is used.
    """
    F = np.asarray(F, dtype=float)
    Q = np.asarray(Q, dtype=float)
    R = np.atleast_2d(np.asarray(R, dtype=float))
    m = np.linalg.matrix_power(F, lag) @ np.asarray(m_z, dtype=float)
    S = np.asarray(cov_z, dtype=float)
    for _ in range(lag):
        S = F @ S @ F.T + Q
    J = jacobian(m) if jacobian is not None else numerical_jacobian(h, m, scale=max(1.0, np.abs(m).max()))
    J = np.atleast_2d(J)
    C = J @ S @ J.T + R
    d = np.atleast_1d(np.asarray(z_next, dtype=float)) - np.atleast_1d(h(m))
    return a_nd ** (lag - 1) * math.exp(-0.5 * float(d @ np.linalg.solve(C, d)))


class ConsistencyIndex:
    """Pairwise next-detection credibilities for every pair of scans within ``max_lag``.

    ``blocks[(k, l)]`` is an ``(n_k, n_{k+l})`` array; ``marginal[k - 1]`` holds
    the marginal consistency of each observation of scan ``k``.
    """

    def __init__(self, scenario: Scenario, params: MultiObjectParams, tau_prime: float = 1e-3, F=None, Q=None):
        if not 0 < tau_prime <= 1:
            raise UsageError(f"tau_prime must lie in (0, 1], got {tau_prime}")
        self.scenario = scenario
        self.params = params
        self.tau_prime = tau_prime
        model = params.model
        self.F = model.F if F is None else np.asarray(F, dtype=float)
        self.Q = model.Q if Q is None else np.asarray(Q, dtype=float)
        a_nd = params.alpha_nd
        max_lag = 0
        while max_lag < scenario.K - 1 and a_nd ** (max_lag + 1) >= tau_prime:
            max_lag += 1
        self.max_lag = max_lag
        self.blocks = {}
        covs = lag_covariances(params, max_lag, self.F, self.Q)
        H, R = model.H, model.R
        dz = model.dim_obs
        for lag in range(1, max_lag + 1):
            C = H @ covs[lag] @ H.T + R
            Cinv = np.linalg.inv(0.5 * (C + C.T))
            # birth mean is (z, 0), so the predicted observation is linear in z
            M = (H @ np.linalg.matrix_power(self.F, lag))[:, :dz]
            scale = a_nd ** (lag - 1)
            for k in range(1, scenario.K - lag + 1):
                Z, Zn = scenario.scans[k - 1], scenario.scans[k + lag - 1]
                pred = Z @ M.T
                d = Zn[None, :, :] - pred[:, None, :]
                maha = np.einsum("abi,ij,abj->ab", d, Cinv, d)
                self.blocks[(k, lag)] = scale * np.exp(-0.5 * maha)
        self.marginal = []
        for k in range(1, scenario.K + 1):
            best = np.zeros(scenario.size(k))
            for lag in range(1, max_lag + 1):
                block = self.blocks.get((k, lag))
                if block is not None and block.size:
                    best = np.maximum(best, block.max(axis=1))
            self.marginal.append(best)

    def pair(self, obs, obs_next) -> float:
        """Stored credibility for ``obs`` followed by ``obs_next`` (0 outside the lag window)."""
        (k, j), (k2, j2) = obs, obs_next
        if k2 <= k:
            raise UsageError("second observation must be strictly later")
        block = self.blocks.get((k, k2 - k))
        return 0.0 if block is None else float(block[j, j2])

    def marginal_consistency(self, obs) -> float:
        k, j = obs
        return float(self.marginal[k - 1][j])

    def obs_path_consistency(self, obs, path: Path) -> float:
        k, j = obs
        best = 0.0
        for k2, j2 in path.obs:
            if k2 < k:
                block = self.blocks.get((k2, k - k2))
                if block is not None:
                    best = max(best, block[j2, j])
            elif k2 > k:
                block = self.blocks.get((k, k2 - k))
                if block is not None:
                    best = max(best, block[j, j2])
        return float(best)

    def path_path_consistency(self, path: Path, other: Path) -> float:
        best = 0.0
        for obs in path.obs:
            best = max(best, self.obs_path_consistency(obs, other))
        return best

    def forward_consistency(self, paths: Iterable[Path]) -> list:
        """Per scan, the best credibility of each observation being followed by a detection in ``paths``."""
        out = [np.zeros(self.scenario.size(k)) for k in range(1, self.scenario.K + 1)]
        for path in paths:
            for k2, j2 in path.obs:
                for lag in range(1, self.max_lag + 1):
                    block = self.blocks.get((k2 - lag, lag))
                    if block is not None:
                        np.maximum(out[k2 - lag - 1], block[:, j2], out=out[k2 - lag - 1])
        return out

    def rows(self):
        """``(k, j, k', j', credibility)`` for every stored positive credibility."""
        for (k, lag), block in sorted(self.blocks.items()):
            for j, j2 in zip(*np.nonzero(block)):
                yield k, int(j), k + lag, int(j2), float(block[j, j2])

    def write_csv(self, filename) -> None:
        with open(filename, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "j", "k_next", "j_next", "credibility"])
            for row in self.rows():
                writer.writerow([*row[:4], repr(row[4])])


def build_index(scenario: Scenario, params: MultiObjectParams, tau_prime: float = 1e-3, F=None, Q=None):
    return ConsistencyIndex(scenario, params, tau_prime, F, Q)
