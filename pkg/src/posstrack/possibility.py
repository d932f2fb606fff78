"""Possibility functions on discrete sets and Gaussian-shaped possibility functions.

A possibility function is a non-negative function whose supremum is 1.  The
discrete ones are plain ``dict`` objects mapping outcomes to credibilities;
the continuous ones used for object states are :class:`GaussianPossibility`.
"""

from __future__ import annotations

from collections.abc import Callable, Hashable, Iterable, Mapping
from dataclasses import dataclass

import numpy as np

from .errors import UsageError

__all__ = [
    "GaussianPossibility",
    "eval_gaussian",
    "log_eval_gaussian",
    "argmax_expectation",
    "max_expectation",
    "probability_bounds",
    "normalize_possibility",
    "max_entropy_weights",
    "max_entropy_pmf",
    "variance_star",
]


@dataclass(frozen=True, eq=False)
class GaussianPossibility:
    """Possibility function ``x -> exp(-0.5 (x-m)' S^-1 (x-m))``.

    The value at the mean is exactly 1; there is no normalising prefactor.
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise UsageError(f"covariance shape {cov.shape} does not match mean of size {mean.size}")
        if not np.allclose(cov, cov.T) or np.linalg.eigvalsh(0.5 * (cov + cov.T)).min() <= 0:
            raise UsageError("covariance must be symmetric positive-definite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.size

    def log_eval(self, x) -> float:
        return log_eval_gaussian(self, x)

    def __call__(self, x) -> float:
        return eval_gaussian(self, x)


def log_eval_gaussian(g: GaussianPossibility, x) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != g.mean.shape:
        raise UsageError(f"point of dimension {x.size} evaluated against mean of dimension {g.dim}")
    d = x - g.mean
    return -0.5 * float(d @ np.linalg.solve(g.cov, d))


def eval_gaussian(g: GaussianPossibility, x) -> float:
    """Credibility of ``x``, a value in ``(0, 1]`` (may underflow to 0 far in the tails)."""
    return float(np.exp(log_eval_gaussian(g, x)))


def argmax_expectation(f):
    """Return an outcome of maximal credibility.

    For a :class:`GaussianPossibility` this is the mean.  For a discrete
    possibility, ties are broken by taking the smallest outcome in the natural
    (``sorted``) order of the outcome identifiers.
    """
    if isinstance(f, GaussianPossibility):
        return f.mean.copy()
    if not f:
        raise UsageError("argmax of an empty possibility function")
    top = max(f.values())
    return min(x for x, v in f.items() if v == top)


def max_expectation(f: Mapping, phi: Mapping | Callable) -> float:
    """Maximum expected value ``max_x phi(x) f(x)`` for a non-negative ``phi``."""
    if not f:
        raise UsageError("expectation under an empty possibility function")
    get = phi if callable(phi) else phi.__getitem__
    best = 0.0
    for x, cred in f.items():
        value = float(get(x))
        if value < 0:
            raise UsageError(f"phi must be non-negative, got {value} at {x!r}")
        best = max(best, value * cred)
    return best


def probability_bounds(f: Mapping, subset: Iterable[Hashable]) -> tuple[float, float]:
    """Lower and upper bounds on the probability of ``subset`` implied by ``f``.

    The upper bound is the credibility of the subset and the lower bound is one
    minus the credibility of its complement; sup over the empty set is 0.
    """
    subset = set(subset)
    missing = subset.difference(f)
    if missing:
        raise UsageError(f"outcomes {sorted(missing, key=repr)} are not in the possibility function")
    upper = max((f[x] for x in subset), default=0.0)
    lower = 1.0 - max((v for x, v in f.items() if x not in subset), default=0.0)
    return lower, upper


def normalize_possibility(f: Mapping) -> dict:
    """Divide by the maximum credibility so that the result peaks at 1."""
    if not f:
        raise UsageError("cannot normalise an empty possibility function")
    top = max(f.values())
    if top <= 0:
        raise UsageError("cannot normalise a possibility function that is zero everywhere")
    return {x: v / top for x, v in f.items()}


def max_entropy_weights(bound) -> np.ndarray:
    """Maximum-entropy probability vector bounded point-wise by ``bound``.

    ``bound`` must be non-negative with maximum 1.  The solution is
    ``p = min(bound, level)`` where the clip level makes ``p`` sum to one; it
    is found exactly from the sorted prefix sums.
    """
    f = np.asarray(bound, dtype=float)
    if f.ndim != 1 or f.size == 0:
        raise UsageError("max-entropy transform needs a non-empty 1-d bound")
    if not np.all(np.isfinite(f)) or f.min() < 0:
        raise UsageError("bound must be finite and non-negative")
    if abs(f.max() - 1.0) > 1e-9:
        raise UsageError(f"bound must be sup-normalised (max = 1), got max {f.max()!r}")
    s = np.sort(f)[::-1]
    n = s.size
    # tail[j] = sum of the entries after the j+1 largest ones
    tail = np.concatenate([np.cumsum(s[::-1])[::-1][1:], [0.0]])
    level = (1.0 - tail) / np.arange(1, n + 1)
    nxt = np.concatenate([s[1:], [0.0]])
    j = int(np.argmax(level >= nxt))
    p = np.minimum(f, level[j])
    return p / p.sum()


def max_entropy_pmf(f: Mapping) -> dict:
    """Dictionary form of :func:`max_entropy_weights`."""
    if not f:
        raise UsageError("max-entropy transform of an empty possibility function")
    keys = list(f)
    p = max_entropy_weights([f[k] for k in keys])
    return dict(zip(keys, p.tolist()))


def variance_star(g: GaussianPossibility) -> float:
    """Inverse curvature of the log-credibility at the mode; scalar case only."""
    if g.dim != 1:
        raise UsageError("variance_star is only defined here for scalar Gaussian possibilities")
    return float(g.cov[0, 0])
