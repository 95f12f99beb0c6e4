"""Birth-death chain induced by a restricted +/-1 oracle on the grid {0, 1/n, ..., 1}.

Running fixed-step SGD with step 1/n on a convex f: [0,1] -> R whose oracle
can only answer +1 or -1 keeps the iterate on the grid, so the process is a
Markov chain.  With a_i the probability of answering +1 (a step toward 0)
at grid point i/n, the chain moves left with probability a_i, right with
probability 1-a_i, and the boundary moves that would leave [0,1] are
projected back (the endpoints stay put instead).  Unbiasedness forces
2 a_i - 1 to be a subgradient of f at i/n, and convexity with the minimum
at 0 forces 1/2 <= a_0 <= ... <= a_n <= 1.

The stationary distribution has the product closed form

    p_i  proportional to  prod_{j<i} (1 - a_j) / prod_{1<=j<=i} a_j,

computed here in log space, and its expected objective value is bounded by
(2 + 24e)/n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .engine import Interval, SgdTrace, StepSchedule, run_sgd

#: coefficient of the stationary suboptimality bound (2 + 24e)/n
BOUND_COEFF = 2.0 + 24.0 * math.e

_MONOTONE_TOL = 1e-9


@dataclass(frozen=True)
class WalkChain:
    """Grid size n, left-move probabilities a_0..a_n and the transition matrix."""

    n: int
    left_probs: np.ndarray   # (n+1,)
    matrix: np.ndarray       # (n+1, n+1) row-stochastic

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.n + 1) / self.n


def transition_matrix(left_probs: np.ndarray) -> np.ndarray:
    """Tridiagonal row-stochastic matrix of the projected walk."""
    a = np.asarray(left_probs, dtype=float)
    n = a.shape[0] - 1
    P = np.zeros((n + 1, n + 1))
    P[0, 0] = a[0]
    P[0, 1] = 1.0 - a[0]
    for i in range(1, n):
        P[i, i - 1] = a[i]
        P[i, i + 1] = 1.0 - a[i]
    P[n, n - 1] = a[n]
    P[n, n] = 1.0 - a[n]
    return P


def make_chain(left_probs) -> WalkChain:
    """Validate a probability profile and assemble the chain."""
    a = np.asarray(left_probs, dtype=float).copy()
    if a.ndim != 1 or a.shape[0] < 2:
        raise ValueError("need at least two grid points")
    if np.any(a < 0.5 - _MONOTONE_TOL) or np.any(a > 1.0 + _MONOTONE_TOL):
        raise ValueError("left-move probabilities must lie in [1/2, 1]")
    if np.any(np.diff(a) < -_MONOTONE_TOL):
        raise ValueError("left-move probabilities must be nondecreasing")
    a = np.clip(a, 0.5, 1.0)
    P = transition_matrix(a)
    a.setflags(write=False)
    P.setflags(write=False)
    return WalkChain(n=a.shape[0] - 1, left_probs=a, matrix=P)


def chain_from_function(f: Callable[[float], float], n: int,
                        subgradient: Callable[[float], float] | None = None,
                        ) -> WalkChain:
    """Chain of the restricted oracle for a 1-Lipschitz convex f minimized at 0.

    a_i = (1 + b_i)/2 where b_i is a subgradient of f at i/n, so the +/-1
    answers have the right mean.  ``subgradient`` may supply exact values;
    otherwise a one-sided difference quotient with h = 1e-6 is used (right
    derivative, except at the right endpoint).  Invalid profiles (negative
    or decreasing slopes) are rejected by :func:`make_chain`.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    grid = np.arange(n + 1) / n
    if subgradient is not None:
        b = np.array([subgradient(float(x)) for x in grid], dtype=float)
    else:
        h = 1e-6
        b = np.empty(n + 1)
        for k, x in enumerate(grid):
            if x + h <= 1.0:
                b[k] = (f(x + h) - f(x)) / h
            else:
                b[k] = (f(x) - f(x - h)) / h
    if np.any(b < -_MONOTONE_TOL) or np.any(b > 1.0 + _MONOTONE_TOL):
        raise ValueError("subgradients must lie in [0, 1] for a valid profile")
    return make_chain((1.0 + np.clip(b, 0.0, 1.0)) / 2.0)


@dataclass
class StationaryResult:
    p: np.ndarray
    method: str
    residual: float   # max-norm of p P - p


def _residual(chain: WalkChain, p: np.ndarray) -> float:
    return float(np.max(np.abs(p @ chain.matrix - p)))


def stationary_closed_form(chain: WalkChain) -> StationaryResult:
    """Product-form stationary distribution, evaluated in log space.

    Works up to the first index where a_j = 1 exactly; all mass beyond it is
    zero (the walk cannot pass a point that always steps left), matching the
    zero factor of the product.
    """
    a = chain.left_probs
    n = chain.n
    ones = np.flatnonzero(a >= 1.0)
    cut = int(ones[0]) + 1 if ones.size else n + 1  # indices < cut can carry mass

    # log of the unnormalized weights for i < cut:
    #   lw_i = sum_{j<i} log(1-a_j) - sum_{1<=j<=i} log(a_j)
    num = np.concatenate(([0.0], np.cumsum(np.log1p(-a[:cut - 1]))))
    den = np.concatenate(([0.0], np.cumsum(np.log(a[1:cut]))))
    lw = num - den
    lw -= lw.max()
    w = np.exp(lw)

    p = np.zeros(n + 1)
    p[:cut] = w / w.sum()
    return StationaryResult(p=p, method="closed_form", residual=_residual(chain, p))


def stationary_solve(chain: WalkChain, method: str = "linear_solve",
                     tol: float = 1e-12, max_iters: int = 10 ** 6,
                     ) -> StationaryResult:
    """Stationary distribution by dense linear solve or power iteration.

    Both are independent of the product closed form and agree with it to
    ~1e-10 whenever the chain is irreducible and aperiodic.
    """
    n = chain.n
    if method == "linear_solve":
        # p (P - I) = 0 with the normalization sum(p) = 1 replacing one equation
        A = chain.matrix.T - np.eye(n + 1)
        A[-1, :] = 1.0
        rhs = np.zeros(n + 1)
        rhs[-1] = 1.0
        p = np.linalg.solve(A, rhs)
        p = np.maximum(p, 0.0)
        p /= p.sum()
        return StationaryResult(p=p, method=method, residual=_residual(chain, p))
    if method == "power_iteration":
        p = np.full(n + 1, 1.0 / (n + 1))
        for _ in range(max_iters):
            q = p @ chain.matrix
            r = float(np.max(np.abs(q - p)))
            p = q
            if r <= tol:
                return StationaryResult(p=p, method=method, residual=_residual(chain, p))
        raise RuntimeError(
            f"power iteration did not reach residual {tol} in {max_iters} "
            f"iterations (last residual {r:.3e})")
    raise ValueError(f"unknown method {method!r}")


def stationary_suboptimality(chain: WalkChain, f: Callable[[float], float],
                             p: np.ndarray | None = None) -> float:
    """Expected objective value sum_i p_i f(i/n) under the stationary law."""
    if p is None:
        p = stationary_closed_form(chain).p
    fvals = np.array([f(float(x)) for x in chain.grid])
    return float(p @ fvals)


def suboptimality_bound(n: int) -> float:
    """The certified stationary bound (2 + 24e)/n."""
    return BOUND_COEFF / n


# ---------------------------------------------------------------------------
# simulation through the SGD engine (the chain is fixed-step SGD in disguise)

class GridSignOracle:
    """Restricted oracle answering +/-1; P[+1] at grid point i/n is a_i."""

    def __init__(self, chain: WalkChain, f: Callable[[float], float]):
        self.chain = chain
        self.f = f
        self._rng = np.random.default_rng(0)

    def reset(self, seed: int) -> None:
        self._rng = np.random.default_rng(seed)

    def value(self, x) -> float:
        return float(self.f(float(np.asarray(x).reshape(-1)[0])))

    def subgradient(self, x, t: int) -> np.ndarray:
        i = int(round(float(np.asarray(x).reshape(-1)[0]) * self.chain.n))
        up = self._rng.random() < self.chain.left_probs[i]
        return np.array([1.0 if up else -1.0])


def simulate_chain_sgd(chain: WalkChain, f: Callable[[float], float],
                       steps: int, seed: int = 0, start: float = 1.0) -> SgdTrace:
    """Run the walk as projected SGD on [0, 1] with constant step 1/n."""
    oracle = GridSignOracle(chain, f)
    schedule = StepSchedule("constant", value=1.0 / chain.n)
    return run_sgd(oracle, Interval(0.0, 1.0), schedule,
                   np.array([start]), steps, seed=seed)


def occupation_frequencies(trace: SgdTrace, n: int, burn_in: int = 0) -> np.ndarray:
    """Empirical distribution over grid indices from the iterates after burn-in."""
    xs = trace.iterates[burn_in:, 0]
    idx = np.rint(xs * n).astype(int)
    return np.bincount(idx, minlength=n + 1) / xs.shape[0]


def long_run_suboptimality(trace: SgdTrace, burn_in: int = 0) -> float:
    """Time average of the recorded objective values after burn-in."""
    return float(np.mean(trace.values[burn_in:]))


# ---------------------------------------------------------------------------
# small corpus of 1-Lipschitz convex test functions on [0, 1], minimum 0 at 0

def linear_profile(slope: float = 0.5):
    """f(x) = slope * x with 0 < slope <= 1."""
    if not 0.0 < slope <= 1.0:
        raise ValueError("slope must be in (0, 1]")
    return (lambda x: slope * x), (lambda x: slope)


def quadratic_profile():
    """f(x) = x^2 / 2, subgradient x."""
    return (lambda x: 0.5 * x * x), (lambda x: x)


def piecewise_profile():
    """f(x) = max(x/2, x - 1/4): slope 1/2 then 1, kink at 1/2."""
    return (lambda x: max(0.5 * x, x - 0.25)), (lambda x: 0.5 if x < 0.5 else 1.0)


def exp_profile():
    """f(x) = (e^x - 1)/e, subgradient e^(x-1) in [1/e, 1]."""
    return (lambda x: (math.exp(x) - 1.0) / math.e), (lambda x: math.exp(x - 1.0))


PROFILES = {
    "linear": linear_profile,
    "quadratic": quadratic_profile,
    "piecewise": piecewise_profile,
    "exp": exp_profile,
}


def profile(name: str, slope: float = 0.5):
    """Look up a corpus profile; returns (f, subgradient) callables."""
    if name not in PROFILES:
        raise ValueError(f"unknown profile {name!r}; choose from {sorted(PROFILES)}")
    if name == "linear":
        return linear_profile(slope)
    return PROFILES[name]()
