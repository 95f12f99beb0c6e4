"""Projected (stochastic) subgradient descent with full iterate history.

The engine is deliberately small: a feasible set with an exact projection,
a step-size schedule evaluated fresh at every step, and a first-order
oracle queried exactly once per step with the current point and the
1-based step index.  Everything downstream (worst-case constructions,
grid random walks, Monte Carlo studies) goes through :func:`run_sgd`.

An oracle is any object with

    value(x) -> float            objective value at x
    subgradient(x, t) -> array   subgradient estimate at x for step t
    reset(seed)                  optional; reseed internal randomness

``reset`` is called at the start of every run, so identical arguments
produce bit-identical traces even for stochastic oracles.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

SCHEDULE_KINDS = ("inv_t", "inv_sqrt_t", "inv_sqrt_horizon", "constant")


@dataclass(frozen=True)
class StepSchedule:
    """Step sizes eta_t for t = 1..T.

    kind:
        "inv_t"             eta_t = 1/t
        "inv_sqrt_t"        eta_t = 1/sqrt(t)
        "inv_sqrt_horizon"  eta_t = 1/sqrt(T) for all t; needs ``horizon``
        "constant"          eta_t = value; needs ``value``
    """

    kind: str
    horizon: int | None = None
    value: float | None = None

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "inv_sqrt_horizon":
            if self.horizon is None or self.horizon < 1:
                raise ValueError("inv_sqrt_horizon needs a positive horizon")
        if self.kind == "constant":
            if self.value is None or not self.value > 0:
                raise ValueError("constant schedule needs a positive value")

    def eval(self, t: int) -> float:
        """Step size at 1-based step t, computed exactly (no caching)."""
        if t < 1:
            raise ValueError(f"step index {t} out of range (must be >= 1)")
        if self.horizon is not None and t > self.horizon:
            raise ValueError(f"step index {t} exceeds horizon {self.horizon}")
        if self.kind == "inv_t":
            return 1.0 / t
        if self.kind == "inv_sqrt_t":
            return 1.0 / np.sqrt(t)
        if self.kind == "inv_sqrt_horizon":
            return 1.0 / np.sqrt(self.horizon)
        return float(self.value)


@dataclass(frozen=True)
class Ball:
    """Euclidean ball of a given radius centered at the origin."""

    radius: float
    dim: int

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")

    def project(self, x: np.ndarray) -> np.ndarray:
        """Nearest point of the ball: x * min(1, radius/||x||)."""
        x = np.asarray(x, dtype=float)
        nrm = float(np.linalg.norm(x))
        if nrm <= self.radius:
            return x.copy()
        return x * (self.radius / nrm)

    def contains(self, x, tol: float = 1e-12) -> bool:
        return float(np.linalg.norm(x)) <= self.radius + tol


@dataclass(frozen=True)
class Interval:
    """Closed interval [lo, hi] as a one-dimensional feasible set."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("need lo < hi")

    @property
    def dim(self) -> int:
        return 1

    def project(self, x: np.ndarray) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lo, self.hi)

    def contains(self, x, tol: float = 1e-12) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))


@dataclass
class SgdTrace:
    """Full history of one run: iterates x_1..x_{T+1}, oracle outputs g_1..g_T,
    objective values f(x_1)..f(x_{T+1}), and the schedule that produced them."""

    iterates: np.ndarray   # (T+1, d)
    gradients: np.ndarray  # (T, d)
    values: np.ndarray     # (T+1,)
    schedule: StepSchedule

    @property
    def T(self) -> int:
        return self.gradients.shape[0]

    @property
    def dim(self) -> int:
        return self.iterates.shape[1]

    @property
    def final(self) -> np.ndarray:
        return self.iterates[-1]


def run_sgd(oracle, feasible, schedule: StepSchedule, x1, T: int,
            seed: int = 0) -> SgdTrace:
    """Run x_{t+1} = project(x_t - eta_t * g_t) for t = 1..T and record everything.

    The step counter is 1-based and passed to the oracle, so oracles whose
    behavior depends on the step index (e.g. ones that sleep for a while and
    then kick) need no hidden state.  ``seed`` is forwarded to
    ``oracle.reset`` when the oracle has one; deterministic oracles ignore it.
    """
    x = np.atleast_1d(np.asarray(x1, dtype=float)).copy()
    if x.ndim != 1 or x.shape[0] != feasible.dim:
        raise ValueError(f"x1 has dimension {x.shape}, feasible set wants {feasible.dim}")
    if not feasible.contains(x):
        raise ValueError("x1 lies outside the feasible set")
    if T < 1:
        raise ValueError("T must be >= 1")
    if hasattr(oracle, "reset"):
        oracle.reset(seed)

    d = x.shape[0]
    iterates = np.empty((T + 1, d))
    gradients = np.empty((T, d))
    values = np.empty(T + 1)
    iterates[0] = x
    values[0] = oracle.value(x)
    for t in range(1, T + 1):
        g = np.atleast_1d(np.asarray(oracle.subgradient(x, t), dtype=float))
        if g.shape != (d,):
            raise ValueError(f"oracle returned shape {g.shape}, expected ({d},)")
        if not np.all(np.isfinite(g)):
            raise ValueError(f"oracle returned a non-finite subgradient at step {t}")
        x = feasible.project(x - schedule.eval(t) * g)
        gradients[t - 1] = g
        iterates[t] = x
        values[t] = oracle.value(x)
    return SgdTrace(iterates, gradients, values, schedule)


def running_average(trace: SgdTrace) -> np.ndarray:
    """Arithmetic mean of x_1..x_{T+1}; the classical averaged output."""
    if trace.iterates.size == 0:
        raise ValueError("empty trace")
    return trace.iterates.mean(axis=0)


def trace_to_csv(trace: SgdTrace, path) -> None:
    """Write the trace as CSV: t, x_1..x_d, g_1..g_d, f_value per row.

    One row per iterate (T+1 rows).  The final row has no oracle output, so
    its g columns are left empty.  Floats use 17 significant digits so the
    file round-trips binary64 exactly.
    """
    d = trace.dim
    header = (["t"] + [f"x_{j}" for j in range(1, d + 1)]
              + [f"g_{j}" for j in range(1, d + 1)] + ["f_value"])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for t in range(trace.T + 1):
            xs = [f"{v:.17g}" for v in trace.iterates[t]]
            if t < trace.T:
                gs = [f"{v:.17g}" for v in trace.gradients[t]]
            else:
                gs = [""] * d
            w.writerow([t + 1] + xs + gs + [f"{trace.values[t]:.17g}"])
