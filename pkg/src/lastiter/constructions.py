"""Worst-case instances for the final iterate of projected subgradient descent.

Each instance is a max of d+2 pieces on the Euclidean unit ball,

    f(x) = max_{0 <= i <= d+1} H_i(x),    H_i(x) = h_i . x  (+ ||x||^2 / 2),

with the quadratic term present only in the strongly convex family.  The
piece gradients follow a staircase pattern: piece i >= 1 puts a shared
positive slope a_j on every coordinate j < i, a negative entry on its own
coordinate i, and zero beyond; piece 0 is identically the base piece and
piece d+1 carries the shared slopes on all coordinates.

Paired with a subgradient oracle that answers zero for the first T-d steps
and then always selects the lowest active piece above the base one, the
whole trajectory from x_1 = 0 has a closed form: the iterate sleeps at the
origin, then coordinate k is "kicked" up at step T-d+k and decays under the
shared slopes afterwards.  The final iterate therefore ends up with all d
coordinates positive and a function value with a harmonic-sum (~ log d)
lower bound, while the true minimum stays 0 at the origin.

Three families are provided, differing in slope scale, kick depth and step
schedule:

    "sc"        strongly convex, eta_t = 1/t, bound log(d)/(5T)
    "lip-dec"   1-Lipschitz, eta_t = 1/sqrt(t), bound log(d)/(32 sqrt(T))
    "lip-fixed" 1-Lipschitz, eta_t = 1/sqrt(T), bound log(d)/(32 sqrt(T))

For d = 1 the harmonic sum degenerates and the fallback bounds are 1/(4T)
and 1/(32 sqrt(T)) respectively.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .engine import Ball, SgdTrace, StepSchedule, run_sgd

STRONGLY_CONVEX = "sc"
LIPSCHITZ_DECREASING = "lip-dec"
LIPSCHITZ_FIXED = "lip-fixed"
FAMILIES = (STRONGLY_CONVEX, LIPSCHITZ_DECREASING, LIPSCHITZ_FIXED)

# absolute tolerance for detecting ties among active pieces; exact ties in
# real arithmetic show up with ~1e-16 noise in binary64
ACTIVE_TOL = 1e-10

_SCHEDULES = {
    STRONGLY_CONVEX: "inv_t",
    LIPSCHITZ_DECREASING: "inv_sqrt_t",
    LIPSCHITZ_FIXED: "inv_sqrt_horizon",
}


@dataclass(frozen=True)
class AdversarialInstance:
    """One worst-case instance: family tag, dimension d, horizon T and the
    (d+2, d) matrix of piece gradients h_0..h_{d+1}."""

    family: str
    d: int
    T: int
    piece_grads: np.ndarray

    @property
    def quiet_steps(self) -> int:
        """Number of leading steps at which the oracle answers zero (T - d)."""
        return self.T - self.d

    @property
    def quadratic(self) -> bool:
        """Whether every piece carries the common ||x||^2 / 2 term."""
        return self.family == STRONGLY_CONVEX

    @property
    def shared_slopes(self) -> np.ndarray:
        """The positive per-coordinate slopes a_1..a_d (gradient of the top piece)."""
        return self.piece_grads[-1]

    @property
    def depths(self) -> np.ndarray:
        """Magnitude of the negative diagonal entry of pieces 1..d."""
        return -np.diagonal(self.piece_grads[1:self.d + 1])

    @property
    def lipschitz_constant(self) -> float:
        return 3.0 if self.quadratic else 1.0

    def schedule(self) -> StepSchedule:
        kind = _SCHEDULES[self.family]
        return StepSchedule(kind, horizon=self.T)

    def feasible(self) -> Ball:
        return Ball(radius=1.0, dim=self.d)


def build_instance(family: str, d: int, T: int) -> AdversarialInstance:
    """Populate the coefficient tables for one (family, d, T) instance."""
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    if d < 1:
        raise ValueError("d must be >= 1")
    if d > T:
        raise ValueError(f"need d <= T, got d={d}, T={T}")

    j = np.arange(1, d + 1, dtype=float)
    if family == STRONGLY_CONVEX:
        slopes = 1.0 / (2.0 * (d + 1 - j))
        depths = np.ones(d)
    else:
        slopes = 1.0 / (8.0 * (d + 1 - j))
        if family == LIPSCHITZ_DECREASING:
            depths = np.sqrt(j + T - d) / (2.0 * np.sqrt(T))
        else:
            depths = np.full(d, 0.5)

    h = np.zeros((d + 2, d))
    for i in range(1, d + 1):
        h[i, :i - 1] = slopes[:i - 1]
        h[i, i - 1] = -depths[i - 1]
    h[d + 1] = slopes
    h.setflags(write=False)
    return AdversarialInstance(family=family, d=d, T=T, piece_grads=h)


def piece_values(inst: AdversarialInstance, x: np.ndarray) -> np.ndarray:
    """Values of all d+2 pieces at x; accepts a single point or an (n, d) batch."""
    x = np.asarray(x, dtype=float)
    vals = x @ inst.piece_grads.T
    if inst.quadratic:
        sq = 0.5 * np.sum(x * x, axis=-1)
        vals = vals + (sq[..., None] if x.ndim > 1 else sq)
    return vals


def eval_f(inst: AdversarialInstance, x) -> float:
    """f(x) = max over pieces; defined on the unit ball only."""
    x = np.asarray(x, dtype=float)
    if float(np.linalg.norm(x)) > 1.0 + 1e-9:
        raise ValueError("x lies outside the unit ball")
    return float(np.max(piece_values(inst, x)))


def active_set(inst: AdversarialInstance, x, tol: float = ACTIVE_TOL) -> np.ndarray:
    """Indices of pieces within ``tol`` of the max at x, sorted ascending."""
    vals = piece_values(inst, np.asarray(x, dtype=float))
    return np.flatnonzero(vals >= np.max(vals) - tol)


def subgradient_at(inst: AdversarialInstance, x) -> np.ndarray:
    """A canonical subgradient at x: the lowest active piece's gradient
    (plus x for the strongly convex family).  Valid at every point of the
    ball, including where only the base piece is active."""
    x = np.asarray(x, dtype=float)
    i = int(active_set(inst, x)[0])
    g = inst.piece_grads[i].copy()
    if inst.quadratic:
        g += x
    return g


class AdversarialOracle:
    """Subgradient oracle driving the worst-case trajectory.

    Returns the zero vector for the first T-d steps; afterwards returns the
    gradient of the lowest active piece other than the base piece (plus x
    for the strongly convex family).  On the intended trajectory that piece
    index equals t - (T-d); any disagreement is recorded in
    ``self.divergences`` as (t, expected, got) so drift is observable.
    """

    def __init__(self, inst: AdversarialInstance):
        self.inst = inst
        self.divergences: list[tuple[int, int, int]] = []

    def reset(self, seed: int) -> None:
        # deterministic oracle; only clear the drift log for a fresh run
        self.divergences = []

    def value(self, x) -> float:
        return eval_f(self.inst, x)

    def subgradient(self, x, t: int) -> np.ndarray:
        inst = self.inst
        if not 1 <= t <= inst.T:
            raise ValueError(f"step index {t} out of range 1..{inst.T}")
        if t <= inst.quiet_steps:
            return np.zeros(inst.d)
        act = active_set(inst, x)
        act = act[act > 0]
        if act.size == 0:
            raise RuntimeError(
                f"no active piece above the base one at step {t}; "
                "the trajectory left the analyzed region")
        i = int(act[0])
        expected = t - inst.quiet_steps
        if i != expected:
            self.divergences.append((t, expected, i))
        g = inst.piece_grads[i].copy()
        if inst.quadratic:
            g += np.asarray(x, dtype=float)
        return g


def closed_form_trajectory(inst: AdversarialInstance) -> np.ndarray:
    """All predicted iterates z_1..z_{T+1} as a (T+1, d) array.

    z_t = 0 for t <= T-d+1.  For later t, with q = T-d, coordinate j is
    nonzero exactly when j < t-q:

      sc:        z_{t,j} = (1 - (t-q-j-1) a_j) / (t-1)
      lip-dec:   z_{t,j} = b_j/sqrt(j+q) - a_j * sum_{k=j+q+1}^{t-1} 1/sqrt(k)
      lip-fixed: z_{t,j} = (b_j - a_j (t-j-q-1)) / sqrt(T)
    """
    d, T, q = inst.d, inst.T, inst.quiet_steps
    a = inst.shared_slopes
    b = inst.depths
    z = np.zeros((T + 1, d))
    if inst.family == LIPSCHITZ_DECREASING:
        # prefix[m] = sum_{k=1}^m 1/sqrt(k), prefix[0] = 0
        prefix = np.concatenate(([0.0], np.cumsum(1.0 / np.sqrt(np.arange(1, T + 1)))))
    for t in range(q + 2, T + 2):
        m = t - q                      # support is coordinates 1..m-1
        jj = np.arange(1, m, dtype=float)
        if inst.family == STRONGLY_CONVEX:
            row = (1.0 - (t - q - jj - 1.0) * a[:m - 1]) / (t - 1.0)
        elif inst.family == LIPSCHITZ_FIXED:
            row = (b[:m - 1] - a[:m - 1] * (t - jj - q - 1.0)) / np.sqrt(T)
        else:
            base = b[:m - 1] / np.sqrt(jj + q)
            tails = prefix[t - 1] - prefix[np.arange(1, m) + q]
            row = base - a[:m - 1] * tails
        z[t - 1, :m - 1] = row
    return z


def closed_form_iterate(inst: AdversarialInstance, t: int) -> np.ndarray:
    """Predicted iterate z_t for a single 1-based step index t in 1..T+1."""
    if not 1 <= t <= inst.T + 1:
        raise ValueError(f"t={t} out of range 1..{inst.T + 1}")
    if t <= inst.quiet_steps + 1:
        return np.zeros(inst.d)
    return closed_form_trajectory(inst)[t - 1].copy()


def lower_bound_value(family: str, d: int, T: int) -> float:
    """Certified suboptimality of the final iterate for one (family, d, T).

    Uses the natural log for d >= 2.  For d = 1 the harmonic-sum-to-log step
    is dropped and the per-term constant kept: 1/(4T) for the strongly
    convex family, 1/(32 sqrt(T)) for the Lipschitz families.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    if d < 1 or d > T:
        raise ValueError(f"invalid (d, T) = ({d}, {T})")
    if family == STRONGLY_CONVEX:
        return np.log(d) / (5.0 * T) if d >= 2 else 1.0 / (4.0 * T)
    return np.log(d) / (32.0 * np.sqrt(T)) if d >= 2 else 1.0 / (32.0 * np.sqrt(T))


def run_on_instance(inst: AdversarialInstance, seed: int = 0) -> SgdTrace:
    """Run the engine on an instance from x_1 = 0 with its family schedule."""
    oracle = AdversarialOracle(inst)
    return run_sgd(oracle, inst.feasible(), inst.schedule(),
                   np.zeros(inst.d), inst.T, seed=seed)


@dataclass
class VerifyReport:
    """Outcome of checking an engine trace against the closed form."""

    family: str
    d: int
    T: int
    max_deviation: float
    first_mismatch: int | None   # 1-based step index, None if within tol
    final_value: float
    bound: float
    tol: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "family": self.family, "d": self.d, "T": self.T,
            "max_deviation": self.max_deviation,
            "first_mismatch": self.first_mismatch,
            "final_value": self.final_value, "bound": self.bound,
            "tol": self.tol, "pass": self.passed,
        }


def verify_trajectory(inst: AdversarialInstance, trace: SgdTrace,
                      tol: float = 1e-9) -> VerifyReport:
    """Max-norm comparison of a trace against the closed-form trajectory."""
    z = closed_form_trajectory(inst)
    if trace.iterates.shape != z.shape:
        raise ValueError(
            f"trace shape {trace.iterates.shape} does not match expected {z.shape}")
    dev = np.max(np.abs(trace.iterates - z), axis=1)
    max_dev = float(dev.max())
    bad = np.flatnonzero(dev > tol)
    first = int(bad[0]) + 1 if bad.size else None
    return VerifyReport(
        family=inst.family, d=inst.d, T=inst.T,
        max_deviation=max_dev, first_mismatch=first,
        final_value=float(trace.values[-1]),
        bound=lower_bound_value(inst.family, inst.d, inst.T),
        tol=tol, passed=first is None,
    )


def sample_ball(rng: np.random.Generator, count: int, dim: int,
                radius: float = 1.0) -> np.ndarray:
    """Uniform samples from the ball: normalized Gaussian scaled by U^(1/dim)."""
    g = rng.standard_normal((count, dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = rng.random(count) ** (1.0 / dim)
    return radius * g * r[:, None]


@dataclass
class CertificateReport:
    """Outcome of a sampled Lipschitz or strong-convexity check."""

    kind: str
    constant: float
    samples: int
    seed: int
    worst: float          # worst slack: <= slack_tol means pass
    worst_ratio: float    # max |f(x)-f(y)| / (L ||x-y||), Lipschitz only
    passed: bool
    witness: tuple | None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "constant": self.constant,
            "samples": self.samples, "seed": self.seed,
            "worst": self.worst, "worst_ratio": self.worst_ratio,
            "pass": self.passed,
        }


def check_lipschitz(inst: AdversarialInstance, L: float | None = None,
                    samples: int = 10_000, seed: int = 0,
                    slack_tol: float = 1e-12) -> CertificateReport:
    """Sampled certificate that |f(x)-f(y)| <= L ||x-y|| on the unit ball.

    Also verifies that every active piece at every sampled point has
    (sub)gradient norm at most L, which covers every output the min-index
    oracle could emit there.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if L is None:
        L = inst.lipschitz_constant
    rng = np.random.default_rng(seed)
    X = sample_ball(rng, samples, inst.d)
    Y = sample_ball(rng, samples, inst.d)

    vx = piece_values(inst, X)
    vy = piece_values(inst, Y)
    fx, fy = vx.max(axis=1), vy.max(axis=1)
    dist = np.linalg.norm(X - Y, axis=1)
    gap = np.abs(fx - fy) - L * dist
    worst_idx = int(np.argmax(gap))
    worst = float(gap[worst_idx])
    nz = dist > 0
    worst_ratio = float(np.max(np.abs(fx - fy)[nz] / (L * dist[nz]))) if nz.any() else 0.0

    # subgradient norms over all active pieces at the x-samples
    act = vx >= fx[:, None] - ACTIVE_TOL
    row_sq = np.sum(inst.piece_grads ** 2, axis=1)
    if inst.quadratic:
        lin = X @ inst.piece_grads.T
        norms_sq = row_sq[None, :] + 2.0 * lin + np.sum(X * X, axis=1)[:, None]
    else:
        norms_sq = np.broadcast_to(row_sq, act.shape)
    gnorm = float(np.sqrt(np.max(np.where(act, norms_sq, 0.0))))

    passed = worst <= slack_tol and gnorm <= L + slack_tol
    witness = None
    if not passed:
        witness = (X[worst_idx].copy(), Y[worst_idx].copy())
    return CertificateReport(
        kind="lipschitz", constant=L, samples=samples, seed=seed,
        worst=max(worst, gnorm - L), worst_ratio=worst_ratio,
        passed=passed, witness=witness)


def check_strong_convexity(inst: AdversarialInstance, alpha: float = 1.0,
                           samples: int = 10_000, seed: int = 0,
                           slack_tol: float = 1e-12) -> CertificateReport:
    """Sampled certificate that f(y) - f(x) >= g.(y-x) + alpha/2 ||y-x||^2
    for g the canonical subgradient at x."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if not inst.quadratic:
        raise ValueError(f"family {inst.family!r} is not strongly convex")
    rng = np.random.default_rng(seed)
    X = sample_ball(rng, samples, inst.d)
    Y = sample_ball(rng, samples, inst.d)

    vx = piece_values(inst, X)
    fx = vx.max(axis=1)
    fy = piece_values(inst, Y).max(axis=1)
    first_active = np.argmax(vx >= fx[:, None] - ACTIVE_TOL, axis=1)
    G = inst.piece_grads[first_active] + X
    diff = Y - X
    slack = fy - fx - np.sum(G * diff, axis=1) - 0.5 * alpha * np.sum(diff * diff, axis=1)
    worst_idx = int(np.argmin(slack))
    worst = float(slack[worst_idx])
    passed = worst >= -slack_tol
    witness = None if passed else (X[worst_idx].copy(), Y[worst_idx].copy())
    return CertificateReport(
        kind="strong_convexity", constant=alpha, samples=samples, seed=seed,
        worst=worst, worst_ratio=float("nan"), passed=passed, witness=witness)


def dump_instance_csv(inst: AdversarialInstance, path) -> None:
    """Write the piece-gradient table as CSV rows (i, j, h_value) with
    `# family=`, `# d=`, `# T=` metadata lines up front."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# family={inst.family}\n")
        fh.write(f"# d={inst.d}\n")
        fh.write(f"# T={inst.T}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "h_value"])
        for i in range(inst.d + 2):
            for j in range(1, inst.d + 1):
                w.writerow([i, j, f"{inst.piece_grads[i, j - 1]:.17g}"])
