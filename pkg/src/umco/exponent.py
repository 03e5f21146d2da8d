"""Maximum-likelihood error-probability bounds for unit-memory channels with feedback.

The previous output acts as a known state, so the per-block exponent is a
path sum over the state-weight matrix

    M[s_next][s_prev] = [ sum_a pi(a | s_prev) P(b = s_next | s_prev, a)^(1/(1+rho)) ]^(1+rho)

whose Perron root lambda_max(rho) gives the asymptotic exponent
F_inf(rho) = -log2 lambda_max.  The random-coding exponent is
E_r(R) = max_{0 <= rho <= 1} F_inf(rho) - rho R, and the block-error bound

    P_err <= 4 * |B| * (v_max / v_min) * 2^(-n E_r(R))

with the eigenvector ratio taken from the Perron vector certifying the
finite-n bracket |E_n + log2 lambda_max| <= (1/n) log2(v_max / v_min).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .channel import InputPolicy, UnitMemoryChannel, _check_compatible
from .errors import ConvergenceError, ReducibleChainError
from .infinite_horizon import _strongly_connected

ENUMERATION_LIMIT = 16
_RHO_GRID_STEP = 0.01
_GOLDEN_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class LambdaMatrix:
    """State-weight matrix at a fixed rho, indexed [s_next][s_prev].

    At rho = 0 the entries collapse to the induced output kernel transposed,
    so every column must sum to 1.
    """

    rho: float
    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=float)
        if np.any(matrix < 0.0):
            raise ValueError("state-weight entries must be nonnegative")
        if self.rho == 0.0 and np.abs(matrix.sum(axis=0) - 1.0).max() > 1e-9:
            raise ValueError("at rho = 0 the state-weight columns must sum to 1")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)


@dataclass(frozen=True, eq=False)
class ExponentCurve:
    """Samples (rho, lambda_max, F_infinity) plus the eigenvector ratio at each rho."""

    samples: tuple[tuple[float, float, float], ...]
    eigen_ratio: tuple[float, ...]

    def __post_init__(self):
        for rho, lam_max, f_inf in self.samples:
            if lam_max <= 0.0:
                raise ValueError("the Perron root must be positive at every sample")
            if rho == 0.0 and abs(f_inf) > 1e-10:
                raise ValueError("the exponent must vanish at rho = 0")


def lambda_matrix(channel: UnitMemoryChannel, policy: InputPolicy, rho: float) -> LambdaMatrix:
    """Build the state-weight matrix for a time-invariant policy at rho in [0, 1]."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    _check_compatible(channel, policy)
    inv = 1.0 / (1.0 + rho)
    powered = channel.kernel**inv
    inner = np.einsum("sa,san->sn", policy.matrix, powered)  # [s_prev, s_next]
    return LambdaMatrix(rho=float(rho), matrix=(inner ** (1.0 + rho)).T)


def _perron_pair(matrix: np.ndarray, tol: float = 1e-12, max_iter: int = 500_000):
    """Perron root and positive eigenvector of a nonnegative irreducible matrix.

    Power iteration with the all-ones start; the identity shift makes the
    iteration matrix primitive so periodic chains converge too.  Stops on a
    1e-12 change of the Rayleigh quotient.
    """
    n = matrix.shape[0]
    vec = np.ones(n)
    quotient = np.inf
    for _ in range(max_iter):
        image = matrix @ vec
        new_quotient = float(vec @ image) / float(vec @ vec)
        shifted = image + vec
        vec = shifted / shifted.sum()
        if abs(new_quotient - quotient) <= tol:
            return new_quotient, vec
        quotient = new_quotient
    raise ConvergenceError(
        f"power iteration did not settle within {max_iter} iterations", residual=abs(new_quotient - quotient)
    )


def gallager_exponent_infinite(
    channel: UnitMemoryChannel, policy: InputPolicy, rho: float
) -> tuple[float, float]:
    """Asymptotic exponent F_inf(rho) = -log2 lambda_max and the eigenvector ratio.

    The ratio comes from the Perron vector of the transposed state-weight
    matrix, which is the one entering the finite-n bracket for path sums
    started from a known state.  A reducible matrix is rejected: the
    nonnegative-matrix theorem behind the bound needs irreducibility.
    """
    lam = lambda_matrix(channel, policy, rho)
    if not _strongly_connected(lam.matrix):
        raise ReducibleChainError(
            "state-weight matrix is reducible at this policy; the eigenvalue bound is not certified"
        )
    root, vec = _perron_pair(lam.matrix.T)
    return float(-np.log2(root)), float(vec.max() / vec.min())


def exponent_curve(channel: UnitMemoryChannel, policy: InputPolicy, rho_grid) -> ExponentCurve:
    samples = []
    ratios = []
    for rho in rho_grid:
        f_inf, ratio = gallager_exponent_infinite(channel, policy, float(rho))
        samples.append((float(rho), float(2.0 ** (-f_inf)), f_inf))
        ratios.append(ratio)
    return ExponentCurve(samples=tuple(samples), eigen_ratio=tuple(ratios))


def random_coding_exponent(
    channel: UnitMemoryChannel, policy: InputPolicy, rate: float
) -> tuple[float, float]:
    """Maximize F_inf(rho) - rho * rate over rho in [0, 1].

    Coarse grid at step 0.01 followed by golden-section refinement of the
    bracketing interval down to 1e-6 in rho; the value is clamped at 0 (the
    rho = 0 endpoint always achieves 0).
    """
    if rate < 0.0:
        raise ValueError("rate must be nonnegative")

    def objective(rho: float) -> float:
        return gallager_exponent_infinite(channel, policy, rho)[0] - rho * rate

    grid = np.arange(0.0, 1.0 + _RHO_GRID_STEP / 2, _RHO_GRID_STEP)
    values = [objective(float(r)) for r in grid]
    best = int(np.argmax(values))
    best_rho, best_val = float(grid[best]), values[best]

    lo = float(grid[max(best - 1, 0)])
    hi = float(grid[min(best + 1, len(grid) - 1)])
    invphi = (5.0**0.5 - 1.0) / 2.0
    x1 = hi - invphi * (hi - lo)
    x2 = lo + invphi * (hi - lo)
    f1, f2 = objective(x1), objective(x2)
    while hi - lo > _GOLDEN_TOL:
        if f1 < f2:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + invphi * (hi - lo)
            f2 = objective(x2)
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - invphi * (hi - lo)
            f1 = objective(x1)
    for rho, val in ((x1, f1), (x2, f2)):
        if val > best_val:
            best_rho, best_val = rho, val
    return float(max(best_val, 0.0)), float(best_rho)


def error_probability_bound(
    channel: UnitMemoryChannel,
    policy: InputPolicy,
    rate: float,
    n: int,
    state_known: bool = False,
) -> float:
    """Block-error upper bound 4 |B| (v_max/v_min) 2^(-n E_r(rate)), capped at 1.

    With the initial state known at both ends the |B| factor drops.
    """
    if n < 1:
        raise ValueError("block length n must be at least 1")
    exponent, rho_star = random_coding_exponent(channel, policy, rate)
    _, ratio = gallager_exponent_infinite(channel, policy, rho_star)
    coefficient = 4.0 * (1 if state_known else channel.n_states) * ratio
    return float(min(1.0, coefficient * 2.0 ** (-n * exponent)))


def finite_horizon_exponent_oracle(
    channel: UnitMemoryChannel,
    policy: InputPolicy,
    rho: float,
    n: int,
    b_init: int,
    method: str = "auto",
) -> float:
    """Exact n-step exponent -(1/n) log2 of the state-path weight sum from b_init.

    Two interchangeable implementations: explicit path enumeration (n at most
    16) and repeated matrix-vector products with per-step rescaling (any n).
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if method == "auto":
        method = "enumerate" if n <= ENUMERATION_LIMIT else "matrix"
    matrix = lambda_matrix(channel, policy, rho).matrix
    size = matrix.shape[0]
    if method == "enumerate":
        if n > ENUMERATION_LIMIT:
            raise ValueError(f"path enumeration is limited to n <= {ENUMERATION_LIMIT}")
        if size**n > 2**24:
            raise ValueError(f"{size}^{n} paths is too many to enumerate; use method='matrix'")
        paths = np.array(list(itertools.product(range(size), repeat=n)), dtype=int)
        prev = np.concatenate([np.full((paths.shape[0], 1), b_init, dtype=int), paths[:, :-1]], axis=1)
        total = float(matrix[paths, prev].prod(axis=1).sum())
        return -np.log2(total) / n
    if method != "matrix":
        raise ValueError(f"unknown method {method!r}")
    weights = np.zeros(size)
    weights[b_init] = 1.0
    log_total = 0.0
    for _ in range(n):
        weights = matrix @ weights
        scale = weights.sum()
        log_total += np.log2(scale)
        weights = weights / scale
    return float(-log_total / n)


def exponent_csv(channel: UnitMemoryChannel, policy: InputPolicy, rho_grid) -> str:
    """CSV of (rho, lambda_max, F_infinity in bits, eigenvector ratio)."""
    curve = exponent_curve(channel, policy, rho_grid)
    lines = ["rho,lambda_max,F_infinity_bits,eigen_ratio"]
    for (rho, lam_max, f_inf), ratio in zip(curve.samples, curve.eigen_ratio):
        lines.append(f"{rho!r},{lam_max!r},{f_inf!r},{ratio!r}")
    return "\n".join(lines) + "\n"


def rate_sweep_csv(
    channel: UnitMemoryChannel,
    policy: InputPolicy,
    rates,
    n: int,
    state_known: bool = False,
) -> str:
    """CSV of (rate in bits, E_r in bits, maximizing rho, error bound at block length n)."""
    lines = ["rate_bits,E_r_bits,rho_star,bound_at_n"]
    for rate in rates:
        exponent, rho_star = random_coding_exponent(channel, policy, float(rate))
        bound = error_probability_bound(channel, policy, float(rate), n, state_known)
        lines.append(f"{float(rate)!r},{exponent!r},{rho_star!r},{bound!r}")
    return "\n".join(lines) + "\n"
