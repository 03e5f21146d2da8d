"""Per-state concave program: maximize stage information plus a linear bias.

Each dynamic-programming stage asks, for one fixed previous output, for the
input distribution maximizing

    sum_a pi(a) * [ D_a(pi) + sum_b W(b) P(b|a) - s * cost(a) ]

where D_a(pi) is the divergence of the letter's output row against the
pi-induced output.  This is a channel-capacity problem with a per-letter
bias, solved by the multiplicative fixed point

    pi'(a)  proportional to  pi(a) * 2^(D_a + bias_a)

starting from uniform.  The certificate max_a(D_a + bias_a) - objective
upper-bounds the remaining suboptimality, so iteration stops once it drops
below ``tol``.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .channel import letter_divergences
from .errors import ConvergenceError

# Keep every letter strictly positive so induced outputs never lose support;
# mass at the floor is far below any tolerance in use.
_POLICY_FLOOR = 1e-280

# The multiplicative update crawls when the optimum sits on a face of the
# simplex (it only reaches the boundary asymptotically).  Every so often,
# test the candidate obtained by zeroing near-dead letters against the
# certificate, which is valid for any policy.
_SNAP_PERIOD = 256
_SNAP_THRESHOLDS = (1e-4, 1e-8)

DEFAULT_INNER_TOL = 1e-10
DEFAULT_INNER_MAX_ITER = 100_000


class StateSolution(NamedTuple):
    policy: np.ndarray
    value: float
    iterations: int
    gap: float


def _letter_bias(rows, continuation, cost_row, multiplier):
    bias = np.zeros(rows.shape[0])
    if continuation is not None:
        bias = bias + rows @ np.asarray(continuation, dtype=float)
    if cost_row is not None and multiplier:
        bias = bias - multiplier * np.asarray(cost_row, dtype=float)
    return bias


def letter_scores(rows, policy_row, continuation=None, cost_row=None, multiplier=0.0) -> np.ndarray:
    """Per-letter score D_a + E[continuation | a] - s*cost(a) at a given policy.

    On the support of an optimal policy these scores all equal the stage
    value; off the support they cannot exceed it.
    """
    rows = np.asarray(rows, dtype=float)
    output_row = np.asarray(policy_row, dtype=float) @ rows
    return letter_divergences(rows, output_row) + _letter_bias(rows, continuation, cost_row, multiplier)


def _certify(rows, pi, bias, tol, iteration):
    """Evaluate a candidate policy against the suboptimality certificate."""
    scores = letter_divergences(rows, pi @ rows) + bias
    supported = pi > 0.0
    value = float(np.sum(pi[supported] * scores[supported]))
    gap = float(scores.max() - value)
    if gap <= tol:
        return StateSolution(pi, value, iteration, gap)
    return None


def maximize_stage_objective(
    rows,
    continuation=None,
    cost_row=None,
    multiplier: float = 0.0,
    tol: float = DEFAULT_INNER_TOL,
    max_iter: int = DEFAULT_INNER_MAX_ITER,
    initial=None,
) -> StateSolution:
    """Solve one state's concave program over the input simplex.

    rows: kernel slice P(b | b_prev=., a), shape (n_inputs, n_outputs).
    continuation: optional next-stage value vector W(b).
    cost_row, multiplier: optional linear penalty s * cost(a).
    initial: optional warm-start policy row; default is uniform, which is
    also the tie-breaker among optimal policies.

    Raises ConvergenceError with the achieved gap if ``max_iter`` is hit.
    """
    rows = np.asarray(rows, dtype=float)
    n_inputs = rows.shape[0]
    bias = _letter_bias(rows, continuation, cost_row, multiplier)
    # Work with a centered bias: a common offset shifts every score and the
    # value alike, and removing it avoids cancellation when the offset is
    # large (e.g. a big cost multiplier).
    offset = float(bias.max())
    bias = bias - offset
    if initial is None:
        pi = np.full(n_inputs, 1.0 / n_inputs)
    else:
        pi = np.maximum(np.asarray(initial, dtype=float), _POLICY_FLOOR)
        pi = pi / pi.sum()
    value = 0.0
    gap = np.inf
    for iteration in range(1, max_iter + 1):
        output_row = pi @ rows
        scores = letter_divergences(rows, output_row) + bias
        value = float(pi @ scores)
        gap = float(scores.max() - value)
        if gap <= tol:
            return StateSolution(pi, value + offset, iteration, gap)
        if iteration % _SNAP_PERIOD == 0:
            for threshold in _SNAP_THRESHOLDS:
                snapped = np.where(pi >= threshold * pi.max(), pi, 0.0)
                if np.all(snapped > 0.0):
                    break  # nothing to snap at this or any smaller threshold
                solution = _certify(rows, snapped / snapped.sum(), bias, tol, iteration)
                if solution is not None:
                    return solution._replace(value=solution.value + offset)
        weights = pi * np.exp2(scores - scores.max())
        pi = weights / weights.sum()
        pi = np.maximum(pi, _POLICY_FLOOR)
        pi = pi / pi.sum()
    raise ConvergenceError(
        f"stage fixed point did not reach tol={tol:g} within {max_iter} iterations "
        f"(achieved gap {gap:.3e})",
        residual=gap,
    )
