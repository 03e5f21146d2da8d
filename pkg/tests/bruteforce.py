"""Standalone brute-force oracles, deliberately independent of the package solvers.

Everything here evaluates information quantities from their definitions and
optimizes by exhaustive grid search; nothing imports the fixed-point code
under test.
"""

import numpy as np


def entropy_terms(p):
    """Elementwise -p log2 p with 0 log 0 = 0."""
    p = np.asarray(p, dtype=float)
    out = np.zeros_like(p)
    mask = p > 0
    out[mask] = -p[mask] * np.log2(p[mask])
    return out


def policy_grid(step):
    """All binary-input policies (p, 1-p) with p on a grid of the given step."""
    ps = np.arange(0.0, 1.0 + step / 2, step)
    return np.stack([ps, 1.0 - ps], axis=1)


def stage_objective(rows, grid, continuation=None):
    """Objective I(pi) + E_pi[continuation] for every grid policy at one state.

    rows: (n_inputs, n_outputs) kernel slice; grid: (k, n_inputs) policies.
    Evaluated from the definition: entropy of the mixed output minus the
    policy-weighted row entropies, plus the expected continuation.
    """
    rows = np.asarray(rows, dtype=float)
    mixed = grid @ rows  # (k, n_outputs)
    h_out = entropy_terms(mixed).sum(axis=1)
    h_rows = entropy_terms(rows).sum(axis=1)  # (n_inputs,)
    info = h_out - grid @ h_rows
    if continuation is not None:
        info = info + grid @ (rows @ np.asarray(continuation, dtype=float))
    return info


def dp_grid_oracle(kernel, horizon, step=0.005):
    """Backward induction with per-state grid search instead of a fixed point.

    Returns the stage-0 value vector; only the per-state maximization differs
    from the recursion under test, so agreement validates the inner solver.
    """
    kernel = np.asarray(kernel, dtype=float)
    n_states = kernel.shape[0]
    grid = policy_grid(step)
    values = np.zeros(n_states)
    for t in range(horizon, -1, -1):
        continuation = None if t == horizon else values
        values = np.array(
            [stage_objective(kernel[b], grid, continuation).max() for b in range(n_states)]
        )
    return values


def dmc_capacity_grid(rows, step=0.001):
    """Grid-search capacity of a binary-input memoryless channel."""
    return float(stage_objective(rows, policy_grid(step)).max())
