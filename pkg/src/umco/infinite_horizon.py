"""Average-reward solvers for feedback capacity of unit-memory channels.

Two routes to the gain/bias pair (J*, V) solving

    J* + V(b) = sup_pi { stage reward(b, pi) + sum_b' V(b') P_pi(b' | b) }:

relative value iteration (span-seminorm stopping, works without structural
assumptions) and policy iteration (evaluation by a dense linear solve plus
per-state improvement, requires the induced output chain to stay
irreducible).  Stationary distributions, irreducibility diagnostics, and the
Bellman / generalized-equation verifiers live here too.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .channel import (
    CostSpec,
    Distribution,
    InputPolicy,
    OutputKernel,
    UnitMemoryChannel,
    induced_output_kernel,
    letter_divergences,
)
from .errors import ConvergenceError, DimensionMismatchError, ReducibleChainError
from .finite_dp import SUPPORT_EPS, ConditionReport, StateCheck
from .onestage import letter_scores, maximize_stage_objective

# Entries above this are edges of the output-chain graph; below is treated as
# a structural zero rather than rounding noise.
EDGE_EPS = 1e-12

DEFAULT_SPAN_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class InfiniteHorizonSolution:
    """Gain (bits per use), bias normalized to V(0) = 0, and the policy attaining them.

    multiplier/cost_gamma record the cost penalty the solve used (None when
    unconstrained) so verifiers can replay it; gain_trace keeps per-iteration
    gains when the solver produces them (policy iteration).
    """

    gain: float
    bias: np.ndarray
    policy: InputPolicy
    output_kernel: OutputKernel
    invariant_dist: Distribution | None
    irreducible: bool
    iterations: int
    span_residual: float
    multiplier: float | None = None
    cost_gamma: np.ndarray | None = None
    gain_trace: tuple[float, ...] = ()


def _adjacency(matrix: np.ndarray, eps: float = EDGE_EPS) -> np.ndarray:
    return np.asarray(matrix) > eps


def _reachable(adj: np.ndarray, start: int) -> np.ndarray:
    n = adj.shape[0]
    seen = np.zeros(n, dtype=bool)
    stack = [start]
    seen[start] = True
    while stack:
        i = stack.pop()
        for j in np.nonzero(adj[i])[0]:
            if not seen[j]:
                seen[j] = True
                stack.append(int(j))
    return seen


def _strongly_connected(matrix: np.ndarray, eps: float = EDGE_EPS) -> bool:
    adj = _adjacency(matrix, eps)
    return bool(_reachable(adj, 0).all() and _reachable(adj.T, 0).all())


def _closed_classes(matrix: np.ndarray, eps: float = EDGE_EPS) -> list[list[int]]:
    """Closed communicating classes of the chain (SCCs with no outgoing edge)."""
    adj = _adjacency(matrix, eps)
    n = adj.shape[0]
    # Kosaraju: order by finish time on the graph, then sweep the transpose.
    visited = np.zeros(n, dtype=bool)
    order: list[int] = []
    for root in range(n):
        if visited[root]:
            continue
        stack = [(root, iter(np.nonzero(adj[root])[0]))]
        visited[root] = True
        while stack:
            node, it = stack[-1]
            advanced = False
            for j in it:
                if not visited[j]:
                    visited[j] = True
                    stack.append((int(j), iter(np.nonzero(adj[j])[0])))
                    advanced = True
                    break
            if not advanced:
                order.append(node)
                stack.pop()
    comp = np.full(n, -1, dtype=int)
    label = 0
    for root in reversed(order):
        if comp[root] >= 0:
            continue
        stack = [root]
        comp[root] = label
        while stack:
            i = stack.pop()
            for j in np.nonzero(adj.T[i])[0]:
                if comp[j] < 0:
                    comp[j] = label
                    stack.append(int(j))
        label += 1
    closed = []
    for c in range(label):
        members = np.nonzero(comp == c)[0]
        leaves = any(comp[j] != c for i in members for j in np.nonzero(adj[i])[0])
        if not leaves:
            closed.append([int(i) for i in members])
    return closed


def is_irreducible(kernel: OutputKernel) -> bool:
    """True iff the graph of transitions above EDGE_EPS is strongly connected."""
    return _strongly_connected(kernel.matrix)


def stationary_distribution(kernel: OutputKernel) -> Distribution:
    """Unique invariant distribution of an irreducible output chain.

    Solved as the linear fixed-point system with the normalization
    sum(nu) = 1; refined until the residual is at most 1e-12.
    """
    matrix = kernel.matrix
    if not _strongly_connected(matrix):
        classes = _closed_classes(matrix)
        raise ReducibleChainError(
            f"output chain is reducible; closed communicating classes: {classes}",
            closed_classes=classes,
        )
    n = matrix.shape[0]
    system = matrix.T - np.eye(n)
    system[n - 1, :] = 1.0
    rhs = np.zeros(n)
    rhs[n - 1] = 1.0
    nu = np.linalg.solve(system, rhs)
    nu = np.clip(nu, 0.0, None)
    for _ in range(64):
        nu = nu / nu.sum()
        defect = 1.0 - nu.sum()
        if defect != 0.0:
            nu[np.argmax(nu)] += defect
        residual = float(np.abs(matrix.T @ nu - nu).max())
        if residual <= 1e-12:
            return Distribution(nu)
        nu = matrix.T @ nu
    raise ConvergenceError(
        f"stationary distribution residual stalled at {residual:.3e}", residual=residual
    )


def _resolve_cost(channel, cost, multiplier):
    if multiplier is not None and cost is None:
        raise ValueError("a multiplier requires a cost specification")
    if cost is None:
        return None, None
    if cost.gamma.shape != (channel.n_states, channel.n_inputs):
        raise DimensionMismatchError(
            f"cost shape {cost.gamma.shape} does not match channel "
            f"({channel.n_states} states, {channel.n_inputs} inputs)"
        )
    return float(multiplier) if multiplier is not None else 0.0, cost.gamma


def relative_value_iteration(
    channel: UnitMemoryChannel,
    cost: CostSpec | None = None,
    multiplier: float | None = None,
    tol: float = DEFAULT_SPAN_TOL,
    max_iter: int = 100_000,
    initial_value=None,
    initial_policy: InputPolicy | None = None,
) -> InfiniteHorizonSolution:
    """Iterate the one-stage operator, subtracting a reference value each sweep.

    Stops when the span seminorm of successive differences drops below
    ``tol``; the gain is the midpoint of the span bounds, which bracket the
    true average reward.  Non-convergence raises ConvergenceError with the
    final span (the convergence assumptions may fail for such a channel).

    The per-state fixed point is warm-started from the previous sweep (first
    sweep: uniform, or ``initial_policy``); ``initial_value`` seeds the value
    vector, which speeds up families of nearby solves such as a multiplier
    bisection.  Both defaults reproduce the cold uniform start.
    """
    s, gamma = _resolve_cost(channel, cost, multiplier)
    inner_tol = max(tol * 1e-2, 1e-12)
    n_states = channel.n_states
    value = np.zeros(n_states) if initial_value is None else np.array(initial_value, dtype=float)
    warm = None if initial_policy is None else np.array(initial_policy.matrix)
    span = np.inf
    gain = 0.0
    for sweep in range(1, max_iter + 1):
        swept = np.empty(n_states)
        stage_matrix = np.empty((n_states, channel.n_inputs))
        for b in range(n_states):
            sol = maximize_stage_objective(
                channel.kernel[b],
                continuation=value,
                cost_row=gamma[b] if gamma is not None else None,
                multiplier=s or 0.0,
                tol=inner_tol,
                initial=None if warm is None else warm[b],
            )
            swept[b] = sol.value
            stage_matrix[b] = sol.policy
        warm = stage_matrix
        diff = swept - value
        span = float(diff.max() - diff.min())
        gain = float(0.5 * (diff.max() + diff.min()))
        value = swept - swept[0]
        if span <= tol:
            break
    else:
        raise ConvergenceError(
            f"relative value iteration span stalled at {span:.3e} after {max_iter} sweeps "
            f"(tol {tol:g}); the channel may violate the convergence assumptions",
            residual=span,
        )
    policy = InputPolicy(stage_matrix)
    output_kernel = induced_output_kernel(channel, policy)
    irreducible = is_irreducible(output_kernel)
    invariant = stationary_distribution(output_kernel) if irreducible else None
    return InfiniteHorizonSolution(
        gain=gain,
        bias=value,
        policy=policy,
        output_kernel=output_kernel,
        invariant_dist=invariant,
        irreducible=irreducible,
        iterations=sweep,
        span_residual=span,
        multiplier=s,
        cost_gamma=gamma,
    )


def _policy_rewards(channel, matrix, gamma, s):
    """Per-state reward l(b, pi) - s * E[gamma | b] at a fixed policy."""
    rewards = np.empty(channel.n_states)
    for b in range(channel.n_states):
        rows = channel.kernel[b]
        weights = matrix[b]
        div = letter_divergences(rows, weights @ rows)
        supported = weights > 0.0
        rewards[b] = np.sum(weights[supported] * div[supported])
        if gamma is not None and s:
            rewards[b] -= s * float(weights @ gamma[b])
    return rewards


def _evaluate_policy(channel, matrix, gamma, s):
    """Solve J + V(b) - sum_b' K(b,b') V(b') = l(b) with V(0) pinned to 0."""
    kernel_matrix = induced_output_kernel(channel, InputPolicy(matrix)).matrix
    if not _strongly_connected(kernel_matrix):
        classes = _closed_classes(kernel_matrix)
        raise ReducibleChainError(
            "policy iteration hit a reducible induced output chain "
            f"(closed classes {classes}); use relative_value_iteration and "
            "generalized_dp_check instead",
            closed_classes=classes,
        )
    rewards = _policy_rewards(channel, matrix, gamma, s)
    n = channel.n_states
    system = np.zeros((n, n))
    system[:, 0] = 1.0
    for j in range(1, n):
        system[:, j] = -kernel_matrix[:, j]
        system[j, j] += 1.0
    try:
        x = np.linalg.solve(system, rewards)
    except np.linalg.LinAlgError as exc:
        raise ReducibleChainError(
            "policy evaluation system is singular; use relative_value_iteration "
            "and generalized_dp_check instead"
        ) from exc
    gain = float(x[0])
    bias = np.concatenate(([0.0], x[1:]))
    return gain, bias, kernel_matrix


def policy_iteration(
    channel: UnitMemoryChannel,
    initial_policy: InputPolicy,
    cost: CostSpec | None = None,
    multiplier: float | None = None,
    tol: float = DEFAULT_SPAN_TOL,
    max_iter: int = 10_000,
) -> InfiniteHorizonSolution:
    """Alternate exact policy evaluation with per-state concave improvement.

    Terminates when the improved policy moves by at most ``tol`` in sup norm.
    Every iterate's induced output chain must be irreducible; a reducible
    chain or singular evaluation system aborts with a diagnostic.
    """
    if initial_policy.matrix.shape != (channel.n_states, channel.n_inputs):
        raise DimensionMismatchError("initial policy does not match the channel alphabets")
    s, gamma = _resolve_cost(channel, cost, multiplier)
    inner_tol = max(tol * 1e-2, 1e-14)
    matrix = np.array(initial_policy.matrix)
    trace: list[float] = []
    change = np.inf
    for iteration in range(1, max_iter + 1):
        gain, bias, _ = _evaluate_policy(channel, matrix, gamma, s)
        trace.append(gain)
        improved = np.empty_like(matrix)
        for b in range(channel.n_states):
            sol = maximize_stage_objective(
                channel.kernel[b],
                continuation=bias,
                cost_row=gamma[b] if gamma is not None else None,
                multiplier=s or 0.0,
                tol=inner_tol,
            )
            improved[b] = sol.policy
        change = float(np.abs(improved - matrix).max())
        matrix = improved
        if change <= tol:
            break
    else:
        raise ConvergenceError(
            f"policy iteration still moving by {change:.3e} after {max_iter} iterations",
            residual=change,
        )
    gain, bias, kernel_matrix = _evaluate_policy(channel, matrix, gamma, s)
    trace.append(gain)
    # Residual of the Bellman equation at the returned pair.
    residual = 0.0
    for b in range(channel.n_states):
        sol = maximize_stage_objective(
            channel.kernel[b],
            continuation=bias,
            cost_row=gamma[b] if gamma is not None else None,
            multiplier=s or 0.0,
            tol=inner_tol,
        )
        residual = max(residual, abs(sol.value - gain - bias[b]))
    policy = InputPolicy(matrix)
    output_kernel = OutputKernel(kernel_matrix)
    return InfiniteHorizonSolution(
        gain=gain,
        bias=bias,
        policy=policy,
        output_kernel=output_kernel,
        invariant_dist=stationary_distribution(output_kernel),
        irreducible=True,
        iterations=iteration,
        span_residual=float(residual),
        multiplier=s,
        cost_gamma=gamma,
        gain_trace=tuple(trace),
    )


def verify_bellman_conditions(
    channel: UnitMemoryChannel, solution: InfiniteHorizonSolution, tol: float
) -> ConditionReport:
    """Check the stationary per-letter conditions J* + V(b) vs letter scores.

    Equality must hold on the support of the policy and inequality (score at
    most J* + V(b)) off the support, all within ``tol``.
    """
    worst = 0.0
    checks = []
    for b in range(channel.n_states):
        scores = letter_scores(
            channel.kernel[b],
            solution.policy.matrix[b],
            continuation=solution.bias,
            cost_row=solution.cost_gamma[b] if solution.cost_gamma is not None else None,
            multiplier=solution.multiplier or 0.0,
        )
        target = solution.gain + float(solution.bias[b])
        on_support = solution.policy.matrix[b] > SUPPORT_EPS
        violation = np.where(on_support, np.abs(scores - target), np.maximum(scores - target, 0.0))
        worst = max(worst, float(violation.max()))
        checks.append(StateCheck(None, b, target, scores, on_support))
    return ConditionReport(passed=worst <= tol, worst_violation=worst, per_state=tuple(checks))


def generalized_dp_check(
    channel: UnitMemoryChannel,
    solution: InfiniteHorizonSolution,
    tol: float,
    gain_by_state=None,
) -> ConditionReport:
    """Check the two-equation system that also covers reducible output chains.

    (1) the gain function must be invariant under the best linear drift,
        J(b) = max_a sum_b' J(b') P(b' | b, a);
    (2) the bias equation J(b) + V(b) = sup_pi {reward + E V} must hold.

    ``gain_by_state`` overrides the constant gain of an irreducible solution
    with a per-state gain function; for a constant gain equation (1) holds
    for every policy and the report says so.
    """
    if gain_by_state is None:
        gains = np.full(channel.n_states, solution.gain)
        constant_gain = True
    else:
        gains = np.asarray(gain_by_state, dtype=float)
        constant_gain = bool(np.ptp(gains) == 0.0)
    worst_drift = 0.0
    if constant_gain:
        message = "constant gain: the drift equation holds for every policy"
    else:
        for b in range(channel.n_states):
            best = float((channel.kernel[b] @ gains).max())
            worst_drift = max(worst_drift, abs(best - gains[b]))
        message = f"state-dependent gain: worst drift-equation violation {worst_drift:.3e}"
    worst = worst_drift
    checks = []
    inner_tol = max(tol * 1e-3, 1e-14)
    for b in range(channel.n_states):
        sol = maximize_stage_objective(
            channel.kernel[b],
            continuation=solution.bias,
            cost_row=solution.cost_gamma[b] if solution.cost_gamma is not None else None,
            multiplier=solution.multiplier or 0.0,
            tol=inner_tol,
        )
        target = float(gains[b] + solution.bias[b])
        worst = max(worst, abs(sol.value - target))
        scores = letter_scores(
            channel.kernel[b],
            solution.policy.matrix[b],
            continuation=solution.bias,
            cost_row=solution.cost_gamma[b] if solution.cost_gamma is not None else None,
            multiplier=solution.multiplier or 0.0,
        )
        checks.append(StateCheck(None, b, target, scores, solution.policy.matrix[b] > SUPPORT_EPS))
    return ConditionReport(
        passed=worst <= tol, worst_violation=worst, per_state=tuple(checks), message=message
    )


def solution_report(solution: InfiniteHorizonSolution) -> str:
    """Plain-text report of an infinite-horizon solution."""
    lines = [
        f"gain            = {solution.gain:.10f} bits/channel use",
        f"iterations      = {solution.iterations}",
        f"span residual   = {solution.span_residual:.3e} bits",
        f"irreducible     = {solution.irreducible}",
    ]
    if solution.multiplier is not None:
        lines.append(f"cost multiplier = {solution.multiplier:.10g}")
    for b, v in enumerate(solution.bias):
        lines.append(f"bias V({b})       = {v:.10f}")
    for b, row in enumerate(solution.policy.matrix):
        lines.append(f"policy pi(.|{b})  = [{', '.join(f'{x:.9f}' for x in row)}]")
    for b, row in enumerate(solution.output_kernel.matrix):
        lines.append(f"output P(.|{b})   = [{', '.join(f'{x:.9f}' for x in row)}]")
    if solution.invariant_dist is not None:
        weights = ", ".join(f"{x:.9f}" for x in solution.invariant_dist.weights)
        lines.append(f"invariant dist  = [{weights}]")
    return "\n".join(lines)


def solution_csv(solution: InfiniteHorizonSolution) -> str:
    """Per-state CSV table (bias in bits, invariant mass, policy rows)."""
    n_inputs = solution.policy.n_inputs
    header = ["state", "bias_bits", "invariant_mass"] + [f"policy_a{a}" for a in range(n_inputs)]
    rows = [",".join(header)]
    for b in range(solution.policy.n_states):
        mass = "" if solution.invariant_dist is None else repr(float(solution.invariant_dist.weights[b]))
        cells = [str(b), repr(float(solution.bias[b])), mass]
        cells += [repr(float(x)) for x in solution.policy.matrix[b]]
        rows.append(",".join(cells))
    return "\n".join(rows) + "\n"


def minimum_average_cost(
    channel: UnitMemoryChannel, gamma: np.ndarray, tol: float = 1e-10, max_iter: int = 200_000
) -> float:
    """Smallest stationary average cost any input policy can achieve.

    Value iteration on the cost-minimizing control problem; the per-state
    optimization is linear in the policy, so the minimum sits at a single
    letter.  The sweep is damped (factor 1/2) to keep periodic deterministic
    chains from oscillating; min/max of the undamped difference bracket the
    optimal average cost at every sweep.
    """
    gamma = np.asarray(gamma, dtype=float)
    value = np.zeros(channel.n_states)
    gain = 0.0
    for _ in range(max_iter):
        swept = np.empty_like(value)
        for b in range(channel.n_states):
            swept[b] = float((gamma[b] + channel.kernel[b] @ value).min())
        diff = swept - value
        span = float(diff.max() - diff.min())
        gain = float(0.5 * (diff.max() + diff.min()))
        value = 0.5 * (value + swept)
        value = value - value[0]
        if span <= tol:
            return gain
    warnings.warn("minimum-cost iteration did not converge; reporting the latest bracket midpoint")
    return gain
