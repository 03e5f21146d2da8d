"""Average-reward solvers, stationary distributions, Bellman-condition verifiers."""

import dataclasses

import numpy as np
import pytest

from conftest import bibo_channel, bsc_rows, bssc, embedded_dmc
from umco import (
    BSSCParams,
    ConvergenceError,
    InfiniteHorizonSolution,
    InputPolicy,
    OutputKernel,
    ReducibleChainError,
    bssc_closed_form,
    bssc_channel,
    channel_from_kernel,
    deterministic_policy,
    generalized_dp_check,
    induced_output_kernel,
    is_irreducible,
    policy_iteration,
    relative_value_iteration,
    solve_finite_horizon,
    stage_reward,
    stationary_distribution,
    uniform_policy,
    verify_bellman_conditions,
)
from umco.infinite_horizon import solution_csv, solution_report


def test_rvi_bssc_best_worst():
    solution = relative_value_iteration(bssc(1.0, 0.5), tol=1e-10)
    assert abs(solution.gain - 0.3219) < 1e-4
    assert np.abs(solution.bias).max() < 1e-9
    assert np.abs(solution.policy.matrix - [[0.6, 0.4], [0.4, 0.6]]).max() < 1e-4
    assert solution.irreducible
    assert solution.span_residual <= 1e-10


def test_rvi_bibo():
    solution = relative_value_iteration(bibo_channel(), tol=1e-9)
    assert abs(solution.gain - 0.215) < 1e-3


def test_rvi_input_independent_channel():
    row = np.array([0.3, 0.7])
    kernel = np.stack([np.stack([row, row]), np.stack([row, row])])
    solution = relative_value_iteration(channel_from_kernel(kernel))
    assert abs(solution.gain) <= 1e-12
    assert np.abs(solution.bias).max() <= 1e-9


def test_rvi_nonconvergence_reports_span():
    with pytest.raises(ConvergenceError) as exc_info:
        relative_value_iteration(bibo_channel(), max_iter=1)
    assert exc_info.value.residual is not None


def test_policy_iteration_bibo():
    solution = policy_iteration(bibo_channel(), uniform_policy(2, 2))
    assert abs(solution.gain - 0.215) < 1e-3
    assert abs(solution.policy.matrix[0, 0] - 0.626) < 2e-3
    assert abs(solution.policy.matrix[1, 1] - 0.67) < 2e-3
    gains = np.array(solution.gain_trace)
    assert np.all(np.diff(gains) >= -1e-12)  # monotone improvement


def test_policy_iteration_bssc():
    solution = policy_iteration(bssc(1.0, 0.5), uniform_policy(2, 2))
    assert abs(solution.gain - 0.3219) < 1e-4
    assert np.abs(solution.policy.matrix - [[0.6, 0.4], [0.4, 0.6]]).max() < 1e-4


def test_policy_iteration_symmetric_dmc_fixed_after_one_improvement():
    solution = policy_iteration(embedded_dmc(bsc_rows(0.1)), uniform_policy(2, 2))
    assert solution.iterations == 1
    assert np.abs(solution.policy.matrix - 0.5).max() < 1e-9


def test_policy_iteration_rejects_reducible_start():
    # a = b_prev on the noiseless state makes the output chain the identity
    with pytest.raises(ReducibleChainError) as exc_info:
        policy_iteration(bssc(1.0, 0.5), deterministic_policy([0, 1], 2))
    assert "relative_value_iteration" in str(exc_info.value)


def test_rvi_and_policy_iteration_agree():
    channels = [bssc(1.0, 0.5), bssc(0.95, 0.8), bibo_channel()]
    for channel in channels:
        rvi = relative_value_iteration(channel, tol=1e-10)
        pi = policy_iteration(channel, uniform_policy(2, 2), tol=1e-10)
        assert abs(rvi.gain - pi.gain) < 1e-6


def test_three_state_channel_solvers_agree(rng):
    kernel = rng.random((3, 2, 3)) + 0.05
    kernel /= kernel.sum(axis=2, keepdims=True)
    channel = channel_from_kernel(kernel)
    rvi = relative_value_iteration(channel, tol=1e-10)
    pi = policy_iteration(channel, uniform_policy(3, 2), tol=1e-10)
    assert abs(rvi.gain - pi.gain) < 1e-6
    assert verify_bellman_conditions(channel, rvi, tol=1e-8).passed
    assert verify_bellman_conditions(channel, pi, tol=1e-8).passed


def test_larger_alphabets_stay_consistent(rng):
    # a few wider instances: solvers agree, conditions hold, gain = nu . l
    for n_states, n_inputs in ((4, 3), (5, 2), (3, 4)):
        kernel = rng.random((n_states, n_inputs, n_states)) + 0.02
        kernel /= kernel.sum(axis=2, keepdims=True)
        channel = channel_from_kernel(kernel)
        rvi = relative_value_iteration(channel, tol=1e-9)
        pi = policy_iteration(channel, uniform_policy(n_states, n_inputs), tol=1e-9)
        assert abs(rvi.gain - pi.gain) < 1e-6
        assert verify_bellman_conditions(channel, pi, tol=1e-8).passed
        nu = pi.invariant_dist.weights
        rewards = np.array([stage_reward(channel, pi.policy, b) for b in range(n_states)])
        assert abs(pi.gain - float(nu @ rewards)) < 1e-9


def test_stationary_distribution_values():
    doubly = OutputKernel([[0.8, 0.2], [0.2, 0.8]])
    assert np.allclose(stationary_distribution(doubly).weights, [0.5, 0.5], atol=1e-12)
    skewed = OutputKernel([[0.9, 0.1], [0.3, 0.7]])
    assert np.allclose(stationary_distribution(skewed).weights, [0.75, 0.25], atol=1e-12)


def test_stationary_distribution_exact_sum_and_residual(rng):
    for _ in range(10):
        matrix = rng.random((4, 4)) + 0.05
        matrix /= matrix.sum(axis=1, keepdims=True)
        kernel = OutputKernel(matrix)
        nu = stationary_distribution(kernel).weights
        assert float(nu.sum()) == 1.0
        assert np.abs(matrix.T @ nu - nu).max() <= 1e-12


def test_stationary_distribution_rejects_reducible():
    with pytest.raises(ReducibleChainError) as exc_info:
        stationary_distribution(OutputKernel(np.eye(2)))
    assert len(exc_info.value.closed_classes) == 2


def test_closed_classes_exclude_transient_states():
    # state 0 drains into the {1, 2} class and is not closed
    kernel = OutputKernel([[0.0, 1.0, 0.0], [0.0, 0.5, 0.5], [0.0, 0.5, 0.5]])
    with pytest.raises(ReducibleChainError) as exc_info:
        stationary_distribution(kernel)
    assert exc_info.value.closed_classes == ((1, 2),)


def test_is_irreducible():
    assert is_irreducible(OutputKernel([[0.5, 0.5], [0.5, 0.5]]))
    assert not is_irreducible(OutputKernel(np.eye(2)))
    assert not is_irreducible(OutputKernel([[0.5, 0.5], [0.0, 1.0]]))  # state 1 absorbing


def test_bellman_conditions_pass_on_solver_output():
    channel = bssc(1.0, 0.5)
    solution = relative_value_iteration(channel, tol=1e-10)
    assert verify_bellman_conditions(channel, solution, tol=1e-9).passed

    channel = bibo_channel()
    solution = policy_iteration(channel, uniform_policy(2, 2))
    assert verify_bellman_conditions(channel, solution, tol=1e-5).passed


def test_bellman_conditions_fail_on_shifted_gain():
    channel = bssc(1.0, 0.5)
    solution = relative_value_iteration(channel, tol=1e-10)
    shifted = dataclasses.replace(solution, gain=solution.gain + 0.01)
    report = verify_bellman_conditions(channel, shifted, tol=1e-6)
    assert not report.passed
    assert report.worst_violation > 5e-3


def test_generalized_check_constant_gain():
    channel = bssc(1.0, 0.5)
    solution = relative_value_iteration(channel, tol=1e-10)
    report = generalized_dp_check(channel, solution, tol=1e-9)
    assert report.passed
    assert "constant gain" in report.message


def _block_channel():
    """Two closed classes: states {0,1} behave like bssc(1,0.5), {2,3} like bssc(0.9,0.9)."""
    top = bssc_channel(BSSCParams(1.0, 0.5)).kernel
    bottom = bssc_channel(BSSCParams(0.9, 0.9)).kernel
    kernel = np.zeros((4, 2, 4))
    kernel[:2, :, :2] = top
    kernel[2:, :, 2:] = bottom
    return channel_from_kernel(kernel)


def test_generalized_check_per_class_gains():
    channel = _block_channel()
    gain_top = bssc_closed_form(BSSCParams(1.0, 0.5)).capacity
    gain_bottom = bssc_closed_form(BSSCParams(0.9, 0.9)).capacity
    policy = InputPolicy([[0.6, 0.4], [0.4, 0.6], [0.5, 0.5], [0.5, 0.5]])
    solution = InfiniteHorizonSolution(
        gain=gain_top,
        bias=np.zeros(4),
        policy=policy,
        output_kernel=induced_output_kernel(channel, policy),
        invariant_dist=None,
        irreducible=False,
        iterations=0,
        span_residual=0.0,
    )
    report = generalized_dp_check(
        channel, solution, tol=1e-9, gain_by_state=[gain_top, gain_top, gain_bottom, gain_bottom]
    )
    assert report.passed
    assert "state-dependent gain" in report.message
    # a wrong per-class gain must be caught
    broken = generalized_dp_check(
        channel, solution, tol=1e-6, gain_by_state=[gain_top, gain_top, gain_top, gain_top]
    )
    assert not broken.passed


def test_generalized_check_two_state_frozen_outputs():
    # outputs frozen at the previous output: two trivial closed classes with
    # zero per-class gain, so the pair of generalized equations holds with
    # J identically zero
    kernel = np.zeros((2, 2, 2))
    kernel[0, :, 0] = 1.0
    kernel[1, :, 1] = 1.0
    channel = channel_from_kernel(kernel)
    policy = uniform_policy(2, 2)
    solution = InfiniteHorizonSolution(
        gain=0.0,
        bias=np.zeros(2),
        policy=policy,
        output_kernel=induced_output_kernel(channel, policy),
        invariant_dist=None,
        irreducible=False,
        iterations=0,
        span_residual=0.0,
    )
    report = generalized_dp_check(channel, solution, tol=1e-12, gain_by_state=[0.0, 0.0])
    assert report.passed


def test_bellman_conditions_pass_with_cost_multiplier():
    channel = bssc(1.0, 0.5)
    from umco import CostSpec, bssc_cost_function

    cost = CostSpec(bssc_cost_function(), 0.5)
    solution = relative_value_iteration(channel, cost=cost, multiplier=0.3, tol=1e-10)
    assert verify_bellman_conditions(channel, solution, tol=1e-9).passed


def test_gain_matches_stationary_average_reward():
    for channel in (bssc(0.95, 0.8), bibo_channel()):
        for solution in (
            relative_value_iteration(channel, tol=1e-10),
            policy_iteration(channel, uniform_policy(2, 2)),
        ):
            nu = solution.invariant_dist.weights
            rewards = np.array([stage_reward(channel, solution.policy, b) for b in range(2)])
            assert abs(solution.gain - float(nu @ rewards)) < 1e-9


def test_finite_horizon_average_converges_to_gain():
    for channel in (bssc(0.95, 0.8), bibo_channel()):
        gain = relative_value_iteration(channel, tol=1e-10).gain
        gaps = []
        for n in (50, 100, 200):
            values = solve_finite_horizon(channel, n).values[0]
            gaps.append(np.abs(values / (n + 1) - gain).max())
        # shrinking 1/n tail; for state-independent values the gap is already
        # at machine precision for every horizon
        assert gaps[2] <= gaps[1] + 1e-12 and gaps[1] <= gaps[0] + 1e-12
        assert gaps[2] <= 2e-3  # bias-offset tail over n+1 = 201
    bibo_gaps = gaps
    assert bibo_gaps[0] > bibo_gaps[1] > bibo_gaps[2]


def test_solution_reports():
    solution = relative_value_iteration(bssc(1.0, 0.5), tol=1e-10)
    text = solution_report(solution)
    assert "gain" in text and "invariant dist" in text
    csv = solution_csv(solution)
    assert csv.splitlines()[0] == "state,bias_bits,invariant_mass,policy_a0,policy_a1"
    assert len(csv.splitlines()) == 3
