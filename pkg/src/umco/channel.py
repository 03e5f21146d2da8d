"""Data model for unit-memory channels and the elementary induced-distribution math.

A channel here is a conditional distribution P(b | b_prev, a) over finite
alphabets, stored as a dense kernel indexed ``[b_prev][a][b]``.  Everything a
solver consumes -- input policies pi(a | b_prev), induced output kernels
P(b | b_prev), distributions over states, cost tables -- lives in this module
together with its validation.  All objects are immutable after construction
(arrays are frozen), so they are safe to share across threads.

Conventions: all logarithms are base 2 and every information quantity is in
bits; 0 * log 0 = 0 throughout.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ChannelFormatError, DimensionMismatchError, ValidationError

# Row sums of textual inputs rarely hit 1.0 exactly; accept a loose tolerance
# at load time and renormalize, but keep constructed objects tight.
LOAD_ROW_TOL = 1e-9
STRICT_ROW_TOL = 1e-12
_RENORM_EPS = 1e-15


def binary_entropy(p: float) -> float:
    """Entropy of a Bernoulli(p) source in bits, with 0*log 0 = 0."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"binary_entropy needs p in [0, 1], got {p}")
    out = 0.0
    for x in (p, 1.0 - p):
        if x > 0.0:
            out -= x * math.log2(x)
    return out


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Alphabet:
    """A finite symbol set {0, ..., size-1}."""

    size: int

    def __post_init__(self):
        if int(self.size) != self.size or self.size < 1:
            raise ValidationError(f"alphabet size must be a positive integer, got {self.size}")
        object.__setattr__(self, "size", int(self.size))


@dataclass(frozen=True, eq=False)
class UnitMemoryChannel:
    """Channel kernel P(b | b_prev, a) on finite alphabets.

    kernel[b_prev][a] is a probability row over the next output b.
    """

    input_alphabet: Alphabet
    output_alphabet: Alphabet
    kernel: np.ndarray
    name: str | None = None

    def __post_init__(self):
        kernel = np.asarray(self.kernel, dtype=float)
        shape = (self.output_alphabet.size, self.input_alphabet.size, self.output_alphabet.size)
        if kernel.shape != shape:
            raise ValidationError(f"kernel shape {kernel.shape} does not match alphabets {shape}")
        if np.any(kernel < 0.0) or np.any(kernel > 1.0):
            raise ValidationError("kernel entries must lie in [0, 1]")
        sums = kernel.sum(axis=2)
        if np.any(np.abs(sums - 1.0) > STRICT_ROW_TOL):
            worst = float(np.abs(sums - 1.0).max())
            raise ValidationError(f"kernel rows must sum to 1 within {STRICT_ROW_TOL}, worst defect {worst:.3e}")
        object.__setattr__(self, "kernel", _frozen_array(kernel))

    @property
    def n_inputs(self) -> int:
        return self.input_alphabet.size

    @property
    def n_states(self) -> int:
        return self.output_alphabet.size


def channel_from_kernel(kernel, name: str | None = None) -> UnitMemoryChannel:
    """Build a channel from a raw [b_prev][a][b] array, deriving the alphabets."""
    kernel = np.asarray(kernel, dtype=float)
    if kernel.ndim != 3 or kernel.shape[0] != kernel.shape[2]:
        raise ValidationError(f"kernel must have shape (n_out, n_in, n_out), got {kernel.shape}")
    return UnitMemoryChannel(Alphabet(kernel.shape[1]), Alphabet(kernel.shape[0]), kernel, name)


@dataclass(frozen=True, eq=False)
class InputPolicy:
    """Conditional input distribution pi(a | b_prev); ``stage`` is None when time-invariant."""

    matrix: np.ndarray
    stage: int | None = None

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=float)
        if matrix.ndim != 2:
            raise ValidationError(f"policy matrix must be 2-d, got shape {matrix.shape}")
        if np.any(matrix < 0.0) or np.any(matrix > 1.0):
            raise ValidationError("policy entries must lie in [0, 1]")
        sums = matrix.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > STRICT_ROW_TOL):
            raise ValidationError("policy rows must sum to 1 within 1e-12")
        object.__setattr__(self, "matrix", _frozen_array(matrix))

    @property
    def n_states(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True, eq=False)
class OutputKernel:
    """Transition matrix of the induced output chain, matrix[b_prev][b] = P(b | b_prev)."""

    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValidationError(f"output kernel must be square, got shape {matrix.shape}")
        if np.any(matrix < 0.0) or np.any(matrix > 1.0):
            raise ValidationError("output kernel entries must lie in [0, 1]")
        if np.any(np.abs(matrix.sum(axis=1) - 1.0) > STRICT_ROW_TOL):
            raise ValidationError("output kernel rows must sum to 1 within 1e-12")
        object.__setattr__(self, "matrix", _frozen_array(matrix))

    @property
    def n_states(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class Distribution:
    """A probability vector, e.g. the law of the initial output symbol."""

    weights: np.ndarray

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float)
        if weights.ndim != 1:
            raise ValidationError("distribution weights must be 1-d")
        if np.any(weights < 0.0) or np.any(weights > 1.0):
            raise ValidationError("distribution entries must lie in [0, 1]")
        if abs(weights.sum() - 1.0) > STRICT_ROW_TOL:
            raise ValidationError("distribution must sum to 1 within 1e-12")
        object.__setattr__(self, "weights", _frozen_array(weights))

    @classmethod
    def uniform(cls, n: int) -> "Distribution":
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def point_mass(cls, n: int, index: int) -> "Distribution":
        w = np.zeros(n)
        w[index] = 1.0
        return cls(w)


@dataclass(frozen=True, eq=False)
class CostSpec:
    """Per-letter transmission cost gamma[b_prev][a] >= 0 with average budget kappa."""

    gamma: np.ndarray
    kappa: float

    def __post_init__(self):
        gamma = np.asarray(self.gamma, dtype=float)
        if gamma.ndim != 2:
            raise ValidationError("cost table must be 2-d, indexed [b_prev][a]")
        if np.any(gamma < 0.0):
            raise ValidationError("cost entries must be nonnegative")
        if self.kappa < 0.0:
            raise ValidationError("budget kappa must be nonnegative")
        object.__setattr__(self, "gamma", _frozen_array(gamma))
        object.__setattr__(self, "kappa", float(self.kappa))


def uniform_policy(n_states: int, n_inputs: int, stage: int | None = None) -> InputPolicy:
    return InputPolicy(np.full((n_states, n_inputs), 1.0 / n_inputs), stage)


def deterministic_policy(choices, n_inputs: int, stage: int | None = None) -> InputPolicy:
    """Point-mass policy selecting input choices[b_prev] in each state."""
    matrix = np.zeros((len(choices), n_inputs))
    for b, a in enumerate(choices):
        matrix[b, a] = 1.0
    return InputPolicy(matrix, stage)


def _check_compatible(channel: UnitMemoryChannel, policy: InputPolicy):
    if policy.matrix.shape != (channel.n_states, channel.n_inputs):
        raise DimensionMismatchError(
            f"policy shape {policy.matrix.shape} does not match channel "
            f"({channel.n_states} states, {channel.n_inputs} inputs)"
        )


def induced_output_kernel(channel: UnitMemoryChannel, policy: InputPolicy) -> OutputKernel:
    """Mix the kernel with the policy: P(b | b_prev) = sum_a P(b | b_prev, a) pi(a | b_prev)."""
    _check_compatible(channel, policy)
    return OutputKernel(np.einsum("sab,sa->sb", channel.kernel, policy.matrix))


def letter_divergences(rows: np.ndarray, output_row: np.ndarray) -> np.ndarray:
    """Per-input-letter divergence sum_b P(b|a) log2(P(b|a) / q(b)) in bits.

    Terms with P(b|a) = 0 contribute nothing; a letter whose row puts mass
    where q vanishes scores +inf.
    """
    rows = np.asarray(rows, dtype=float)
    mask = rows > 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        log_rows = np.where(mask, np.log2(np.where(mask, rows, 1.0)), 0.0)
        log_out = np.log2(output_row)
        terms = np.where(mask, rows * (log_rows - log_out), 0.0)
    return terms.sum(axis=1)


def stage_reward(channel: UnitMemoryChannel, policy: InputPolicy, b_prev: int) -> float:
    """Conditional mutual information I(A; B | B_prev = b_prev) under the policy, in bits.

    Input letters with zero policy mass are excluded, so a deterministic
    policy always scores 0.
    """
    _check_compatible(channel, policy)
    rows = channel.kernel[b_prev]
    weights = policy.matrix[b_prev]
    output_row = weights @ rows
    div = letter_divergences(rows, output_row)
    supported = weights > 0.0
    return float(np.sum(weights[supported] * div[supported]))


def parse_channel_document(document: str) -> tuple[UnitMemoryChannel, np.ndarray | None]:
    """Parse a channel file, returning the channel and the optional cost table."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ChannelFormatError(f"channel document is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ChannelFormatError("channel document must be a JSON object")
    for field in ("input_size", "output_size", "kernel"):
        if field not in doc:
            raise ChannelFormatError(f"channel document is missing required field '{field}'")
    try:
        n_in = int(doc["input_size"])
        n_out = int(doc["output_size"])
        kernel = np.asarray(doc["kernel"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ChannelFormatError(f"malformed channel document: {exc}") from exc
    if n_in < 1 or n_out < 1:
        raise ValidationError("alphabet sizes must be positive")
    if kernel.shape != (n_out, n_in, n_out):
        raise ValidationError(
            f"kernel shape {kernel.shape} does not match alphabets "
            f"(expected {(n_out, n_in, n_out)}, indexed [b_prev][a][b])"
        )
    if np.any(kernel < 0.0):
        raise ValidationError("kernel has a negative entry")
    if np.any(kernel > 1.0 + LOAD_ROW_TOL):
        raise ValidationError("kernel has an entry above 1")
    sums = kernel.sum(axis=2)
    defect = np.abs(sums - 1.0)
    if np.any(defect > LOAD_ROW_TOL):
        worst = float(defect.max())
        raise ValidationError(f"kernel row sum off by {worst:.3e} (> {LOAD_ROW_TOL:g})")
    # Renormalize textual rows to exact sums, but leave already-clean rows
    # untouched so serialize -> load is the identity.
    if np.any(defect > _RENORM_EPS):
        kernel = np.clip(kernel, 0.0, 1.0) / sums[:, :, None]
    name = doc.get("name")
    if name is not None and not isinstance(name, str):
        raise ChannelFormatError("'name' must be a string")
    channel = UnitMemoryChannel(Alphabet(n_in), Alphabet(n_out), kernel, name)
    cost = None
    if doc.get("cost") is not None:
        cost = np.asarray(doc["cost"], dtype=float)
        if cost.shape != (n_out, n_in):
            raise ValidationError(f"cost shape {cost.shape} must be (output_size, input_size)")
        if np.any(cost < 0.0):
            raise ValidationError("cost has a negative entry")
    return channel, cost


def load_channel(document: str) -> UnitMemoryChannel:
    """Parse and validate a channel document (see ``parse_channel_document``)."""
    return parse_channel_document(document)[0]


def serialize_channel(channel: UnitMemoryChannel, cost: np.ndarray | None = None) -> str:
    """Emit the self-describing JSON document for a channel (optionally with a cost table)."""
    doc = {
        "input_size": channel.n_inputs,
        "output_size": channel.n_states,
        "kernel": channel.kernel.tolist(),
    }
    if cost is not None:
        doc["cost"] = np.asarray(cost, dtype=float).tolist()
    if channel.name is not None:
        doc["name"] = channel.name
    return json.dumps(doc, indent=2)
