"""Deterministic recurrent-kernel iterations.

These produce the infinite-size limits of reservoir Gram matrices: starting
from unit-norm, mutually orthogonal initial states, the M x M Gram matrix is
updated once per input step by evaluating the activation's kernel on scalar
products of the previous Gram and the current inputs.

The leaky update blends the previous Gram with the kernel value using the
squared leak factors; the cross products dropped by that blend vanish for
leak rates 0 and 1 and are measured separately by the experiment harness.
Stacked (deep) reservoirs chain the recursion: the freshly updated Gram of
layer l - 1 plays the role of the input scalar products of layer l.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import KernelFunction

__all__ = [
    "RKParams",
    "RKState",
    "deep_rk_gram",
    "deep_rk_init",
    "deep_rk_step",
    "min_eigenvalue",
    "rk_gram",
    "rk_init",
    "rk_step",
    "rk_step_vanilla",
]


@dataclass(frozen=True)
class RKParams:
    """Kernel evaluator plus the scalar hyperparameters of one layer."""

    kernel: KernelFunction
    sigma_r: float
    sigma_i: float
    leak: float = 1.0

    def __post_init__(self):
        if self.sigma_r <= 0.0 or self.sigma_i <= 0.0:
            raise ValueError("sigma_r and sigma_i must be positive")
        if not 0.0 <= self.leak <= 1.0:
            raise ValueError(f"leak must lie in [0, 1], got {self.leak}")


@dataclass(frozen=True)
class RKState:
    """Current Gram matrix of the kernel recursion (symmetric M x M)."""

    gram: np.ndarray

    def validate(self, eig_tol: float = 1e-8) -> None:
        g = self.gram
        if not np.array_equal(g, g.T):
            raise ValueError("Gram matrix is not symmetric")
        if np.any(np.diag(g) < 0.0):
            raise ValueError("Gram diagonal has negative entries")
        if min_eigenvalue(g) < -eig_tol:
            raise ValueError("Gram matrix is not positive semidefinite")


def min_eigenvalue(gram: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(gram).min())


def _input_products(inputs_at_t: np.ndarray) -> np.ndarray:
    inputs_at_t = np.atleast_2d(np.asarray(inputs_at_t, dtype=float))
    return inputs_at_t @ inputs_at_t.T


def _blend(prev_gram: np.ndarray, kernel_gram: np.ndarray, leak: float) -> np.ndarray:
    return (1.0 - leak) ** 2 * prev_gram + leak**2 * kernel_gram


def rk_init(inputs_at_0: np.ndarray, params: RKParams) -> RKState:
    """First Gram matrix, for unit-norm initial states with zero overlap.

    The initial state Gram is the identity (unit self-overlap on the
    diagonal, zero cross products), so this is one kernel update applied to
    the identity; the leak blend applies here exactly as in later steps.
    """
    products = _input_products(inputs_at_0)
    m = products.shape[0]
    eye = np.eye(m)
    sq_norms = params.sigma_r**2 + params.sigma_i**2 * np.diag(products)
    args = params.sigma_r**2 * eye + params.sigma_i**2 * products
    kernel_gram = params.kernel.pairwise(sq_norms, args)
    return RKState(gram=_blend(eye, kernel_gram, params.leak))


def rk_step(state: RKState, inputs_at_t: np.ndarray, params: RKParams) -> RKState:
    """One kernel update of the Gram matrix."""
    products = _input_products(inputs_at_t)
    gram = state.gram
    sq_norms = params.sigma_r**2 * np.diag(gram) + params.sigma_i**2 * np.diag(products)
    args = params.sigma_r**2 * gram + params.sigma_i**2 * products
    kernel_gram = params.kernel.pairwise(sq_norms, args)
    return RKState(gram=_blend(gram, kernel_gram, params.leak))


def rk_step_vanilla(state: RKState, inputs_at_t: np.ndarray, params: RKParams) -> RKState:
    """Dedicated non-leaky update (cross-check for the leak = 1 reduction)."""
    products = _input_products(inputs_at_t)
    gram = state.gram
    sq_norms = params.sigma_r**2 * np.diag(gram) + params.sigma_i**2 * np.diag(products)
    args = params.sigma_r**2 * gram + params.sigma_i**2 * products
    return RKState(gram=params.kernel.pairwise(sq_norms, args))


def deep_rk_init(inputs_at_0: np.ndarray, layer_params) -> list[RKState]:
    """First Gram matrix of every layer of a stack.

    Layer 1 sees the external inputs; each deeper layer sees the freshly
    computed Gram of the layer below in place of input scalar products.
    """
    states = [rk_init(inputs_at_0, layer_params[0])]
    for params in layer_params[1:]:
        below = states[-1].gram
        m = below.shape[0]
        eye = np.eye(m)
        sq_norms = params.sigma_r**2 + params.sigma_i**2 * np.diag(below)
        args = params.sigma_r**2 * eye + params.sigma_i**2 * below
        kernel_gram = params.kernel.pairwise(sq_norms, args)
        states.append(RKState(gram=_blend(eye, kernel_gram, params.leak)))
    return states


def deep_rk_step(states, inputs_at_t: np.ndarray, layer_params) -> list[RKState]:
    """One update of every layer, top of the stack last."""
    new_states = [rk_step(states[0], inputs_at_t, layer_params[0])]
    for state, params in zip(states[1:], layer_params[1:]):
        below = new_states[-1].gram
        gram = state.gram
        sq_norms = params.sigma_r**2 * np.diag(gram) + params.sigma_i**2 * np.diag(below)
        args = params.sigma_r**2 * gram + params.sigma_i**2 * below
        kernel_gram = params.kernel.pairwise(sq_norms, args)
        new_states.append(RKState(gram=_blend(gram, kernel_gram, params.leak)))
    return new_states


def rk_gram(inputs: np.ndarray, params: RKParams, return_history: bool = False):
    """Final Gram matrix after consuming all T inputs.

    ``inputs`` has shape (M, T, d): M equal-length sequences.  With
    ``return_history`` the Gram after every step is returned as well.
    """
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim != 3 or inputs.shape[1] < 1:
        raise ValueError("inputs must have shape (M, T, d) with T >= 1")
    state = rk_init(inputs[:, 0, :], params)
    history = [state.gram]
    for t in range(1, inputs.shape[1]):
        state = rk_step(state, inputs[:, t, :], params)
        if return_history:
            history.append(state.gram)
    if return_history:
        return state.gram, history
    return state.gram


def deep_rk_gram(inputs: np.ndarray, layer_params, return_per_layer: bool = False):
    """Total Gram of a stack (sum over layers) after all T inputs."""
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim != 3 or inputs.shape[1] < 1:
        raise ValueError("inputs must have shape (M, T, d) with T >= 1")
    states = deep_rk_init(inputs[:, 0, :], layer_params)
    for t in range(1, inputs.shape[1]):
        states = deep_rk_step(states, inputs[:, t, :], layer_params)
    total = sum(state.gram for state in states)
    if return_per_layer:
        return total, [state.gram for state in states]
    return total
