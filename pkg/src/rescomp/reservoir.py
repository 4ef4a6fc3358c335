"""Finite-size reservoir simulators.

Covers the vanilla echo-state update, its leaky and sparse variants, and
stacked (deep) reservoirs, plus weight sampling, Gram construction from
states, and a minimal ridge readout.

The update for one layer is

    x_next = (1 - a) * x + a * f(sigma_r * W_r x + sigma_i * W_i u) / sqrt(N)

with ``a`` the leak rate (``a = 1`` recovers the plain update) and the
``1/sqrt(N)`` factor keeping state norms O(1) as N grows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.sparse import csr_matrix

from . import backend
from .kernels import Activation

__all__ = [
    "DeepConfig",
    "DivergenceError",
    "NumericalRankError",
    "ReservoirConfig",
    "StateTrajectory",
    "WeightSet",
    "deep_run",
    "init_state",
    "make_rng",
    "rc_gram",
    "run",
    "run_batch",
    "sample_weights",
    "step",
    "train_readout",
]

#: Fraction of nonzero weights below which the recurrent matrix is stored CSR.
SPARSE_STORAGE_THRESHOLD = 0.25


class DivergenceError(ArithmeticError):
    """A trajectory produced a non-finite state.

    ``time_index`` is the first step whose output was non-finite.
    """

    def __init__(self, time_index: int):
        self.time_index = time_index
        super().__init__(f"reservoir state diverged at step {time_index}")


class NumericalRankError(ValueError):
    """Readout system is singular and cannot be solved without a ridge."""


def make_rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class ReservoirConfig:
    """Hyperparameters of one reservoir layer."""

    n: int
    d: int
    sigma_r: float
    sigma_i: float
    activation: Activation
    leak: float = 1.0
    sparsity: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise ValueError(f"n and d must be >= 1, got n={self.n}, d={self.d}")
        if self.sigma_r <= 0.0 or self.sigma_i <= 0.0:
            raise ValueError("sigma_r and sigma_i must be positive")
        if not 0.0 <= self.leak <= 1.0:
            raise ValueError(f"leak must lie in [0, 1], got {self.leak}")
        if not 0.0 < self.sparsity <= 1.0:
            raise ValueError(f"sparsity must lie in (0, 1], got {self.sparsity}")


@dataclass(frozen=True)
class WeightSet:
    """Sampled weights of one layer.

    ``w_r`` holds the recurrent matrix, dense or CSR depending on sparsity;
    ``w_i`` is always dense.  Nonzero recurrent entries have variance
    ``1/sparsity`` so the spectral radius matches the dense case.
    """

    w_r: object
    w_i: np.ndarray
    sparsity_used: float


@dataclass(frozen=True)
class StateTrajectory:
    """States ``x(0) .. x(T)`` of one reservoir, shape (T + 1, N)."""

    states: np.ndarray

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


@dataclass(frozen=True)
class DeepConfig:
    """Layer configurations of a stacked reservoir; dimensions must chain."""

    layers: tuple[ReservoirConfig, ...]

    def __post_init__(self):
        if not self.layers:
            raise ValueError("DeepConfig needs at least one layer")
        for prev, cur in zip(self.layers, self.layers[1:]):
            if cur.d != prev.n:
                raise ValueError(
                    f"layer input dimension {cur.d} does not match "
                    f"previous layer size {prev.n}"
                )


def sample_weights(config: ReservoirConfig, rng=None) -> WeightSet:
    """Draw the weight matrices of one layer.

    The recurrent matrix gets a Bernoulli(s) support mask with N(0, 1/s)
    values on the support; the input matrix is always dense standard normal.
    """
    if rng is None:
        rng = make_rng(config.seed)
    n, d, s = config.n, config.d, config.sparsity
    if s == 1.0:
        w_r = rng.standard_normal((n, n))
    else:
        values = rng.standard_normal((n, n)) / np.sqrt(s)
        mask = rng.random((n, n)) < s
        w_r = np.where(mask, values, 0.0)
        if s <= SPARSE_STORAGE_THRESHOLD:
            w_r = csr_matrix(w_r)
    w_i = rng.standard_normal((n, d))
    return WeightSet(w_r=w_r, w_i=w_i, sparsity_used=s)


def init_state(n: int, rng) -> np.ndarray:
    """Random direction on the unit sphere (exact unit norm)."""
    if n < 1:
        raise ValueError(f"state dimension must be >= 1, got {n}")
    v = rng.standard_normal(n)
    return v / np.linalg.norm(v)


def _first_bad_step(states: np.ndarray) -> int | None:
    # states has shape (T + 1, ..., N); step t produced states[t].
    finite = np.isfinite(states).all(axis=tuple(range(1, states.ndim)))
    bad = np.nonzero(~finite)[0]
    return int(bad[0]) if bad.size else None


def run_batch(inputs: np.ndarray, w: WeightSet, config: ReservoirConfig,
              x0s: np.ndarray) -> np.ndarray:
    """Drive M reservoirs sharing one WeightSet, one input sequence each.

    ``inputs`` is (M, T, d), ``x0s`` is (M, N); returns states (T + 1, M, N).
    """
    states = backend.run_trajectories(
        w.w_r, w.w_i, inputs, x0s,
        config.sigma_r, config.sigma_i, config.leak, config.activation,
    )
    bad = _first_bad_step(states)
    if bad is not None:
        raise DivergenceError(bad)
    return states


def step(state: np.ndarray, inp: np.ndarray, w: WeightSet,
         config: ReservoirConfig) -> np.ndarray:
    """One reservoir update."""
    states = run_batch(inp[None, None, :], w, config, state[None, :])
    return states[1, 0]


def run(inputs: np.ndarray, w: WeightSet, config: ReservoirConfig,
        x0: np.ndarray, resample_weights: bool = False, rng=None) -> StateTrajectory:
    """Iterate the update over a full input sequence.

    With ``resample_weights`` a fresh WeightSet is drawn before every step
    (the time-independence setting used by limit arguments); the default
    keeps ``w`` fixed for the whole trajectory.
    """
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim != 2 or inputs.shape[0] < 1:
        raise ValueError("inputs must be a nonempty (T, d) array")
    if not resample_weights:
        states = run_batch(inputs[None, :, :], w, config, x0[None, :])
        return StateTrajectory(states=np.ascontiguousarray(states[:, 0, :]))
    if rng is None:
        raise ValueError("resample_weights=True requires an rng")
    out = np.empty((inputs.shape[0] + 1, x0.shape[0]))
    out[0] = x0
    current = x0
    for t in range(inputs.shape[0]):
        fresh = sample_weights(config, rng)
        try:
            current = step(current, inputs[t], fresh, config)
        except DivergenceError:
            raise DivergenceError(t + 1) from None
        out[t + 1] = current
    return StateTrajectory(states=out)


def deep_run(inputs: np.ndarray, deep_config: DeepConfig,
             weight_sets, x0s) -> list[StateTrajectory]:
    """Run a stack of reservoirs; layer l > 1 is driven by the states of
    layer l - 1 (its freshly updated state at each step)."""
    trajectories = []
    drive = np.asarray(inputs, dtype=float)
    for config, w, x0 in zip(deep_config.layers, weight_sets, x0s):
        traj = run(drive, w, config, x0)
        trajectories.append(traj)
        drive = traj.states[1:]
    return trajectories


def deep_run_batch(inputs: np.ndarray, deep_config: DeepConfig,
                   weight_sets, x0s_per_layer) -> list[np.ndarray]:
    """Batched version of ``deep_run``: inputs (M, T, d), states per layer."""
    all_states = []
    drive = np.asarray(inputs, dtype=float)
    for config, w, x0s in zip(deep_config.layers, weight_sets, x0s_per_layer):
        states = run_batch(drive, w, config, x0s)
        all_states.append(states)
        drive = states[1:].transpose(1, 0, 2)
    return all_states


def rc_gram(final_states) -> np.ndarray:
    """Pairwise scalar products of final states.

    ``final_states`` is an (M, N) array, or a list of per-layer (M, N_l)
    arrays for a stacked reservoir, in which case the per-layer Gram
    matrices are summed (the Gram of the concatenated states).
    """
    if isinstance(final_states, (list, tuple)):
        return sum(np.asarray(f) @ np.asarray(f).T for f in final_states)
    final_states = np.asarray(final_states)
    return final_states @ final_states.T


def train_readout(states: np.ndarray, targets: np.ndarray, ridge: float) -> np.ndarray:
    """Ridge-regularized linear readout via the normal equations.

    Solves ``(X^T X + ridge I) W = X^T Y`` for the (N, n_out) readout W.
    """
    if ridge < 0.0:
        raise ValueError(f"ridge must be nonnegative, got {ridge}")
    states = np.atleast_2d(np.asarray(states, dtype=float))
    targets = np.asarray(targets, dtype=float)
    gram = states.T @ states
    gram[np.diag_indices_from(gram)] += ridge
    rhs = states.T @ targets
    try:
        factor = scipy.linalg.cho_factor(gram)
    except scipy.linalg.LinAlgError as exc:
        raise NumericalRankError(
            "state matrix is rank deficient; use a positive ridge"
        ) from exc
    return scipy.linalg.cho_solve(factor, rhs)
