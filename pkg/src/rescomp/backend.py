"""Trajectory-kernel backend selection.

The compiled extension is used when it imported successfully; setting the
environment variable ``RESCOMP_PURE_PYTHON=1`` forces the NumPy fallback.
Both backends implement the same update with the same operation order, so
results agree to rounding noise (and are deterministic within a backend).
"""

import os

import numpy as np
from scipy.sparse import csr_matrix

from . import _pyref
from .kernels import Activation

try:
    from . import _speedups

    HAVE_COMPILED = True
except ImportError:  # pragma: no cover - depends on the build environment
    _speedups = None
    HAVE_COMPILED = False

_FORCE_PURE = os.environ.get("RESCOMP_PURE_PYTHON", "") not in ("", "0")

_ACT_IDS = {Activation.ERF: 0, Activation.RELU: 1, Activation.SIGN: 2}


def backend_name() -> str:
    """Name of the trajectory backend in use: 'compiled' or 'numpy'."""
    return "compiled" if (HAVE_COMPILED and not _FORCE_PURE) else "numpy"


def _impl():
    return _speedups if (HAVE_COMPILED and not _FORCE_PURE) else _pyref


def run_trajectories(wr, wi, inputs, x0, sigma_r, sigma_i, leak, activation):
    """Iterate the reservoir update on a batch of input sequences.

    Parameters
    ----------
    wr : (N, N) ndarray or scipy CSR matrix, unscaled recurrent weights.
    wi : (N, d) ndarray, unscaled input weights.
    inputs : (M, T, d) ndarray, one row of sequences per reservoir.
    x0 : (M, N) ndarray of initial states.
    sigma_r, sigma_i : weight scale factors, applied to the matrices once up
        front (so scaled weights and scaled runs agree bit for bit).
    leak : leak rate in [0, 1].
    activation : Activation.

    Returns
    -------
    (T + 1, M, N) ndarray of states, ``out[0] == x0``.
    """
    inputs = np.ascontiguousarray(np.asarray(inputs, dtype=float))
    if inputs.ndim != 3:
        raise ValueError("inputs must have shape (M, T, d)")
    m, t_len, d = inputs.shape
    x0 = np.asarray(x0, dtype=float)
    if x0.shape[0] != m:
        raise ValueError("x0 must provide one initial state per sequence")
    # Kernel layout wants time-major inputs (T, d, M) and column states (N, M).
    inputs_tdm = np.ascontiguousarray(inputs.transpose(1, 2, 0))
    x0_nm = np.ascontiguousarray(x0.T)
    n = x0.shape[1]
    inv_sqrt_n = 1.0 / np.sqrt(n)
    act_id = _ACT_IDS[activation]
    wi_scaled = np.ascontiguousarray(sigma_i * np.asarray(wi, dtype=float))
    impl = _impl()
    if isinstance(wr, csr_matrix):
        data = np.ascontiguousarray(sigma_r * wr.data)
        indices = np.ascontiguousarray(wr.indices, dtype=np.int32)
        indptr = np.ascontiguousarray(wr.indptr, dtype=np.int32)
        states = impl.run_csr(
            data, indices, indptr, wi_scaled, inputs_tdm, x0_nm,
            float(leak), inv_sqrt_n, act_id,
        )
    else:
        wr_scaled = np.ascontiguousarray(sigma_r * np.asarray(wr, dtype=float))
        states = impl.run_dense(
            wr_scaled, wi_scaled, inputs_tdm, x0_nm,
            float(leak), inv_sqrt_n, act_id,
        )
    return np.asarray(states).transpose(0, 2, 1)
