"""Pure-NumPy trajectory kernels (fallback backend).

Mirrors the compiled extension in ``_speedups.pyx``: same signatures, same
operation order, so both backends agree to floating-point noise.
"""

import numpy as np
from scipy.special import erf as _erf

ACT_ERF = 0
ACT_RELU = 1
ACT_SIGN = 2


def _apply_activation(act_id, z, out):
    if act_id == ACT_ERF:
        _erf(z, out=out)
    elif act_id == ACT_RELU:
        np.maximum(z, 0.0, out=out)
    else:
        np.sign(z, out=out)
    return out


def run_dense(wr_scaled, wi_scaled, inputs, x0, leak, inv_sqrt_n, act_id):
    """Iterate the reservoir update for a batch of input sequences.

    Arguments hold pre-scaled weights: ``wr_scaled = sigma_r * W_r`` (N, N),
    ``wi_scaled = sigma_i * W_i`` (N, d); ``inputs`` is (T, d, M) and ``x0``
    (N, M).  Returns states of shape (T + 1, N, M).
    """
    t_len = inputs.shape[0]
    n, m = x0.shape
    states = np.empty((t_len + 1, n, m))
    states[0] = x0
    keep = 1.0 - leak
    gain = leak * inv_sqrt_n
    buf = np.empty((n, m))
    for t in range(t_len):
        z = wr_scaled @ states[t]
        z += wi_scaled @ inputs[t]
        np.multiply(_apply_activation(act_id, z, buf), gain, out=buf)
        np.multiply(states[t], keep, out=z)
        np.add(z, buf, out=states[t + 1])
    return states


def run_csr(data_scaled, indices, indptr, wi_scaled, inputs, x0, leak, inv_sqrt_n, act_id):
    """Same update as ``run_dense`` with a CSR recurrent matrix."""
    from scipy.sparse import csr_matrix

    t_len = inputs.shape[0]
    n, m = x0.shape
    wr = csr_matrix((data_scaled, indices, indptr), shape=(n, n))
    states = np.empty((t_len + 1, n, m))
    states[0] = x0
    keep = 1.0 - leak
    gain = leak * inv_sqrt_n
    buf = np.empty((n, m))
    for t in range(t_len):
        z = wr @ states[t]
        z += wi_scaled @ inputs[t]
        np.multiply(_apply_activation(act_id, z, buf), gain, out=buf)
        np.multiply(states[t], keep, out=z)
        np.add(z, buf, out=states[t + 1])
    return states
