"""Vectorized NumPy implementation of the network kernels.

Reference implementation and import-time fallback for the compiled backend.
All three kernels take raw weight arrays; ``W_io`` is the optional direct
input-to-output block of the cascade architecture.  Gradient blocks and
Jacobian columns follow the flat parameter order: W_ih row-major, b_h,
W_io row-major (when present), W_ho row-major, b_o.
"""

from __future__ import annotations

import numpy as np


def forward_batch(X, W_ih, b_h, W_ho, b_o, W_io=None):
    """Hidden tanh layer plus linear output; returns predictions (N, n_out)."""
    Z = np.tanh(X @ W_ih.T + b_h)
    Y = Z @ W_ho.T + b_o
    if W_io is not None:
        Y = Y + X @ W_io.T
    return Y


def loss_and_gradient(X, Y, W_ih, b_h, W_ho, b_o, W_io=None):
    """Mean squared error over samples x outputs and its exact gradient.

    Returns (loss, gW_ih, gb_h, gW_ho, gb_o, gW_io) with gW_io None for the
    plain architecture.
    """
    n, n_out = Y.shape
    Z = np.tanh(X @ W_ih.T + b_h)
    Yhat = Z @ W_ho.T + b_o
    if W_io is not None:
        Yhat = Yhat + X @ W_io.T
    R = Yhat - Y
    loss = float(np.mean(R * R))
    scale = 2.0 / (n * n_out)
    gW_ho = scale * (R.T @ Z)
    gb_o = scale * R.sum(axis=0)
    gW_io = scale * (R.T @ X) if W_io is not None else None
    D = (R @ W_ho) * (1.0 - Z * Z)
    gW_ih = scale * (D.T @ X)
    gb_h = scale * D.sum(axis=0)
    return loss, gW_ih, gb_h, gW_ho, gb_o, gW_io


def jacobian(X, W_ih, b_h, W_ho, b_o, W_io=None):
    """Per-sample output Jacobian, rows ordered sample-major then output.

    Row s * n_out + o holds d(output o on sample s) / d(flat parameters).
    """
    n, n_in = X.shape
    n_hidden = W_ih.shape[0]
    n_out = W_ho.shape[0]
    has_skip = W_io is not None

    Z = np.tanh(X @ W_ih.T + b_h)
    T = 1.0 - Z * Z

    n_params = n_hidden * n_in + n_hidden + n_out * n_hidden + n_out
    if has_skip:
        n_params += n_out * n_in
    J = np.zeros((n * n_out, n_params))

    # d y_o / d W_ih[j, i] = W_ho[o, j] * (1 - z_j^2) * x_i
    blk = np.einsum("oj,sj,si->soji", W_ho, T, X).reshape(n * n_out, n_hidden * n_in)
    off = 0
    J[:, off:off + n_hidden * n_in] = blk
    off += n_hidden * n_in

    # d y_o / d b_h[j] = W_ho[o, j] * (1 - z_j^2)
    J[:, off:off + n_hidden] = np.einsum("oj,sj->soj", W_ho, T).reshape(n * n_out, n_hidden)
    off += n_hidden

    rows = np.arange(n * n_out)
    o_idx = rows % n_out
    s_idx = rows // n_out

    if has_skip:
        # d y_o / d W_io[o, i] = x_i (zero for other output rows)
        for i in range(n_in):
            J[rows, off + o_idx * n_in + i] = X[s_idx, i]
        off += n_out * n_in

    # d y_o / d W_ho[o, j] = z_j
    for j in range(n_hidden):
        J[rows, off + o_idx * n_hidden + j] = Z[s_idx, j]
    off += n_out * n_hidden

    # d y_o / d b_o[o] = 1
    J[rows, off + o_idx] = 1.0
    return J
