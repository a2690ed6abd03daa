# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled network kernels: batched forward, fused loss+gradient, Jacobian.

Same contracts as volcast.backends.numpy_backend; plain C loops instead of
BLAS calls, which pays off at the small layer sizes used here.  Summation
order differs from the NumPy backend, so results agree only to roundoff.
"""

from libc.math cimport tanh

import numpy as np


def forward_batch(double[:, ::1] X, double[:, ::1] W_ih, double[::1] b_h,
                  double[:, ::1] W_ho, double[::1] b_o, W_io=None):
    cdef Py_ssize_t n = X.shape[0], n_in = X.shape[1]
    cdef Py_ssize_t n_hidden = W_ih.shape[0], n_out = W_ho.shape[0]
    cdef bint has_skip = W_io is not None
    cdef double[:, ::1] Wio
    if has_skip:
        Wio = W_io

    out = np.empty((n, n_out), dtype=np.float64)
    cdef double[:, ::1] Y = out
    cdef double[::1] z = np.empty(n_hidden, dtype=np.float64)
    cdef Py_ssize_t s, i, j, o
    cdef double acc

    for s in range(n):
        for j in range(n_hidden):
            acc = b_h[j]
            for i in range(n_in):
                acc += W_ih[j, i] * X[s, i]
            z[j] = tanh(acc)
        for o in range(n_out):
            acc = b_o[o]
            for j in range(n_hidden):
                acc += W_ho[o, j] * z[j]
            if has_skip:
                for i in range(n_in):
                    acc += Wio[o, i] * X[s, i]
            Y[s, o] = acc
    return out


def loss_and_gradient(double[:, ::1] X, double[:, ::1] Y,
                      double[:, ::1] W_ih, double[::1] b_h,
                      double[:, ::1] W_ho, double[::1] b_o, W_io=None):
    cdef Py_ssize_t n = X.shape[0], n_in = X.shape[1]
    cdef Py_ssize_t n_hidden = W_ih.shape[0], n_out = W_ho.shape[0]
    cdef bint has_skip = W_io is not None
    cdef double[:, ::1] Wio
    if has_skip:
        Wio = W_io

    gW_ih_arr = np.zeros((n_hidden, n_in), dtype=np.float64)
    gb_h_arr = np.zeros(n_hidden, dtype=np.float64)
    gW_ho_arr = np.zeros((n_out, n_hidden), dtype=np.float64)
    gb_o_arr = np.zeros(n_out, dtype=np.float64)
    gW_io_arr = np.zeros((n_out, n_in), dtype=np.float64) if has_skip else None

    cdef double[:, ::1] gW_ih = gW_ih_arr
    cdef double[::1] gb_h = gb_h_arr
    cdef double[:, ::1] gW_ho = gW_ho_arr
    cdef double[::1] gb_o = gb_o_arr
    cdef double[:, ::1] gW_io
    if has_skip:
        gW_io = gW_io_arr

    cdef double[::1] z = np.empty(n_hidden, dtype=np.float64)
    cdef double[::1] r = np.empty(n_out, dtype=np.float64)
    cdef double[::1] dh = np.empty(n_hidden, dtype=np.float64)
    cdef Py_ssize_t s, i, j, o
    cdef double acc, loss = 0.0, scale

    for s in range(n):
        for j in range(n_hidden):
            acc = b_h[j]
            for i in range(n_in):
                acc += W_ih[j, i] * X[s, i]
            z[j] = tanh(acc)
        for o in range(n_out):
            acc = b_o[o]
            for j in range(n_hidden):
                acc += W_ho[o, j] * z[j]
            if has_skip:
                for i in range(n_in):
                    acc += Wio[o, i] * X[s, i]
            r[o] = acc - Y[s, o]
            loss += r[o] * r[o]
        for j in range(n_hidden):
            acc = 0.0
            for o in range(n_out):
                acc += W_ho[o, j] * r[o]
            dh[j] = acc * (1.0 - z[j] * z[j])
        for o in range(n_out):
            gb_o[o] += r[o]
            for j in range(n_hidden):
                gW_ho[o, j] += r[o] * z[j]
            if has_skip:
                for i in range(n_in):
                    gW_io[o, i] += r[o] * X[s, i]
        for j in range(n_hidden):
            gb_h[j] += dh[j]
            for i in range(n_in):
                gW_ih[j, i] += dh[j] * X[s, i]

    scale = 2.0 / (n * n_out)
    gW_ih_arr *= scale
    gb_h_arr *= scale
    gW_ho_arr *= scale
    gb_o_arr *= scale
    if has_skip:
        gW_io_arr *= scale
    return loss / (n * n_out), gW_ih_arr, gb_h_arr, gW_ho_arr, gb_o_arr, gW_io_arr


def jacobian(double[:, ::1] X, double[:, ::1] W_ih, double[::1] b_h,
             double[:, ::1] W_ho, double[::1] b_o, W_io=None):
    cdef Py_ssize_t n = X.shape[0], n_in = X.shape[1]
    cdef Py_ssize_t n_hidden = W_ih.shape[0], n_out = W_ho.shape[0]
    cdef bint has_skip = W_io is not None

    cdef Py_ssize_t n_params = n_hidden * n_in + n_hidden + n_out * n_hidden + n_out
    if has_skip:
        n_params += n_out * n_in
    cdef Py_ssize_t off_bh = n_hidden * n_in
    cdef Py_ssize_t off_io = off_bh + n_hidden
    cdef Py_ssize_t off_ho = off_io + (n_out * n_in if has_skip else 0)
    cdef Py_ssize_t off_bo = off_ho + n_out * n_hidden

    out = np.zeros((n * n_out, n_params), dtype=np.float64)
    cdef double[:, ::1] J = out
    cdef double[::1] z = np.empty(n_hidden, dtype=np.float64)
    cdef Py_ssize_t s, i, j, o, row
    cdef double acc, w

    for s in range(n):
        for j in range(n_hidden):
            acc = b_h[j]
            for i in range(n_in):
                acc += W_ih[j, i] * X[s, i]
            z[j] = tanh(acc)
        for o in range(n_out):
            row = s * n_out + o
            for j in range(n_hidden):
                w = W_ho[o, j] * (1.0 - z[j] * z[j])
                for i in range(n_in):
                    J[row, j * n_in + i] = w * X[s, i]
                J[row, off_bh + j] = w
                J[row, off_ho + o * n_hidden + j] = z[j]
            if has_skip:
                for i in range(n_in):
                    J[row, off_io + o * n_in + i] = X[s, i]
            J[row, off_bo + o] = 1.0
    return out
