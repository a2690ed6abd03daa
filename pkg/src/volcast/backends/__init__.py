"""Kernel backend selection.

Two implementations of the network kernels exist: vectorized NumPy and a
compiled Cython extension.  Which wins depends on the kernel: the batched
forward and loss-gradient passes are matmul- and tanh-bound, where NumPy's
BLAS and SIMD tanh beat plain C loops, while the Jacobian fill is fastest
written directly in C (see benchmarks/bench_backends.py).  The default
"auto" mode therefore routes each kernel to its measured winner; "numpy"
and "cython" force one implementation throughout, for comparison and
testing.  Results agree across implementations to floating-point roundoff
but not bit-for-bit, so the mode is fixed at import and never switches
implicitly.  Set VOLCAST_BACKEND=auto|numpy|cython to pin it.
"""

from __future__ import annotations

import os

from volcast.backends import numpy_backend

try:
    from volcast.backends import _cykernels
except ImportError:  # extension not built
    _cykernels = None

_IMPLEMENTATIONS = {"numpy": numpy_backend}
if _cykernels is not None:
    _IMPLEMENTATIONS["cython"] = _cykernels

_KERNELS = ("forward_batch", "loss_and_gradient", "jacobian")


def _mode_table(mode: str) -> dict:
    if mode == "auto":
        jacobian_impl = _cykernels if _cykernels is not None else numpy_backend
        return {"forward_batch": numpy_backend.forward_batch,
                "loss_and_gradient": numpy_backend.loss_and_gradient,
                "jacobian": jacobian_impl.jacobian}
    impl = _IMPLEMENTATIONS[mode]
    return {name: getattr(impl, name) for name in _KERNELS}


_MODES = ("auto",) + tuple(sorted(_IMPLEMENTATIONS))

_active_name = os.environ.get("VOLCAST_BACKEND", "auto")
if _active_name not in _MODES:
    raise ImportError(f"VOLCAST_BACKEND={_active_name!r} is not available; "
                      f"choose from {', '.join(_MODES)}")
_active = _mode_table(_active_name)


def available_backends() -> tuple[str, ...]:
    """Names of the built kernel implementations (not counting 'auto')."""
    return tuple(sorted(_IMPLEMENTATIONS))


def active_backend() -> str:
    return _active_name


def use_backend(name: str) -> None:
    """Switch the kernel mode ('auto', 'numpy' or 'cython')."""
    global _active, _active_name
    if name not in _MODES:
        raise ValueError(f"unknown or unavailable backend {name!r}; have {_MODES}")
    _active_name = name
    _active = _mode_table(name)


def forward_batch(X, W_ih, b_h, W_ho, b_o, W_io=None):
    return _active["forward_batch"](X, W_ih, b_h, W_ho, b_o, W_io)


def loss_and_gradient(X, Y, W_ih, b_h, W_ho, b_o, W_io=None):
    return _active["loss_and_gradient"](X, Y, W_ih, b_h, W_ho, b_o, W_io)


def jacobian(X, W_ih, b_h, W_ho, b_o, W_io=None):
    return _active["jacobian"](X, W_ih, b_h, W_ho, b_o, W_io)
