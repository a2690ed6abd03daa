"""volcast: market volatility forecasting with small feedforward networks.

Pipeline: per-instrument price CSVs -> aligned panel -> rolling-volatility
features -> scaled train/validation/test splits -> networks trained by nine
classical full-batch algorithms -> metric tables, significance test, plots.
"""

__version__ = "0.1.0"

from volcast.backends import active_backend, available_backends
from volcast.errors import VolcastError

__all__ = ["__version__", "VolcastError", "active_backend", "available_backends"]
