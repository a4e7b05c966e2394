"""Fronthaul-limited cell-free massive MIMO with cluster-wise WMMSE resource allocation."""

__version__ = "0.1.0"

from .kernels import BACKEND

__all__ = ["BACKEND", "__version__"]
