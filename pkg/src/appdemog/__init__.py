"""Demographic prediction from bag-of-apps usage features."""

from .backend import kernel_backend
from .sparse import SparseBinaryMatrix

__version__ = "0.1.0"

__all__ = ["SparseBinaryMatrix", "kernel_backend", "__version__"]
