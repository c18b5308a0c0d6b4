"""Numerical laboratory for entropic quantum dynamics."""
from ._backend import backend_name, use_backend

__version__ = "0.1.0"

__all__ = ["backend_name", "use_backend", "__version__"]
