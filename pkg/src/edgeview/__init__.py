"""Multi-view detection of cell-edge users in cooperative cellular uplinks."""

from .errors import EdgeviewError
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["EdgeviewError", "BACKEND", "__version__"]
