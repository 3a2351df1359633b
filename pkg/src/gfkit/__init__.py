"""Growth-fragmentation toolkit.

Simulation of the linear growth-fragmentation equation with constant
fragmentation rate, steady states, and diagnostics for the exponential
relaxation to equilibrium.
"""

from .grid import Grid
from .kernel import Kernel

__all__ = ["Grid", "Kernel", "__version__"]

__version__ = "0.1.0"
