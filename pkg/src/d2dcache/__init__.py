"""Cooperative cluster caching for D2D networks.

Analytic delay, throughput and outage models for clustered device caches
that share content across clusters, placement schemes (popular-file,
random, greedy) with a brute-force oracle, and a queue simulator to check
the delay formulas.
"""
from .core import *  # noqa: F401,F403
from .delay import *  # noqa: F401,F403
from .placement import *  # noqa: F401,F403
from .queuesim import *  # noqa: F401,F403
from .rates import *  # noqa: F401,F403
from .throughput import *  # noqa: F401,F403
from . import core, delay, placement, queuesim, rates, throughput

__version__ = "0.1.0"

__all__ = (core.__all__ + rates.__all__ + delay.__all__ + placement.__all__
           + queuesim.__all__ + throughput.__all__)
