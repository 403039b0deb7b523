"""Two-marketplace demand-side-management simulator.

B2C programme contracts, a sealed-bid B2B flexibility market with min-cost
combinatorial clearing, manager and per-customer EECS agents, a topic broker
with ACLs, and a deterministic slot/phase clock, exposed over a CLI and an
HTTP console API.
"""

__version__ = "0.1.0"

from .core import Direction, PowerProfile, TimeGrid

__all__ = ["Direction", "PowerProfile", "TimeGrid", "__version__"]
