"""Simulator for a randomized multi-resolution hierarchy of wireless channels:
greedy geographic routing on a sphere, physical-layer provisioning and the
matching lower bounds on power and bandwidth."""

__version__ = "0.1.0"

from mrrh.errors import ClosedChannelError, InvalidConfigError, InvalidInputError, MRRHError

__all__ = [
    "ClosedChannelError",
    "InvalidConfigError",
    "InvalidInputError",
    "MRRHError",
    "__version__",
]
