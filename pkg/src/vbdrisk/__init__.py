"""Arbovirus importation risk from travel and social-media activity.

County-level risk comes from a vector-host metapopulation model driven by
flux estimated from activity traces; neighborhood-level risk from visitor
activity shares and inferred resident homes.
"""

__version__ = "0.1.0"

from ._backend import NAME as KERNEL_BACKEND  # noqa: E402

__all__ = ["__version__", "KERNEL_BACKEND"]
