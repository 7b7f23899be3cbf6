"""Naive and sofic entropy of shift actions of free groups and lattices."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ArgumentError,
    CertificationUnavailable,
    EntrolabError,
    InvariantError,
    ResourceError,
    UnsupportedMeasureError,
)
from .group import FiniteSubset, GroupElement, GroupSpec, ball, expansion_ratio, interval, product_set, symmetrize  # noqa: E402

__all__ = [
    "ArgumentError",
    "CertificationUnavailable",
    "EntrolabError",
    "FiniteSubset",
    "GroupElement",
    "GroupSpec",
    "InvariantError",
    "ResourceError",
    "UnsupportedMeasureError",
    "ball",
    "expansion_ratio",
    "interval",
    "product_set",
    "symmetrize",
]
