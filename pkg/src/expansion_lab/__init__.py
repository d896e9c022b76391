"""Computational tools for expansion and ergodicity of one-dimensional
non-autonomous systems and finitely generated semigroup actions."""
from .io import __version__
from .core import (
    CIRCLE,
    INTERVAL,
    SEMIGROUP,
    SEQUENCE,
    DomainSpace,
    GeneratorSystem,
    OrbitRecord,
    SmoothMap1D,
    Word,
    birkhoff_sum,
    compose_orbit,
    log_inverse_lipschitz,
)
from .errors import ExpansionLabError

__all__ = [
    "__version__", "CIRCLE", "INTERVAL", "SEMIGROUP", "SEQUENCE", "DomainSpace",
    "GeneratorSystem", "OrbitRecord", "SmoothMap1D", "Word", "birkhoff_sum",
    "compose_orbit", "log_inverse_lipschitz", "ExpansionLabError",
]
