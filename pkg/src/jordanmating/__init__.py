"""Numerical Jordan mating of rational maps with marked superattracting basins."""

from .dynamics import INF, RationalMap, OrbitRecord, chordal, is_inf, poly_roots
from .newton import newton_solve
from .portrait import (
    CriticalOrbitPortrait,
    FamilySpec,
    cubic_family,
    merge_portraits,
    portrait_of,
    solve_family,
)

__version__ = "0.1.0"
