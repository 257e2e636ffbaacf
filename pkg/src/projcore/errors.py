"""Exception types shared across the library.

The CLI maps these onto its exit-code contract: parameter problems are
argument errors, file/parse problems are data errors, and everything
that can go wrong while building a coreset is a construction error.
"""

from __future__ import annotations


class ProjcoreError(Exception):
    """Base class for all library errors."""


class ParameterError(ProjcoreError, ValueError):
    """An argument is out of its documented range."""


class DataError(ProjcoreError):
    """Input data could not be read or parsed."""


class ColumnError(DataError):
    """A requested CSV column does not exist."""

    def __init__(self, column: str):
        super().__init__(f"column {column!r} not found in input")
        self.column = column


class ConstructionError(ProjcoreError):
    """Base class for failures while building geometric objects."""


class FlatRankError(ConstructionError):
    """Points do not lie within tolerance of any flat of the requested
    dimension.  Carries the first singular value that should have been
    zero."""

    def __init__(self, j: int, residual_sigma: float):
        super().__init__(
            f"points do not lie on a {j}-flat "
            f"(residual singular value {residual_sigma:.3e})"
        )
        self.j = j
        self.residual_sigma = residual_sigma


class RankError(ConstructionError):
    """A point set does not affinely span its ambient space."""


class ConvergenceError(ConstructionError):
    """Iteration cap hit before reaching tolerance.  Carries the rounding
    factor that was actually achieved."""

    def __init__(self, achieved_alpha: float, iterations: int):
        super().__init__(
            f"rounding iteration cap reached after {iterations} iterations; "
            f"achieved factor {achieved_alpha:.6g}"
        )
        self.achieved_alpha = achieved_alpha
        self.iterations = iterations


class NotInHullError(ConstructionError):
    """A point is not inside the convex hull of a set.  Carries a
    separating direction as witness."""

    def __init__(self, witness):
        super().__init__("point lies outside the convex hull")
        self.witness = witness


class GridRequiredError(ConstructionError):
    """Operation requires integer-grid input with an aspect ratio."""


class LowerBoundViolation(ConstructionError):
    """A nonzero point-to-flat distance fell below the configured dyadic
    band floor; the distance-separation exponent is set too small."""

    def __init__(self, distance: float, floor: float):
        super().__init__(
            f"nonzero distance {distance:.3e} below band floor {floor:.3e}; "
            "increase c_exp"
        )
        self.distance = distance
        self.floor = floor


class BudgetError(ConstructionError):
    """The recursion node budget was exhausted."""


class InitError(ConstructionError):
    """Not enough points to initialize a solver."""
