"""Exception types raised across the package."""


class EquipartError(Exception):
    """Base class for all package errors."""


class CoincidentGenerators(EquipartError):
    """Two generator positions are closer than the distinctness tolerance."""


class InvalidParams(EquipartError):
    """A parameter is outside its documented domain."""


class ZeroMassRegion(EquipartError):
    """A region has (numerically) zero measure where a positive one is needed."""


class EmptyCell(EquipartError):
    """A power cell has measure below the threshold, so the state left the set S."""

    def __init__(self, index, measure=0.0):
        self.index = index
        self.measure = measure
        super().__init__(f"cell {index} has measure {measure:.3e}")


class StepFailed(EquipartError):
    """The Euler safeguard could not find an acceptable step."""


class UnsupportedDensity(EquipartError):
    """The requested construction only holds for a constant density."""


class InitFailed(EquipartError):
    """Random initialisation could not produce a valid generator set."""
