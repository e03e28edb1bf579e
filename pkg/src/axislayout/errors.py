"""Exception hierarchy shared by every layout operation."""


class LayoutError(Exception):
    """Base class for all errors raised by this package."""


class InvalidLayoutError(LayoutError, ValueError):
    """A value violates a structural invariant (extent, stride, axis name, ...)."""


class DomainError(LayoutError, IndexError):
    """An index or region lies outside the domain of a layout or shape."""


class AdmissionError(LayoutError):
    """A shape's element count differs from the layout's shard domain size."""


class GroupingError(LayoutError):
    """A shard list cannot be split into blocks realizing a shape."""


class TilingError(LayoutError):
    """Tiling, tile-of decomposition, or direct sum failed."""


class SliceError(LayoutError):
    """Neither sufficient slicing form applies to a block."""


class UndecidableError(LayoutError):
    """Equivalence cannot be decided structurally and the domain is too large to enumerate."""


class OracleLimitError(LayoutError):
    """Enumeration would exceed the configured element budget."""


class PlanError(LayoutError):
    """An instruction planner could not produce a plan."""


class ConstraintError(PlanError):
    """Inputs violate a hardware layout constraint (e.g. contraction not on partitions)."""


class ParseError(LayoutError, ValueError):
    """Malformed layout text. ``position`` is the 0-based character offset."""

    def __init__(self, message: str, position: int = 0):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class IntegerOverflowError(LayoutError, OverflowError):
    """A coordinate, stride or extent left the signed 64-bit range."""
