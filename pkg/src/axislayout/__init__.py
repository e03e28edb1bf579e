"""Set-valued layouts from logical indices to named hardware axes."""

from .algebra import GroupedLayout, direct_sum, group_by_shape, scale_by, tile, tile_of
from .canon import canonicalize, equivalent, gap_condition, is_canonical, normalize_replica, normalize_shard
from .copy_plan import CopyAtom, CopyAtomSpec, CopyPlan, interpret_copy_plan, plan_copy, verify_copy_plan
from .core import (
    DEFAULT_AXIS,
    ZERO,
    Coordinate,
    Iter,
    Layout,
    Region,
    admits,
    evaluate,
    evaluate_shaped,
    flatten,
    span,
    unflatten,
)
from .errors import (
    AdmissionError,
    ConstraintError,
    DomainError,
    GroupingError,
    IntegerOverflowError,
    InvalidLayoutError,
    LayoutError,
    OracleLimitError,
    ParseError,
    PlanError,
    SliceError,
    TilingError,
    UndecidableError,
)
from .matmul_plan import MatmulPlan, interpret_matmul_plan, iter_intersect, plan_matmul, verify_matmul_plan
from .oracle import Oracle, enumerate_layout, oracle_equivalent, oracle_span
from .slicing import slice_block, slice_layout
from .text import format_layout, parse_layout, parse_region, parse_shape

__all__ = [name for name in dir() if not name.startswith("_")]
