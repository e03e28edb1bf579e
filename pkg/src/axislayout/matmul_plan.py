"""Systolic-array matmul dispatch from operand layouts on partition/free axes.

Operands are ``A[K, M]``, ``B[K, N]`` and ``C[M, N]`` laid out over the axes
``P`` (partition) and ``F`` (free). The paired blocks of each logical dim are
refined into common digits ("factors"), each carrying one iter per operand.
For every dim a run of consecutive factors that fuses into a single iter on
both operands becomes the instruction extent; the rest form the loop nest.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .algebra import group_by_shape
from .core import Coordinate, Iter, Layout, as_shape
from .errors import ConstraintError, GroupingError, InvalidLayoutError, PlanError
from .oracle import Oracle

P, F = "P", "F"
CAP = {"M": 128, "N": 128, "K": 512}

# operand -> (dim of shape[0], dim of shape[1])
OPERAND_DIMS = {"A": ("K", "M"), "B": ("K", "N"), "C": ("M", "N")}
# dim -> the two operands indexed by it
DIM_OPERANDS = {"K": ("A", "B"), "M": ("A", "C"), "N": ("B", "C")}
# required axis of each (dim, operand) iter for the instruction
_ROLE_AXIS = {("K", "A"): P, ("K", "B"): P, ("M", "A"): F, ("M", "C"): P, ("N", "B"): F, ("N", "C"): F}


def iter_intersect(i1: Iter, i2: Iter) -> Iter:
    """Iter enumerating ``{k*s1 : k < e1} & {k*s2 : k < e2}`` (positive strides)."""
    if i1.axis != i2.axis:
        raise InvalidLayoutError(f"cannot intersect iters on axes {i1.axis!r} and {i2.axis!r}")
    if i1.stride < 0 or i2.stride < 0:
        raise InvalidLayoutError("iter_intersect needs positive strides")
    step = math.lcm(i1.stride, i2.stride)
    top = min((i1.extent - 1) * i1.stride, (i2.extent - 1) * i2.stride)
    n = top // step + 1
    return Iter(n, step if n > 1 else 1, i1.axis)


@dataclass(frozen=True)
class Factor:
    """One digit of a logical dim: extent, place value and the iter in each operand."""

    dim: str
    extent: int
    place: int
    iters: tuple[tuple[str, Iter], ...]

    def iter(self, operand: str) -> Iter:
        return dict(self.iters)[operand]

    def split(self, inner: int) -> tuple[Factor, Factor]:
        """``(outer, inner)`` pieces with ``inner`` the fast extent."""
        outer = self.extent // inner
        hi = tuple((op, Iter(outer, it.stride * inner, it.axis)) for op, it in self.iters)
        lo = tuple((op, Iter(inner, it.stride, it.axis)) for op, it in self.iters)
        return Factor(self.dim, outer, self.place * inner, hi), Factor(self.dim, inner, self.place, lo)


@dataclass(frozen=True)
class MatmulPlan:
    """Instruction shape, the factor used inside the instruction for each dim and the loop nest.

    ``instruction[d]`` is a single fused factor for dim ``d``; ``loops`` are
    the remaining factors, outermost first. Operand base addresses for a
    loop point are ``offset[op] + sum(digit * factor.iter(op))``.
    """

    shape: dict[str, int]
    instruction: dict[str, Factor]
    loops: tuple[Factor, ...]
    offsets: dict[str, Coordinate]
    n_source: str = "B"

    @property
    def instruction_shape(self) -> tuple[int, int, int]:
        return tuple(self.instruction[d].extent for d in "MNK")

    def to_dict(self) -> dict:
        def fac(f: Factor) -> dict:
            return {
                "dim": f.dim,
                "extent": f.extent,
                "place": f.place,
                "iters": {op: [it.extent, it.stride, it.axis] for op, it in f.iters},
            }

        return {
            "kind": "matmul",
            "shape": {d: self.shape[d] for d in "MNK"},
            "instruction": {d: fac(self.instruction[d]) for d in "MNK"},
            "instruction_shape": list(self.instruction_shape),
            "loops": [fac(f) for f in self.loops],
            "offsets": {op: dict(self.offsets[op].items()) for op in "ABC"},
            "n_source": self.n_source,
        }

    def format(self) -> str:
        m, n, k = self.instruction_shape
        lines = [f"matmul-plan M={self.shape['M']} N={self.shape['N']} K={self.shape['K']}"]
        lines.append(f"  instruction ({m},{n},{k})")
        for d in "MNK":
            f = self.instruction[d]
            pats = " ".join(f"{op}={it}" for op, it in f.iters)
            lines.append(f"    {d}: extent={f.extent} place={f.place} {pats}")
        lines.append(f"  loops {len(self.loops)}")
        for f in self.loops:
            pats = " ".join(f"{op}={it}" for op, it in f.iters)
            lines.append(f"    {f.dim}: extent={f.extent} place={f.place} {pats}")
        lines.append(f"  n-source {self.n_source}")
        return "\n".join(lines)


def _blocks(layout: Layout, shape: Sequence[int], name: str) -> tuple[tuple[Iter, ...], tuple[Iter, ...]]:
    if layout.replica:
        raise PlanError(f"operand {name} must not carry replicas")
    used = {it.axis for it in layout.shard if it.extent > 1} | set(layout.offset)
    if bad := used - {P, F}:
        raise PlanError(f"operand {name} uses axes {sorted(bad)} outside P/F")
    if len(shape) != 2:
        raise PlanError(f"operand {name} needs a rank-2 shape")
    try:
        g = group_by_shape(layout, shape)
    except GroupingError as exc:
        raise PlanError(f"operand {name}: {exc}") from exc
    return g.block(0), g.block(1)


def _refine(dim: str, ops: tuple[str, str], x_iters, y_iters) -> list[Factor]:
    """Common refinement of two blocks over the same logical extent, outermost first."""
    xs = [it for it in x_iters if it.extent > 1]
    ys = [it for it in y_iters if it.extent > 1]
    out: list[tuple[int, Iter, Iter]] = []
    while xs and ys:
        x, y = xs[0], ys[0]
        g = math.gcd(x.extent, y.extent)
        if g == 1:
            raise PlanError(f"{dim} digits of {ops[0]} and {ops[1]} do not share a common refinement")
        out.append((g, Iter(g, x.stride * (x.extent // g), x.axis), Iter(g, y.stride * (y.extent // g), y.axis)))
        for lst, it in ((xs, x), (ys, y)):
            if it.extent == g:
                lst.pop(0)
            else:
                lst[0] = Iter(it.extent // g, it.stride, it.axis)
    factors = []
    place = 1
    for g, ix, iy in reversed(out):
        factors.append(Factor(dim, g, place, ((ops[0], ix), (ops[1], iy))))
        place *= g
    return factors[::-1]


def _eligible(f: Factor) -> bool:
    if any(it.axis != _ROLE_AXIS[(f.dim, op)] for op, it in f.iters):
        return False
    if f.dim == "K":
        a, b = f.iter("A"), f.iter("B")
        return a.stride > 0 and b.stride > 0 and iter_intersect(a, b) == a == b
    return True


def _fusable(outer: Factor, inner: Factor) -> bool:
    return all(
        outer.iter(op).stride == inner.extent * inner.iter(op).stride for op in DIM_OPERANDS[outer.dim]
    )


def _runs(factors: list[Factor]) -> list[tuple[int, int]]:
    runs = []
    i = 0
    while i < len(factors):
        if not _eligible(factors[i]):
            i += 1
            continue
        j = i + 1
        while j < len(factors) and _eligible(factors[j]) and _fusable(factors[j - 1], factors[j]):
            j += 1
        runs.append((i, j))
        i = j
    return runs


def _pick(factors: list[Factor], runs, side: str) -> tuple[int, int] | None:
    if not runs:
        return None
    elig = [k for r in runs for k in range(*r)]
    smallest = min(elig, key=lambda k: (factors[k].iter(side).stride, -factors[k].extent))

    def score(r):
        return (r[0] <= smallest < r[1], math.prod(f.extent for f in factors[r[0]:r[1]]))

    return max(runs, key=score)


def _clamp(run: list[Factor], cap: int) -> tuple[list[Factor], list[Factor]]:
    """Split the run so its extent product is at most ``cap``; returns (loops, kept)."""
    loops: list[Factor] = []
    run = list(run)
    total = math.prod(f.extent for f in run)
    while total > cap:
        head = run.pop(0)
        rest = total // head.extent
        d = max((d for d in range(1, head.extent + 1) if head.extent % d == 0 and rest * d <= cap), default=1)
        if d == 1:
            loops.append(head)
            total = rest
        else:
            outer, inner = head.split(d)
            loops.append(outer)
            run.insert(0, inner)
            total = rest * d
    return loops, run


def _fuse(run: list[Factor], dim: str) -> Factor:
    if not run:
        ops = DIM_OPERANDS[dim]
        return Factor(dim, 1, 1, tuple((op, Iter(1, 1, _ROLE_AXIS[(dim, op)])) for op in ops))
    inner = run[-1]
    extent = math.prod(f.extent for f in run)
    iters = tuple((op, Iter(extent, it.stride, it.axis)) for op, it in inner.iters)
    return Factor(dim, extent, inner.place, iters)


def plan_matmul(
    la: Layout, sa: Sequence[int], lb: Layout, sb: Sequence[int], lc: Layout, sc: Sequence[int]
) -> MatmulPlan:
    """Choose the largest instruction shape ``(M_i, N_i, K_i)`` within the hardware caps.

    Raises:
        ConstraintError: some K digit of A or B is not on the partition axis.
        PlanError: shapes disagree, grouping or refinement fails, or no
            usable K, M or N digits exist.
    """
    sa, sb, sc = as_shape(sa), as_shape(sb), as_shape(sc)
    if not (len(sa) == len(sb) == len(sc) == 2) or sa[0] != sb[0] or sa[1] != sc[0] or sb[1] != sc[1]:
        raise PlanError(f"shapes A{sa} B{sb} C{sc} do not form [K,M] x [K,N] -> [M,N]")
    a_k, a_m = _blocks(la, sa, "A")
    b_k, b_n = _blocks(lb, sb, "B")
    c_m, c_n = _blocks(lc, sc, "C")
    if any(it.axis != P for it in a_k + b_k if it.extent > 1):
        raise ConstraintError("K must be mapped to the partition axis of both A and B")

    factors = {
        "K": _refine("K", ("A", "B"), a_k, b_k),
        "M": _refine("M", ("A", "C"), a_m, c_m),
        "N": _refine("N", ("B", "C"), b_n, c_n),
    }
    instruction: dict[str, Factor] = {}
    loops: list[Factor] = []
    n_source = "B"
    for dim in "MNK":
        fs = factors[dim]
        runs = _runs(fs)
        if dim == "N":
            from_b, from_c = _pick(fs, runs, "B"), _pick(fs, runs, "C")
            size = lambda r: math.prod(f.extent for f in fs[r[0]:r[1]]) if r else 0  # noqa: E731
            run = from_b if size(from_b) >= size(from_c) else from_c
            n_source = "B" if run == from_b else "C"
        else:
            run = _pick(fs, runs, "C" if dim == "M" else "A")
        if run is None:
            if math.prod(f.extent for f in fs) > 1:
                raise PlanError(f"no {dim} digit can be placed inside the instruction")
            run = (0, 0)
        spill, kept = _clamp(fs[run[0]:run[1]], CAP[dim])
        instruction[dim] = _fuse(kept, dim)
        loops.extend(fs[: run[0]] + spill + fs[run[1]:])
    shape = {"K": sa[0], "M": sa[1], "N": sb[1]}
    offsets = {"A": la.offset, "B": lb.offset, "C": lc.offset}
    return MatmulPlan(shape, instruction, tuple(loops), offsets, n_source)


def _digit_grid(extents: Sequence[int]) -> list[np.ndarray]:
    n = math.prod(extents)
    if not extents:
        return []
    return list(np.unravel_index(np.arange(n, dtype=np.int64), tuple(extents)))


def interpret_matmul_plan(plan: MatmulPlan) -> np.ndarray:
    """Count array ``cov[m, n, k]`` of how often each contraction triple is executed."""
    cov = np.zeros((plan.shape["M"], plan.shape["N"], plan.shape["K"]), dtype=np.int64)
    if any(plan.instruction[d].extent == 0 for d in "MNK"):
        return cov
    factors = list(plan.loops) + [plan.instruction[d] for d in "MNK"]
    digits = _digit_grid([f.extent for f in factors])
    idx = {d: np.zeros(math.prod(f.extent for f in factors), dtype=np.int64) for d in "MNK"}
    for f, dig in zip(factors, digits):
        idx[f.dim] += dig * f.place
    flat = (idx["M"] * plan.shape["N"] + idx["N"]) * plan.shape["K"] + idx["K"]
    np.add.at(cov.reshape(-1), flat, 1)
    return cov


def covered_triples(plan: MatmulPlan) -> set[tuple[int, int, int]]:
    """Set of ``(m, n, k)`` triples the plan executes at least once."""
    return {tuple(int(v) for v in t) for t in np.argwhere(interpret_matmul_plan(plan) > 0)}


def verify_matmul_plan(
    plan: MatmulPlan, la: Layout, sa: Sequence[int], lb: Layout, sb: Sequence[int], lc: Layout, sc: Sequence[int]
) -> None:
    """Check exact coverage, the caps, and that plan addresses match each operand layout.

    Raises:
        PlanError: describing the first violated property.
    """
    m_i, n_i, k_i = plan.instruction_shape
    if m_i > CAP["M"] or n_i > CAP["N"] or k_i > CAP["K"]:
        raise PlanError(f"instruction ({m_i},{n_i},{k_i}) exceeds the hardware cap")
    cov = interpret_matmul_plan(plan)
    if not (cov == 1).all():
        raise PlanError("plan does not cover every (m, n, k) exactly once")
    for op, layout, shape in (("A", la, sa), ("B", lb, sb), ("C", lc, sc)):
        dims = OPERAND_DIMS[op]
        factors = [f for f in list(plan.loops) + [plan.instruction[d] for d in dims] if f.dim in dims]
        digits = _digit_grid([f.extent for f in factors])
        n = math.prod(f.extent for f in factors)
        idx = {d: np.zeros(n, dtype=np.int64) for d in dims}
        addr = np.tile(np.array([layout.offset[P], layout.offset[F]], dtype=np.int64), (n, 1))
        for f, dig in zip(factors, digits):
            idx[f.dim] += dig * f.place
            it = f.iter(op)
            addr[:, 0 if it.axis == P else 1] += dig * it.stride
        _, table = Oracle(limit=max(n, 1)).table(layout, [P, F])
        want = table[idx[dims[0]] * shape[1] + idx[dims[1]], 0, :]
        if (bad := np.flatnonzero((want != addr).any(axis=1))).size:
            k = int(bad[0])
            logical = (int(idx[dims[0]][k]), int(idx[dims[1]][k]))
            raise PlanError(f"operand {op} address {addr[k].tolist()} at {logical} differs from layout {want[k].tolist()}")
