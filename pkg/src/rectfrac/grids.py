"""Exact geometry of product dyadic grids and their one-third shifts.

A cube at level ``k`` with integer index ``m`` and per-axis shift
``s in {-1, 0, +1}`` (thirds of a side length) occupies

    2**-k * (m + s/3 + [0, 1)**d)

per axis.  All corner bookkeeping happens in the global integer unit
``1/(3 * 2**(K+1))``, where ``K`` is the configured depth: corners of
standard cubes down to level K+1 and corners of one-third shifted cubes
are then simultaneously integer multiples of that unit, so membership,
containment and distance decisions are exact integer comparisons.  The
one construction that may descend below level K+1 (the minimal cube of
a nearly coincident point pair) scales coordinates up by powers of two
instead of ever rounding.

The combined per-axis index ``c = 3*m + s`` makes the split algebra
uniform: the two halves of ``c`` along an axis are ``2*c`` and
``2*c + 3`` one level down, independent of the shift.  Note that
halving flips the sign of a nonzero shift (the halves of a +1/3 cube
are -1/3 cubes of the next level), which is what makes the split exact.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Union


class DepthExceededError(ValueError):
    """Subdivision or enumeration beyond the configured depth."""


class DegeneratePairError(ValueError):
    """Two points coincide where distinct coordinates are required."""


Scalar = Union[int, Fraction]


def _scale2(c: int, e: int) -> Scalar:
    """c * 2**e, exact: int when e >= 0, Fraction otherwise."""
    if e >= 0:
        return c * (1 << e)
    return Fraction(c, 1 << -e)


def _split_c(c: int) -> tuple[int, int]:
    """Decompose a combined index 3*m + s into (m, s), s in {-1, 0, 1}."""
    s = (c + 1) % 3 - 1
    return (c - s) // 3, s


@dataclass(frozen=True)
class GridConfig:
    """Product-space layout: factor dimensions and enumeration depth.

    ``dims[i]`` is the dimension of the i-th factor; dyadic levels run
    0..depth.  The global coordinate unit is ``1/(3*2**(depth+1))`` and
    the finest mass lattice has ``3*2**depth`` cells per unit axis.
    """

    dims: tuple[int, ...]
    depth: int

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        if len(dims) < 1:
            raise ValueError("need at least one factor")
        if any(d < 1 or d > 4 for d in dims):
            raise ValueError("factor dimensions must lie in 1..4")
        if not 1 <= int(self.depth) <= 12:
            raise DepthExceededError("depth must lie in 1..12")

    @property
    def n_factors(self) -> int:
        return len(self.dims)

    @property
    def total_dim(self) -> int:
        return sum(self.dims)

    @property
    def axis_units(self) -> int:
        """Integer units per unit length: 3 * 2**(depth+1)."""
        return 3 * (1 << (self.depth + 1))

    @property
    def axis_cells(self) -> int:
        """Finest lattice cells per unit axis: 3 * 2**depth."""
        return 3 * (1 << self.depth)

    @property
    def cell_volume(self) -> float:
        return float(self.axis_cells) ** (-self.total_dim)

    def factor_axes(self, i: int) -> range:
        """Global axis indices belonging to factor i."""
        start = sum(self.dims[:i])
        return range(start, start + self.dims[i])

    def split_axes(self, flat: tuple) -> tuple[tuple, ...]:
        """Split an N-tuple of per-axis values into per-factor tuples."""
        out, pos = [], 0
        for d in self.dims:
            out.append(tuple(flat[pos:pos + d]))
            pos += d
        return tuple(out)


@dataclass(frozen=True)
class DyadicCube:
    """A cube ``2**-level * (index + shift/3 + [0,1)**d)`` on a shifted grid."""

    level: int
    index: tuple[int, ...]
    shift: tuple[int, ...] = ()

    def __post_init__(self):
        index = tuple(int(m) for m in self.index)
        shift = tuple(int(s) for s in self.shift) if self.shift else (0,) * len(index)
        object.__setattr__(self, "index", index)
        object.__setattr__(self, "shift", shift)
        if len(shift) != len(index):
            raise ValueError("index and shift must have equal length")
        if any(s not in (-1, 0, 1) for s in shift):
            raise ValueError("shift entries must be -1, 0 or +1 (thirds)")

    @property
    def dim(self) -> int:
        return len(self.index)

    @property
    def is_standard(self) -> bool:
        return all(s == 0 for s in self.shift)

    def cvec(self) -> tuple[int, ...]:
        """Combined per-axis indices 3*m + s."""
        return tuple(3 * m + s for m, s in zip(self.index, self.shift))


@dataclass(frozen=True)
class ProductRect:
    """A product of dyadic cubes, one per factor space."""

    factors: tuple[DyadicCube, ...]

    @property
    def levels(self) -> tuple[int, ...]:
        return tuple(q.level for q in self.factors)

    @property
    def is_standard(self) -> bool:
        return all(q.is_standard for q in self.factors)

    @property
    def dim(self) -> int:
        return sum(q.dim for q in self.factors)


@dataclass(frozen=True)
class Box:
    """Axis-parallel box in global units.

    Boundary convention is irrelevant for mass queries (densities see
    null boundaries); containment predicates treat it as [lo, hi).
    """

    lo: tuple
    hi: tuple

    @property
    def dim(self) -> int:
        return len(self.lo)

    def contains_point(self, x) -> bool:
        return all(l <= c < h for l, c, h in zip(self.lo, x, self.hi))

    def contains_box(self, other: "Box") -> bool:
        return all(a <= c and d <= b
                   for a, b, c, d in zip(self.lo, self.hi, other.lo, other.hi))


def cube_from_c(level: int, cvec: tuple[int, ...]) -> DyadicCube:
    parts = [_split_c(c) for c in cvec]
    return DyadicCube(level, tuple(m for m, _ in parts), tuple(s for _, s in parts))


def cube_box(config: GridConfig, cube: DyadicCube) -> Box:
    """Exact corner box of a cube in global units."""
    e = config.depth + 1 - cube.level
    side = _scale2(3, e)
    lo = tuple(_scale2(c, e) for c in cube.cvec())
    return Box(lo, tuple(l + side for l in lo))


def rect_box(config: GridConfig, rect: ProductRect) -> Box:
    lo, hi = [], []
    for q in rect.factors:
        b = cube_box(config, q)
        lo.extend(b.lo)
        hi.extend(b.hi)
    return Box(tuple(lo), tuple(hi))


def children(config: GridConfig, cube: DyadicCube) -> list[DyadicCube]:
    """The 2**d congruent halves of a cube, one level down.

    Halving a shifted axis flips the sign of its shift; standard cubes
    stay standard.  Children tile the parent exactly.
    """
    if cube.level >= config.depth:
        raise DepthExceededError(
            f"cannot subdivide level {cube.level} at depth {config.depth}")
    cv = cube.cvec()
    out = []
    for offs in itertools.product((0, 1), repeat=cube.dim):
        out.append(cube_from_c(cube.level + 1,
                               tuple(2 * c + 3 * e for c, e in zip(cv, offs))))
    return out


def parent(cube: DyadicCube) -> DyadicCube:
    """The unique cube one level up having this cube among its halves."""
    cv = []
    for c in cube.cvec():
        cv.append((c - 3 * (c % 2)) // 2)
    return cube_from_c(cube.level - 1, tuple(cv))


def replace(rect: ProductRect, cube: DyadicCube, j: int) -> ProductRect:
    """Swap factor j of a product rectangle for the given cube."""
    if not 0 <= j < len(rect.factors):
        raise ValueError(f"factor index {j} out of range")
    if cube.dim != rect.factors[j].dim:
        raise ValueError(
            f"dimension mismatch: factor {j} has dim {rect.factors[j].dim}, "
            f"cube has dim {cube.dim}")
    factors = list(rect.factors)
    factors[j] = cube
    return ProductRect(tuple(factors))


def triple(config: GridConfig, obj) -> Box:
    """The concentric box with three times the side lengths, per axis."""
    if isinstance(obj, ProductRect):
        box = rect_box(config, obj)
    elif isinstance(obj, DyadicCube):
        box = cube_box(config, obj)
    elif isinstance(obj, Box):
        box = obj
    else:
        raise TypeError(f"cannot triple {type(obj).__name__}")
    lo = tuple(l - (h - l) for l, h in zip(box.lo, box.hi))
    hi = tuple(h + (h - l) for l, h in zip(box.lo, box.hi))
    return Box(lo, hi)


def minimal_cube(config: GridConfig, u: tuple[int, ...],
                 v: tuple[int, ...]) -> DyadicCube:
    """Smallest standard dyadic cube containing u whose triple contains v.

    Exists because the top cube [0,1)^d works, and is found by walking
    down the ancestor chain of u while the triple still catches v (the
    predicate is monotone along the chain since 3Q' is contained in 3Q
    for a child Q' of Q).  Descends below level depth+1 when the points
    are very close; coordinates are then compared at an up-scaled
    integer resolution, never rounded.
    """
    d = len(u)
    if len(v) != d:
        raise ValueError("point dimensions differ")
    units = config.axis_units
    if not all(0 <= c < units for c in u) or not all(0 <= c < units for c in v):
        raise ValueError("coordinates must lie inside [0,1)^d")
    if tuple(u) == tuple(v):
        raise DegeneratePairError("minimal cube of coincident points")

    level = 0
    cvec = (0,) * d
    for _ in range(config.depth + 80):
        nlevel = level + 1
        scale_pt = max(0, nlevel - (config.depth + 1))
        scale_cube = max(0, (config.depth + 1) - nlevel)
        nxt = []
        for a in range(d):
            c0 = 2 * cvec[a]
            # pick the half that contains u along this axis
            if (u[a] << scale_pt) < ((c0 + 3) << scale_cube):
                nxt.append(c0)
            else:
                nxt.append(c0 + 3)
        inside = True
        for a in range(d):
            vv = v[a] << scale_pt
            if not ((nxt[a] - 3) << scale_cube) <= vv < ((nxt[a] + 6) << scale_cube):
                inside = False
                break
        if not inside:
            return cube_from_c(level, cvec)
        level, cvec = nlevel, tuple(nxt)
    raise AssertionError("minimal cube descent failed to terminate")


def min_rect(x: tuple[int, ...], y: tuple[int, ...]) -> Box:
    """Minimal axis-parallel box containing two coordinate-distinct points."""
    if len(x) != len(y):
        raise ValueError("point dimensions differ")
    for a, (xa, ya) in enumerate(zip(x, y)):
        if xa == ya:
            raise DegeneratePairError(f"coincident coordinate on axis {a}")
    lo = tuple(min(a, b) for a, b in zip(x, y))
    hi = tuple(max(a, b) for a, b in zip(x, y))
    return Box(lo, hi)


def product_minimal(config: GridConfig, x: tuple[int, ...],
                    y: tuple[int, ...]) -> ProductRect:
    """Factor-wise minimal cubes: the product of minimal_cube per factor."""
    xs = config.split_axes(tuple(x))
    ys = config.split_axes(tuple(y))
    cubes = []
    for i, (xi, yi) in enumerate(zip(xs, ys)):
        if xi == yi:
            raise DegeneratePairError(f"points coincide in factor {i}")
        cubes.append(minimal_cube(config, xi, yi))
    return ProductRect(tuple(cubes))


def shift_cover(cube: DyadicCube) -> tuple[tuple[int, ...], DyadicCube]:
    """Cover the triple of a standard cube by one shifted cube of 8x side.

    Works axis by axis.  Along an axis with index m, the triple spans
    [m-1, m+2) in units of the side; length-8 aligned intervals cut it
    at multiples of 8, so with r = (m-1) mod 8 the triple fits in a
    single standard interval iff r <= 5.  Otherwise the grid shifted by
    +1/3 (r == 6) or -1/3 (r == 7) of the 8x side swallows it whole.
    Ties cannot occur: the overlap lengths 1 and 2 with the two
    straddled intervals are never equal.
    """
    if not cube.is_standard:
        raise ValueError("shift cover is defined for standard cubes")
    taus, idx = [], []
    for m in cube.index:
        q, r = divmod(m - 1, 8)
        if r <= 5:
            taus.append(0)
            idx.append(q)
        elif r == 6:
            taus.append(1)
            idx.append(q)
        else:
            taus.append(-1)
            idx.append(q + 1)
    return tuple(taus), DyadicCube(cube.level - 3, tuple(idx), tuple(taus))


def axis_index_range(level: int, s: int) -> range:
    """Indices m whose (level, shift s) interval meets [0,1) with volume."""
    top = 1 << level
    if s == 0:
        return range(0, top)
    if s == 1:
        return range(-1, top)
    return range(0, top + 1)


def enumerate_rects(config: GridConfig,
                    tau: tuple[int, ...] | None = None) -> Iterator[ProductRect]:
    """All product cubes with factor levels 0..depth meeting the domain.

    ``tau`` is a per-axis shift vector over {-1, 0, +1} (thirds); None
    means the standard family.  Only cubes whose half-open intersection
    with [0,1)^N is nonempty are produced, each exactly once, in a fixed
    order: level tuples lexicographically, then indices lexicographically
    with the last axis fastest.
    """
    n = config.n_factors
    if tau is None:
        tau = (0,) * config.total_dim
    else:
        tau = tuple(int(t) for t in tau)
        if len(tau) != config.total_dim:
            raise ValueError("tau must have one entry per axis")
        if any(t not in (-1, 0, 1) for t in tau):
            raise ValueError("tau entries must be -1, 0 or +1")
    tau_by_factor = config.split_axes(tau)
    for levels in itertools.product(range(config.depth + 1), repeat=n):
        ranges = []
        for i, k in enumerate(levels):
            for s in tau_by_factor[i]:
                ranges.append(axis_index_range(k, s))
        for flat in itertools.product(*ranges):
            idx_by_factor = config.split_axes(flat)
            cubes = tuple(
                DyadicCube(levels[i], idx_by_factor[i], tau_by_factor[i])
                for i in range(n))
            yield ProductRect(cubes)


def standard_rect(config: GridConfig, levels: tuple[int, ...],
                  axis_indices: tuple[int, ...]) -> ProductRect:
    """Build a standard product rectangle from per-factor levels and per-axis indices."""
    idx_by_factor = config.split_axes(tuple(axis_indices))
    return ProductRect(tuple(
        DyadicCube(levels[i], idx_by_factor[i])
        for i in range(config.n_factors)))


def cube_to_json(cube: DyadicCube) -> dict:
    return {"level": cube.level, "index": list(cube.index),
            "tau": list(cube.shift)}


def rect_to_json(rect: ProductRect) -> dict:
    tau = []
    for q in rect.factors:
        tau.extend(q.shift)
    return {"levels": [q.level for q in rect.factors],
            "indices": [list(q.index) for q in rect.factors],
            "tau": tau}


def rect_from_json(doc: dict) -> ProductRect:
    levels = doc["levels"]
    indices = doc["indices"]
    tau_flat = list(doc["tau"])
    cubes, pos = [], 0
    for k, idx in zip(levels, indices):
        d = len(idx)
        cubes.append(DyadicCube(int(k), tuple(int(m) for m in idx),
                                tuple(int(t) for t in tau_flat[pos:pos + d])))
        pos += d
    return ProductRect(tuple(cubes))
