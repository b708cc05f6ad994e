"""Rectangular weights and grid functions on the finest lattice.

A weight is a nonnegative density, piecewise constant on the lattice of
``3 * 2**K`` cells per unit axis.  Masses of standard product dyadic
rectangles come out of a per-level aggregation tree built bottom-up by
pure additions (no cancellation, O(1) lookup); every other region --
shifted cubes, tripled boxes, minimal rectangles between lattice points
-- goes through an inclusion-exclusion prefix table, with exact
fractional weights for end cells that a corner splits.

Weights and grid functions are immutable after construction (the
backing arrays are marked read-only), so they can be shared freely
across threads.
"""

from __future__ import annotations

import base64
import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .grids import (Box, DyadicCube, GridConfig, ProductRect, cube_box,
                    rect_box)

WEIGHT_SCHEMA_VERSION = 1


class AlignmentError(ValueError):
    """A mass query with corners not expressible exactly on the lattice."""


class WeightFormatError(ValueError):
    """A weight file that fails validation."""


def _sum_blocks(arr: np.ndarray, axis: int, block: int) -> np.ndarray:
    """Sum consecutive groups of ``block`` entries along one axis."""
    if block == 1:
        return arr
    shape = arr.shape
    ns = shape[:axis] + (shape[axis] // block, block) + shape[axis + 1:]
    return arr.reshape(ns).sum(axis=axis + 1)


def build_mass_tree(config: GridConfig, cell_masses: np.ndarray) -> dict:
    """Aggregate cell masses into every standard level combination.

    Keys are per-factor level tuples; values are arrays indexed by the
    per-axis cube indices at those levels.  Each array is derived from
    the one with the first-lowerable factor one level deeper, so the
    summation order is fixed for every build.
    """
    K, n = config.depth, config.n_factors
    base = cell_masses
    for ax in range(config.total_dim):
        base = _sum_blocks(base, ax, 3)
    tree: dict[tuple[int, ...], np.ndarray] = {}
    for levels in itertools.product(range(K, -1, -1), repeat=n):
        if all(k == K for k in levels):
            tree[levels] = base
            continue
        i = next(j for j in range(n) if levels[j] < K)
        src = tree[levels[:i] + (levels[i] + 1,) + levels[i + 1:]]
        arr = src
        for ax in config.factor_axes(i):
            arr = _sum_blocks(arr, ax, 2)
        tree[levels] = arr
    return tree


def build_prefix(cell_masses: np.ndarray) -> np.ndarray:
    """Zero-padded cumulative-sum table over the cell lattice."""
    arr = np.asarray(cell_masses, dtype=float)
    for ax in range(arr.ndim):
        arr = np.cumsum(arr, axis=ax)
    out = np.zeros(tuple(s + 1 for s in cell_masses.shape))
    out[(slice(1, None),) * arr.ndim] = arr
    return out


def _prefix_block(prefix: np.ndarray, lo: tuple[int, ...],
                  hi: tuple[int, ...]) -> float:
    """Inclusion-exclusion sum of cells in the index box [lo, hi)."""
    total = 0.0
    ndim = prefix.ndim
    for corner in itertools.product((0, 1), repeat=ndim):
        idx = tuple(h if bit else l for bit, l, h in zip(corner, lo, hi))
        sign = -1 if (ndim - sum(corner)) % 2 else 1
        total += sign * float(prefix[idx])
    return total


def _axis_pieces(lo, hi, cells: int) -> list[tuple[int, int, float]]:
    """Decompose a unit interval [lo, hi) into weighted cell ranges.

    Cells are 2 units wide; a corner inside a cell contributes the end
    cell with the exact overlap fraction.  Accepts int or Fraction
    endpoints; floats are rejected (they cannot express the lattice
    exactly).
    """
    for c in (lo, hi):
        if not isinstance(c, (int, np.integer, Fraction)):
            raise AlignmentError(
                f"box corner {c!r} is not an exact lattice coordinate")
    a = Fraction(max(lo, 0), 2)
    b = Fraction(min(hi, 2 * cells), 2)
    if b <= a:
        return []
    ca = a.numerator // a.denominator
    cb = b.numerator // b.denominator
    if ca == cb:
        return [(ca, ca + 1, float(b - a))]
    pieces: list[tuple[int, int, float]] = []
    full_lo = ca
    if a > ca:
        pieces.append((ca, ca + 1, float(ca + 1 - a)))
        full_lo = ca + 1
    if full_lo < cb:
        pieces.append((full_lo, cb, 1.0))
    if b > cb:
        pieces.append((cb, cb + 1, float(b - cb)))
    return pieces


def prefix_box_mass(prefix: np.ndarray, config: GridConfig, box: Box) -> float:
    """Integral of the tabulated cell masses over a box in global units."""
    if box.dim != config.total_dim:
        raise ValueError("box dimension does not match the configuration")
    per_axis = [_axis_pieces(lo, hi, config.axis_cells)
                for lo, hi in zip(box.lo, box.hi)]
    if any(not p for p in per_axis):
        return 0.0
    total = 0.0
    for combo in itertools.product(*per_axis):
        w = 1.0
        for _, _, pw in combo:
            w *= pw
        total += w * _prefix_block(prefix,
                                   tuple(p[0] for p in combo),
                                   tuple(p[1] for p in combo))
    return total


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=float)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class GridFunction:
    """Nonnegative piecewise-constant function on the finest lattice."""

    config: GridConfig
    values: np.ndarray

    def __post_init__(self):
        shape = (self.config.axis_cells,) * self.config.total_dim
        arr = np.asarray(self.values, dtype=float)
        if arr.shape != shape:
            raise ValueError(f"values must have shape {shape}, got {arr.shape}")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ValueError("grid function values must be finite and >= 0")
        object.__setattr__(self, "values", _freeze(arr))

    @classmethod
    def ones(cls, config: GridConfig) -> "GridFunction":
        return cls(config, np.ones((config.axis_cells,) * config.total_dim))

    @classmethod
    def indicator(cls, config: GridConfig, target) -> "GridFunction":
        vals = np.zeros((config.axis_cells,) * config.total_dim)
        vals[cell_slices(config, target)] = 1.0
        return cls(config, vals)

    def refine(self, depth: int) -> "GridFunction":
        """Replicate cells onto a deeper lattice (same function)."""
        if depth == self.config.depth:
            return self
        if depth < self.config.depth:
            raise ValueError("refine only goes to deeper lattices")
        f = 1 << (depth - self.config.depth)
        arr = self.values
        for ax in range(self.config.total_dim):
            arr = np.repeat(arr, f, axis=ax)
        return GridFunction(GridConfig(self.config.dims, depth), arr)

    def scaled(self, c: float) -> "GridFunction":
        if c < 0:
            raise ValueError("scale factor must be >= 0")
        return GridFunction(self.config, self.values * c)


def cell_slices(config: GridConfig, target) -> tuple[slice, ...]:
    """Cell index slices of a cell-aligned region (rect or box), clipped."""
    if isinstance(target, ProductRect):
        box = rect_box(config, target)
    elif isinstance(target, DyadicCube):
        box = cube_box(config, target)
    elif isinstance(target, Box):
        box = target
    else:
        raise TypeError(f"cannot take cells of {type(target).__name__}")
    slices = []
    for lo, hi in zip(box.lo, box.hi):
        if lo % 2 or hi % 2:
            raise AlignmentError("region is not aligned to whole cells")
        slices.append(slice(max(int(lo) // 2, 0),
                            min(int(hi) // 2, config.axis_cells)))
    return tuple(slices)


class Weight:
    """Nonnegative density with exact hierarchical mass machinery.

    ``density`` holds per-cell values; ``mass_tree`` the aggregated
    masses of all standard product cubes; ``prefix`` (built lazily) the
    summed-area table answering arbitrary lattice boxes.
    """

    def __init__(self, config: GridConfig, density, meta: dict | None = None):
        shape = (config.axis_cells,) * config.total_dim
        arr = np.asarray(density, dtype=float)
        if arr.shape != shape:
            raise ValueError(f"density must have shape {shape}, got {arr.shape}")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ValueError("density must be finite and nonnegative")
        if float(arr.sum()) <= 0.0:
            raise ValueError("weight must carry positive total mass")
        self.config = config
        self.density = _freeze(arr)
        self.cell_masses = _freeze(self.density * config.cell_volume)
        self.mass_tree = build_mass_tree(config, self.cell_masses)
        self.meta = dict(meta or {})
        self._prefix: np.ndarray | None = None

    @property
    def prefix(self) -> np.ndarray:
        if self._prefix is None:
            self._prefix = build_prefix(self.cell_masses)
            self._prefix.flags.writeable = False
        return self._prefix

    @property
    def total_mass(self) -> float:
        return float(self.mass_tree[(0,) * self.config.n_factors][
            (0,) * self.config.total_dim])

    def _tree_lookup(self, rect: ProductRect) -> float | None:
        if not rect.is_standard:
            return None
        K = self.config.depth
        idx = []
        for q in rect.factors:
            if not 0 <= q.level <= K:
                return None
            for m in q.index:
                if not 0 <= m < (1 << q.level):
                    return None
                idx.append(m)
        return float(self.mass_tree[rect.levels][tuple(idx)])

    def mass(self, target) -> float:
        """Mass of a product rectangle or lattice-aligned box, clipped to the domain."""
        if isinstance(target, ProductRect):
            hit = self._tree_lookup(target)
            if hit is not None:
                return hit
            box = rect_box(self.config, target)
        elif isinstance(target, DyadicCube):
            box = cube_box(self.config, target)
        elif isinstance(target, Box):
            box = target
        else:
            raise TypeError(f"cannot measure {type(target).__name__}")
        return prefix_box_mass(self.prefix, self.config, box)

    def coarsen(self, depth: int) -> "Weight":
        """The same measure represented on a coarser lattice."""
        if depth == self.config.depth:
            return self
        if not 1 <= depth < self.config.depth:
            raise ValueError("coarsen target must be a shallower valid depth")
        f = 1 << (self.config.depth - depth)
        arr = self.density
        for ax in range(self.config.total_dim):
            arr = _sum_blocks(arr, ax, f) / f
        meta = dict(self.meta)
        params = dict(meta.get("params", {}))
        params["coarsened_from"] = self.config.depth
        meta["params"] = params
        return Weight(GridConfig(self.config.dims, depth), arr, meta)


def mass(w: Weight, target) -> float:
    return w.mass(target)


def integrate(w: Weight, f: GridFunction, target) -> float:
    """Integral of f against the weight over a rectangle or box."""
    if f.config != w.config:
        raise ValueError("weight and function live on different grids")
    arr = w.cell_masses * f.values
    if isinstance(target, ProductRect) and target.is_standard:
        try:
            return float(arr[cell_slices(w.config, target)].sum())
        except AlignmentError:  # pragma: no cover - standard rects align
            pass
    if isinstance(target, (ProductRect, DyadicCube)):
        box = (rect_box(w.config, target) if isinstance(target, ProductRect)
               else cube_box(w.config, target))
    elif isinstance(target, Box):
        box = target
    else:
        raise TypeError(f"cannot integrate over {type(target).__name__}")
    return prefix_box_mass(build_prefix(arr), w.config, box)


def lp_norm(w: Weight, f: GridFunction, p: float) -> float:
    """Weighted p-norm over the whole domain, 1 < p < infinity."""
    if not (1.0 < p < math.inf):
        raise ValueError(f"p must lie in (1, inf), got {p}")
    if f.config != w.config:
        raise ValueError("weight and function live on different grids")
    return float(np.sum(f.values ** p * w.cell_masses)) ** (1.0 / p)


# ---------------------------------------------------------------------------
# Weight generators


def _gen_meta(kind: str, seed=None, **params) -> dict:
    return {"kind": kind, "seed": seed, "params": params}


def gen_uniform(config: GridConfig) -> Weight:
    """Lebesgue measure: density one everywhere."""
    return Weight(config, np.ones((config.axis_cells,) * config.total_dim),
                  meta=_gen_meta("uniform"))


def gen_power(config: GridConfig, exponents, centers=None) -> Weight:
    """Tensor power weight prod_a |t_a - c_a|**a_a, each a_a > -1.

    Cell masses use the exact antiderivative per axis, so masses near
    the singularity are quadrature-free.
    """
    exps = tuple(float(a) for a in exponents)
    if len(exps) != config.total_dim:
        raise ValueError("need one exponent per axis")
    if any(a <= -1 for a in exps):
        raise ValueError("power exponents must exceed -1 for local integrability")
    if centers is None:
        centers = (0.0,) * config.total_dim
    centers = tuple(float(c) for c in centers)
    if len(centers) != config.total_dim:
        raise ValueError("need one center per axis")

    cells = config.axis_cells
    edges = np.arange(cells + 1, dtype=float) / cells
    axis_density = []
    for a, c in zip(exps, centers):
        s = edges - c
        anti = np.sign(s) * np.abs(s) ** (1.0 + a) / (1.0 + a)
        masses = np.diff(anti)
        axis_density.append(masses * cells)
    density = axis_density[0]
    for nxt in axis_density[1:]:
        density = np.multiply.outer(density, nxt)
    return Weight(config, density,
                  meta=_gen_meta("power", exponents=list(exps),
                                 centers=list(centers)))


def gen_cascade(config: GridConfig, rho: float, seed: int) -> Weight:
    """Tensor product of per-axis dyadic multiplicative cascades.

    Each interval splits its mass into fractions (theta, 1 - theta)
    with theta drawn uniformly from [1/(1+rho), rho/(1+rho)], which
    bounds every one-axis halving ratio by 1 + rho from above and
    (1+rho)/rho from below.  Deterministic for a given seed.
    """
    rho = float(rho)
    if not 1.0 < rho <= 4.0:
        raise ValueError(f"cascade ratio must satisfy 1 < rho <= 4, got {rho}")
    rng = np.random.default_rng(seed)
    lo, hi = 1.0 / (1.0 + rho), rho / (1.0 + rho)
    cells = config.axis_cells
    axis_density = []
    for _ in range(config.total_dim):
        m = np.array([1.0])
        for _ in range(config.depth):
            theta = lo + (hi - lo) * rng.random(m.size)
            m = np.stack([m * theta, m * (1.0 - theta)], axis=1).reshape(-1)
        axis_density.append(np.repeat(m, 3) * (cells / 3.0))
    density = axis_density[0]
    for nxt in axis_density[1:]:
        density = np.multiply.outer(density, nxt)
    return Weight(config, density,
                  meta=_gen_meta("cascade", seed=int(seed), rho=rho,
                                 rng="numpy-default-pcg64"))


# ---------------------------------------------------------------------------
# Persistence


def _array_doc(config: GridConfig, arr: np.ndarray, kind: str,
               meta: dict) -> dict:
    payload = base64.b64encode(arr.astype("<f8").tobytes()).decode("ascii")
    doc_meta = {"kind": kind, "seed": None, "params": {}}
    doc_meta.update(meta)
    return {
        "version": WEIGHT_SCHEMA_VERSION,
        "dims": list(config.dims),
        "depth": config.depth,
        "lattice": [config.axis_cells] * config.total_dim,
        "density": payload,
        "meta": doc_meta,
    }


def _parse_array_doc(doc: dict) -> tuple[GridConfig, np.ndarray, dict]:
    for key in ("version", "dims", "depth", "lattice", "density"):
        if key not in doc:
            raise WeightFormatError(f"missing field {key!r}")
    if doc["version"] != WEIGHT_SCHEMA_VERSION:
        raise WeightFormatError(
            f"unsupported schema version {doc['version']!r}")
    config = GridConfig(tuple(int(d) for d in doc["dims"]), int(doc["depth"]))
    lattice = [int(c) for c in doc["lattice"]]
    if lattice != [config.axis_cells] * config.total_dim:
        raise WeightFormatError(
            f"lattice {lattice} inconsistent with depth {config.depth}")
    try:
        raw = base64.b64decode(doc["density"], validate=True)
    except Exception as exc:
        raise WeightFormatError(f"undecodable density payload: {exc}") from exc
    count = config.axis_cells ** config.total_dim
    if len(raw) != 8 * count:
        raise WeightFormatError(
            f"density payload holds {len(raw) // 8} values, expected {count}")
    arr = np.frombuffer(raw, dtype="<f8").astype(float).reshape(
        (config.axis_cells,) * config.total_dim)
    return config, arr, dict(doc.get("meta", {}))


def save_weight(w: Weight, path) -> None:
    doc = _array_doc(w.config, w.density, w.meta.get("kind", "custom"), w.meta)
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def load_weight(path, expect_config: GridConfig | None = None) -> Weight:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise WeightFormatError(f"malformed weight file: {exc}") from exc
    config, arr, meta = _parse_array_doc(doc)
    if expect_config is not None and config != expect_config:
        raise WeightFormatError(
            f"grid mismatch: file has dims={config.dims} depth={config.depth}, "
            f"expected dims={expect_config.dims} depth={expect_config.depth}")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise WeightFormatError("density must be finite and nonnegative")
    return Weight(config, arr, meta)


def save_grid_function(f: GridFunction, path) -> None:
    doc = _array_doc(f.config, f.values, "grid_function", {})
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def load_grid_function(path) -> GridFunction:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise WeightFormatError(f"malformed grid function file: {exc}") from exc
    config, arr, _ = _parse_array_doc(doc)
    return GridFunction(config, arr)
