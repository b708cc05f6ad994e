"""Batch studies shared by the command line driver and the test suite.

Pair sampling, the kernel-equivalence ratio study, and the exhaustive
shift-cover verification.  All randomness flows from one seed through
numpy's default PCG64 generator; chunked execution across threads
reassembles results in index order, so thread counts never change the
numbers.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .bruteforce import shift_cover_exhaustive
from .grids import (DyadicCube, GridConfig, cube_box, min_rect,
                    product_minimal, shift_cover, triple)
from .operators import kernel_sum, pair_kernel
from .weights import Weight


def sample_distinct_pairs(config: GridConfig, count: int,
                          seed: int) -> list[tuple[tuple[int, ...],
                                                   tuple[int, ...]]]:
    """Seeded pairs of lattice points distinct in every coordinate."""
    rng = np.random.default_rng(seed)
    N = config.total_dim
    units = config.axis_units
    pairs = []
    while len(pairs) < count:
        x = rng.integers(0, units, size=N)
        y = rng.integers(0, units, size=N)
        if np.all(x != y):
            pairs.append((tuple(int(c) for c in x),
                          tuple(int(c) for c in y)))
    return pairs


def scale_pairs(pairs, factor: int):
    """Map pairs to a lattice ``factor`` times finer (same physical points)."""
    return [(tuple(c * factor for c in x), tuple(c * factor for c in y))
            for x, y in pairs]


def kernel_equiv_study(mu: Weight, alpha: float, pairs,
                       threads: int = 1) -> dict:
    """Ratio statistics of the rectangle-sum kernel against the closed kernel.

    For each pair also compares the mass of the product of factor-wise
    minimal cubes with the mass of the minimal rectangle itself.
    """
    def one(pair):
        x, y = pair
        closed = pair_kernel(mu, alpha, x, y)
        summed = kernel_sum(mu, alpha, x, y)
        r0 = mu.mass(product_minimal(mu.config, x, y))
        rm = mu.mass(min_rect(x, y))
        return summed / closed, r0 / rm if rm > 0 else math.inf

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(one, pairs))
    else:
        results = [one(p) for p in pairs]
    kernel_ratios = [r for r, _ in results]
    mass_ratios = [r for _, r in results]
    r_min, r_max = min(kernel_ratios), max(kernel_ratios)
    return {
        "pairs": len(pairs),
        "kernel_ratio_min": r_min,
        "kernel_ratio_max": r_max,
        "kernel_log_width": math.log(r_max / r_min) if r_min > 0 else math.inf,
        "minimal_mass_ratio_min": min(mass_ratios),
        "minimal_mass_ratio_max": max(mass_ratios),
    }


def boundary_cover_cubes(dim: int, max_level: int) -> list[DyadicCube]:
    """Standard cubes of level |k| <= max_level whose closure meets [0,1]^d."""
    cubes = []
    for k in range(-max_level, max_level + 1):
        axis_range = range(-1, (1 << k) + 1) if k >= 0 else range(-1, 1)
        for idx in itertools.product(axis_range, repeat=dim):
            cubes.append(DyadicCube(k, idx))
    return cubes


def verify_shift_cover(cube: DyadicCube, config: GridConfig | None = None) -> bool:
    """One cube: constructed cover is exact and agrees with the oracle."""
    if config is None:
        config = GridConfig((cube.dim,), 1)
    tau, P = shift_cover(cube)
    pbox = cube_box(config, P)
    qbox3 = triple(config, cube)
    side_q = cube_box(config, cube).hi[0] - cube_box(config, cube).lo[0]
    side_p = pbox.hi[0] - pbox.lo[0]
    if side_p != 8 * side_q:
        return False
    if not pbox.contains_box(qbox3):
        return False
    if P.shift != tau:
        return False
    oracle = shift_cover_exhaustive(cube)
    if not oracle:
        return False
    return (tau, P) in oracle


def shift_cover_report(dim: int, max_level: int, threads: int = 1) -> dict:
    """Exhaustive shift-cover verification over the boundary cube family."""
    cubes = boundary_cover_cubes(dim, max_level)

    def run(chunk):
        fails = []
        for cube in chunk:
            if not verify_shift_cover(cube):
                fails.append({"level": cube.level, "index": list(cube.index)})
        return fails

    if threads > 1:
        size = max(1, len(cubes) // threads)
        chunks = [cubes[i:i + size] for i in range(0, len(cubes), size)]
        with ThreadPoolExecutor(max_workers=threads) as ex:
            failures = [f for part in ex.map(run, chunks) for f in part]
    else:
        failures = run(cubes)
    return {"dim": dim, "max_level": max_level,
            "cubes_checked": len(cubes), "failures": failures}
