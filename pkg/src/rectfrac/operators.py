"""Positive rectangle-sum operators and the fractional integral forms.

Four realizations of the fractional integral against a weight mu with
exponent 0 < alpha < N are provided on the truncated families:

* the dyadic form, summing mu(R)**(alpha/N - 1) * 1_R * int_R f dmu over
  one shifted grid family (the standard grid by default);
* the enlarged-region form, which integrates f over 3R instead of R;
* the kernel form, integrating mu(R(x,y))**(alpha/N - 1) f(y) dmu(y) by
  cell-center quadrature over the minimal rectangle of each point pair;
* pointwise sums and comparisons between them (kernel_sum,
  shift_bound_ratio) used by the equivalence studies.

Kernels on the standard family are tabulated per level combination
(``RectKernel``), which keeps the multilinear form and the positive
operator fully vectorized.  Everything is a pure function of immutable
inputs; outputs are reproducible bit for bit for a fixed input.
"""

from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .grids import (DegeneratePairError, GridConfig, ProductRect,
                    axis_index_range, min_rect, standard_rect)
from .weights import GridFunction, Weight, build_mass_tree, build_prefix

EXPONENT_TOL = 1e-12


class ExponentError(ValueError):
    """An exponent configuration outside the admissible range."""


@dataclass(frozen=True)
class ExponentConfig:
    """Validated exponent bundle for the fractional-integral regime.

    The defining relation is 1/q = 1/p - alpha/N with 0 < alpha < N and
    1 < p < q < infinity; ``hls`` derives q from (alpha, p) so the
    relation holds to machine precision.
    """

    alpha: float
    p: float
    q: float
    total_dim: int

    def __post_init__(self):
        N = self.total_dim
        if not 0.0 < self.alpha < N:
            raise ExponentError(f"alpha must lie in (0, {N}), got {self.alpha}")
        if not (1.0 < self.p < self.q < math.inf):
            raise ExponentError(
                f"need 1 < p < q < inf, got p={self.p}, q={self.q}")
        gap = abs(1.0 / self.q - (1.0 / self.p - self.alpha / N))
        if gap > EXPONENT_TOL:
            raise ExponentError(
                "exponents must satisfy 1/q = 1/p - alpha/N "
                f"(off by {gap:.3e})")

    @classmethod
    def hls(cls, alpha: float, p: float, total_dim: int) -> "ExponentConfig":
        inv_q = 1.0 / p - alpha / total_dim
        if inv_q <= 0.0:
            raise ExponentError(
                "exponents must satisfy 1/q = 1/p - alpha/N > 0 "
                f"(got 1/p - alpha/N = {inv_q:.3e})")
        return cls(alpha, p, 1.0 / inv_q, total_dim)

    @property
    def p_conj(self) -> float:
        return self.p / (self.p - 1.0)

    @property
    def q_conj(self) -> float:
        return self.q / (self.q - 1.0)


def check_mlinear_exponents(ps) -> tuple[float, ...]:
    """Validate a multilinear exponent tuple.

    The embedding theorem lives in the regime sum(1/p_k) > 1; the
    boundary sum(1/p_k) = 1 is accepted for measurement (the one-sided
    indicator bound never uses the constraint).
    """
    ps = tuple(float(p) for p in ps)
    if any(not 1.0 < p < math.inf for p in ps):
        raise ExponentError(f"every p_k must lie in (1, inf), got {ps}")
    total = sum(1.0 / p for p in ps)
    if total < 1.0 - EXPONENT_TOL:
        raise ExponentError(
            f"exponents must satisfy sum(1/p_k) >= 1, got {total}")
    return ps


def _check_alpha(alpha: float, total_dim: int) -> float:
    if not 0.0 < alpha < total_dim:
        raise ExponentError(
            f"alpha must lie in (0, {total_dim}), got {alpha}")
    return float(alpha)


def _check_same_grid(*objs) -> GridConfig:
    cfg = objs[0].config
    for o in objs[1:]:
        if o.config != cfg:
            raise ValueError("inputs live on different grids")
    return cfg


def level_combos(config: GridConfig):
    """Factor-level tuples in enumeration order."""
    return itertools.product(range(config.depth + 1),
                             repeat=config.n_factors)


def _upsample(config: GridConfig, levels: tuple[int, ...],
              arr: np.ndarray) -> np.ndarray:
    """Spread per-rectangle values onto the cells each rectangle covers."""
    out = arr
    for i, k in enumerate(levels):
        rep = 3 * (1 << (config.depth - k))
        for ax in config.factor_axes(i):
            out = np.repeat(out, rep, axis=ax)
    return out


def _axis_levels(config: GridConfig, levels: tuple[int, ...]) -> list[int]:
    flat = []
    for i, k in enumerate(levels):
        flat.extend([k] * config.dims[i])
    return flat


def _family_bounds(config: GridConfig, levels: tuple[int, ...], tau):
    """Per-axis clipped cell bounds of one shifted level combination."""
    K, C = config.depth, config.axis_cells
    los, his = [], []
    for k, s in zip(_axis_levels(config, levels), tau):
        m = np.arange(axis_index_range(k, s).start,
                      axis_index_range(k, s).stop)
        scale = 1 << (K - k)
        los.append(np.clip((3 * m + s) * scale, 0, C))
        his.append(np.clip((3 * m + s + 3) * scale, 0, C))
    return los, his


def _take_diff(prefix: np.ndarray, los, his) -> np.ndarray:
    """Vectorized inclusion-exclusion over a grid of index boxes.

    Prefix differences of nonnegative data can round to tiny negatives;
    those are floored at zero.
    """
    arr = prefix
    for ax, (lo, hi) in enumerate(zip(los, his)):
        arr = np.take(arr, hi, axis=ax) - np.take(arr, lo, axis=ax)
    return np.maximum(arr, 0.0)


def _scatter_slices(out: np.ndarray, los, his, coeff: np.ndarray) -> None:
    """Add each rectangle's coefficient on its (clipped) cell block."""
    for idx in np.ndindex(coeff.shape):
        c = coeff[idx]
        if c == 0.0:
            continue
        out[tuple(slice(int(lo[i]), int(hi[i]))
                  for lo, hi, i in zip(los, his, idx))] += c


@dataclass(frozen=True)
class RectKernel:
    """A nonnegative kernel tabulated on the standard truncated family."""

    config: GridConfig
    tables: dict

    def value(self, rect: ProductRect) -> float:
        if not rect.is_standard:
            raise ValueError("kernel tables cover the standard family only")
        idx = tuple(m for q in rect.factors for m in q.index)
        return float(self.tables[rect.levels][idx])

    __call__ = value

    @staticmethod
    def coerce(obj, config: GridConfig) -> "RectKernel":
        if isinstance(obj, RectKernel):
            if obj.config != config:
                raise ValueError("kernel tabulated on a different grid")
            return obj
        if callable(obj):
            return RectKernel.from_callable(config, obj)
        raise TypeError(f"cannot use {type(obj).__name__} as a kernel")

    @classmethod
    def from_callable(cls, config: GridConfig, fn) -> "RectKernel":
        tables = {}
        for levels in level_combos(config):
            shape = tuple(1 << k for k in _axis_levels(config, levels))
            arr = np.empty(shape)
            for idx in np.ndindex(shape):
                val = float(fn(standard_rect(config, levels, idx)))
                if val < 0:
                    raise ValueError("kernels must be nonnegative")
                arr[idx] = val
            tables[levels] = arr
        return cls(config, tables)

    @classmethod
    def hls(cls, mu: Weight, alpha: float) -> "RectKernel":
        """mu(R)**(alpha/N - 1); zero-mass rectangles get value 0."""
        N = mu.config.total_dim
        expo = _check_alpha(alpha, N) / N - 1.0
        tables = {}
        for levels, arr in mu.mass_tree.items():
            pos = arr > 0
            tables[levels] = np.where(pos, np.where(pos, arr, 1.0) ** expo, 0.0)
        return cls(mu.config, tables)

    @classmethod
    def indicator(cls, config: GridConfig, rect: ProductRect) -> "RectKernel":
        if not rect.is_standard:
            raise ValueError("indicator kernels cover standard rectangles")
        tables = {}
        for levels in level_combos(config):
            shape = tuple(1 << k for k in _axis_levels(config, levels))
            tables[levels] = np.zeros(shape)
        idx = tuple(m for q in rect.factors for m in q.index)
        tables[rect.levels][idx] = 1.0
        return cls(config, tables)

    @classmethod
    def random_uniform(cls, config: GridConfig, seed: int) -> "RectKernel":
        """Values iid-uniform in [0,1), keyed by rectangle identity.

        Hash-based, so a rectangle keeps its value across different
        depths: nested truncated families see consistent kernels.
        """
        key = int(seed).to_bytes(8, "little", signed=True)
        tables = {}
        for levels in level_combos(config):
            shape = tuple(1 << k for k in _axis_levels(config, levels))
            arr = np.empty(shape)
            for idx in np.ndindex(shape):
                token = repr((levels, idx)).encode()
                h = hashlib.blake2b(token, digest_size=8, key=key).digest()
                arr[idx] = int.from_bytes(h, "little") / 2.0 ** 64
            tables[levels] = arr
        return cls(config, tables)


def mlinear_form(kernel, sigmas, fs) -> float:
    """Truncated multilinear rectangle sum sum_R K(R) prod_k int_R f_k dsigma_k."""
    if len(sigmas) != len(fs) or not sigmas:
        raise ValueError("need one function per weight")
    cfg = _check_same_grid(*sigmas, *fs)
    kernel = RectKernel.coerce(kernel, cfg)
    trees = [build_mass_tree(cfg, w.cell_masses * f.values)
             for w, f in zip(sigmas, fs)]
    total = 0.0
    for levels in level_combos(cfg):
        arr = kernel.tables[levels].copy()
        for t in trees:
            arr *= t[levels]
        total += float(arr.sum())
    return total


def apply_positive(kernel, sigma: Weight, f: GridFunction) -> GridFunction:
    """The positive operator sum_R K(R) 1_R int_R f dsigma on cells."""
    cfg = _check_same_grid(sigma, f)
    kernel = RectKernel.coerce(kernel, cfg)
    tree = build_mass_tree(cfg, sigma.cell_masses * f.values)
    out = np.zeros_like(f.values)
    for levels in level_combos(cfg):
        out += _upsample(cfg, levels, kernel.tables[levels] * tree[levels])
    return GridFunction(cfg, out)


def _empty_diagnostics(config: GridConfig) -> dict:
    return {"skipped_terms": 0, "excluded_pairs": 0,
            "truncation_depth": config.depth}


def apply_frac_dyadic(mu: Weight, alpha: float, f: GridFunction, tau=None,
                      return_diagnostics: bool = False):
    """Fractional rectangle sum over one shifted family.

    Shifted rectangles may overhang the domain; the overhang carries no
    mass, and only rectangles meeting the domain are summed.  Zero-mass
    rectangles are skipped and counted in the diagnostics.
    """
    cfg = _check_same_grid(mu, f)
    N = cfg.total_dim
    expo = _check_alpha(alpha, N) / N - 1.0
    if tau is None:
        tau = (0,) * N
    else:
        tau = tuple(int(t) for t in tau)
        if len(tau) != N or any(t not in (-1, 0, 1) for t in tau):
            raise ValueError("tau must assign -1, 0 or +1 per axis")
    diag = _empty_diagnostics(cfg)
    out = np.zeros_like(f.values)
    if all(t == 0 for t in tau):
        tree_f = build_mass_tree(cfg, mu.cell_masses * f.values)
        for levels in level_combos(cfg):
            m_arr = mu.mass_tree[levels]
            pos = m_arr > 0
            diag["skipped_terms"] += int(m_arr.size - pos.sum())
            coeff = np.where(pos, np.where(pos, m_arr, 1.0) ** expo, 0.0)
            out += _upsample(cfg, levels, coeff * tree_f[levels])
    else:
        pf = build_prefix(mu.cell_masses * f.values)
        for levels in level_combos(cfg):
            los, his = _family_bounds(cfg, levels, tau)
            m_arr = _take_diff(mu.prefix, los, his)
            i_arr = _take_diff(pf, los, his)
            pos = m_arr > 0
            diag["skipped_terms"] += int(m_arr.size - pos.sum())
            coeff = np.where(pos, np.where(pos, m_arr, 1.0) ** expo, 0.0) * i_arr
            _scatter_slices(out, los, his, coeff)
    gf = GridFunction(cfg, out)
    return (gf, diag) if return_diagnostics else gf


def apply_perez(mu: Weight, alpha: float, f: GridFunction,
                return_diagnostics: bool = False):
    """Fractional sum over standard rectangles with integration over 3R."""
    cfg = _check_same_grid(mu, f)
    N = cfg.total_dim
    expo = _check_alpha(alpha, N) / N - 1.0
    K, C = cfg.depth, cfg.axis_cells
    diag = _empty_diagnostics(cfg)
    pf = build_prefix(mu.cell_masses * f.values)
    out = np.zeros_like(f.values)
    for levels in level_combos(cfg):
        m_arr = mu.mass_tree[levels]
        los, his = [], []
        for k in _axis_levels(cfg, levels):
            m = np.arange(1 << k)
            side = 3 * (1 << (K - k))
            los.append(np.clip((m - 1) * side, 0, C))
            his.append(np.clip((m + 2) * side, 0, C))
        i3_arr = _take_diff(pf, los, his)
        pos = m_arr > 0
        diag["skipped_terms"] += int(m_arr.size - pos.sum())
        coeff = np.where(pos, np.where(pos, m_arr, 1.0) ** expo, 0.0) * i3_arr
        out += _upsample(cfg, levels, coeff)
    gf = GridFunction(cfg, out)
    return (gf, diag) if return_diagnostics else gf


def _pair_mass_grid(prefix: np.ndarray, x_idx: tuple[int, ...]) -> np.ndarray:
    """Masses of the minimal boxes from cell-center x to every cell center.

    A center-to-center interval covers the end cells by exactly one
    half, so the mass is the average of the 2**N whole-cell queries
    shifted by 0/1 per axis.
    """
    N = prefix.ndim
    C = prefix.shape[0] - 1
    ar = np.arange(C)
    acc = np.zeros((C,) * N)
    for offs in itertools.product((0, 1), repeat=N):
        arr = prefix
        for ax in range(N):
            lo = np.minimum(ar, x_idx[ax]) + offs[ax]
            hi = np.maximum(ar, x_idx[ax]) + offs[ax]
            arr = np.take(arr, hi, axis=ax) - np.take(arr, lo, axis=ax)
        acc += arr
    return np.maximum(acc, 0.0) / (1 << N)


def _shared_coordinate_mask(shape, x_idx) -> np.ndarray:
    mask = np.zeros(shape, dtype=bool)
    for ax, xi in enumerate(x_idx):
        sl = [slice(None)] * len(shape)
        sl[ax] = xi
        mask[tuple(sl)] = True
    return mask


def apply_frac_kernel(mu: Weight, alpha: float, f: GridFunction,
                      return_diagnostics: bool = False):
    """Kernel form by cell-center quadrature.

    For every cell center x, sums mu(R(x,y))**(alpha/N-1) f(y) mu(cell_y)
    over cell centers y that differ from x in every coordinate; pairs
    sharing a coordinate are excluded (the minimal rectangle degenerates
    there) and counted.
    """
    cfg = _check_same_grid(mu, f)
    N = cfg.total_dim
    expo = _check_alpha(alpha, N) / N - 1.0
    diag = _empty_diagnostics(cfg)
    fw = f.values * mu.cell_masses
    out = np.empty_like(f.values)
    prefix = mu.prefix
    for x in np.ndindex(f.values.shape):
        grid = _pair_mass_grid(prefix, x)
        shared = _shared_coordinate_mask(grid.shape, x)
        pos = (grid > 0) & ~shared
        diag["excluded_pairs"] += int(shared.sum())
        diag["skipped_terms"] += int((~shared & ~pos).sum())
        vals = np.where(pos, np.where(pos, grid, 1.0) ** expo, 0.0) * fw
        out[x] = float(vals.sum())
    gf = GridFunction(cfg, out)
    return (gf, diag) if return_diagnostics else gf


def kernel_matrix(mu: Weight, alpha: float) -> np.ndarray:
    """Dense cell-center kernel matrix (excluded pairs set to zero)."""
    cfg = mu.config
    N = cfg.total_dim
    expo = _check_alpha(alpha, N) / N - 1.0
    shape = (cfg.axis_cells,) * N
    count = cfg.axis_cells ** N
    A = np.empty((count, count))
    prefix = mu.prefix
    for row, x in enumerate(np.ndindex(shape)):
        grid = _pair_mass_grid(prefix, x)
        pos = (grid > 0) & ~_shared_coordinate_mask(shape, x)
        A[row] = np.where(pos, np.where(pos, grid, 1.0) ** expo, 0.0).ravel()
    return A


def kernel_sum(mu: Weight, alpha: float, x, y) -> float:
    """Sum of mu(R)**(alpha/N-1) over standard R with x in R and y in 3R.

    Truncated at the configured depth from below and at the unit cube
    from above (for in-domain points the unit cube already qualifies).
    """
    cfg = mu.config
    N, K, n = cfg.total_dim, cfg.depth, cfg.n_factors
    expo = _check_alpha(alpha, N) / N - 1.0
    units = cfg.axis_units
    x, y = tuple(x), tuple(y)
    if not all(0 <= c < units for c in x) or not all(0 <= c < units for c in y):
        raise ValueError("points must lie inside [0,1)^N")
    xs, ys = cfg.split_axes(x), cfg.split_axes(y)
    ok: list[list[bool]] = []
    idx: list[list[tuple[int, ...]]] = []
    for i in range(n):
        if xs[i] == ys[i]:
            raise DegeneratePairError(f"points coincide in factor {i}")
        oks, idxs = [], []
        for k in range(K + 1):
            side = 3 * (1 << (K + 1 - k))
            m = tuple(c // side for c in xs[i])
            lo = tuple(mm * side for mm in m)
            oks.append(all(l - side <= c < l + 2 * side
                           for l, c in zip(lo, ys[i])))
            idxs.append(m)
        ok.append(oks)
        idx.append(idxs)
    total = 0.0
    for levels in itertools.product(range(K + 1), repeat=n):
        if not all(ok[i][levels[i]] for i in range(n)):
            continue
        flat = tuple(m for i in range(n) for m in idx[i][levels[i]])
        m_val = float(mu.mass_tree[levels][flat])
        if m_val > 0:
            total += m_val ** expo
    return total


def pair_kernel(mu: Weight, alpha: float, x, y) -> float:
    """The closed kernel mu(R(x,y))**(alpha/N - 1); +inf on zero mass."""
    N = mu.config.total_dim
    expo = _check_alpha(alpha, N) / N - 1.0
    m = mu.mass(min_rect(tuple(x), tuple(y)))
    if m <= 0.0:
        return math.inf
    return m ** expo


def shift_bound_ratio(mu: Weight, alpha: float, f: GridFunction) -> float:
    """Pointwise domination of the enlarged form by the shifted-grid sum.

    Returns the largest cellwise ratio of the enlarged-region form to
    the sum of the dyadic forms over all 3**N shifted families (+inf if
    the numerator is positive where the denominator vanishes; cells
    where both vanish are skipped; 0 if every cell is skipped).
    """
    cfg = _check_same_grid(mu, f)
    num = apply_perez(mu, alpha, f).values
    den = np.zeros_like(num)
    for tau in itertools.product((-1, 0, 1), repeat=cfg.total_dim):
        den = den + apply_frac_dyadic(mu, alpha, f, tau).values
    live = ~((num == 0) & (den == 0))
    if not live.any():
        return 0.0
    if np.any(live & (den == 0)):
        return math.inf
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(live, num / np.where(den > 0, den, 1.0), 0.0)
    return float(ratios.max())
