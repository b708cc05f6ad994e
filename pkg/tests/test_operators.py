import math

import numpy as np
import pytest

from rectfrac import (DegeneratePairError, DyadicCube, ExponentConfig,
                      ExponentError, GridConfig, GridFunction, ProductRect,
                      RectKernel, apply_frac_dyadic, apply_frac_kernel,
                      apply_perez, apply_positive, gen_cascade, gen_uniform,
                      integrate, kernel_sum, mass, min_rect,
                      mlinear_form, pair_kernel, shift_bound_ratio)
from rectfrac.bruteforce import (frac_dyadic_direct, mlinear_direct,
                                 perez_direct, positive_direct)

TOP2 = ProductRect((DyadicCube(0, (0,)), DyadicCube(0, (0,))))


def random_function(cfg, rng):
    return GridFunction(cfg, rng.random((cfg.axis_cells,) * cfg.total_dim))


class TestExponentConfig:
    def test_hls_derivation(self):
        ec = ExponentConfig.hls(0.5, 4 / 3, 1)
        assert ec.q == pytest.approx(4.0, rel=1e-14)
        assert ec.p_conj == pytest.approx(4.0, rel=1e-14)
        assert ec.q_conj == pytest.approx(4 / 3, rel=1e-14)

    def test_relation_violation_named(self):
        with pytest.raises(ExponentError, match=r"1/q = 1/p - alpha/N"):
            ExponentConfig(0.5, 4 / 3, 3.9, 1)

    def test_alpha_range(self):
        with pytest.raises(ExponentError, match="alpha"):
            ExponentConfig.hls(2.5, 1.2, 2)


class TestMlinearForm:
    def test_zero_kernel(self, uniform_square):
        kern = RectKernel.from_callable(uniform_square.config, lambda r: 0.0)
        f = GridFunction.ones(uniform_square.config)
        assert mlinear_form(kern, (uniform_square,) * 2, (f, f)) == 0.0

    def test_top_indicator_kernel(self, uniform_square):
        kern = RectKernel.indicator(uniform_square.config, TOP2)
        f = GridFunction.ones(uniform_square.config)
        assert mlinear_form(kern, (uniform_square,) * 2, (f, f)) == \
            pytest.approx(1.0, rel=1e-14)

    def test_matches_direct_oracle(self, cascade_square):
        cfg = cascade_square.config
        rng = np.random.default_rng(31)
        w2 = gen_cascade(cfg, 1.5, 5)
        for i in range(25):
            kern_fn = _hash_kernel(cfg, seed=i)
            fs = (random_function(cfg, rng), random_function(cfg, rng))
            fast = mlinear_form(RectKernel.from_callable(cfg, kern_fn),
                                (cascade_square, w2), fs)
            slow = mlinear_direct(kern_fn, (cascade_square, w2), fs)
            assert fast == pytest.approx(slow, rel=1e-12)

    def test_multilinear_scaling(self, cascade_square):
        cfg = cascade_square.config
        kern = RectKernel.random_uniform(cfg, 8)
        rng = np.random.default_rng(4)
        f, g = random_function(cfg, rng), random_function(cfg, rng)
        base = mlinear_form(kern, (cascade_square,) * 2, (f, g))
        assert mlinear_form(kern, (cascade_square,) * 2,
                            (f.scaled(3.0), g)) == pytest.approx(
            3 * base, rel=1e-12)


def _hash_kernel(cfg, seed):
    kern = RectKernel.random_uniform(cfg, seed)
    return lambda rect: kern.value(rect)


class TestApplyPositive:
    def test_top_kernel_unit_data(self, uniform_square):
        kern = RectKernel.indicator(uniform_square.config, TOP2)
        f = GridFunction.ones(uniform_square.config)
        out = apply_positive(kern, uniform_square, f)
        assert np.allclose(out.values, 1.0, rtol=1e-14)

    def test_monotone_in_f(self, cascade_square):
        cfg = cascade_square.config
        kern = RectKernel.random_uniform(cfg, 2)
        rng = np.random.default_rng(6)
        f = random_function(cfg, rng)
        g = GridFunction(cfg, f.values + rng.random(f.values.shape))
        tf = apply_positive(kern, cascade_square, f)
        tg = apply_positive(kern, cascade_square, g)
        assert np.all(tf.values <= tg.values + 1e-15)

    def test_duality_identity(self, cascade_square):
        # <T f, g>_omega equals the bilinear rectangle sum exactly
        cfg = cascade_square.config
        omega = gen_cascade(cfg, 2.5, 77)
        kern = RectKernel.random_uniform(cfg, 3)
        rng = np.random.default_rng(8)
        f, g = random_function(cfg, rng), random_function(cfg, rng)
        tf = apply_positive(kern, cascade_square, f)
        lhs = integrate(omega, GridFunction(cfg, tf.values * g.values), TOP2)
        rhs = mlinear_form(kern, (cascade_square, omega), (f, g))
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_matches_direct_oracle(self, cascade_square):
        cfg = cascade_square.config
        kern_fn = _hash_kernel(cfg, 9)
        f = random_function(cfg, np.random.default_rng(10))
        fast = apply_positive(RectKernel.from_callable(cfg, kern_fn),
                              cascade_square, f)
        slow = positive_direct(kern_fn, cascade_square, f)
        np.testing.assert_allclose(fast.values, slow.values, rtol=1e-12)


class TestFracDyadic:
    def test_uniform_geometric_series(self):
        for depth in (3, 5):
            w = gen_uniform(GridConfig((1,), depth))
            out = apply_frac_dyadic(w, 0.5, GridFunction.ones(w.config))
            expect = sum(2.0 ** (-k / 2) for k in range(depth + 1))
            np.testing.assert_allclose(out.values, expect, rtol=1e-13)

    def test_linear_in_f(self, cascade_square):
        f = GridFunction.ones(cascade_square.config)
        one = apply_frac_dyadic(cascade_square, 0.5, f)
        two = apply_frac_dyadic(cascade_square, 0.5, f.scaled(2.0))
        np.testing.assert_allclose(two.values, 2 * one.values, rtol=1e-14)

    @pytest.mark.parametrize("tau", [None, (1, 0), (-1, 1)])
    def test_matches_direct_oracle(self, cascade_square, tau):
        f = random_function(cascade_square.config, np.random.default_rng(12))
        fast = apply_frac_dyadic(cascade_square, 0.75, f, tau)
        slow = frac_dyadic_direct(cascade_square, 0.75, f, tau)
        np.testing.assert_allclose(fast.values, slow.values, rtol=1e-12)

    def test_zero_mass_terms_counted(self, line_cfg):
        from rectfrac import Weight
        dens = np.ones(line_cfg.axis_cells)
        dens[:3] = 0.0
        w = Weight(line_cfg, dens)
        out, diag = apply_frac_dyadic(w, 0.5, GridFunction.ones(line_cfg),
                                      return_diagnostics=True)
        assert diag["skipped_terms"] == 1
        assert diag["truncation_depth"] == line_cfg.depth


class TestPerez:
    def test_dominates_dyadic_pointwise(self, cascade_square):
        f = random_function(cascade_square.config, np.random.default_rng(14))
        small = apply_frac_dyadic(cascade_square, 0.5, f)
        big = apply_perez(cascade_square, 0.5, f)
        scale = big.values.max()
        assert np.all(big.values >= small.values - 1e-12 * scale)

    def test_matches_direct_oracle(self, cascade_square):
        f = random_function(cascade_square.config, np.random.default_rng(15))
        fast = apply_perez(cascade_square, 1.25, f)
        slow = perez_direct(cascade_square, 1.25, f)
        np.testing.assert_allclose(fast.values, slow.values, rtol=1e-12)

    def test_uniform_boundary_truncated_series(self):
        # each level-k interval containing x contributes
        # 2**(k/2) * |3I intersect [0,1)|
        cfg = GridConfig((1,), 4)
        w = gen_uniform(cfg)
        out = apply_perez(w, 0.5, GridFunction.ones(cfg))
        cells = cfg.axis_cells
        expect = np.zeros(cells)
        for k in range(cfg.depth + 1):
            side = 3 * 2 ** (cfg.depth - k)
            for m in range(2 ** k):
                lo, hi = max((m - 1) * side, 0), min((m + 2) * side, cells)
                expect[m * side:(m + 1) * side] += \
                    2.0 ** (k / 2) * (hi - lo) / cells
        np.testing.assert_allclose(out.values, expect, rtol=1e-13)


class TestKernelForm:
    def test_pair_kernel_uniform(self):
        cfg = GridConfig((1,), 5)
        w = gen_uniform(cfg)
        U = cfg.axis_units
        assert pair_kernel(w, 0.5, (U // 4,), (3 * U // 4,)) == \
            pytest.approx(math.sqrt(2.0), rel=1e-12)

    def test_pair_kernel_symmetric(self, cascade_square):
        rng = np.random.default_rng(16)
        U = cascade_square.config.axis_units
        for _ in range(50):
            x = tuple(int(v) for v in rng.integers(0, U, 2))
            y = tuple(int(v) for v in rng.integers(0, U, 2))
            if any(a == b for a, b in zip(x, y)):
                continue
            assert pair_kernel(cascade_square, 0.5, x, y) == \
                pair_kernel(cascade_square, 0.5, y, x)

    def test_uses_product_rectangle_mass(self, cascade_square):
        # the kernel sees the full rectangle mass, not per-factor products
        U = cascade_square.config.axis_units
        x, y = (5, 40), (33, 9)
        expect = mass(cascade_square, min_rect(x, y)) ** (0.5 / 2 - 1)
        assert pair_kernel(cascade_square, 0.5, x, y) == \
            pytest.approx(expect, rel=1e-12)

    def test_quadrature_against_plain_loop(self):
        cfg = GridConfig((1,), 2)
        w = gen_cascade(cfg, 2.0, 5)
        f = random_function(cfg, np.random.default_rng(17))
        out, diag = apply_frac_kernel(w, 0.5, f, return_diagnostics=True)
        cells = cfg.axis_cells
        got = np.zeros(cells)
        for i in range(cells):
            for j in range(cells):
                if i == j:
                    continue
                x = (2 * i + 1,)
                y = (2 * j + 1,)
                got[i] += pair_kernel(w, 0.5, x, y) * f.values[j] * \
                    w.cell_masses[j]
        np.testing.assert_allclose(out.values, got, rtol=1e-12)
        assert diag["excluded_pairs"] == cells

    def test_degenerate_pair_rejected(self, cascade_square):
        with pytest.raises(DegeneratePairError):
            pair_kernel(cascade_square, 0.5, (3, 5), (9, 5))


class TestKernelSum:
    def test_uniform_two_qualifying_intervals(self):
        cfg = GridConfig((1,), 5)
        w = gen_uniform(cfg)
        U = cfg.axis_units
        x, y = (U // 4,), (3 * U // 4,)
        assert kernel_sum(w, 0.5, x, y) == pytest.approx(1 + math.sqrt(2),
                                                         rel=1e-13)
        ratio = kernel_sum(w, 0.5, x, y) / pair_kernel(w, 0.5, x, y)
        assert ratio == pytest.approx((1 + math.sqrt(2)) / math.sqrt(2),
                                      rel=1e-12)

    def test_matches_rect_enumeration(self, cascade_square):
        # independent check: sum over enumerated standard rects
        from rectfrac.grids import enumerate_rects, rect_box, triple
        cfg = cascade_square.config
        rng = np.random.default_rng(18)
        U = cfg.axis_units
        N = cfg.total_dim
        expo = 0.5 / N - 1
        for _ in range(10):
            x = tuple(int(v) for v in rng.integers(0, U, N))
            y = tuple(int(v) for v in rng.integers(0, U, N))
            if any(a == b for a, b in zip(x, y)):
                continue
            total = 0.0
            for rect in enumerate_rects(cfg):
                if rect_box(cfg, rect).contains_point(x) and \
                        triple(cfg, rect).contains_point(y):
                    total += mass(cascade_square, rect) ** expo
            assert kernel_sum(cascade_square, 0.5, x, y) == \
                pytest.approx(total, rel=1e-12)

    def test_bounded_ratio_against_closed_kernel(self, cascade_square):
        from rectfrac.studies import kernel_equiv_study, sample_distinct_pairs
        pairs = sample_distinct_pairs(cascade_square.config, 200, 19)
        stats = kernel_equiv_study(cascade_square, 0.5, pairs)
        assert math.isfinite(stats["kernel_log_width"])
        assert stats["kernel_ratio_min"] > 0
        assert math.isfinite(stats["minimal_mass_ratio_max"])


class TestShiftBoundRatio:
    def test_zero_function(self, cascade_square):
        cfg = cascade_square.config
        zero = GridFunction(cfg, np.zeros((cfg.axis_cells,) * 2))
        assert shift_bound_ratio(cascade_square, 0.5, zero) == 0.0

    def test_uniform_finite_and_stable(self):
        vals = []
        for depth in (3, 4):
            w = gen_uniform(GridConfig((1,), depth))
            vals.append(shift_bound_ratio(w, 0.5, GridFunction.ones(w.config)))
        assert all(math.isfinite(v) and v > 0 for v in vals)
        assert abs(vals[1] / vals[0] - 1) < 0.2

    def test_cascade_finite(self, cascade_square):
        f = GridFunction.ones(cascade_square.config)
        assert math.isfinite(shift_bound_ratio(cascade_square, 0.5, f))


class TestDeterminism:
    def test_bit_identical_reruns(self, cascade_square):
        f = random_function(cascade_square.config, np.random.default_rng(20))
        a = apply_perez(cascade_square, 0.5, f)
        b = apply_perez(cascade_square, 0.5, f)
        assert np.array_equal(a.values, b.values)
        s1 = mlinear_form(RectKernel.random_uniform(cascade_square.config, 1),
                          (cascade_square,) * 2, (f, f))
        s2 = mlinear_form(RectKernel.random_uniform(cascade_square.config, 1),
                          (cascade_square,) * 2, (f, f))
        assert s1 == s2
