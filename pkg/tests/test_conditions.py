import math

import numpy as np
import pytest

from rectfrac import (DyadicCube, ExponentError, GridConfig, ProductRect,
                      RectKernel, Weight, carleson_testing_constant,
                      condition_d_constant, doubling_constant, fp_constant,
                      gen_cascade, gen_power, gen_uniform, mass,
                      reverse_doubling_constant)
from rectfrac.grids import rect_from_json, cube_to_json, rect_to_json


def reproduce_halving_witness(w, report):
    """Re-evaluate the mass ratio named by a halving witness."""
    rect = rect_from_json(report.witness["rect"])
    j = report.witness["j"]
    child_doc = report.witness["child"]
    child = DyadicCube(child_doc["level"], tuple(child_doc["index"]),
                       tuple(child_doc["tau"]))
    from rectfrac import replace
    num = mass(w, rect)
    den = mass(w, replace(rect, child, j))
    if den == 0:
        return math.inf if num > 0 else math.nan
    return num / den


class TestDoubling:
    @pytest.mark.parametrize("dims,expect", [((1, 1), 2.0), ((2, 1), 4.0)])
    def test_uniform(self, dims, expect):
        w = gen_uniform(GridConfig(dims, 2))
        assert doubling_constant(w).value == pytest.approx(expect, rel=1e-14)

    def test_cascade_bound(self):
        w = gen_cascade(GridConfig((1, 1), 4), 2.0, 3)
        assert doubling_constant(w).value <= 3.0 + 1e-12

    def test_zero_child_reports_infinity_with_witness(self, line_cfg):
        dens = np.ones(line_cfg.axis_cells)
        dens[:3] = 0.0  # one deepest-level interval carries no mass
        w = Weight(line_cfg, dens)
        rep = doubling_constant(w)
        assert math.isinf(rep.value)
        assert reproduce_halving_witness(w, rep) == math.inf

    def test_witness_reproduces_value(self, cascade_square):
        rep = doubling_constant(cascade_square)
        assert reproduce_halving_witness(cascade_square, rep) == rep.value

    def test_family_size(self):
        w = gen_uniform(GridConfig((1,), 2))
        # (R, j, child) tuples: 1 level-0 rect and 2 level-1 rects, 2 halves each
        assert doubling_constant(w).family_size == 1 * 2 + 2 * 2


class TestReverseDoubling:
    def test_uniform(self):
        w = gen_uniform(GridConfig((2, 1), 2))
        assert reverse_doubling_constant(w).value == pytest.approx(2.0)

    def test_at_least_one(self, cascade_square):
        rep = reverse_doubling_constant(cascade_square)
        assert rep.value >= 1.0
        assert reproduce_halving_witness(cascade_square, rep) == rep.value

    def test_forward_bound_exact_per_factor(self):
        for seed in range(5):
            w = gen_cascade(GridConfig((1, 1), 4), 2.5, seed)
            dub = doubling_constant(w)
            rev = reverse_doubling_constant(w)
            for j, nj in enumerate(w.config.dims):
                bound = 1.0 + (2 ** nj - 1) / dub.per_factor[j]
                assert rev.per_factor[j] >= bound * (1 - 1e-12)

    def test_converse_bound_exact(self):
        for seed in range(5):
            w = gen_cascade(GridConfig((1, 1), 4), 1.5, seed)
            dub = doubling_constant(w).value
            rev = reverse_doubling_constant(w).value
            top = 2 ** max(w.config.dims)
            if rev > top - 1:
                assert dub <= rev / (rev + 1 - top) * (1 + 1e-12)


class TestConditionD:
    @pytest.mark.parametrize("depth", [2, 4, 6])
    def test_uniform_geometric_series(self, depth):
        w = gen_uniform(GridConfig((1,), depth))
        rep = condition_d_constant(w, 1.0)
        assert rep.value == pytest.approx(2.0 - 2.0 ** -depth, rel=1e-13)

    def test_large_eps_limit(self, uniform_line):
        rep = condition_d_constant(uniform_line, 40.0)
        assert rep.value == pytest.approx(1.0, abs=1e-11)

    def test_geometric_bound_from_reverse_doubling(self):
        w = gen_cascade(GridConfig((1, 1), 4), 2.0, 11)
        gamma = reverse_doubling_constant(w).value
        for eps in (0.25, 0.5, 1.0):
            rep = condition_d_constant(w, eps)
            bound = sum(gamma ** (-k * eps) for k in range(w.config.depth + 1))
            assert rep.value <= bound * (1 + 1e-12)
            assert rep.tail_bound is not None

    def test_rejects_nonpositive_eps(self, uniform_line):
        with pytest.raises(ExponentError):
            condition_d_constant(uniform_line, 0.0)

    def test_monotone_in_depth(self):
        w = gen_cascade(GridConfig((1, 1), 4), 2.0, 13)
        shallow = condition_d_constant(w.coarsen(3), 0.5).value
        assert shallow <= condition_d_constant(w, 0.5).value * (1 + 1e-12)


class TestCarlesonTesting:
    @pytest.mark.parametrize("depth", [2, 4])
    def test_uniform_matches_summability_series(self, depth):
        # q/p = 2 reproduces the power-2 geometric series
        w = gen_uniform(GridConfig((1,), depth))
        rep = carleson_testing_constant(w, 2.0, 4.0)
        assert rep.value == pytest.approx(2.0 - 2.0 ** -depth, rel=1e-13)

    def test_large_ratio_limit(self, uniform_line):
        rep = carleson_testing_constant(w=uniform_line, p=1.001, q=50.0)
        assert rep.value == pytest.approx(1.0, abs=1e-9)

    def test_rejects_bad_exponent_order(self, uniform_line):
        with pytest.raises(ExponentError):
            carleson_testing_constant(uniform_line, 4.0, 2.0)

    def test_reverse_doubling_gives_finite_bound(self, cascade_square):
        gamma = reverse_doubling_constant(cascade_square).value
        rep = carleson_testing_constant(cascade_square, 2.0, 4.0)
        assert rep.value <= 1.0 / (1.0 - gamma ** (1 - 2.0)) * (1 + 1e-12)


class TestFeffermanPhong:
    def test_hls_identity_for_any_weight(self):
        for w in (gen_uniform(GridConfig((1, 1), 3)),
                  gen_cascade(GridConfig((1, 1), 3), 3.0, 1),
                  gen_power(GridConfig((1,), 5), (-0.5,))):
            N = w.config.total_dim
            alpha = 0.5
            p = 4 / 3
            q = 1.0 / (1.0 / p - alpha / N)
            rep = fp_constant(RectKernel.hls(w, alpha), (w, w),
                              (p, q / (q - 1)))
            assert rep.value == pytest.approx(1.0, abs=1e-9)

    def test_zero_kernel(self, uniform_square):
        kern = RectKernel.from_callable(uniform_square.config, lambda r: 0.0)
        assert fp_constant(kern, (uniform_square, uniform_square),
                           (2.0, 2.0)).value == 0.0

    def test_single_rect_kernel(self, cascade_square):
        rect = ProductRect((DyadicCube(1, (1,)), DyadicCube(2, (0,))))
        kern = RectKernel.indicator(cascade_square.config, rect)
        rep = fp_constant(kern, (cascade_square, cascade_square), (2.0, 2.0))
        assert rep.value == pytest.approx(mass(cascade_square, rect), rel=1e-12)
        assert rect_from_json(rep.witness["rect"]) == rect

    def test_rejects_exponents_below_duality_line(self, uniform_square):
        kern = RectKernel.from_callable(uniform_square.config, lambda r: 1.0)
        with pytest.raises(ExponentError):
            fp_constant(kern, (uniform_square, uniform_square), (3.0, 3.0))

    def test_monotone_in_depth(self):
        w = gen_cascade(GridConfig((1, 1), 4), 2.0, 17)
        kern4 = RectKernel.random_uniform(w.config, 4)
        kern3 = RectKernel.random_uniform(GridConfig((1, 1), 3), 4)
        v3 = fp_constant(kern3, (w.coarsen(3), w.coarsen(3)), (2.0, 2.0)).value
        v4 = fp_constant(kern4, (w, w), (2.0, 2.0)).value
        assert v3 <= v4 * (1 + 1e-12)


class TestReportSerialization:
    def test_json_round_trip_fields(self, cascade_square):
        rep = doubling_constant(cascade_square)
        doc = rep.to_json()
        assert set(doc) >= {"name", "value", "witness", "depth",
                            "family_size", "params"}
        assert doc["value"] == rep.value

    def test_infinity_serialized_as_string(self, line_cfg):
        dens = np.ones(line_cfg.axis_cells)
        dens[:3] = 0.0
        rep = doubling_constant(Weight(line_cfg, dens))
        assert rep.to_json()["value"] == "inf"

    def test_rect_json_round_trip(self):
        rect = ProductRect((DyadicCube(2, (1,), (-1,)), DyadicCube(0, (0,))))
        assert rect_from_json(rect_to_json(rect)) == rect
        doc = cube_to_json(rect.factors[0])
        assert doc == {"level": 2, "index": [1], "tau": [-1]}
