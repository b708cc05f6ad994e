import numpy as np
import pytest

from rectfrac import (DyadicCube, GridConfig, GridFunction, ProductRect,
                      RectKernel, Weight, carleson_norm_lower,
                      carleson_testing_constant, depth_sweep,
                      embed_norm_lower, fp_constant, gen_cascade,
                      gen_uniform, lp_norm, mlinear_form, operator_norm_lower,
                      rows_to_csv)

TOP2 = ProductRect((DyadicCube(0, (0,)), DyadicCube(0, (0,))))


def assert_monotone(history):
    for a, b in zip(history, history[1:]):
        assert b >= a * (1 - 1e-12) - 1e-300


class TestEmbedNormLower:
    def test_cauchy_schwarz_case(self, uniform_square):
        kern = RectKernel.indicator(uniform_square.config, TOP2)
        est = embed_norm_lower(kern, (uniform_square,) * 2, (2.0, 2.0))
        assert est.value == pytest.approx(1.0, rel=1e-12)
        assert est.converged
        for m in est.maximizers:
            assert np.allclose(m.values, m.values.flat[0])

    def test_zero_kernel_converges_immediately(self, uniform_square):
        kern = RectKernel.from_callable(uniform_square.config, lambda r: 0.0)
        est = embed_norm_lower(kern, (uniform_square,) * 2, (2.0, 2.0))
        assert est.value == 0.0
        assert est.converged

    def test_dominates_testing_constant(self):
        for seed in range(6):
            w = gen_cascade(GridConfig((1, 1), 3), 2.0, seed)
            kern = RectKernel.random_uniform(w.config, seed + 50)
            est = embed_norm_lower(kern, (w, w), (2.0, 2.0))
            c2 = fp_constant(kern, (w, w), (2.0, 2.0)).value
            assert est.value >= c2 - 1e-9

    def test_beats_random_restarts(self, cascade_square):
        cfg = cascade_square.config
        kern = RectKernel.random_uniform(cfg, 23)
        est = embed_norm_lower(kern, (cascade_square,) * 2, (2.0, 2.0))
        rng = np.random.default_rng(0)
        best = 0.0
        shape = (cfg.axis_cells,) * 2
        for _ in range(300):
            f = GridFunction(cfg, rng.random(shape))
            g = GridFunction(cfg, rng.random(shape))
            val = mlinear_form(kern, (cascade_square,) * 2, (f, g)) / (
                lp_norm(cascade_square, f, 2.0) *
                lp_norm(cascade_square, g, 2.0))
            best = max(best, val)
        assert est.value >= best - 1e-9

    def test_history_monotone_and_value_is_last(self, cascade_square):
        kern = RectKernel.random_uniform(cascade_square.config, 5)
        est = embed_norm_lower(kern, (cascade_square,) * 2, (4 / 3, 2.0))
        assert_monotone(est.history)
        assert est.value == est.history[-1]

    def test_deterministic_histories(self, cascade_square):
        kern = RectKernel.random_uniform(cascade_square.config, 6)
        a = embed_norm_lower(kern, (cascade_square,) * 2, (2.0, 2.0))
        b = embed_norm_lower(kern, (cascade_square,) * 2, (2.0, 2.0))
        assert a.history == b.history

    def test_weight_scaling_law(self, cascade_square):
        # scaling sigma_1 by lam rescales the ratio by lam**(1/p')
        cfg = cascade_square.config
        kern = RectKernel.random_uniform(cfg, 7)
        lam = 3.7
        scaled = Weight(cfg, cascade_square.density * lam)
        base = embed_norm_lower(kern, (cascade_square, cascade_square),
                                (2.0, 2.0))
        up = embed_norm_lower(kern, (scaled, cascade_square), (2.0, 2.0))
        assert up.value == pytest.approx(base.value * lam ** 0.5, rel=1e-9)

    def test_json_fields(self, cascade_square):
        kern = RectKernel.random_uniform(cascade_square.config, 8)
        doc = embed_norm_lower(kern, (cascade_square,) * 2,
                               (2.0, 2.0)).to_json()
        assert set(doc) == {"value", "sweeps", "converged", "history",
                            "seed", "params"}


class TestOperatorNormLower:
    def test_dyadic_equals_bilinear_route(self, cascade_square):
        # N = 2: alpha = 0.5 and p = 4/3 give q = 2, so q' = 2
        est = operator_norm_lower(cascade_square, 0.5, 4 / 3, 2.0, "dyadic")
        via_embed = embed_norm_lower(
            RectKernel.hls(cascade_square, 0.5), (cascade_square,) * 2,
            (4 / 3, 2.0))
        assert est.value == pytest.approx(via_embed.value, rel=1e-9)

    def test_hls_invariant_under_weight_scaling(self, cascade_square):
        cfg = cascade_square.config
        scaled = Weight(cfg, cascade_square.density * 5.0)
        a = operator_norm_lower(cascade_square, 0.5, 4 / 3, 2.0, "dyadic")
        b = operator_norm_lower(scaled, 0.5, 4 / 3, 2.0, "dyadic")
        assert a.value == pytest.approx(b.value, rel=1e-9)

    @pytest.mark.parametrize("form", ["perez", "shifted-sum"])
    def test_rect_forms_dominate_testing_value(self, cascade_square, form):
        est = operator_norm_lower(cascade_square, 0.5, 4 / 3, 2.0, form)
        assert est.value >= 1.0 - 1e-9  # testing constant is exactly 1
        assert_monotone(est.history)

    def test_kernel_form_runs(self):
        w = gen_uniform(GridConfig((1,), 3))
        est = operator_norm_lower(w, 0.5, 4 / 3, 4.0, "kernel")
        assert est.value > 0
        assert_monotone(est.history)

    def test_unknown_form_rejected(self, cascade_square):
        with pytest.raises(ValueError, match="form"):
            operator_norm_lower(cascade_square, 0.5, 4 / 3, 2.0, "fourier")


class TestCarlesonNormLower:
    def test_dominates_testing_constant(self):
        for seed in range(6):
            w = gen_cascade(GridConfig((1, 1), 3), 2.0, seed + 10)
            est = carleson_norm_lower(w, 2.0, 4.0)
            c2 = carleson_testing_constant(w, 2.0, 4.0).value
            assert est.value >= c2 - 1e-9

    def test_uniform_indicator_series_reproduced(self):
        w = gen_uniform(GridConfig((1,), 4))
        est = carleson_norm_lower(w, 2.0, 4.0)
        assert est.value >= (2.0 - 2.0 ** -4) - 1e-9

    def test_history_monotone(self, cascade_square):
        est = carleson_norm_lower(cascade_square, 2.0, 4.0)
        assert_monotone(est.history)
        assert est.value == est.history[-1]

    def test_growth_against_testing_power(self):
        w = gen_cascade(GridConfig((1, 1), 4), 2.0, 31)
        est = carleson_norm_lower(w, 2.0, 4.0)
        c2 = carleson_testing_constant(w, 2.0, 4.0).value
        n = w.config.n_factors
        ratio = est.value / c2 ** n
        assert 0 < ratio < 10


class TestDepthSweep:
    def test_warm_start_monotone_in_depth(self):
        w = gen_cascade(GridConfig((1, 1), 5), 2.0, 41)
        rows = depth_sweep("embed", (3, 4, 5), weights=(w, w),
                           exponents=(2.0, 2.0), kernel_seed=4)
        vals = [r.c1_hat for r in rows]
        assert vals == sorted(vals)
        assert all(r.ratio >= 1 - 1e-9 for r in rows)

    def test_hls_uniform_row_matches_series(self):
        w = gen_uniform(GridConfig((1,), 4))
        rows = depth_sweep("hls", (3, 4), weight=w, alpha=0.5, p=4 / 3)
        for r in rows:
            assert r.c2 == pytest.approx(1.0, abs=1e-12)
            expect = sum(2.0 ** (-k / 2) for k in range(r.depth + 1))
            assert r.c1_hat >= expect - 1e-9

    def test_carleson_rows(self, cascade_square):
        rows = depth_sweep("carleson", (2, 3), weight=cascade_square,
                           p=2.0, q=4.0)
        assert [r.depth for r in rows] == [2, 3]
        assert all(r.ratio >= 1 - 1e-9 for r in rows)

    def test_csv_is_frozen_format(self, cascade_square):
        rows = depth_sweep("carleson", (2,), weight=cascade_square,
                           p=2.0, q=4.0)
        text = rows_to_csv(rows)
        lines = text.splitlines()
        assert lines[0] == "K,c2,c1_hat,ratio,seconds"
        assert lines[1].startswith("2,")
        assert lines[1].endswith(",0.0")  # timing suppressed by default

    def test_depth_beyond_weight_rejected(self, cascade_square):
        with pytest.raises(ValueError, match="depth"):
            depth_sweep("carleson", (2, 9), weight=cascade_square,
                        p=2.0, q=4.0)
