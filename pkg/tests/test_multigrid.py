import numpy as np
import pytest

from diffpaint import (
    InpaintingProblem,
    MultigridConfig,
    SolverConfig,
    build_hierarchy,
    compute_metrics,
    downsample_mask,
    downsample_values_modified,
    downsample_values_naive,
    fmg_solve,
    mask_density,
    oras_solve,
    prolongate_correction,
    prolongate_solution,
    restrict_residual,
    solve_image,
    step_edge_image,
    v_cycle,
)
from diffpaint.masks import edge_concentrated_mask
from diffpaint.multigrid import cascadic_init
from diffpaint.oracle import solve as oracle_solve
from diffpaint.solvers import oras_sweeps

from conftest import seeded_problem


class TestDownsampleMask:
    def test_any_constituent_marks_coarse_pixel(self):
        fine = np.zeros((4, 4), bool)
        fine[2, 1] = True
        coarse = downsample_mask(fine)
        assert coarse.shape == (2, 2)
        assert coarse[1, 0] and coarse.sum() == 1

    def test_empty_and_full(self):
        assert not downsample_mask(np.zeros((6, 6), bool)).any()
        assert downsample_mask(np.ones((6, 6), bool)).all()

    def test_odd_dimensions_ceil(self):
        fine = np.zeros((5, 7), bool)
        fine[4, 6] = True  # 1-pixel corner cell
        coarse = downsample_mask(fine)
        assert coarse.shape == (3, 4)
        assert coarse[2, 3]


class TestDownsampleValues:
    def test_naive_averages_known_values(self):
        mask = np.array([[True, True], [False, False]])
        rhs = np.array([[100.0, 200.0], [0.0, 0.0]])
        np.testing.assert_array_equal(downsample_values_naive(mask, rhs), [[150.0]])

    def test_naive_empty_cell_is_zero(self):
        assert downsample_values_naive(np.zeros((2, 2), bool), np.zeros((2, 2))) == [[0.0]]

    def test_naive_single_value_preserved(self):
        mask = np.array([[False, False], [False, True]])
        rhs = np.array([[0.0, 0.0], [0.0, 42.0]])
        np.testing.assert_array_equal(downsample_values_naive(mask, rhs), [[42.0]])

    def test_modified_isolated_pixel_preserved(self):
        mask = np.zeros((8, 8), bool)
        mask[3, 3] = True
        rhs = np.zeros((8, 8))
        rhs[3, 3] = 99.0
        coarse = downsample_values_modified(mask, downsample_mask(mask), rhs)
        assert coarse[1, 1] == 99.0

    def test_modified_suppresses_enclosed_pixel(self):
        # plus shape: the center pixel's four direct neighbors are all known,
        # so its value must not reach the coarse level at all
        mask = np.zeros((8, 8), bool)
        rhs = np.zeros((8, 8))
        for (y, x), val in [((3, 3), 100.0), ((2, 3), 10.0), ((3, 2), 30.0),
                            ((4, 3), 0.0), ((3, 4), 0.0)]:
            mask[y, x] = True
            rhs[y, x] = val
        coarse = downsample_values_modified(mask, downsample_mask(mask), rhs)
        # cell (1, 1) holds the center (weight 0) and two arms (weight 2 each)
        assert coarse[1, 1] == (2 * 10.0 + 2 * 30.0) / 4.0
        naive = downsample_values_naive(mask, rhs)
        assert naive[1, 1] == pytest.approx((100.0 + 10.0 + 30.0) / 3.0)

    def test_modified_all_suppressed_falls_back_to_naive(self):
        mask = np.ones((8, 8), bool)
        rhs = np.full((8, 8), 77.0)
        coarse = downsample_values_modified(mask, downsample_mask(mask), rhs)
        np.testing.assert_array_equal(coarse, np.full((4, 4), 77.0))

    def test_modified_zero_outside_coarse_mask(self, rng):
        mask = rng.random((16, 16)) < 0.2
        rhs = np.where(mask, rng.uniform(0, 255, (16, 16)), 0.0)
        cm = downsample_mask(mask)
        coarse = downsample_values_modified(mask, cm, rhs)
        assert np.all(coarse[~cm] == 0.0)


class TestRestrictResidual:
    def test_cell_mean(self):
        fine = np.zeros((2, 2))
        fine[0, 0] = 4.0
        np.testing.assert_array_equal(restrict_residual(fine, np.zeros((1, 1), bool)), [[1.0]])

    def test_coarse_mask_pixel_zeroed(self):
        fine = np.full((2, 2), 5.0)
        np.testing.assert_array_equal(restrict_residual(fine, np.ones((1, 1), bool)), [[0.0]])

    def test_zero_stays_zero(self):
        out = restrict_residual(np.zeros((6, 6)), np.zeros((3, 3), bool))
        np.testing.assert_array_equal(out, np.zeros((3, 3)))

    def test_partial_edge_cells_use_actual_counts(self):
        fine = np.ones((3, 3))
        out = restrict_residual(fine, np.zeros((2, 2), bool))
        np.testing.assert_array_equal(out, np.ones((2, 2)))


def reference_prolongate(coarse, fine_shape):
    """Cell-centered bilinear interpolation, written as a plain double loop."""
    hf, wf = fine_shape
    hc, wc = coarse.shape
    out = np.zeros(fine_shape)
    for y in range(hf):
        for x in range(wf):
            cx = (x - 0.5) / 2.0
            cy = (y - 0.5) / 2.0
            x0, y0 = int(np.floor(cx)), int(np.floor(cy))
            tx, ty = cx - x0, cy - y0

            def val(yy, xx):
                return coarse[min(max(yy, 0), hc - 1), min(max(xx, 0), wc - 1)]

            out[y, x] = (
                (1 - ty) * (1 - tx) * val(y0, x0)
                + (1 - ty) * tx * val(y0, x0 + 1)
                + ty * (1 - tx) * val(y0 + 1, x0)
                + ty * tx * val(y0 + 1, x0 + 1)
            )
    return out


class TestProlongation:
    def test_constant_preserved_exactly(self):
        coarse = np.full((3, 4), 123.0)
        out = prolongate_correction(coarse, np.zeros((6, 8), bool))
        np.testing.assert_array_equal(out, np.full((6, 8), 123.0))

    def test_mask_pixels_overwritten(self, rng):
        coarse = rng.uniform(0, 255, (4, 4))
        mask = rng.random((8, 8)) < 0.3
        rhs = rng.uniform(0, 255, (8, 8))
        corr = prolongate_correction(coarse, mask)
        assert np.all(corr[mask] == 0.0)
        sol = prolongate_solution(coarse, mask, rhs)
        np.testing.assert_array_equal(sol[mask], rhs[mask])

    def test_1d_weights(self):
        coarse = np.array([[10.0, 50.0, 30.0, 70.0]])
        out = prolongate_correction(coarse, np.zeros((1, 8), bool))
        a, b = 10.0, 50.0
        assert out[0, 0] == a  # border clamp
        assert out[0, 1] == (3 * a + b) / 4
        assert out[0, 2] == (3 * b + a) / 4

    @pytest.mark.parametrize("fine_shape", [(8, 8), (7, 9), (8, 5)])
    def test_matches_loop_reference(self, fine_shape, rng):
        hc, wc = -(-fine_shape[0] // 2), -(-fine_shape[1] // 2)
        coarse = rng.uniform(0, 255, (hc, wc))
        out = prolongate_correction(coarse, np.zeros(fine_shape, bool))
        np.testing.assert_allclose(out, reference_prolongate(coarse, fine_shape), atol=1e-12)

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            prolongate_correction(np.zeros((3, 3)), np.zeros((8, 8), bool))


class TestHierarchy:
    def test_4k_has_eight_levels(self):
        mask = np.zeros((2160, 3840), bool)
        mask[::50, ::50] = True
        prob = InpaintingProblem(mask, np.zeros((2160, 3840)))
        hier = build_hierarchy(prob, MultigridConfig())
        assert len(hier) == 8
        assert hier.levels[-1].shape == (17, 30)

    def test_small_input_single_level(self):
        prob = seeded_problem(32, 32, 0.1, 0)
        assert len(build_hierarchy(prob, MultigridConfig())) == 1

    def test_256_has_four_levels(self):
        prob = seeded_problem(256, 256, 0.02, 0)
        hier = build_hierarchy(prob, MultigridConfig())
        assert [lev.shape for lev in hier.levels] == [
            (256, 256), (128, 128), (64, 64), (32, 32),
        ]

    def test_density_monotone_and_spacing_doubles(self):
        prob = seeded_problem(256, 256, 0.02, 1)
        hier = build_hierarchy(prob, MultigridConfig())
        densities = [mask_density(lev.mask) for lev in hier.levels]
        assert all(b >= a for a, b in zip(densities, densities[1:]))
        spacings = [lev.spacing for lev in hier.levels]
        assert spacings == [1.0, 2.0, 4.0, 8.0]

    def test_rhs_zero_off_mask_at_every_level(self):
        prob = seeded_problem(128, 128, 0.05, 2)
        for variant in ("naive", "modified"):
            hier = build_hierarchy(prob, MultigridConfig(value_downsampling=variant))
            for lev in hier.levels:
                assert np.all(lev.rhs[0][~lev.mask] == 0.0)


class TestVCycle:
    def test_single_level_reduces_to_smoothing(self):
        prob = seeded_problem(32, 32, 0.1, 4)
        cfg = MultigridConfig()
        hier = build_hierarchy(prob, cfg)
        assert len(hier) == 1
        lev = hier.levels[0]
        b = lev.rhs[0]
        u_cycle = prob.flat_init(0)
        v_cycle(hier, 0, u_cycle, b, cfg)
        u_manual = prob.flat_init(0)
        oras_sweeps(
            lev.op, lev.block_solver(cfg.solver.alpha), b, u_manual,
            max_sweeps=cfg.nu_pre + cfg.nu_post, stop_norm=0.0,
            eta=cfg.solver.local_tol_fraction, local_max_iters=4096,
        )
        np.testing.assert_array_equal(u_cycle, u_manual)

    def test_exact_solution_fixed_point(self):
        # constant problem: the flat-constant field solves exactly, residual 0
        mask = np.zeros((64, 64), bool)
        mask[::7, ::5] = True
        prob = InpaintingProblem(mask, np.full((64, 64), 128.0))
        cfg = MultigridConfig()
        hier = build_hierarchy(prob, cfg)
        u = np.full((64, 64), 128.0)
        snapshot = u.copy()
        v_cycle(hier, 0, u, hier.levels[0].rhs[0], cfg)
        np.testing.assert_array_equal(u, snapshot)

    def test_one_cycle_beats_two_plain_sweeps(self):
        # at 2% density the coarse correction must outperform two fine sweeps
        prob = seeded_problem(128, 128, 0.02, 0)
        cfg = MultigridConfig()
        hier = build_hierarchy(prob, cfg)
        lev = hier.levels[0]
        b = lev.rhs[0]
        u0 = cascadic_init(hier, cfg)
        r0 = np.linalg.norm(b - lev.op.apply(u0))

        u_cycle = u0.copy()
        v_cycle(hier, 0, u_cycle, b, cfg)
        factor_cycle = r0 / np.linalg.norm(b - lev.op.apply(u_cycle))

        u_sweeps = u0.copy()
        oras_sweeps(
            lev.op, lev.block_solver(cfg.solver.alpha), b, u_sweeps,
            max_sweeps=2, stop_norm=0.0, eta=cfg.solver.local_tol_fraction,
            local_max_iters=4096,
        )
        factor_sweeps = r0 / np.linalg.norm(b - lev.op.apply(u_sweeps))
        assert factor_cycle > factor_sweeps


class TestFmgSolve:
    def test_all_mask_exact_no_cycles(self, rng):
        f = rng.uniform(0, 255, (64, 64))
        prob = InpaintingProblem(np.ones((64, 64), bool), f)
        cfg = MultigridConfig()
        u, rep = fmg_solve(build_hierarchy(prob, cfg), cfg)
        assert rep.iterations == 0 and rep.converged
        np.testing.assert_array_equal(u, f)

    def test_defaults_match_single_cycle_single_smoothing(self):
        cfg = MultigridConfig()
        assert cfg.nu_pre == 1 and cfg.nu_post == 1
        assert cfg.mode == "full_multigrid" and cfg.smoother == "oras"
        assert cfg.value_downsampling == "modified"
        assert cfg.block_size == 32 and cfg.overlap == 6

    def test_converges_and_beats_single_level_quality(self):
        prob = seeded_problem(256, 256, 0.02, 0)
        cfg = MultigridConfig()  # tol 1e-3 default
        hier = build_hierarchy(prob, cfg)
        u_mg, rep = fmg_solve(hier, cfg)
        assert rep.converged and rep.final_rel_residual <= 1e-3
        reference = solve_image(prob, "mg-oras", MultigridConfig(
            solver=SolverConfig(tol_rel=1e-10))).fields[0]
        u_oras, _ = oras_solve(prob, cfg=cfg.solver)
        assert compute_metrics(u_mg, reference).mse < compute_metrics(u_oras, reference).mse

    def test_fine_unit_accounting(self):
        prob = seeded_problem(128, 128, 0.05, 1)
        cfg = MultigridConfig()
        _, rep = fmg_solve(build_hierarchy(prob, cfg), cfg)
        assert rep.fine_smoother_iterations == (cfg.nu_pre + cfg.nu_post) * rep.iterations

    def test_interpolation_exact_after_every_cycle(self):
        prob = seeded_problem(96, 96, 0.03, 2)
        cfg = MultigridConfig(solver=SolverConfig(tol_rel=1e-6))
        f = prob.known[0]

        def check(u):
            np.testing.assert_array_equal(u[prob.mask], f[prob.mask])

        u, rep = fmg_solve(build_hierarchy(prob, cfg), cfg, callback=check)
        assert rep.iterations >= 1
        check(u)

    def test_multilevel_mode_interpolation_and_convergence(self):
        prob = seeded_problem(96, 96, 0.03, 3)
        cfg = MultigridConfig(mode="multilevel", solver=SolverConfig(tol_rel=1e-6))
        f = prob.known[0]

        def check(u):
            np.testing.assert_array_equal(u[prob.mask], f[prob.mask])

        u, rep = fmg_solve(build_hierarchy(prob, cfg), cfg, callback=check)
        assert rep.converged
        check(u)

    @pytest.mark.parametrize("name", ["ml-cg", "ml-oras", "mg-cg", "mg-oras"])
    def test_pipelines_match_oracle(self, name):
        prob = seeded_problem(64, 64, 0.1, 3)
        cfg = MultigridConfig(solver=SolverConfig(tol_rel=1e-8))
        res = solve_image(prob, name, cfg)
        assert res.converged
        assert compute_metrics(res.fields[0], oracle_solve(prob)).mse <= 1e-10

    def test_cascadic_init_respects_interpolation(self):
        prob = seeded_problem(128, 128, 0.05, 4)
        cfg = MultigridConfig()
        hier = build_hierarchy(prob, cfg)
        u0 = cascadic_init(hier, cfg)
        np.testing.assert_array_equal(u0[prob.mask], prob.known[0][prob.mask])


class TestLeakage:
    def test_modified_downsampling_bleeds_less(self):
        truth = step_edge_image(256, 256, 85)
        mask = edge_concentrated_mask(256, 256, 85, background_density=0.01, seed=0)
        prob = InpaintingProblem(mask, truth)
        mses = {}
        for variant in ("naive", "modified"):
            cfg = MultigridConfig(mode="multilevel", value_downsampling=variant)
            res = solve_image(prob, "ml-oras", cfg)
            mses[variant] = compute_metrics(res.fields[0], truth).mse
        assert mses["modified"] < mses["naive"]


class TestConfigValidation:
    @pytest.mark.parametrize("kwargs", [
        {"nu_pre": 0, "nu_post": 0},
        {"smoother": "jacobi"},
        {"mode": "wcycle"},
        {"value_downsampling": "median"},
    ])
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ValueError):
            MultigridConfig(**kwargs)
