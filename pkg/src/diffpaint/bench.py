"""Benchmark suites: convergence, quality, and scaling studies at desk scale.

Each suite produces rows for the fixed CSV schema in :mod:`.fileio`. Masks are
generated per (density, seed), so identical flags and seeds give identical
rows except for the wall-time column.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .core import InpaintingProblem, compute_metrics
from .masks import edge_concentrated_mask, random_mask, step_edge_image, synthetic_image
from .multigrid import MultigridConfig
from .oracle import MAX_PIXELS
from .oracle import solve as oracle_solve
from .pipelines import SOLVER_NAMES, solve_image

DENSITY_SWEEP = (0.005, 0.01, 0.02, 0.03, 0.04, 0.05, 0.10)
RESOLUTION_SWEEP = ((240, 135), (480, 270), (960, 540), (1920, 1080))
ALPHA_SWEEP = (0.1, 0.2, 0.5, 1.0, 2.0, 5.0)
REFERENCE_TOL = 1e-10


def _with_tol(cfg: MultigridConfig, tol: float) -> MultigridConfig:
    return replace(cfg, solver=replace(cfg.solver, tol_rel=tol))


def converged_reference(problem: InpaintingProblem, cfg: MultigridConfig) -> np.ndarray:
    """Tightly converged solution (channels, h, w) to measure approximation error against."""
    return solve_image(problem, "mg-oras", _with_tol(cfg, REFERENCE_TOL)).fields


def _row(problem, solver, cfg, density, seed, reference=None, alpha=None, label=None):
    result = solve_image(problem, solver, cfg)
    h, w = problem.shape
    row = {
        "solver": label or solver,
        "width": w,
        "height": h,
        "density": density,
        "seed": seed,
        "alpha": alpha if alpha is not None else cfg.solver.alpha,
        "tol": cfg.solver.tol_rel,
        "iterations": result.iterations,
        "rel_residual": result.final_rel_residual,
        "mse_vs_reference": None,
        "psnr": None,
        "wall_time_s": result.elapsed,
    }
    if reference is not None:
        m = compute_metrics(result.fields, reference)
        row["mse_vs_reference"] = m.mse
        row["psnr"] = m.psnr
    return row


def density_suite(
    channel_stacks: list[np.ndarray],
    cfg: MultigridConfig,
    densities=DENSITY_SWEEP,
    seeds=(0,),
    solvers=SOLVER_NAMES,
    with_reference: bool = True,
) -> list[dict]:
    """Sweep mask densities on the given images, all solvers at one tolerance."""
    rows = []
    for stack in channel_stacks:
        h, w = stack.shape[1:]
        for density in densities:
            for seed in seeds:
                mask = random_mask(w, h, density, seed)
                problem = InpaintingProblem(mask, stack)
                ref = converged_reference(problem, cfg) if with_reference else None
                for solver in solvers:
                    rows.append(_row(problem, solver, cfg, density, seed, ref))
    return rows


def resolution_suite(
    cfg: MultigridConfig,
    sizes=RESOLUTION_SWEEP,
    density: float = 0.05,
    seeds=(0,),
    solvers=SOLVER_NAMES,
    image_seed: int = 0,
) -> list[dict]:
    """Sweep image sizes at fixed density on synthetic images (runtime scaling)."""
    rows = []
    for w, h in sizes:
        stack = synthetic_image(w, h, image_seed)[None, :, :]
        for seed in seeds:
            mask = random_mask(w, h, density, seed)
            problem = InpaintingProblem(mask, stack)
            for solver in solvers:
                rows.append(_row(problem, solver, cfg, density, seed))
    return rows


def alpha_suite(
    channel_stack: np.ndarray,
    cfg: MultigridConfig,
    density: float = 0.05,
    seeds=(0,),
    alphas=ALPHA_SWEEP,
    solvers=("oras", "mg-oras"),
) -> list[dict]:
    """Sweep the Robin weight for the Schwarz-based solvers."""
    h, w = channel_stack.shape[1:]
    rows = []
    for seed in seeds:
        mask = random_mask(w, h, density, seed)
        problem = InpaintingProblem(mask, channel_stack)
        for alpha in alphas:
            acfg = replace(cfg, solver=replace(cfg.solver, alpha=alpha))
            for solver in solvers:
                rows.append(_row(problem, solver, acfg, density, seed, alpha=alpha))
    return rows


def downsampling_suite(
    cfg: MultigridConfig,
    size: tuple[int, int] = (256, 256),
    edge_x: int = 85,
    seeds=(0,),
    background_density: float = 0.01,
) -> list[dict]:
    """Cascadic reconstruction of a step edge: naive vs modified value coarsening.

    The reported MSE is against the ground-truth two-region image, so the
    values leaking across the edge in the naive variant show up directly.
    """
    w, h = size
    truth = step_edge_image(w, h, edge_x)
    rows = []
    for seed in seeds:
        mask = edge_concentrated_mask(w, h, edge_x, background_density, seed)
        problem = InpaintingProblem(mask, truth[None, :, :])
        density = float(np.count_nonzero(mask)) / mask.size
        for variant in ("naive", "modified"):
            vcfg = replace(cfg, value_downsampling=variant)
            label = f"ml-{cfg.smoother}+{variant}"
            rows.append(
                _row(problem, f"ml-{cfg.smoother}", vcfg, density, seed,
                     reference=truth[None, :, :], label=label)
            )
    return rows


def compare_rows(
    problem: InpaintingProblem,
    cfg: MultigridConfig,
    density: float | None = None,
    seed: int = 0,
    solvers=SOLVER_NAMES,
) -> list[dict]:
    """Every solver against a converged (or dense, when small) reference, ranked."""
    h, w = problem.shape
    if density is None:
        density = float(np.count_nonzero(problem.mask)) / problem.mask.size
    if h * w <= MAX_PIXELS:
        reference = np.stack([oracle_solve(problem, c) for c in range(problem.channels)])
    else:
        reference = converged_reference(problem, cfg)
    rows = [_row(problem, solver, cfg, density, seed, reference) for solver in solvers]
    rows.sort(key=lambda r: r["mse_vs_reference"])
    return rows


def loglog_slope(sizes_pixels, times) -> float:
    """Least-squares slope of log(time) against log(pixel count)."""
    return float(np.polyfit(np.log(np.asarray(sizes_pixels, dtype=float)),
                            np.log(np.asarray(times, dtype=float)), 1)[0])
