"""Level hierarchies, inter-grid transfers, V-cycles, and full multigrid.

The Schwarz iteration only communicates between neighboring blocks, so it
damps high-frequency error quickly but low frequencies slowly. Transferring
the problem to coarser grids makes the low frequencies cheap again. Because
the Dirichlet set here is a scattered pixel mask rather than a rectangle, the
transfers adapt to it:

* masks coarsen by 2x2 max pooling (any known constituent makes the coarse
  pixel known),
* known values coarsen either by plain cell averaging ("naive") or by a
  weighting that suppresses pixels whose four direct neighbors are known
  ("modified") - the latter prevents values from leaking across mask barriers
  that the pooling destroyed,
* residuals restrict by cell averaging and are pinned to zero at coarse mask
  pixels,
* corrections/solutions prolongate by cell-centered bilinear interpolation
  (weights 9/16, 3/16, 3/16, 1/16) and are overwritten at fine mask pixels
  (zero for corrections, the known value for solutions).

Grid spacing doubles per level, so each level's operator is the plain
discretization of the same continuous problem on its own grid and the
transfers need no extra scaling.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .core import EmptyMaskError, InpaintingProblem, StencilOperator
from .partition import BlockPartition, BlockWeights, build_partition, build_weights
from .solvers import (
    BlockSolver,
    SolveReport,
    SolverConfig,
    _cg_run,
    oras_sweeps,
    worker_count,
)

SMOOTHERS = ("oras", "cg")
MODES = ("multilevel", "full_multigrid")
DOWNSAMPLINGS = ("naive", "modified")


@dataclass(frozen=True)
class MultigridConfig:
    """Cycle shape, smoother choice, transfer options, and block geometry.

    nu_pre / nu_post are smoothing iterations around each coarse correction;
    one smoothing iteration is one Schwarz sweep or ``solver.smoother_cg_iters``
    CG steps. mode "full_multigrid" runs the reduced scheme (coarse-to-fine
    initialization with a single smoothing per intermediate level, then
    V-cycles on the finest level); mode "multilevel" is the one-way/cascadic
    variant that smooths each level to tolerance and never cycles back.
    """

    nu_pre: int = 1
    nu_post: int = 1
    v_cycles_max: int = 100
    smoother: str = "oras"
    value_downsampling: str = "modified"
    mode: str = "full_multigrid"
    block_size: int = 32
    overlap: int = 6
    coarse_tol: float = 1e-8
    coarse_max_iters: int = 20_000
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if self.nu_pre + self.nu_post < 1:
            raise ValueError("need at least one smoothing iteration per cycle")
        if self.smoother not in SMOOTHERS:
            raise ValueError(f"unknown smoother {self.smoother!r}")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.value_downsampling not in DOWNSAMPLINGS:
            raise ValueError(f"unknown value downsampling {self.value_downsampling!r}")


def _pad_even(a: np.ndarray, fill) -> np.ndarray:
    ph, pw = a.shape[0] % 2, a.shape[1] % 2
    if ph or pw:
        a = np.pad(a, ((0, ph), (0, pw)), constant_values=fill)
    return a


def _cell_sum(a: np.ndarray) -> np.ndarray:
    """Sum over the (up to) 2x2 fine constituents of every coarse cell."""
    p = _pad_even(np.asarray(a, dtype=np.float64), 0.0)
    return p.reshape(p.shape[0] // 2, 2, p.shape[1] // 2, 2).sum(axis=(1, 3))


def downsample_mask(fine: np.ndarray) -> np.ndarray:
    """Max pooling: a coarse pixel is known iff any of its constituents is."""
    p = _pad_even(fine, False)
    return p.reshape(p.shape[0] // 2, 2, p.shape[1] // 2, 2).any(axis=(1, 3))


def downsample_values_naive(fine_mask: np.ndarray, fine_rhs: np.ndarray) -> np.ndarray:
    """Average the known values inside each 2x2 cell; 0 where none are known."""
    c = fine_mask.astype(np.float64)
    num = _cell_sum(c * fine_rhs)
    den = _cell_sum(c)
    return num / np.maximum(1.0, den)


def downsample_values_modified(
    fine_mask: np.ndarray, coarse_mask: np.ndarray, fine_rhs: np.ndarray
) -> np.ndarray:
    """Neighbor-suppressed averaging of the known values.

    Every fine known pixel enters its cell's average with weight
    4 - (number of known direct neighbors), where neighbors inside the cell
    are read from the fine mask and neighbors outside from the adjacent
    coarse pixel; neighbors beyond the image count as unknown. A pixel fully
    enclosed by known pixels is suppressed entirely - its influence cannot
    escape on the fine grid, so it must not tint the coarse value. Cells that
    are known on the coarse grid but end up with zero total weight fall back
    to the plain average.
    """
    h, w = fine_mask.shape
    cm = fine_mask.astype(np.float64)
    up = np.repeat(np.repeat(coarse_mask, 2, axis=0), 2, axis=1)[:h, :w].astype(np.float64)

    odd_x = (np.arange(w) % 2).astype(bool)
    odd_y = (np.arange(h) % 2).astype(bool)
    n = np.zeros((h, w))
    # left neighbor is in-cell iff x is odd, analogous for the other sides
    n[:, 1:] += np.where(odd_x[None, 1:], cm[:, :-1], up[:, :-1])
    n[:, :-1] += np.where(~odd_x[None, :-1], cm[:, 1:], up[:, 1:])
    n[1:, :] += np.where(odd_y[1:, None], cm[:-1, :], up[:-1, :])
    n[:-1, :] += np.where(~odd_y[:-1, None], cm[1:, :], up[1:, :])

    wgt = cm * (4.0 - n)
    num = _cell_sum(wgt * fine_rhs)
    den = _cell_sum(wgt)
    out = num / np.maximum(1.0, den)
    suppressed = coarse_mask & (den == 0.0)
    if np.any(suppressed):
        out = np.where(suppressed, downsample_values_naive(fine_mask, fine_rhs), out)
    return np.where(coarse_mask, out, 0.0)


def restrict_residual(fine_r: np.ndarray, coarse_mask: np.ndarray) -> np.ndarray:
    """Cell-average the residual; coarse mask pixels are identity rows with zero defect."""
    counts = _cell_sum(np.ones_like(fine_r))
    out = _cell_sum(fine_r) / counts
    out[coarse_mask] = 0.0
    return out


def _prolongate(coarse: np.ndarray, fine_shape: tuple[int, int]) -> np.ndarray:
    """Cell-centered bilinear interpolation with constant extrapolation at borders."""
    hf, wf = fine_shape
    hc, wc = coarse.shape
    if (hc, wc) != (-(-hf // 2), -(-wf // 2)):
        raise ValueError(f"coarse shape {coarse.shape} does not halve fine shape {fine_shape}")
    xs = np.arange(wf)
    ys = np.arange(hf)
    near_x = xs // 2
    far_x = np.clip(np.where(xs % 2 == 1, near_x + 1, near_x - 1), 0, wc - 1)
    near_y = ys // 2
    far_y = np.clip(np.where(ys % 2 == 1, near_y + 1, near_y - 1), 0, hc - 1)
    rows = 0.75 * coarse[:, near_x] + 0.25 * coarse[:, far_x]  # (hc, wf)
    return 0.75 * rows[near_y, :] + 0.25 * rows[far_y, :]


def prolongate_correction(coarse_e: np.ndarray, fine_mask: np.ndarray) -> np.ndarray:
    """Interpolate an error correction; zero at fine mask pixels (their defect is zero)."""
    e = _prolongate(coarse_e, fine_mask.shape)
    e[fine_mask] = 0.0
    return e


def prolongate_solution(
    coarse_u: np.ndarray, fine_mask: np.ndarray, fine_rhs: np.ndarray
) -> np.ndarray:
    """Interpolate a solution; fine mask pixels take their known values exactly."""
    u = _prolongate(coarse_u, fine_mask.shape)
    np.copyto(u, fine_rhs, where=fine_mask)
    return u


class Level:
    """One resolution level: mask, per-channel known data, and solver context."""

    def __init__(
        self,
        mask: np.ndarray,
        rhs: np.ndarray,
        spacing: float,
        block_size: int,
        overlap: int,
    ):
        self.mask = mask
        self.rhs = rhs  # (channels, h, w)
        self.spacing = spacing
        self.op = StencilOperator(mask, spacing)
        h, w = mask.shape
        self.part: BlockPartition = build_partition(w, h, block_size, overlap)
        self.weights: BlockWeights = build_weights(self.part)
        self._block_solver: tuple[float, BlockSolver] | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.mask.shape

    def block_solver(self, alpha: float) -> BlockSolver:
        if self._block_solver is None or self._block_solver[0] != alpha:
            self._block_solver = (
                alpha,
                BlockSolver(self.mask, self.spacing, self.part, self.weights, alpha),
            )
        return self._block_solver[1]

    def flat_init(self, channel: int) -> np.ndarray:
        return self.rhs[channel].copy()


@dataclass
class LevelHierarchy:
    """Fine-to-coarse sequence of levels; levels[0] is the input problem."""

    levels: list[Level]
    value_downsampling: str

    def __len__(self) -> int:
        return len(self.levels)


def build_hierarchy(
    problem: InpaintingProblem, cfg: MultigridConfig | None = None
) -> LevelHierarchy:
    """Repeatedly halve the problem until both dimensions fit one block.

    Masks coarsen by max pooling; known values by the configured averaging,
    level by level; spacing doubles per level.
    """
    cfg = cfg or MultigridConfig()
    mask = problem.mask
    rhs = np.stack([problem.rhs(c) for c in range(problem.channels)])
    spacing = problem.spacing
    levels = [Level(mask, rhs, spacing, cfg.block_size, cfg.overlap)]
    while max(mask.shape) > cfg.block_size:
        coarse_mask = downsample_mask(mask)
        if cfg.value_downsampling == "modified":
            coarse_rhs = np.stack(
                [downsample_values_modified(mask, coarse_mask, rhs[c]) for c in range(rhs.shape[0])]
            )
        else:
            coarse_rhs = np.stack(
                [downsample_values_naive(mask, rhs[c]) for c in range(rhs.shape[0])]
            )
        mask, rhs, spacing = coarse_mask, coarse_rhs, spacing * 2.0
        levels.append(Level(mask, rhs, spacing, cfg.block_size, cfg.overlap))
    return LevelHierarchy(levels=levels, value_downsampling=cfg.value_downsampling)


def _smooth(level: Level, u: np.ndarray, rhs: np.ndarray, units: int, cfg: MultigridConfig) -> int:
    """Run `units` smoothing iterations in place; returns units actually used."""
    if units <= 0:
        return 0
    scfg = cfg.solver
    if cfg.smoother == "oras":
        blocks = level.block_solver(scfg.alpha)
        cap = scfg.local_max_iters or 4 * level.part.block_h * level.part.block_w
        sweeps, _ = oras_sweeps(
            level.op, blocks, rhs, u,
            max_sweeps=units, stop_norm=0.0, eta=scfg.local_tol_fraction,
            local_max_iters=cap, workers=worker_count(),
        )
        return sweeps
    steps, _ = _cg_run(level.op.apply, rhs, u, max_steps=units * scfg.smoother_cg_iters)
    return -(-steps // scfg.smoother_cg_iters)


def _smooth_to_tol(
    level: Level,
    u: np.ndarray,
    rhs: np.ndarray,
    tol: float,
    max_units: int,
    cfg: MultigridConfig,
    denom: float | None = None,
    on_state=None,
) -> tuple[int, float]:
    """Smoother iterations until ||rhs - A u|| <= tol * denom.

    denom defaults to the initial residual norm. Returns (smoother units
    consumed, final relative norm); for the CG smoother one unit is one CG
    step here, so unit counts of the two smoothers stay comparable per
    residual evaluation.
    """
    scfg = cfg.solver
    if denom is None or denom == 0.0:
        denom = float(np.linalg.norm(rhs - level.op.apply(u)))
    if denom == 0.0:
        return 0, 0.0
    stop = tol * denom
    if cfg.smoother == "oras":
        blocks = level.block_solver(scfg.alpha)
        cap = scfg.local_max_iters or 4 * level.part.block_h * level.part.block_w

        def hook(uu, rn, sweeps):
            if on_state is not None:
                on_state(uu, rn / denom, sweeps)

        units, rn = oras_sweeps(
            level.op, blocks, rhs, u,
            max_sweeps=max_units, stop_norm=stop, eta=scfg.local_tol_fraction,
            local_max_iters=cap, workers=worker_count(), on_state=hook,
        )
    else:
        done = 0

        def on_step(uu, rn):
            nonlocal done
            done += 1
            if on_state is not None:
                on_state(uu, rn / denom, done)

        if on_state is not None:
            on_state(u, float(np.linalg.norm(rhs - level.op.apply(u))) / denom, 0)
        units, rn = _cg_run(
            level.op.apply, rhs, u, max_steps=max_units, stop_norm=stop, on_step=on_step
        )
    return units, rn / denom


def v_cycle(
    hier: LevelHierarchy,
    level: int,
    u: np.ndarray,
    rhs: np.ndarray,
    cfg: MultigridConfig,
    counters: dict | None = None,
) -> np.ndarray:
    """One V-cycle at `level` for the system with right-hand side `rhs` (in place).

    Pre-smooth, restrict the residual, correct from the coarser level
    (recursively, or by an effectively exact smoother solve on the coarsest
    level), prolongate-and-add, post-smooth.
    """
    levels = hier.levels
    lev = levels[level]
    if level == len(levels) - 1:
        used = _smooth(lev, u, rhs, cfg.nu_pre + cfg.nu_post, cfg)
        if counters is not None and level == 0:
            counters["fine_units"] += used
        return u

    used = _smooth(lev, u, rhs, cfg.nu_pre, cfg)
    r = lev.op.residual(rhs, u)
    coarse = levels[level + 1]
    r_coarse = restrict_residual(r, coarse.mask)
    e = np.zeros_like(r_coarse)
    if level + 1 == len(levels) - 1:
        tol = min(cfg.coarse_tol, cfg.solver.tol_rel)
        _smooth_to_tol(coarse, e, r_coarse, tol, cfg.coarse_max_iters, cfg)
    else:
        v_cycle(hier, level + 1, e, r_coarse, cfg, counters)
    u += prolongate_correction(e, lev.mask)
    used += _smooth(lev, u, rhs, cfg.nu_post, cfg)
    if counters is not None and level == 0:
        counters["fine_units"] += used
    return u


def cascadic_init(
    hier: LevelHierarchy, cfg: MultigridConfig | None = None, channel: int = 0
) -> np.ndarray:
    """Coarse-to-fine initial guess of the reduced full multigrid scheme.

    Solves the coarsest level to the strict coarse tolerance from the flat
    initialization, then repeatedly prolongates and applies one smoothing
    iteration per intermediate level. No smoothing happens on the finest
    level; that is the V-cycles' job.
    """
    cfg = cfg or MultigridConfig()
    u, _ = _cascade(hier, cfg, channel, to_tol=False)
    return u


def _cascade(
    hier: LevelHierarchy, cfg: MultigridConfig, channel: int, to_tol: bool, on_fine_state=None
) -> tuple[np.ndarray, dict]:
    levels = hier.levels
    stats = {"fine_units": 0, "last_rel": math.inf}
    coarsest = levels[-1]
    b = coarsest.rhs[channel]
    u = coarsest.flat_init(channel)
    tol = min(cfg.coarse_tol, cfg.solver.tol_rel)
    hook = on_fine_state if len(levels) == 1 else None
    units, rel = _smooth_to_tol(
        coarsest, u, b, tol, cfg.coarse_max_iters, cfg, on_state=hook
    )
    if len(levels) == 1:
        stats["fine_units"] += units
        stats["last_rel"] = rel
        return u, stats

    for l in range(len(levels) - 2, -1, -1):
        lev = levels[l]
        b = lev.rhs[channel]
        u = prolongate_solution(u, lev.mask, b)
        if to_tol:
            base = float(np.linalg.norm(b - lev.op.apply(lev.flat_init(channel))))
            units, rel = _smooth_to_tol(
                lev, u, b, cfg.solver.tol_rel, cfg.solver.max_outer_iters, cfg,
                denom=base, on_state=on_fine_state if l == 0 else None,
            )
            if l == 0:
                stats["fine_units"] += units
                stats["last_rel"] = rel
        elif l > 0:
            _smooth(lev, u, b, 1, cfg)
    return u, stats


def fmg_solve(
    hier: LevelHierarchy,
    cfg: MultigridConfig | None = None,
    channel: int = 0,
    callback=None,
) -> tuple[np.ndarray, SolveReport]:
    """Full-multigrid (or cascadic multilevel) solve of one channel.

    Both modes build the coarse-to-fine initialization; "full_multigrid" then
    iterates V-cycles on the finest level until the relative residual (against
    the flat-initialization baseline) reaches cfg.solver.tol_rel,
    "multilevel" instead smooths every level to that tolerance on the way up.
    The report's `iterations` counts V-cycles (or finest smoother units in
    multilevel mode).
    """
    cfg = cfg or MultigridConfig()
    finest = hier.levels[0]
    if not finest.mask.any():
        raise EmptyMaskError("cannot solve without known pixels")
    t0 = time.perf_counter()
    b = finest.rhs[channel]
    baseline = float(np.linalg.norm(b - finest.op.apply(finest.flat_init(channel))))
    name = ("ml-" if cfg.mode == "multilevel" else "mg-") + cfg.smoother

    if cfg.mode == "multilevel":
        history: list[float] = []

        def on_fine_state(uu, rel_now, iters_done):
            history.append(rel_now)
            if callback is not None and iters_done > 0:
                callback(uu)

        u, stats = _cascade(hier, cfg, channel, to_tol=True, on_fine_state=on_fine_state)
        rel = stats["last_rel"]
        return u, SolveReport(
            solver=name, iterations=stats["fine_units"], final_rel_residual=rel,
            wall_time=time.perf_counter() - t0, history=history or [rel],
            converged=rel <= cfg.solver.tol_rel, baseline_residual=baseline,
            init_residual=baseline, fine_smoother_iterations=stats["fine_units"],
        )

    u, stats = _cascade(hier, cfg, channel, to_tol=False)
    counters = {"fine_units": stats["fine_units"]}
    denom = baseline if baseline > 0.0 else None
    rn = float(np.linalg.norm(b - finest.op.apply(u)))
    denom = denom or (rn if rn > 0.0 else 1.0)
    rel = rn / denom
    history = [rel]
    cycles = 0
    while rel > cfg.solver.tol_rel and cycles < cfg.v_cycles_max:
        v_cycle(hier, 0, u, b, cfg, counters)
        cycles += 1
        rn = float(np.linalg.norm(b - finest.op.apply(u)))
        rel = rn / denom
        history.append(rel)
        if callback is not None:
            callback(u)
    return u, SolveReport(
        solver=name, iterations=cycles, final_rel_residual=rel,
        wall_time=time.perf_counter() - t0, history=history,
        converged=rel <= cfg.solver.tol_rel, baseline_residual=baseline,
        init_residual=baseline, fine_smoother_iterations=counters["fine_units"],
    )
