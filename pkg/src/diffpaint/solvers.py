"""Global conjugate gradient and the optimized restricted additive Schwarz iteration.

Both solvers operate matrix-free on the full grid. Because the system rows at
mask pixels are the identity and every iterate keeps exactly the known values
there, all search directions vanish on the mask pixels and CG effectively runs
on the reduced symmetric positive-definite system of the unknowns.

The Schwarz iteration (ORAS) sweeps over overlapping blocks: it restricts the
global residual to each block, solves a local system with Robin conditions at
inner block boundaries, and accumulates the corrections blended by the
partition-of-unity weights. It is used directly as an iteration, not as a
preconditioner. Local block solves are batched across the whole partition so
one sweep is a handful of vectorized array operations; a single global
reduction (the residual norm) happens per sweep.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import EmptyMaskError, InpaintingProblem, StencilOperator, as_field, neighbor_counts
from .partition import BlockPartition, BlockRect, BlockWeights, build_partition, build_weights


def worker_count() -> int:
    """Worker cap from INPAINT_THREADS: unset -> 1, 0 -> auto, k -> min(k, cpus)."""
    raw = os.environ.get("INPAINT_THREADS", "").strip()
    if not raw:
        return 1
    n = int(raw)
    if n < 0:
        raise ValueError(f"INPAINT_THREADS must be >= 0, got {n}")
    cpus = os.cpu_count() or 1
    return cpus if n == 0 else min(n, cpus)


@dataclass(frozen=True)
class SolverConfig:
    """Numeric knobs shared by all solver pipelines.

    tol_rel               relative residual stopping threshold
    max_outer_iters       cap on CG steps / Schwarz sweeps
    alpha                 Robin weight at inner block boundaries
    local_tol_fraction    a block's CG stops once its squared residual norm
                          falls to this fraction of the squared global one
    local_max_iters       cap on local CG steps (None: 4 * block area)
    smoother_cg_iters     CG steps that make up one CG smoothing iteration
    """

    tol_rel: float = 1e-3
    max_outer_iters: int = 10_000
    alpha: float = 0.5
    local_tol_fraction: float = 1e-5
    local_max_iters: int | None = None
    smoother_cg_iters: int = 10

    def __post_init__(self):
        if not 0.0 < self.tol_rel < 1.0:
            raise ValueError(f"tol_rel must be in (0, 1), got {self.tol_rel}")
        if self.alpha <= 0.0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.local_tol_fraction <= 0.0:
            raise ValueError(f"local_tol_fraction must be positive, got {self.local_tol_fraction}")


@dataclass
class SolveReport:
    """Outcome of one solver run on one channel.

    ``history`` records the global relative residual norm before any work and
    after every outer iteration, relative to the stopping denominator.
    ``baseline_residual`` is the defect norm of the flat initialization
    (known values at the mask, zero elsewhere), recorded so runs started from
    different initial guesses stay comparable; ``init_residual`` is the defect
    norm of the actual start. ``fine_smoother_iterations`` counts smoothing
    work spent on the finest level (equals ``iterations`` for the single-level
    solvers).
    """

    solver: str
    iterations: int
    final_rel_residual: float
    wall_time: float
    history: list[float] = field(default_factory=list)
    converged: bool = True
    baseline_residual: float = 0.0
    init_residual: float = 0.0
    fine_smoother_iterations: int = 0


def _cg_run(apply_op, b, u, *, max_steps, stop_norm=0.0, on_step=None):
    """Plain CG, mutating u in place; returns (steps, final residual norm).

    Assumes b - A u vanishes at identity rows (enforced by the callers), so
    every search direction stays in the reduced SPD subspace. Stops when the
    residual norm reaches stop_norm, on max_steps, or on breakdown.
    """
    r = b - apply_op(u)
    rs = float(np.vdot(r, r))
    if rs == 0.0 or math.sqrt(rs) <= stop_norm:
        return 0, math.sqrt(rs)
    p = r.copy()
    steps = 0
    while steps < max_steps:
        q = apply_op(p)
        pq = float(np.vdot(p, q))
        if pq <= 0.0:
            break
        alpha = rs / pq
        u += alpha * p
        r -= alpha * q
        rs_new = float(np.vdot(r, r))
        steps += 1
        if on_step is not None:
            on_step(u, math.sqrt(rs_new))
        if rs_new == 0.0 or math.sqrt(rs_new) <= stop_norm:
            rs = rs_new
            break
        p *= rs_new / rs
        p += r
        rs = rs_new
    return steps, math.sqrt(rs)


def _prepare_start(problem: InpaintingProblem, channel: int, init) -> np.ndarray:
    """Copy of the initial guess with the interpolation condition enforced exactly."""
    u = problem.flat_init(channel) if init is None else as_field(init).copy()
    if u.shape != problem.shape:
        raise ValueError(f"init shape {u.shape} does not match problem shape {problem.shape}")
    np.copyto(u, problem.known[channel], where=problem.mask)
    return u


def cg_solve(
    problem: InpaintingProblem,
    channel: int = 0,
    init: np.ndarray | None = None,
    cfg: SolverConfig | None = None,
    callback=None,
) -> tuple[np.ndarray, SolveReport]:
    """Conjugate gradient on the reduced SPD system of one channel.

    Stops when ||r|| / ||r0|| <= cfg.tol_rel where r0 is the residual of the
    supplied init (the flat initialization when init is None). Mask pixels of
    the output equal the known values exactly.
    """
    cfg = cfg or SolverConfig()
    if not problem.mask.any():
        raise EmptyMaskError("cannot solve without known pixels")
    op = problem.operator()
    b = problem.rhs(channel)
    u = _prepare_start(problem, channel, init)

    t0 = time.perf_counter()
    r0 = float(np.linalg.norm(b - op.apply(u)))
    baseline = r0 if init is None else float(np.linalg.norm(b - op.apply(problem.flat_init(channel))))
    if r0 == 0.0:
        return u, SolveReport(
            solver="cg", iterations=0, final_rel_residual=0.0,
            wall_time=time.perf_counter() - t0, history=[0.0], converged=True,
            baseline_residual=baseline, init_residual=r0, fine_smoother_iterations=0,
        )

    history = [1.0]

    def on_step(uu, rn):
        history.append(rn / r0)
        if callback is not None:
            callback(uu)

    steps, rn = _cg_run(
        op.apply, b, u, max_steps=cfg.max_outer_iters,
        stop_norm=cfg.tol_rel * r0, on_step=on_step,
    )
    rel = rn / r0
    return u, SolveReport(
        solver="cg", iterations=steps, final_rel_residual=rel,
        wall_time=time.perf_counter() - t0, history=history, converged=rel <= cfg.tol_rel,
        baseline_residual=baseline, init_residual=r0, fine_smoother_iterations=steps,
    )


class LocalSystem:
    """Implicit Robin-modified operator for a single block.

    Rows are the identity at local mask pixels. Elsewhere the 5-point stencil
    is restricted to the block: a neighbor cut off by an inner block boundary
    is dropped and contributes alpha/h to the diagonal instead of 1/h^2
    (one-sided ghost elimination of the Robin condition d_n v + alpha v = 0);
    sides on the image border keep the reflecting reduced-diagonal treatment.
    """

    def __init__(self, rect: BlockRect, local_mask: np.ndarray, spacing: float, alpha: float):
        if alpha <= 0.0:
            raise ValueError(f"alpha must be positive, got {alpha}")
        self.rect = rect
        self.mask = local_mask
        self.spacing = float(spacing)
        self.hinv2 = 1.0 / spacing**2
        diag = neighbor_counts(local_mask.shape) * self.hinv2
        robin = alpha / spacing
        if rect.inner_left:
            diag[:, 0] += robin
        if rect.inner_right:
            diag[:, -1] += robin
        if rect.inner_top:
            diag[0, :] += robin
        if rect.inner_bottom:
            diag[-1, :] += robin
        self.diag = diag

    def apply(self, v: np.ndarray) -> np.ndarray:
        s = np.zeros_like(v)
        s[1:, :] += v[:-1, :]
        s[:-1, :] += v[1:, :]
        s[:, 1:] += v[:, :-1]
        s[:, :-1] += v[:, 1:]
        out = self.diag * v
        out -= self.hinv2 * s
        np.copyto(out, v, where=self.mask)
        return out


def build_local_system(
    rect: BlockRect, mask: np.ndarray, spacing: float, alpha: float
) -> LocalSystem:
    """Local Robin operator of one block of a global mask."""
    local_mask = mask[rect.y0 : rect.y0 + rect.h, rect.x0 : rect.x0 + rect.w]
    return LocalSystem(rect, np.ascontiguousarray(local_mask), spacing, alpha)


def local_solve(
    system: LocalSystem,
    local_rhs: np.ndarray,
    target_sq_norm: float,
    local_max_iters: int | None = None,
) -> np.ndarray:
    """CG on one local Robin system until the squared residual reaches the target."""
    if local_max_iters is None:
        local_max_iters = 4 * local_rhs.size
    v = np.where(system.mask, local_rhs, 0.0)
    _cg_run(
        system.apply, local_rhs, v,
        max_steps=local_max_iters, stop_norm=math.sqrt(max(target_sq_norm, 0.0)),
    )
    return v


class BlockSolver:
    """Batched Robin-block solves for every block of a partition.

    Equivalent to running :func:`local_solve` on each block, but the per-block
    CG recurrences are carried as (blocks, block_h, block_w) arrays so a whole
    sweep is a short sequence of vectorized operations. Blocks retire from the
    batch as soon as they reach their target, which keeps the tail cheap. The
    arithmetic of each block never depends on which other blocks are in the
    batch, so results are identical for any chunking or worker count.
    """

    def __init__(
        self,
        mask: np.ndarray,
        spacing: float,
        part: BlockPartition,
        weights: BlockWeights,
        alpha: float,
    ):
        if alpha <= 0.0:
            raise ValueError(f"alpha must be positive, got {alpha}")
        h_img, w_img = mask.shape
        if (w_img, h_img) != (part.width, part.height):
            raise ValueError("partition does not match the mask dimensions")
        bh, bw = part.block_h, part.block_w
        nx, ny = part.nx, part.ny

        rows = part.ys[:, None] + np.arange(bh)[None, :]  # (ny, bh)
        cols = part.xs[:, None] + np.arange(bw)[None, :]  # (nx, bw)
        flat = rows[:, None, :, None] * w_img + cols[None, :, None, :]  # (ny, nx, bh, bw)
        self.flat_idx = np.ascontiguousarray(flat.reshape(-1, bh, bw), dtype=np.intp)
        self.local_mask = mask.ravel()[self.flat_idx]

        self.hinv2 = 1.0 / spacing**2
        diag = np.broadcast_to(
            neighbor_counts((bh, bw)) * self.hinv2, (part.nblocks, bh, bw)
        ).copy()
        robin = alpha / spacing
        diag[np.tile(part.xs > 0, ny), :, 0] += robin
        diag[np.tile(part.xs + bw < w_img, ny), :, -1] += robin
        diag[np.repeat(part.ys > 0, nx), 0, :] += robin
        diag[np.repeat(part.ys + bh < h_img, nx), -1, :] += robin
        self.diag = diag

        self.wy = weights.wy[np.repeat(np.arange(ny), nx)]  # (nblocks, bh)
        self.wx = weights.wx[np.tile(np.arange(nx), ny)]  # (nblocks, bw)
        self.shape = (h_img, w_img)

    def gather(self, r: np.ndarray) -> np.ndarray:
        """Restrict a global field to every block: (nblocks, bh, bw)."""
        return np.ascontiguousarray(r).ravel()[self.flat_idx]

    def scatter_weighted(self, v: np.ndarray) -> np.ndarray:
        """Sum of the weight-blended, zero-extended block fields."""
        wv = v * self.wy[:, :, None]
        wv *= self.wx[:, None, :]
        flat = np.bincount(
            self.flat_idx.ravel(), weights=wv.ravel(), minlength=self.shape[0] * self.shape[1]
        )
        return flat.reshape(self.shape)

    @staticmethod
    def _apply(v, diag, lmask, hinv2):
        s = np.zeros_like(v)
        s[:, 1:, :] += v[:, :-1, :]
        s[:, :-1, :] += v[:, 1:, :]
        s[:, :, 1:] += v[:, :, :-1]
        s[:, :, :-1] += v[:, :, 1:]
        out = diag * v
        out -= hinv2 * s
        np.copyto(out, v, where=lmask)
        return out

    def _solve_range(self, rhs, out, lo, hi, target_sq, max_iters):
        lmask = self.local_mask[lo:hi]
        rhs = rhs[lo:hi]
        v = np.where(lmask, rhs, 0.0)
        r = rhs - self._apply(v, self.diag[lo:hi], lmask, self.hinv2)
        rs = np.einsum("kij,kij->k", r, r)
        out[lo:hi] = v

        work = np.flatnonzero(rs > target_sq)
        if work.size == 0:
            return
        vw = v[work]
        rw = r[work]
        dw = self.diag[lo:hi][work]
        mw = lmask[work]
        rsw = rs[work]
        pw = rw.copy()
        for _ in range(max_iters):
            q = self._apply(pw, dw, mw, self.hinv2)
            pq = np.einsum("kij,kij->k", pw, q)
            ok = pq > 0.0
            alpha = np.zeros_like(rsw)
            np.divide(rsw, pq, out=alpha, where=ok)
            vw += alpha[:, None, None] * pw
            rw -= alpha[:, None, None] * q
            rs_new = np.einsum("kij,kij->k", rw, rw)
            finished = (rs_new <= target_sq) | ~ok
            if finished.any():
                done_ids = work[finished]
                out[lo + done_ids] = vw[finished]
                keep = ~finished
                work = work[keep]
                if work.size == 0:
                    return
                vw, rw, dw, mw, pw = vw[keep], rw[keep], dw[keep], mw[keep], pw[keep]
                beta = rs_new[keep] / rsw[keep]
                rsw = rs_new[keep]
            else:
                beta = rs_new / rsw
                rsw = rs_new
            pw *= beta[:, None, None]
            pw += rw
        out[lo + work] = vw  # iteration cap reached; keep best iterates

    def solve_blocks(
        self, rhs: np.ndarray, target_sq: float, max_iters: int, workers: int = 1
    ) -> np.ndarray:
        """Per-block CG until each block's squared residual norm <= target_sq."""
        nb = rhs.shape[0]
        out = np.empty_like(rhs)
        if workers <= 1 or nb < 4 * workers:
            self._solve_range(rhs, out, 0, nb, target_sq, max_iters)
            return out
        bounds = np.linspace(0, nb, workers + 1).astype(int)
        with ThreadPoolExecutor(max_workers=workers) as ex:
            futures = [
                ex.submit(self._solve_range, rhs, out, lo, hi, target_sq, max_iters)
                for lo, hi in zip(bounds[:-1], bounds[1:])
                if hi > lo
            ]
            for fut in futures:
                fut.result()
        return out


def oras_sweeps(
    op: StencilOperator,
    blocks: BlockSolver,
    b: np.ndarray,
    u: np.ndarray,
    *,
    max_sweeps: int,
    stop_norm: float,
    eta: float,
    local_max_iters: int,
    workers: int = 1,
    on_state=None,
) -> tuple[int, float]:
    """Schwarz sweeps on u (in place) until ||b - A u|| <= stop_norm.

    One sweep: compute the global residual, solve every block's Robin system
    for a correction targeting eta * ||r||^2, add the blended corrections.
    on_state(u, res_norm, sweeps) fires at every residual evaluation, i.e.
    once before any sweep and once after each completed sweep.
    """
    sweeps = 0
    while True:
        r = op.residual(b, u)
        rs = float(np.vdot(r, r))
        rn = math.sqrt(rs)
        if on_state is not None:
            on_state(u, rn, sweeps)
        if rs == 0.0 or rn <= stop_norm or sweeps >= max_sweeps:
            return sweeps, rn
        v = blocks.solve_blocks(blocks.gather(r), eta * rs, local_max_iters, workers)
        u += blocks.scatter_weighted(v)
        sweeps += 1


def oras_solve(
    problem: InpaintingProblem,
    channel: int = 0,
    init: np.ndarray | None = None,
    part: BlockPartition | None = None,
    weights: BlockWeights | None = None,
    cfg: SolverConfig | None = None,
    callback=None,
) -> tuple[np.ndarray, SolveReport]:
    """Optimized restricted additive Schwarz iteration on one channel.

    Used directly as an iteration (not as a preconditioner): each sweep
    restricts the residual to the overlapping blocks, solves the local Robin
    systems, and applies the partition-of-unity-blended corrections. Stopping
    matches :func:`cg_solve`: relative to the supplied init's residual.
    """
    cfg = cfg or SolverConfig()
    if not problem.mask.any():
        raise EmptyMaskError("cannot solve without known pixels")
    if part is None:
        h_img, w_img = problem.shape
        part = build_partition(w_img, h_img)
    if weights is None:
        weights = build_weights(part)
    op = problem.operator()
    b = problem.rhs(channel)
    u = _prepare_start(problem, channel, init)

    t0 = time.perf_counter()
    blocks = BlockSolver(problem.mask, problem.spacing, part, weights, cfg.alpha)
    r0 = float(np.linalg.norm(b - op.apply(u)))
    baseline = r0 if init is None else float(np.linalg.norm(b - op.apply(problem.flat_init(channel))))
    if r0 == 0.0:
        return u, SolveReport(
            solver="oras", iterations=0, final_rel_residual=0.0,
            wall_time=time.perf_counter() - t0, history=[0.0], converged=True,
            baseline_residual=baseline, init_residual=r0, fine_smoother_iterations=0,
        )

    history = []
    local_cap = cfg.local_max_iters or 4 * part.block_h * part.block_w

    def on_state(uu, rn_now, sweeps_done):
        history.append(rn_now / r0)
        if callback is not None and sweeps_done > 0:
            callback(uu)

    sweeps, rn = oras_sweeps(
        op, blocks, b, u,
        max_sweeps=cfg.max_outer_iters, stop_norm=cfg.tol_rel * r0,
        eta=cfg.local_tol_fraction, local_max_iters=local_cap,
        workers=worker_count(), on_state=on_state,
    )
    rel = rn / r0
    return u, SolveReport(
        solver="oras", iterations=sweeps, final_rel_residual=rel,
        wall_time=time.perf_counter() - t0, history=history, converged=rel <= cfg.tol_rel,
        baseline_residual=baseline, init_residual=r0, fine_smoother_iterations=sweeps,
    )
