"""Named solver pipelines: the {cg, oras} x {single, multilevel, multigrid} matrix.

Every pipeline starts from the flat initialization (known values at mask
pixels, zero elsewhere) and stops at the same relative-residual criterion, so
iteration counts, runtimes, and approximation quality are directly comparable
across solvers.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .core import InpaintingProblem
from .multigrid import LevelHierarchy, MultigridConfig, build_hierarchy, fmg_solve
from .solvers import SolveReport, SolverConfig, cg_solve, oras_solve

SOLVER_NAMES = ("cg", "oras", "ml-cg", "ml-oras", "mg-cg", "mg-oras")


def split_solver_name(name: str) -> tuple[str, str]:
    """Map a pipeline name onto (smoother, mode)."""
    if name not in SOLVER_NAMES:
        raise ValueError(f"unknown solver {name!r}, expected one of {SOLVER_NAMES}")
    if "-" in name:
        prefix, base = name.split("-", 1)
        return base, {"ml": "multilevel", "mg": "full_multigrid"}[prefix]
    return name, "single"


def join_solver_name(base: str, mode: str) -> str:
    """Inverse of :func:`split_solver_name`."""
    prefix = {"single": "", "multilevel": "ml-", "full_multigrid": "mg-"}[mode]
    name = prefix + base
    if name not in SOLVER_NAMES:
        raise ValueError(f"no solver for base {base!r} in mode {mode!r}")
    return name


def solve_channel(
    problem: InpaintingProblem,
    name: str,
    cfg: MultigridConfig | None = None,
    channel: int = 0,
    hierarchy: LevelHierarchy | None = None,
    callback=None,
) -> tuple[np.ndarray, SolveReport]:
    """Run one named pipeline on one channel.

    All geometric and numeric knobs live in the MultigridConfig (its embedded
    SolverConfig drives the single-level solvers too). A prebuilt hierarchy
    can be shared across channels.
    """
    cfg = cfg or MultigridConfig()
    base, mode = split_solver_name(name)
    if mode == "single":
        if base == "cg":
            return cg_solve(problem, channel, cfg=cfg.solver, callback=callback)
        h, w = problem.shape
        from .partition import build_partition, build_weights

        part = build_partition(w, h, cfg.block_size, cfg.overlap)
        return oras_solve(
            problem, channel, part=part, weights=build_weights(part),
            cfg=cfg.solver, callback=callback,
        )
    cfg = replace(cfg, smoother=base, mode=mode)
    if hierarchy is None:
        hierarchy = build_hierarchy(problem, cfg)
    return fmg_solve(hierarchy, cfg, channel, callback=callback)


@dataclass
class SolveResult:
    """All channels of one pipeline run plus bookkeeping for benchmarks."""

    fields: np.ndarray  # (channels, h, w)
    reports: list[SolveReport]
    elapsed: float  # of the whole solve path, hierarchy construction included

    @property
    def converged(self) -> bool:
        return all(r.converged for r in self.reports)

    @property
    def iterations(self) -> int:
        return max(r.iterations for r in self.reports)

    @property
    def final_rel_residual(self) -> float:
        return max(r.final_rel_residual for r in self.reports)


def solve_image(
    problem: InpaintingProblem, name: str, cfg: MultigridConfig | None = None
) -> SolveResult:
    """Run one named pipeline on every channel of a problem."""
    cfg = cfg or MultigridConfig()
    base, mode = split_solver_name(name)
    t0 = time.perf_counter()
    hierarchy = None
    if mode != "single":
        hierarchy = build_hierarchy(problem, replace(cfg, smoother=base, mode=mode))
    outs = []
    reports = []
    for c in range(problem.channels):
        u, rep = solve_channel(problem, name, cfg, channel=c, hierarchy=hierarchy)
        outs.append(u)
        reports.append(rep)
    return SolveResult(
        fields=np.stack(outs), reports=reports, elapsed=time.perf_counter() - t0
    )
