"""Command-line front end: inpaint, gen-mask, bench, compare.

All stochastic paths derive from --seed, so identical flags reproduce
byte-identical outputs (CSV wall-time columns aside). The worker count of the
block solver is capped by the INPAINT_THREADS environment variable
(unset: 1, 0: auto).
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import bench
from .core import InpaintingProblem
from .fileio import ImageFile, image_from_fields, read_mask, read_pnm, write_mask, write_pnm, write_report_csv
from .masks import grid_mask, random_mask, synthetic_image
from .multigrid import MultigridConfig
from .pipelines import SOLVER_NAMES, join_solver_name, solve_image, split_solver_name
from .solvers import SolverConfig

_MODE_FLAG = {"single": "single", "multilevel": "multilevel", "multigrid": "full_multigrid"}


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--solver", default="mg-oras", choices=SOLVER_NAMES,
                   help="solver pipeline (default: mg-oras)")
    p.add_argument("--mode", choices=sorted(_MODE_FLAG),
                   help="override the mode implied by --solver (keeps its smoother)")
    p.add_argument("--tol", type=float, default=1e-3,
                   help="relative residual stopping threshold (default: 1e-3)")
    p.add_argument("--alpha", type=float, default=0.5,
                   help="Robin weight at inner block boundaries (default: 0.5)")
    p.add_argument("--block-size", type=int, default=32, help="block edge length (default: 32)")
    p.add_argument("--overlap", type=int, default=6, help="block overlap in pixels (default: 6)")
    p.add_argument("--eta", type=float, default=1e-5,
                   help="local stop: fraction of the squared global residual norm (default: 1e-5)")
    p.add_argument("--nu-pre", type=int, default=1, help="pre-smoothing iterations (default: 1)")
    p.add_argument("--nu-post", type=int, default=1, help="post-smoothing iterations (default: 1)")
    p.add_argument("--smoother-cg-iters", type=int, default=10,
                   help="CG steps per smoothing iteration for the cg smoother (default: 10)")
    p.add_argument("--downsampling", choices=("naive", "modified"), default="modified",
                   help="known-value coarsening rule (default: modified)")
    p.add_argument("--seed", type=int, default=0, help="seed for all stochastic paths")


def _config(args) -> tuple[str, MultigridConfig]:
    base, mode = split_solver_name(args.solver)
    if args.mode:
        mode = _MODE_FLAG[args.mode]
    name = join_solver_name(base, mode)
    solver_cfg = SolverConfig(
        tol_rel=args.tol,
        alpha=args.alpha,
        local_tol_fraction=args.eta,
        smoother_cg_iters=args.smoother_cg_iters,
    )
    cfg = MultigridConfig(
        nu_pre=args.nu_pre,
        nu_post=args.nu_post,
        smoother=base,
        mode=mode if mode != "single" else "full_multigrid",
        value_downsampling=args.downsampling,
        block_size=args.block_size,
        overlap=args.overlap,
        solver=solver_cfg,
    )
    return name, cfg


def _load_problem(image_path, mask_path) -> tuple[InpaintingProblem, ImageFile]:
    image = read_pnm(image_path)
    mask = read_mask(mask_path)
    if mask.shape != (image.height, image.width):
        raise ValueError(
            f"mask {mask.shape[1]}x{mask.shape[0]} does not match "
            f"image {image.width}x{image.height}"
        )
    return InpaintingProblem(mask, image.channel_fields()), image


def _cmd_inpaint(args) -> int:
    name, cfg = _config(args)
    problem, _ = _load_problem(args.image, args.mask)
    result = solve_image(problem, name, cfg)
    write_pnm(args.out, image_from_fields(result.fields))
    print(
        f"{name}: iterations={result.iterations} "
        f"rel_residual={result.final_rel_residual:.3e} "
        f"wall_time={result.elapsed:.3f}s converged={result.converged}"
    )
    if args.csv:
        h, w = problem.shape
        density = float(np.count_nonzero(problem.mask)) / problem.mask.size
        write_report_csv(args.csv, [{
            "solver": name, "width": w, "height": h, "density": density,
            "seed": args.seed, "alpha": cfg.solver.alpha, "tol": cfg.solver.tol_rel,
            "iterations": result.iterations, "rel_residual": result.final_rel_residual,
            "mse_vs_reference": None, "psnr": None, "wall_time_s": result.elapsed,
        }])
    return 0


def _cmd_gen_mask(args) -> int:
    if args.kind == "random":
        mask = random_mask(args.width, args.height, args.density, args.seed)
    else:
        mask = grid_mask(args.width, args.height, args.density)
    write_mask(args.out, mask)
    print(f"{args.out}: {args.width}x{args.height} {args.kind} mask, "
          f"{int(np.count_nonzero(mask))} known pixels")
    return 0


def _parse_sizes(text: str) -> tuple[tuple[int, int], ...]:
    sizes = []
    for part in text.split(","):
        w, _, h = part.strip().partition("x")
        sizes.append((int(w), int(h)))
    return tuple(sizes)


def _cmd_bench(args) -> int:
    name, cfg = _config(args)
    del name
    solvers = tuple(args.solvers.split(",")) if args.solvers else SOLVER_NAMES
    for solver in solvers:
        split_solver_name(solver)  # validate early
    seeds = tuple(range(args.seed, args.seed + args.runs))

    stacks = []
    if args.image:
        missing = [p for p in args.image if not os.path.exists(p)]
        if missing:
            raise FileNotFoundError("missing input images: " + ", ".join(missing))
        stacks = [read_pnm(p).channel_fields() for p in args.image]

    if args.suite == "density":
        if not stacks:
            stacks = [synthetic_image(args.width, args.height, args.seed)[None]]
        densities = tuple(float(d) for d in args.densities.split(",")) if args.densities \
            else bench.DENSITY_SWEEP
        rows = bench.density_suite(stacks, cfg, densities, seeds, solvers,
                                   with_reference=not args.no_reference)
    elif args.suite == "resolution":
        sizes = _parse_sizes(args.sizes) if args.sizes else bench.RESOLUTION_SWEEP
        rows = bench.resolution_suite(cfg, sizes, args.density, seeds, solvers,
                                      image_seed=args.seed)
    elif args.suite == "alpha-sweep":
        stack = stacks[0] if stacks else synthetic_image(args.width, args.height, args.seed)[None]
        alphas = tuple(float(a) for a in args.alphas.split(",")) if args.alphas \
            else bench.ALPHA_SWEEP
        rows = bench.alpha_suite(stack, cfg, args.density, seeds, alphas)
    else:  # downsampling
        rows = bench.downsampling_suite(cfg, (args.width, args.height), seeds=seeds)

    write_report_csv(args.csv, rows)
    print(f"{args.csv}: {len(rows)} rows ({args.suite} suite)")
    return 0


def _cmd_compare(args) -> int:
    _, cfg = _config(args)
    problem, _ = _load_problem(args.image, args.mask)
    rows = bench.compare_rows(problem, cfg, seed=args.seed)
    print(f"solver ranking at tol {cfg.solver.tol_rel:g} (MSE vs converged reference):")
    for rank, row in enumerate(rows, 1):
        print(f"  {rank}. {row['solver']:8s} mse={row['mse_vs_reference']:.6e} "
              f"psnr={row['psnr']:.2f} iterations={row['iterations']} "
              f"wall_time={row['wall_time_s']:.3f}s")
    if args.csv:
        write_report_csv(args.csv, rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diffpaint",
        description="Homogeneous diffusion inpainting: solve, generate masks, benchmark.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("inpaint", help="reconstruct an image from its mask")
    p.add_argument("image", help="PNM image (P2/P3/P5/P6)")
    p.add_argument("mask", help="PBM mask (P1/P4), bit 1 = known pixel")
    p.add_argument("--out", required=True, help="output PNM path")
    p.add_argument("--csv", help="also append a one-row CSV report")
    _add_solver_flags(p)
    p.set_defaults(func=_cmd_inpaint)

    p = sub.add_parser("gen-mask", help="generate a mask file")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--density", type=float, required=True, help="fraction of known pixels in (0, 1]")
    p.add_argument("--kind", choices=("random", "grid"), default="random")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output PBM path")
    p.set_defaults(func=_cmd_gen_mask)

    p = sub.add_parser("bench", help="run a benchmark suite into a CSV")
    p.add_argument("--suite", choices=("density", "resolution", "alpha-sweep", "downsampling"),
                   required=True)
    p.add_argument("--csv", required=True, help="output CSV path")
    p.add_argument("--image", action="append", help="input image(s); synthetic when omitted")
    p.add_argument("--width", type=int, default=256, help="synthetic image width (default: 256)")
    p.add_argument("--height", type=int, default=256, help="synthetic image height (default: 256)")
    p.add_argument("--density", type=float, default=0.05,
                   help="mask density for resolution/alpha suites (default: 0.05)")
    p.add_argument("--densities", help="comma list for the density suite "
                                       "(default: 0.005,0.01,0.02,0.03,0.04,0.05,0.1)")
    p.add_argument("--sizes", help="comma list like 240x135,480x270 for the resolution suite")
    p.add_argument("--alphas", help="comma list for the alpha sweep")
    p.add_argument("--solvers", help="comma subset of " + ",".join(SOLVER_NAMES))
    p.add_argument("--runs", type=int, default=1, help="mask seeds per configuration (default: 1)")
    p.add_argument("--no-reference", action="store_true",
                   help="skip the converged reference in the density suite")
    _add_solver_flags(p)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("compare", help="rank all solvers against a converged reference")
    p.add_argument("image")
    p.add_argument("mask")
    p.add_argument("--csv", help="also write the ranking as CSV")
    _add_solver_flags(p)
    p.set_defaults(func=_cmd_compare)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
