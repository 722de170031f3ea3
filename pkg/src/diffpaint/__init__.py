"""Homogeneous diffusion inpainting solvers.

Reconstructs images from sparse known pixels by solving the Laplace equation
with Dirichlet data at the known pixels, via conjugate gradients, an
overlapping-block Schwarz iteration with Robin coupling, and multilevel /
full-multigrid accelerations of both.
"""

from .core import (
    EmptyMaskError,
    InpaintingProblem,
    Metrics,
    StencilOperator,
    apply_operator,
    compute_metrics,
    mask_density,
    residual,
)
from .fileio import (
    CSV_HEADER,
    ImageFile,
    PnmParseError,
    image_from_fields,
    read_mask,
    read_pnm,
    write_mask,
    write_pnm,
    write_report_csv,
)
from .masks import grid_mask, random_mask, step_edge_image, synthetic_image
from .multigrid import (
    LevelHierarchy,
    MultigridConfig,
    build_hierarchy,
    cascadic_init,
    downsample_mask,
    downsample_values_modified,
    downsample_values_naive,
    fmg_solve,
    prolongate_correction,
    prolongate_solution,
    restrict_residual,
    v_cycle,
)
from .oracle import DenseSystem, assemble, dense_solve
from .partition import (
    BlockPartition,
    BlockRect,
    BlockWeights,
    build_partition,
    build_weights,
    extend_add_weighted,
    restrict_to_block,
)
from .pipelines import SOLVER_NAMES, SolveResult, solve_channel, solve_image
from .solvers import (
    BlockSolver,
    LocalSystem,
    SolveReport,
    SolverConfig,
    build_local_system,
    cg_solve,
    local_solve,
    oras_solve,
)

__version__ = "0.1.0"
