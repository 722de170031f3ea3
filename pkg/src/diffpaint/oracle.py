"""Dense ground-truth reference for small inpainting systems.

Materializes the full N x N matrix (identity rows at mask pixels, reflecting
5-point stencil elsewhere) and solves it by LU elimination with partial
pivoting. Only meant for tests and small-image cross checks; a size guard
rejects anything larger than 16384 pixels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import EmptyMaskError, InpaintingProblem

MAX_PIXELS = 16384


@dataclass(frozen=True)
class DenseSystem:
    """Explicit system for one channel.

    Rows and columns are in row-major pixel order, so grid pixel (y, x) maps
    to row y * width + x and back via reshape.
    """

    matrix: np.ndarray
    rhs: np.ndarray
    shape: tuple[int, int]
    n_known: int

    @property
    def n(self) -> int:
        return self.rhs.size


def assemble(problem: InpaintingProblem, channel: int = 0) -> DenseSystem:
    """Build the dense matrix and right-hand side for one channel."""
    h_grid, w_grid = problem.shape
    n = h_grid * w_grid
    if n > MAX_PIXELS:
        raise ValueError(f"refusing to assemble {n} > {MAX_PIXELS} pixels densely")

    mask = problem.mask.ravel()
    hinv2 = 1.0 / problem.spacing**2
    a = np.zeros((n, n))
    idx = np.arange(n).reshape(h_grid, w_grid)

    # Stencil rows everywhere first, then overwrite mask rows with identity.
    for rows, cols in (
        (idx[1:, :], idx[:-1, :]),
        (idx[:-1, :], idx[1:, :]),
        (idx[:, 1:], idx[:, :-1]),
        (idx[:, :-1], idx[:, 1:]),
    ):
        a[rows.ravel(), cols.ravel()] = -hinv2
        a[rows.ravel(), rows.ravel()] += hinv2

    a[mask, :] = 0.0
    a[mask, np.flatnonzero(mask)] = 1.0
    rhs = np.where(mask, problem.known[channel].ravel(), 0.0)
    return DenseSystem(
        matrix=a, rhs=rhs, shape=(h_grid, w_grid), n_known=int(np.count_nonzero(mask))
    )


def dense_solve(system: DenseSystem) -> np.ndarray:
    """Direct solve of the assembled system, mapped back to the grid."""
    if system.n_known == 0:
        raise EmptyMaskError("no known pixels: dense system is singular")
    u = np.linalg.solve(system.matrix, system.rhs)
    return u.reshape(system.shape)


def solve(problem: InpaintingProblem, channel: int = 0) -> np.ndarray:
    """Assemble-and-solve convenience for one channel."""
    return dense_solve(assemble(problem, channel))
