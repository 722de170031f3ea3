"""Grid containers and the matrix-free inpainting operator.

Homogeneous diffusion inpainting reconstructs an image from a sparse set of
known pixels by solving the Laplace equation with Dirichlet data at the known
pixels and reflecting (Neumann) conditions at the image border. Combining the
Dirichlet rows and the Laplacian rows into one system gives

    (C + (I - C) L) u = C f

with C the diagonal mask indicator and L the negated 5-point Laplacian whose
diagonal counts only in-grid neighbors (mirror boundary). The system matrix is
never materialized; :class:`StencilOperator` applies it row-wise.

Fields are (height, width) float64 arrays; masks are boolean arrays of the
same shape. 64-bit storage is deliberate: the solvers drive relative residuals
down to 1e-8 and below, far past 8-bit quantization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PEAK = 255.0  # 8-bit intensity convention for PSNR


class EmptyMaskError(ValueError):
    """Raised when a solve is attempted without any known pixels.

    Without Dirichlet data the system is singular: constants are in the
    nullspace of the pure-Neumann Laplacian.
    """


def as_field(values) -> np.ndarray:
    """Coerce to a 2D float64 field, rejecting non-finite entries."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"field must be 2D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("field contains non-finite values")
    return arr


def as_mask(bits) -> np.ndarray:
    """Coerce to a 2D boolean mask."""
    arr = np.asarray(bits)
    if arr.ndim != 2:
        raise ValueError(f"mask must be 2D, got shape {arr.shape}")
    return arr.astype(bool)


def mask_density(mask: np.ndarray) -> float:
    """Fraction of known pixels."""
    return float(np.count_nonzero(mask)) / mask.size


def neighbor_counts(shape: tuple[int, int]) -> np.ndarray:
    """Per-pixel count of in-grid direct neighbors (4 inside, 3 edges, 2 corners)."""
    h, w = shape
    cnt = np.full(shape, 4.0)
    cnt[0, :] -= 1.0
    cnt[-1, :] -= 1.0
    cnt[:, 0] -= 1.0
    cnt[:, -1] -= 1.0
    return cnt


def neighbor_sum(u: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    """Sum of the in-grid direct neighbors of every pixel."""
    if out is None:
        out = np.zeros_like(u)
    else:
        out.fill(0.0)
    out[1:, :] += u[:-1, :]
    out[:-1, :] += u[1:, :]
    out[:, 1:] += u[:, :-1]
    out[:, :-1] += u[:, 1:]
    return out


class StencilOperator:
    """Matrix-free inpainting operator for one mask and grid spacing.

    Row i of the implied matrix is the identity at mask pixels and the
    reflecting-boundary 5-point stencil (|N(i)| u_i - sum of neighbors) / h^2
    elsewhere. Precomputes the neighbor counts so repeated applications inside
    the solvers stay cheap.
    """

    def __init__(self, mask: np.ndarray, spacing: float = 1.0):
        if spacing <= 0:
            raise ValueError(f"spacing must be positive, got {spacing}")
        self.mask = as_mask(mask)
        self.spacing = float(spacing)
        self.shape = self.mask.shape
        self._scaled_counts = neighbor_counts(self.shape) / self.spacing**2

    def apply(self, u: np.ndarray) -> np.ndarray:
        if u.shape != self.shape:
            raise ValueError(f"field shape {u.shape} does not match mask shape {self.shape}")
        out = neighbor_sum(u)
        out *= -1.0 / self.spacing**2
        out += self._scaled_counts * u
        np.copyto(out, u, where=self.mask)
        return out

    def residual(self, b: np.ndarray, u: np.ndarray) -> np.ndarray:
        return b - self.apply(u)


def apply_operator(mask: np.ndarray, spacing: float, u: np.ndarray) -> np.ndarray:
    """Apply the inpainting system matrix to a field (one-shot convenience)."""
    return StencilOperator(mask, spacing).apply(as_field(u))


@dataclass(frozen=True)
class InpaintingProblem:
    """A mask, per-channel known values, and the grid spacing.

    ``known`` has shape (channels, height, width); its values are meaningful
    only where the mask is true. The right-hand side of a channel's system is
    the known values at mask pixels and zero elsewhere.
    """

    mask: np.ndarray
    known: np.ndarray
    spacing: float = 1.0

    def __post_init__(self):
        mask = as_mask(self.mask)
        known = np.asarray(self.known, dtype=np.float64)
        if known.ndim == 2:
            known = known[None, :, :]
        if known.ndim != 3:
            raise ValueError(f"known values must be 2D or 3D, got shape {known.shape}")
        if known.shape[1:] != mask.shape:
            raise ValueError(
                f"channel shape {known.shape[1:]} does not match mask shape {mask.shape}"
            )
        if not np.all(np.isfinite(known)):
            raise ValueError("known values contain non-finite entries")
        if self.spacing <= 0:
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "known", known)

    @property
    def channels(self) -> int:
        return self.known.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.mask.shape

    def rhs(self, channel: int = 0) -> np.ndarray:
        """Right-hand side b = known values at mask pixels, 0 elsewhere."""
        return np.where(self.mask, self.known[channel], 0.0)

    def flat_init(self, channel: int = 0) -> np.ndarray:
        """The canonical initial guess: known values at mask pixels, 0 elsewhere."""
        return self.rhs(channel)

    def operator(self) -> StencilOperator:
        return StencilOperator(self.mask, self.spacing)


def residual(problem: InpaintingProblem, channel: int, u: np.ndarray) -> np.ndarray:
    """Defect b - A u of an approximation for one channel."""
    op = problem.operator()
    return op.residual(problem.rhs(channel), as_field(u))


@dataclass(frozen=True)
class Metrics:
    """Mean squared error and the derived 8-bit peak signal-to-noise ratio."""

    mse: float
    psnr: float


def compute_metrics(a: np.ndarray, b: np.ndarray) -> Metrics:
    """MSE over all samples of two equally-shaped arrays, plus PSNR (peak 255)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    psnr = np.inf if mse == 0.0 else 10.0 * np.log10(PEAK**2 / mse)
    return Metrics(mse=mse, psnr=psnr)
