"""Mask generators and synthetic test images.

Stand-ins for externally optimized inpainting masks: seeded uniform sampling
and regular lattices. The synthetic images give the benchmarks something
deterministic to chew on when no photographs are supplied.
"""

from __future__ import annotations

import numpy as np


def random_mask(width: int, height: int, density: float, seed: int = 0) -> np.ndarray:
    """Uniform mask with exactly round(density * pixels) known pixels."""
    if not 0.0 < density <= 1.0:
        raise ValueError(f"density must be in (0, 1], got {density}")
    n = width * height
    count = int(round(density * n))
    if count < 1:
        raise ValueError(f"density {density} selects zero pixels on {width}x{height}")
    rng = np.random.default_rng(seed)
    picks = rng.choice(n, size=count, replace=False)
    mask = np.zeros(n, dtype=bool)
    mask[picks] = True
    return mask.reshape(height, width)


def grid_mask(width: int, height: int, density: float) -> np.ndarray:
    """Regular lattice whose pixel count comes closest to the density."""
    if not 0.0 < density <= 1.0:
        raise ValueError(f"density must be in (0, 1], got {density}")
    n = width * height
    target = max(1, round(density * n))

    def count(step):
        off = step // 2
        return len(range(off, width, step)) * len(range(off, height, step))

    best = 1
    guess = max(1, round((1.0 / density) ** 0.5))
    for step in range(max(1, guess - 2), guess + 3):
        if abs(count(step) - target) < abs(count(best) - target):
            best = step
    mask = np.zeros((height, width), dtype=bool)
    off = best // 2
    mask[off::best, off::best] = True
    return mask


def synthetic_image(width: int, height: int, seed: int = 0) -> np.ndarray:
    """Smooth random gray image in [0, 255] (bilinearly upsampled noise)."""
    rng = np.random.default_rng(seed)
    nodes_x = max(2, width // 24 + 2)
    nodes_y = max(2, height // 24 + 2)
    coarse = rng.uniform(0.0, 255.0, size=(nodes_y, nodes_x))
    ys = np.linspace(0.0, nodes_y - 1.0, height)
    xs = np.linspace(0.0, nodes_x - 1.0, width)
    y0 = np.clip(ys.astype(int), 0, nodes_y - 2)
    x0 = np.clip(xs.astype(int), 0, nodes_x - 2)
    ty = (ys - y0)[:, None]
    tx = (xs - x0)[None, :]
    a = coarse[y0[:, None], x0[None, :]]
    b = coarse[y0[:, None], x0[None, :] + 1]
    c = coarse[y0[:, None] + 1, x0[None, :]]
    d = coarse[y0[:, None] + 1, x0[None, :] + 1]
    img = (1 - ty) * ((1 - tx) * a + tx * b) + ty * ((1 - tx) * c + tx * d)
    return np.round(img).astype(np.float64)


def step_edge_image(width: int, height: int, edge_x: int) -> np.ndarray:
    """Two flat regions: 0 left of edge_x, 255 from edge_x on."""
    img = np.zeros((height, width))
    img[:, edge_x:] = 255.0
    return img


def edge_concentrated_mask(
    width: int, height: int, edge_x: int, background_density: float = 0.01, seed: int = 0
) -> np.ndarray:
    """Dense sample bands hugging a vertical edge plus sparse background samples.

    Two full columns on the dark side of the edge and one on the bright side,
    the geometry where plain 2x2 value averaging mixes both regions into one
    coarse pixel while neighbor suppression keeps the sides apart.
    """
    rng = np.random.default_rng(seed)
    mask = rng.random((height, width)) < background_density
    mask[:, max(0, edge_x - 2) : edge_x + 1] = True
    return mask
