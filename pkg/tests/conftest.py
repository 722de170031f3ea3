import numpy as np
import pytest

from diffpaint import InpaintingProblem, random_mask, synthetic_image


def seeded_problem(width, height, density, seed, image_seed=None, channels=1):
    """Random mask + smooth synthetic image, fully determined by the seeds."""
    image_seed = seed + 1000 if image_seed is None else image_seed
    mask = random_mask(width, height, density, seed)
    known = np.stack([synthetic_image(width, height, image_seed + c) for c in range(channels)])
    return InpaintingProblem(mask, known)


def rel_err(a, b):
    scale = np.linalg.norm(b)
    return np.linalg.norm(a - b) / (scale if scale > 0 else 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
