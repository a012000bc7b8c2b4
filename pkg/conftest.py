from pathlib import Path

import numpy as np
import pytest

from qcbm_loader.services.image_io import GrayImage, pad_to_pow2

ROOT = Path(__file__).parent
DATA = ROOT / "tests" / "data"


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_pgm():
    return DATA / "tiny.pgm"


@pytest.fixture
def run_xml():
    return DATA / "run.xml"


def _ring(size, radius, width, center):
    yy, xx = np.mgrid[0:size, 0:size]
    distance = np.hypot(yy - center[0], xx - center[1])
    return np.exp(-((distance - radius) ** 2) / (2 * width ** 2))


def _stroke(size, start, end, width):
    yy, xx = np.mgrid[0:size, 0:size].astype(float)
    (y0, x0), (y1, x1) = start, end
    dy, dx = y1 - y0, x1 - x0
    t = np.clip(((yy - y0) * dy + (xx - x0) * dx) / (dy * dy + dx * dx), 0, 1)
    distance = np.hypot(yy - (y0 + t * dy), xx - (x0 + t * dx))
    return np.exp(-(distance ** 2) / (2 * width ** 2))


def synthetic_digit(label: int) -> GrayImage:
    """28x28 handwritten-looking digit, zero padded to 32x32."""
    size = 28
    if label == 0:
        strokes = _ring(size, 8.0, 1.6, (14, 14))
    elif label == 1:
        strokes = _stroke(size, (5, 15), (23, 13), 1.6)
    else:
        strokes = np.maximum(_stroke(size, (6, 7), (6, 21), 1.6), _stroke(size, (6, 21), (23, 11), 1.6))
    intensity = np.clip(strokes / strokes.max(), 0, 1)
    return pad_to_pow2(GrayImage(intensity))


def synthetic_natural(height: int, width: int, seed: int = 0) -> GrayImage:
    """Smooth photo-like scene: a sky gradient, a few soft blobs and mild texture."""
    generator = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width] / np.array([height, width])[:, None, None]
    scene = 0.35 + 0.3 * (1 - yy)
    for _ in range(5):
        cy, cx = generator.uniform(0.1, 0.9, size=2)
        spread = generator.uniform(0.05, 0.2)
        scene += generator.uniform(-0.3, 0.4) * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * spread ** 2))
    scene += 0.03 * np.sin(40 * xx) * np.cos(30 * yy)
    return GrayImage(np.clip(scene, 0.02, 1.0))


@pytest.fixture
def digit_images():
    return [synthetic_digit(label) for label in (0, 1, 7)]


@pytest.fixture
def natural_image():
    return synthetic_natural(64, 64)
