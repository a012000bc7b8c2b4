"""
Grayscale image ingestion and the image <-> distribution mapping.

Pixel (r, c) of a 2^j x 2^k image maps to index x = r * 2^k + c, so the
row bits (v-qubits) are the high half of the bitstring and the column bits
(h-qubits) the low half.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from qcbm_loader.models.errors import BlockPartitionError, ImageFormatError, ResolutionError
from qcbm_loader.models.schemas import BlockManifest, BlockRecord
from qcbm_loader.services.distribution import ProbabilityVector

logger = logging.getLogger(__name__)

_WHITESPACE = b" \t\r\n\x0b\x0c"
_TOLERANCE = 1e-9


@dataclass(frozen=True)
class GrayImage:
    intensity: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.intensity, dtype=np.float64)
        if values.ndim != 2 or values.size == 0:
            raise ImageFormatError(f"expected a non-empty 2D intensity array, got shape {values.shape}")
        if np.any(values < -_TOLERANCE) or np.any(values > 1 + _TOLERANCE) or not np.all(np.isfinite(values)):
            raise ImageFormatError("intensities must lie in [0, 1]")
        object.__setattr__(self, "intensity", np.clip(values, 0.0, 1.0))

    @property
    def height(self) -> int:
        return self.intensity.shape[0]

    @property
    def width(self) -> int:
        return self.intensity.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.intensity.shape


def _is_pow2(value: int) -> bool:
    return value >= 1 and not value & (value - 1)


# PGM

def _read_header(data: bytes) -> Tuple[List[bytes], int]:
    tokens: List[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos] in _WHITESPACE:
            pos += 1
        if pos >= len(data):
            raise ImageFormatError("truncated PGM header")
        if data[pos] == ord("#"):
            end = data.find(b"\n", pos)
            pos = len(data) if end < 0 else end + 1
            continue
        start = pos
        while pos < len(data) and data[pos] not in _WHITESPACE:
            pos += 1
        tokens.append(data[start:pos])
    return tokens, pos


def load_image(path: Union[str, Path]) -> GrayImage:
    """
    Read a P2 (ASCII) or P5 (binary) PGM.

    Args:
        path: File path

    Returns:
        GrayImage with intensities pixel / maxval
    """
    data = Path(path).read_bytes()
    tokens, pos = _read_header(data)
    magic = tokens[0]
    if magic not in (b"P2", b"P5"):
        raise ImageFormatError(f"unsupported format {magic!r}, expected P2 or P5")
    try:
        width, height, maxval = (int(token) for token in tokens[1:4])
    except ValueError:
        raise ImageFormatError("malformed PGM header")
    if width < 1 or height < 1 or not 1 <= maxval <= 65535:
        raise ImageFormatError(f"invalid PGM header values {width}x{height} maxval {maxval}")
    count = width * height

    if magic == b"P5":
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        body = data[pos + 1: pos + 1 + count * dtype.itemsize]
        if len(body) < count * dtype.itemsize:
            raise ImageFormatError(f"truncated PGM data: {len(body)} of {count * dtype.itemsize} bytes")
        pixels = np.frombuffer(body, dtype=dtype).astype(np.float64)
    else:
        try:
            pixels = np.array([int(token) for token in data[pos:].split()], dtype=np.float64)
        except ValueError:
            raise ImageFormatError("non-integer pixel in P2 data")
        if pixels.size != count:
            raise ImageFormatError(f"P2 data holds {pixels.size} pixels, header declares {count}")
    if np.any(pixels > maxval):
        raise ImageFormatError("pixel value exceeds maxval")
    logger.debug("loaded %s: %dx%d maxval %d", path, height, width, maxval)
    return GrayImage(pixels.reshape(height, width) / maxval)


def save_image(image: GrayImage, path: Union[str, Path], maxval: int = 65535) -> Path:
    """Write a binary P5 PGM (16-bit by default)."""
    if not 1 <= maxval <= 65535:
        raise ImageFormatError(f"maxval {maxval} outside [1, 65535]")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    pixels = np.rint(image.intensity * maxval).astype(dtype)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = f"P5\n{image.width} {image.height}\n{maxval}\n".encode("ascii")
    path.write_bytes(header + pixels.tobytes())
    return path


# Resolution

def pad_to_pow2(image: GrayImage) -> GrayImage:
    height = 1 << (image.height - 1).bit_length()
    width = 1 << (image.width - 1).bit_length()
    if (height, width) == image.shape:
        return image
    padded = np.zeros((height, width))
    padded[: image.height, : image.width] = image.intensity
    return GrayImage(padded)


def downsample(image: GrayImage, factor: Union[int, Tuple[int, int]]) -> GrayImage:
    """Block-mean pooling by a power-of-two factor per axis."""
    fy, fx = (factor, factor) if isinstance(factor, int) else factor
    if not (_is_pow2(fy) and _is_pow2(fx)):
        raise ResolutionError(f"pooling factors {fy}x{fx} must be powers of two")
    if image.height % fy or image.width % fx:
        raise ResolutionError(f"{image.height}x{image.width} image not divisible by {fy}x{fx}")
    if fy == 1 and fx == 1:
        return image
    pooled = image.intensity.reshape(image.height // fy, fy, image.width // fx, fx).mean(axis=(1, 3))
    return GrayImage(pooled)


def image_to_distribution(image: GrayImage) -> ProbabilityVector:
    if not (_is_pow2(image.height) and _is_pow2(image.width)):
        raise ResolutionError(f"image dims {image.height}x{image.width} are not powers of two")
    total = float(image.intensity.sum())
    if total <= 0:
        raise ImageFormatError("image has zero total intensity, no distribution exists")
    return ProbabilityVector.from_weights(image.intensity.reshape(-1))


def distribution_to_image(
    p: ProbabilityVector,
    dims: Tuple[int, int],
    norm: float,
    clip: bool = True,
) -> GrayImage:
    """Rescale by `norm` and fold back to (height, width); values above 1 are clipped."""
    height, width = dims
    if height * width != p.mass.size:
        raise ResolutionError(f"{p.mass.size} entries cannot fill a {height}x{width} image")
    intensity = p.mass.reshape(height, width) * norm
    if clip:
        intensity = np.clip(intensity, 0.0, 1.0)
    return GrayImage(intensity)


def stage_target(image: GrayImage, num_v: int, num_h: int) -> ProbabilityVector:
    """Target at a coarser stage: per-axis mean pooling to 2^num_v x 2^num_h, renormalized."""
    j = image.height.bit_length() - 1
    k = image.width.bit_length() - 1
    if num_v > j or num_h > k:
        raise ResolutionError(f"stage needs {num_v}/{num_h} qubits, image has {j}/{k}")
    pooled = downsample(image, (1 << (j - num_v), 1 << (k - num_h)))
    return image_to_distribution(pooled)


# Block-amplitude encoding

@dataclass
class BlockDecomposition:
    b: int
    grid: Tuple[int, int]
    tile_shape: Tuple[int, int]
    image_shape: Tuple[int, int]
    blocks: List[GrayImage] = field(default_factory=list)
    norms: List[float] = field(default_factory=list)

    def origin(self, block_id: int) -> Tuple[int, int]:
        row, col = divmod(block_id, self.grid[1])
        return row * self.tile_shape[0], col * self.tile_shape[1]

    def qubits_per_block(self) -> int:
        pixels = self.tile_shape[0] * self.tile_shape[1]
        return int(math.log2(pixels))

    def manifest(self, num_params: Optional[Sequence[int]] = None, tvds: Optional[Sequence[Optional[float]]] = None,
                 errors: Optional[Sequence[Optional[str]]] = None) -> BlockManifest:
        records = []
        for block_id, norm in enumerate(self.norms):
            top, left = self.origin(block_id)
            row, col = divmod(block_id, self.grid[1])
            records.append(BlockRecord(
                block_id=block_id,
                row=row,
                col=col,
                top=top,
                left=left,
                size=self.tile_shape[0],
                qubits=self.qubits_per_block(),
                norm=norm,
                num_params=num_params[block_id] if num_params else 0,
                tvd=tvds[block_id] if tvds else None,
                error=errors[block_id] if errors else None,
            ))
        return BlockManifest(
            b=self.b,
            grid_rows=self.grid[0],
            grid_cols=self.grid[1],
            image_height=self.image_shape[0],
            image_width=self.image_shape[1],
            blocks=records,
        )


def qubits_per_block(d1: int, d2: int, b: int) -> int:
    """log2 of the pixels per block: d1*d2/(2 b^2) for b >= 1, d1*d2 for the single block."""
    if b < 0:
        raise BlockPartitionError(f"block parameter {b} must be non-negative")
    if b == 0:
        pixels = d1 * d2
    else:
        if (d1 * d2) % (2 * b * b):
            raise BlockPartitionError(f"{d1}x{d2} image does not split into {2 * b * b} blocks")
        pixels = d1 * d2 // (2 * b * b)
    if not _is_pow2(pixels):
        raise BlockPartitionError(f"{pixels} pixels per block is not a power of two")
    return pixels.bit_length() - 1


def partition_blocks(image: GrayImage, b: int, grid: Optional[Tuple[int, int]] = None) -> BlockDecomposition:
    """
    Split into square tiles, row-major. The default grid is b x 2b; b = 0
    keeps the whole image as a single block. An explicit (rows, cols) grid
    supports downsample-then-partition layouts such as 2 x 3.
    """
    d1, d2 = image.shape
    if grid is None:
        if b < 0:
            raise BlockPartitionError(f"block parameter {b} must be non-negative")
        grid = (1, 1) if b == 0 else (b, 2 * b)
    rows, cols = grid
    if rows < 1 or cols < 1 or d1 % rows or d2 % cols:
        raise BlockPartitionError(f"{d1}x{d2} image does not divide into a {rows}x{cols} grid")
    tile = (d1 // rows, d2 // cols)
    if grid != (1, 1) and tile[0] != tile[1]:
        raise BlockPartitionError(f"tiles of {tile[0]}x{tile[1]} are not square")
    decomposition = BlockDecomposition(b=b, grid=(rows, cols), tile_shape=tile, image_shape=(d1, d2))
    for row in range(rows):
        for col in range(cols):
            values = image.intensity[row * tile[0]:(row + 1) * tile[0], col * tile[1]:(col + 1) * tile[1]]
            decomposition.blocks.append(GrayImage(values.copy()))
            decomposition.norms.append(float(values.sum()))
    logger.info("partitioned %dx%d image into %d blocks of %dx%d", d1, d2, rows * cols, tile[0], tile[1])
    return decomposition


def assembled_intensity(
    decomposition: BlockDecomposition,
    distributions: Sequence[Optional[ProbabilityVector]],
    allow_missing: bool = False,
) -> np.ndarray:
    """Unclipped intensities: each block's distribution rescaled by its norm and placed at its tile."""
    if len(distributions) != len(decomposition.norms):
        raise BlockPartitionError(f"{len(distributions)} distributions for {len(decomposition.norms)} blocks")
    intensity = np.zeros(decomposition.image_shape)
    th, tw = decomposition.tile_shape
    for block_id, (p, norm) in enumerate(zip(distributions, decomposition.norms)):
        if norm == 0:
            continue
        if p is None:
            if allow_missing:
                logger.warning("block %d has no distribution, left black", block_id)
                continue
            raise BlockPartitionError(f"block {block_id} has no distribution")
        if p.mass.size != th * tw:
            raise ResolutionError(f"block {block_id}: {p.mass.size} entries for a {th}x{tw} tile")
        top, left = decomposition.origin(block_id)
        intensity[top:top + th, left:left + tw] = p.mass.reshape(th, tw) * norm
    return intensity


def assemble_blocks(
    decomposition: BlockDecomposition,
    distributions: Sequence[Optional[ProbabilityVector]],
    allow_missing: bool = False,
) -> GrayImage:
    """Rescale each block by its norm and place it at its tile (clipped to [0, 1])."""
    return GrayImage(np.clip(assembled_intensity(decomposition, distributions, allow_missing), 0.0, 1.0))


def assembled_distribution(decomposition: BlockDecomposition, distributions: Sequence[Optional[ProbabilityVector]]) -> ProbabilityVector:
    """Full-image distribution implied by the per-block models and norms (no clipping)."""
    return ProbabilityVector.from_weights(assembled_intensity(decomposition, distributions).reshape(-1))


def intensity_tvd(reference: np.ndarray, candidate: np.ndarray) -> float:
    """TVD between two same-shape intensity arrays after normalizing each to unit mass."""
    a = np.asarray(reference, dtype=np.float64)
    b = np.asarray(candidate, dtype=np.float64)
    if a.shape != b.shape:
        raise ResolutionError(f"cannot compare {a.shape} with {b.shape}")
    if a.sum() <= 0 or b.sum() <= 0:
        raise ImageFormatError("both intensity arrays need positive total mass")
    return float(min(1.0, 0.5 * np.abs(a / a.sum() - b / b.sum()).sum()))
