import numpy as np
import pytest

from qcbm_loader.models.errors import BlockPartitionError, ImageFormatError, ResolutionError
from qcbm_loader.services.distribution import ProbabilityVector, marginalize_register
from qcbm_loader.services.image_io import (
    GrayImage,
    assemble_blocks,
    assembled_distribution,
    distribution_to_image,
    downsample,
    image_to_distribution,
    intensity_tvd,
    load_image,
    pad_to_pow2,
    partition_blocks,
    qubits_per_block,
    save_image,
    stage_target,
)
from conftest import synthetic_natural


def block_distributions(decomposition):
    return [
        image_to_distribution(block) if norm > 0 else None
        for block, norm in zip(decomposition.blocks, decomposition.norms)
    ]


class TestGrayImage:

    def test_rejects_out_of_range(self):
        with pytest.raises(ImageFormatError):
            GrayImage(np.array([[0.0, 1.5]]))

    def test_rejects_non_2d(self):
        with pytest.raises(ImageFormatError):
            GrayImage(np.zeros(4))

    def test_clips_rounding_noise(self):
        image = GrayImage(np.array([[1.0 + 1e-12, -1e-12]]))
        assert image.intensity.max() == 1.0
        assert image.intensity.min() == 0.0


class TestPgm:

    def test_load_ascii_fixture(self, tiny_pgm):
        image = load_image(tiny_pgm)
        assert image.shape == (4, 4)
        assert image.intensity[0, 1] == pytest.approx(32 / 255)
        assert image.intensity[2, 0] == pytest.approx(1.0)

    def test_binary_8bit(self, tmp_path):
        path = tmp_path / "img.pgm"
        path.write_bytes(b"P5\n# made by hand\n2 2\n255\n" + bytes([0, 51, 102, 255]))
        np.testing.assert_allclose(load_image(path).intensity, [[0, 0.2], [0.4, 1.0]])

    def test_binary_16bit_is_big_endian(self, tmp_path):
        path = tmp_path / "img.pgm"
        path.write_bytes(b"P5 2 1 65535\n" + bytes([0x00, 0x01, 0xFF, 0xFF]))
        np.testing.assert_allclose(load_image(path).intensity, [[1 / 65535, 1.0]])

    def test_save_then_load(self, tmp_path, rng):
        image = GrayImage(rng.random((4, 8)))
        loaded = load_image(save_image(image, tmp_path / "out" / "img.pgm"))
        np.testing.assert_allclose(loaded.intensity, image.intensity, atol=1 / 65535)

    @pytest.mark.parametrize("payload", [
        b"P6\n1 1\n255\n\x00\x00\x00",
        b"P5\n2 2\n255\n\x00\x01",
        b"P2\n2 2\n255\n1 2 3",
        b"P2\n2 1\n255\n0 255 7 9",
        b"P2\n2 x\n255\n1 2 3 4",
        b"P2\n1 1\n255\n300",
        b"P2\n1 1\n70000\n1",
        b"P2\n1 1",
    ])
    def test_malformed(self, tmp_path, payload):
        path = tmp_path / "bad.pgm"
        path.write_bytes(payload)
        with pytest.raises(ImageFormatError):
            load_image(path)


class TestResolution:

    def test_pad_to_pow2(self):
        padded = pad_to_pow2(GrayImage(np.ones((28, 28))))
        assert padded.shape == (32, 32)
        assert padded.intensity.sum() == pytest.approx(28 * 28)
        assert padded.intensity[28:, :].sum() == 0

    def test_downsample_means(self):
        image = GrayImage(np.array([[0.0, 1.0], [1.0, 0.0]]))
        np.testing.assert_allclose(downsample(image, 2).intensity, [[0.5]])
        assert downsample(image, 1) is image

    def test_downsample_per_axis(self):
        image = synthetic_natural(8, 16)
        assert downsample(image, (2, 4)).shape == (4, 4)

    @pytest.mark.parametrize("factor", [3, (2, 3)])
    def test_downsample_rejects(self, factor):
        with pytest.raises(ResolutionError):
            downsample(GrayImage(np.ones((6, 6))), factor)

    def test_pixel_index_mapping(self):
        intensity = np.zeros((4, 8))
        intensity[2, 5] = 1.0
        p = image_to_distribution(GrayImage(intensity))
        assert p.num_qubits == 5
        assert p.mass[2 * 8 + 5] == 1.0
        assert p.norm_constant == pytest.approx(1.0)

    def test_distribution_back_to_image(self, tiny_pgm):
        image = load_image(tiny_pgm)
        p = image_to_distribution(image)
        restored = distribution_to_image(p, image.shape, p.norm_constant)
        np.testing.assert_allclose(restored.intensity, image.intensity, atol=1e-12)

    def test_non_pow2_rejected(self):
        with pytest.raises(ResolutionError):
            image_to_distribution(GrayImage(np.ones((3, 4))))

    def test_black_image_rejected(self):
        with pytest.raises(ImageFormatError):
            image_to_distribution(GrayImage(np.zeros((2, 2))))

    def test_stage_target_is_register_marginal(self, tiny_pgm):
        image = load_image(tiny_pgm)
        p = image_to_distribution(image)
        target = stage_target(image, 1, 1)
        # labels: v0=0, v1=1, h0=2, h1=3; stage keeps the leading row and column bits
        np.testing.assert_allclose(target.mass, marginalize_register(p, [0, 1, 2, 3], [0, 2]).mass, atol=1e-12)

    def test_stage_target_full_resolution(self, tiny_pgm):
        image = load_image(tiny_pgm)
        np.testing.assert_allclose(stage_target(image, 2, 2).mass, image_to_distribution(image).mass)

    def test_stage_target_too_fine(self, tiny_pgm):
        with pytest.raises(ResolutionError):
            stage_target(load_image(tiny_pgm), 3, 2)


class TestBlocks:

    @pytest.mark.parametrize("b,expected", [(0, 17), (2, 14), (4, 12)])
    def test_qubits_per_block(self, b, expected):
        assert qubits_per_block(256, 512, b) == expected

    def test_qubits_per_block_rejects(self):
        with pytest.raises(BlockPartitionError):
            qubits_per_block(64, 128, 3)
        with pytest.raises(BlockPartitionError):
            qubits_per_block(64, 128, -1)

    def test_default_grid(self):
        decomposition = partition_blocks(synthetic_natural(64, 128), 2)
        assert decomposition.grid == (2, 4)
        assert len(decomposition.blocks) == 8
        assert decomposition.tile_shape == (32, 32)
        assert decomposition.qubits_per_block() == qubits_per_block(64, 128, 2) == 10
        assert decomposition.origin(5) == (32, 32)

    def test_explicit_grid(self):
        decomposition = partition_blocks(synthetic_natural(128, 192), 0, grid=(2, 3))
        assert len(decomposition.blocks) == 6
        assert all(block.shape == (64, 64) for block in decomposition.blocks)

    def test_single_block(self):
        image = synthetic_natural(16, 32)
        decomposition = partition_blocks(image, 0)
        assert decomposition.grid == (1, 1)
        np.testing.assert_array_equal(decomposition.blocks[0].intensity, image.intensity)

    def test_rejects_bad_partition(self):
        with pytest.raises(BlockPartitionError):
            partition_blocks(synthetic_natural(64, 128), 3)
        with pytest.raises(BlockPartitionError):
            partition_blocks(synthetic_natural(64, 64), 0, grid=(2, 4))

    def test_exact_blocks_reassemble(self):
        image = synthetic_natural(32, 64)
        decomposition = partition_blocks(image, 2)
        assembled = assemble_blocks(decomposition, block_distributions(decomposition))
        np.testing.assert_allclose(assembled.intensity, image.intensity, atol=1e-12)
        assert intensity_tvd(image.intensity, assembled.intensity) == pytest.approx(0.0, abs=1e-12)

    def test_blank_tile_stays_black(self):
        intensity = synthetic_natural(16, 32).intensity.copy()
        intensity[:8, :8] = 0.0
        decomposition = partition_blocks(GrayImage(intensity), 2)
        distributions = block_distributions(decomposition)
        assert distributions[0] is None
        assembled = assemble_blocks(decomposition, distributions)
        assert assembled.intensity[:8, :8].sum() == 0.0
        full = assembled_distribution(decomposition, distributions)
        np.testing.assert_allclose(full.mass, intensity.reshape(-1) / intensity.sum(), atol=1e-12)

    def test_missing_distribution(self):
        decomposition = partition_blocks(synthetic_natural(16, 32), 2)
        distributions = block_distributions(decomposition)
        distributions[3] = None
        with pytest.raises(BlockPartitionError):
            assemble_blocks(decomposition, distributions)
        partial = assemble_blocks(decomposition, distributions, allow_missing=True)
        assert partial.intensity[:8, 24:].sum() == 0.0

    def test_wrong_block_resolution(self):
        decomposition = partition_blocks(synthetic_natural(16, 32), 2)
        distributions = block_distributions(decomposition)
        distributions[0] = ProbabilityVector.from_weights(np.ones(4))
        with pytest.raises(ResolutionError):
            assemble_blocks(decomposition, distributions)

    def test_manifest(self):
        decomposition = partition_blocks(synthetic_natural(16, 32), 2)
        manifest = decomposition.manifest(num_params=[3] * 8, tvds=[0.1] * 8)
        assert manifest.grid_rows == 2 and manifest.grid_cols == 4
        assert manifest.blocks[6].row == 1 and manifest.blocks[6].col == 2
        assert manifest.blocks[6].left == 16
        assert manifest.blocks[6].qubits == 6
        assert manifest.blocks[0].error is None
