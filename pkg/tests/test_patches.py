"""Tests for rotated patch sampling and sliding-window stitching."""

import numpy as np
import pytest

from scipy import stats

from fresco.degradation import LatentPatchModel
from fresco.exceptions import DimensionError, SamplingError
from fresco.patches import (
    ImageKind,
    center_is_valid,
    coverage_counts,
    draw_patch_locations,
    extract_rotated_patch,
    rotated_grid,
    sample_patch_set,
    slide_stitch,
)


def test_axis_aligned_patch_is_a_crop() -> None:
    """Tests that an unrotated patch equals the plain crop."""
    image = np.arange(64.0).reshape(8, 8)

    patch = extract_rotated_patch(image, (3.5, 4.5), 0.0, 4)

    np.testing.assert_array_equal(patch, image[2:6, 3:7])


def test_quarter_turn_is_clockwise() -> None:
    """Tests that a 90 degree patch is the crop turned clockwise."""
    image = np.arange(16.0).reshape(4, 4)

    patch = extract_rotated_patch(image, (1.5, 1.5), 90.0, 2)

    assert patch.tolist() == [[9.0, 5.0], [10.0, 6.0]]
    np.testing.assert_array_equal(patch, np.rot90(image[1:3, 1:3], k=-1))


def test_extra_quarter_turn_rotates_patch(rng: np.random.Generator) -> None:
    """Tests that adding 90 degrees turns any patch clockwise.

    Args:
        rng (:class:`numpy.random.Generator`): Random generator.
    """
    image = rng.uniform(size=(24, 24))

    base = extract_rotated_patch(image, (11.3, 12.1), 30.0, 6)
    turned = extract_rotated_patch(image, (11.3, 12.1), 120.0, 6)

    np.testing.assert_allclose(turned, np.rot90(base, k=-1), atol=1e-9)


def test_rotated_patch_on_plane_is_exact() -> None:
    """Tests that bilinear sampling reproduces a linear image at any angle."""
    rows, cols = np.mgrid[0:20, 0:20].astype(np.float64)
    image = 2.0 * rows + 3.0 * cols + 1.0

    patch = extract_rotated_patch(image, (9.5, 9.5), 37.0, 6)
    grid_rows, grid_cols = rotated_grid((9.5, 9.5), 37.0, 6)

    np.testing.assert_allclose(patch, 2.0 * grid_rows + 3.0 * grid_cols + 1.0, atol=1e-10)


def test_patch_outside_image_raises() -> None:
    """Tests that a rotated patch poking out of the image is refused."""
    image = np.zeros((8, 8))

    assert center_is_valid(image.shape, (3.5, 3.5), 8, 0.0)
    assert not center_is_valid(image.shape, (3.5, 3.5), 8, 45.0)
    with pytest.raises(SamplingError, match="leaves the 8x8 image"):
        extract_rotated_patch(image, (3.5, 3.5), 45.0, 8)


def test_sample_patch_set_is_deterministic(random_abundances) -> None:
    """Tests that one seed gives identical draws.

    Args:
        random_abundances (:class:`AbundanceSet`): Random 3x3 maps of 3 materials.
    """
    maps = np.repeat(np.repeat(random_abundances.abundances, 4, axis=1), 4, axis=2)

    first = sample_patch_set(maps, 5, 3, seed=7)
    second = sample_patch_set(maps, 5, 3, seed=7)

    assert len(first) == 3
    assert all(len(samples) == 5 for samples in first)
    for left, right in zip(first[1], second[1]):
        assert left.center == right.center
        assert left.theta_deg == right.theta_deg
        np.testing.assert_array_equal(left.values, right.values)


def test_sample_patch_set_shares_locations(random_abundances) -> None:
    """Tests that every material is sampled at the same centers and angles.

    Args:
        random_abundances (:class:`AbundanceSet`): Random 3x3 maps of 3 materials.
    """
    maps = np.repeat(np.repeat(random_abundances.abundances, 4, axis=1), 4, axis=2)

    samples = sample_patch_set(maps, 4, 3, seed=1, image_id=ImageKind.MSI)

    for index in range(4):
        draws = {(samples[r][index].center, samples[r][index].theta_deg) for r in range(3)}
        assert len(draws) == 1
    assert samples[2][0].material == 2
    assert samples[0][0].image_id == "MSI"
    assert samples[0][0].values.shape == (3, 3)


def test_full_size_patch_without_rotation() -> None:
    """Tests that a patch as large as the image can only sit at its middle."""
    maps = np.arange(16.0).reshape(1, 4, 4)

    samples = sample_patch_set(maps, 3, 4, seed=0, rotate=False)

    for sample in samples[0]:
        assert sample.center == (1.5, 1.5)
        assert sample.theta_deg == 0.0
        np.testing.assert_array_equal(sample.values, maps[0])


def test_map_too_small_for_rotated_patch() -> None:
    """Tests that no rotated patch fits when the map only holds the upright one."""
    with pytest.raises(SamplingError, match="rotated"):
        sample_patch_set(np.zeros((1, 4, 4)), 1, 4, seed=0)


def test_draws_are_uniform_and_valid() -> None:
    """Tests the angle histogram against a uniform law and the center bounds."""
    rng = np.random.default_rng(2024)

    locations = draw_patch_locations((40, 40), 3600, 4, rng)
    thetas = np.array([theta for _, theta in locations])
    counts, _ = np.histogram(thetas, bins=36, range=(0.0, 360.0))

    assert stats.chisquare(counts).pvalue > 1e-3
    assert all(center_is_valid((40, 40), center, 4, theta) for center, theta in locations)


def test_coverage_counts() -> None:
    """Tests the window count per output pixel for overlapping and sparse strides."""
    np.testing.assert_array_equal(coverage_counts((3, 3), 2, 1), [[1, 2, 1], [2, 4, 2], [1, 2, 1]])
    np.testing.assert_array_equal(coverage_counts((5, 1), 2, 1, stride=2)[:, 0], [1, 1, 1, 1, 0])
    assert coverage_counts((6, 6), 2, 2).shape == (12, 12)


def test_slide_stitch_constant() -> None:
    """Tests that a constant translator yields a constant map."""
    stitched = slide_stitch(lambda windows: np.full((len(windows), 4, 4), 0.3), np.zeros((6, 6)), 2, 2)

    assert stitched.shape == (12, 12)
    np.testing.assert_allclose(stitched, 0.3)


def test_slide_stitch_nearest_upsampling(rng: np.random.Generator) -> None:
    """Tests that consistent windows stitch back into the upsampled map.

    Args:
        rng (:class:`numpy.random.Generator`): Random generator.
    """
    low_res = rng.uniform(size=(7, 5))

    stitched = slide_stitch(lambda windows: np.kron(windows, np.ones((1, 2, 2))), low_res, 3, 2)

    np.testing.assert_allclose(stitched, np.kron(low_res, np.ones((2, 2))), atol=1e-14)


def test_slide_stitch_uncovered_pixels_are_zero() -> None:
    """Tests that pixels no window reaches stay at zero."""
    stitched = slide_stitch(lambda windows: np.ones((len(windows), 2, 2)), np.ones((5, 5)), 2, 1, stride=2)

    assert stitched[4].tolist() == [0.0] * 5
    assert stitched[:4, :4].min() == 1.0


def test_slide_stitch_oracle(latent_model: LatentPatchModel) -> None:
    """Tests that the ideal translator recovers the whole high-resolution map.

    Args:
        latent_model (:class:`LatentPatchModel`): Model with 8x8 HSI patches and scale 4.
    """
    hsi, msi = latent_model.abundance_maps(12, seed=11)

    for material in range(latent_model.R):
        stitched = slide_stitch(latent_model.oracle_translate, hsi.abundances[material], 8, 4)
        np.testing.assert_allclose(stitched, msi.abundances[material], atol=1e-6)


def test_slide_stitch_shape_errors() -> None:
    """Tests the map size and translator output checks."""
    with pytest.raises(DimensionError, match="smaller than one"):
        slide_stitch(lambda windows: windows, np.zeros((2, 5)), 3, 1)
    with pytest.raises(DimensionError, match="Translator returned"):
        slide_stitch(lambda windows: windows, np.zeros((4, 4)), 2, 2)
