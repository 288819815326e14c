"""Tests for the spectral cube and linear mixture algebra."""

import numpy as np
import pytest

from fresco.exceptions import DimensionError
from fresco.tensor_core import (
    AbundanceSet,
    Ll1Factor,
    Ll1Model,
    SpectralCube,
    assemble_lmm,
    factors_to_abundances,
    mode3_apply,
)


def test_spectral_cube_properties() -> None:
    """Tests the shape accessors and the band-fastest flat layout."""
    cube = SpectralCube(np.arange(24.0).reshape(2, 3, 4))

    assert (cube.rows, cube.cols, cube.bands) == (2, 3, 4)
    assert cube.data[:4].tolist() == [0.0, 1.0, 2.0, 3.0]
    assert cube.pixels().shape == (6, 4)
    assert cube.band(1).tolist() == [[1.0, 5.0, 9.0], [13.0, 17.0, 21.0]]


def test_spectral_cube_is_a_copy() -> None:
    """Tests that a cube does not alias the array it was built from."""
    values = np.ones((2, 2, 2))
    cube = SpectralCube(values)
    values[0, 0, 0] = 5.0

    assert cube.array[0, 0, 0] == 1.0
    with pytest.raises(ValueError):
        cube.array[0, 0, 0] = 2.0


@pytest.mark.parametrize("shape", [(2, 2), (0, 2, 2), (2, 2, 2, 1)])
def test_spectral_cube_rejects_bad_shapes(shape: tuple[int, ...]) -> None:
    """Tests that cubes must be 3-dimensional with positive axes.

    Args:
        shape (tuple[int, ...]): Invalid array shape.
    """
    with pytest.raises(DimensionError):
        SpectralCube(np.zeros(shape))


def test_spectral_cube_rejects_nan() -> None:
    """Tests that non-finite entries are refused."""
    values = np.zeros((2, 2, 2))
    values[1, 1, 1] = np.nan
    with pytest.raises(ValueError, match="finite"):
        SpectralCube(values)


def test_assemble_lmm_identity_abundance() -> None:
    """Tests the outer product of one abundance map with one endmember."""
    abundances = AbundanceSet(np.array([[[1.0, 0.0], [0.0, 1.0]]]), np.array([[2.0, 3.0]]))
    cube = assemble_lmm(abundances)

    assert cube.band(0).tolist() == [[2.0, 0.0], [0.0, 2.0]]
    assert cube.band(1).tolist() == [[3.0, 0.0], [0.0, 3.0]]


def test_assemble_lmm_symmetric_mixture() -> None:
    """Tests that two half abundances of orthogonal endmembers give a flat spectrum."""
    abundances = AbundanceSet(np.full((2, 2, 2), 0.5), np.eye(2), normalized=True)
    cube = assemble_lmm(abundances)

    np.testing.assert_array_equal(cube.pixels(), np.full((4, 2), 0.5))


def test_assemble_lmm_matches_loops(random_abundances: AbundanceSet) -> None:
    """Tests the mixture against a plain summation over every pixel and band.

    Args:
        random_abundances (:class:`AbundanceSet`): Random 3x3 maps of 3 materials.
    """
    cube = assemble_lmm(random_abundances)
    maps, endmembers = random_abundances.abundances, random_abundances.endmembers

    expected = np.zeros((3, 3, 4))
    for i in range(3):
        for j in range(3):
            for k in range(4):
                expected[i, j, k] = sum(maps[r, i, j] * endmembers[r, k] for r in range(3))
    np.testing.assert_allclose(cube.array, expected, rtol=0, atol=1e-12)


def test_assemble_lmm_permutation_invariant(random_abundances: AbundanceSet) -> None:
    """Tests that reordering the materials does not change the mixture.

    Args:
        random_abundances (:class:`AbundanceSet`): Random 3x3 maps of 3 materials.
    """
    order = [2, 0, 1]
    permuted = AbundanceSet(random_abundances.abundances[order], random_abundances.endmembers[order])

    np.testing.assert_allclose(assemble_lmm(permuted).array, assemble_lmm(random_abundances).array, atol=1e-14)


def test_abundance_set_checks() -> None:
    """Tests the material count, nonnegativity and sum-to-one checks."""
    with pytest.raises(DimensionError, match="abundance maps"):
        AbundanceSet(np.zeros((2, 2, 2)), np.zeros((3, 4)))
    with pytest.raises(ValueError, match="nonnegative"):
        AbundanceSet(-np.ones((1, 2, 2)), np.ones((1, 4)))
    with pytest.raises(ValueError, match="sum to one"):
        AbundanceSet(np.full((2, 2, 2), 0.4), np.ones((2, 4)), normalized=True)


def test_abundance_set_cube_conversion(random_abundances: AbundanceSet) -> None:
    """Tests that the material index becomes the band axis of the cube.

    Args:
        random_abundances (:class:`AbundanceSet`): Random 3x3 maps of 3 materials.
    """
    cube = random_abundances.as_cube()
    restored = AbundanceSet.from_cube(cube, random_abundances.endmembers)

    assert cube.shape == (3, 3, 3)
    np.testing.assert_array_equal(cube.band(1), random_abundances.abundances[1])
    np.testing.assert_array_equal(restored.abundances, random_abundances.abundances)
    assert restored.spatial_shape == (3, 3)
    assert restored.bands == 4


def test_sum_violation() -> None:
    """Tests the per-pixel sum and its largest deviation from one."""
    maps = np.array([[[0.5, 0.2]], [[0.5, 0.9]]])
    abundances = AbundanceSet(maps, np.ones((2, 3)))

    np.testing.assert_allclose(abundances.sums(), [[1.0, 1.1]])
    assert abundances.sum_violation() == pytest.approx(0.1)


def test_factor_abundance_rank_one() -> None:
    """Tests ``S = A B^T`` on a rank-1 example."""
    factor = Ll1Factor(np.array([[1.0], [0.0]]), np.array([[1.0], [1.0]]), np.array([1.0]))

    assert factor.abundance().tolist() == [[1.0, 1.0], [0.0, 0.0]]
    assert factor.rank == 1


def test_factor_abundance_identity() -> None:
    """Tests that identity factors give an identity abundance map."""
    factor = Ll1Factor(np.eye(3), np.eye(3), np.ones(2))

    np.testing.assert_array_equal(factor.abundance(), np.eye(3))


def test_factors_to_abundances_matches_matmul(rng: np.random.Generator) -> None:
    """Tests every expanded map against a naive matrix product.

    Args:
        rng (:class:`numpy.random.Generator`): Random generator.
    """
    factors = tuple(
        Ll1Factor(rng.uniform(size=(5, 2)), rng.uniform(size=(6, 2)), rng.uniform(size=4)) for _ in range(2)
    )
    abundances = factors_to_abundances(Ll1Model(factors))

    for r, factor in enumerate(factors):
        expected = np.array(
            [[sum(factor.A[i, l] * factor.B[j, l] for l in range(2)) for j in range(6)] for i in range(5)]
        )
        np.testing.assert_allclose(abundances.abundances[r], expected, atol=1e-12)
    np.testing.assert_array_equal(abundances.endmembers[1], factors[1].c)


def test_ll1_model_checks() -> None:
    """Tests that materials must agree on the image shape."""
    first = Ll1Factor(np.ones((4, 2)), np.ones((5, 2)), np.ones(3))
    second = Ll1Factor(np.ones((4, 1)), np.ones((6, 1)), np.ones(3))

    with pytest.raises(DimensionError, match="Material 1"):
        Ll1Model((first, second))
    with pytest.raises(DimensionError):
        Ll1Factor(np.ones((4, 2)), np.ones((5, 3)), np.ones(3))


def test_ll1_model_assemble() -> None:
    """Tests the model properties and the assembled cube."""
    model = Ll1Model(
        (
            Ll1Factor(np.ones((2, 1)), np.ones((3, 1)), np.array([1.0, 0.0])),
            Ll1Factor(np.ones((2, 2)), np.ones((3, 2)), np.array([0.0, 1.0])),
        )
    )

    assert model.R == 2
    assert model.ranks == (1, 2)
    assert model.shape == (2, 3, 2)
    np.testing.assert_array_equal(model.assemble().band(1), np.full((2, 3), 2.0))


def test_mode3_apply_identity(random_cube: SpectralCube) -> None:
    """Tests that the identity response leaves the cube unchanged.

    Args:
        random_cube (:class:`SpectralCube`): Random cube.
    """
    result = mode3_apply(random_cube, np.eye(random_cube.bands))

    np.testing.assert_array_equal(result.array, random_cube.array)


def test_mode3_apply_summation() -> None:
    """Tests an all-ones row response on a single pixel."""
    cube = SpectralCube(np.array([[[1.0, 2.0, 3.0]]]))

    assert mode3_apply(cube, np.ones((1, 3))).array.tolist() == [[[6.0]]]


def test_mode3_apply_matches_matvec(rng: np.random.Generator) -> None:
    """Tests the per-pixel matrix-vector product against a loop.

    Args:
        rng (:class:`numpy.random.Generator`): Random generator.
    """
    cube = SpectralCube(rng.normal(size=(3, 3, 10)))
    P = rng.uniform(size=(4, 10))
    result = mode3_apply(cube, P)

    for i in range(3):
        for j in range(3):
            np.testing.assert_allclose(result.array[i, j], P @ cube.array[i, j], atol=1e-12)


def test_mode3_apply_band_mismatch(random_cube: SpectralCube) -> None:
    """Tests that the response must match the band count.

    Args:
        random_cube (:class:`SpectralCube`): Random cube with 6 bands.
    """
    with pytest.raises(DimensionError, match="6 bands"):
        mode3_apply(random_cube, np.ones((2, 5)))
