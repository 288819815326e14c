"""Dense spectral cubes and the LL1 linear mixture algebra.

A spectral image is stored as a ``rows x cols x bands`` float64 array in
C order, so the spectrum of one pixel is contiguous in memory. Materials are
described either by their abundance maps (:class:`AbundanceSet`) or by the
factors of their low-rank abundances (:class:`Ll1Model`).
"""

import dataclasses

import numpy as np

from .exceptions import DimensionError


def _frozen_array(values, ndim: int, name: str) -> np.ndarray:
    try:
        array = np.array(values, dtype=np.float64, order="C", copy=True)
    except ValueError as error:
        raise DimensionError(f"{name} entries have inconsistent shapes: {error}") from error
    if array.ndim != ndim:
        raise DimensionError(f"{name} must be {ndim}-dimensional, got shape {array.shape}.")
    array.setflags(write=False)
    return array


@dataclasses.dataclass(frozen=True)
class SpectralCube:
    """Immutable ``rows x cols x bands`` spectral image.

    Negative entries coming from numerical noise are tolerated; only finiteness
    is enforced.

    Example:
        >>> cube = SpectralCube(np.ones((2, 3, 4)))
        >>> cube.rows, cube.cols, cube.bands
        (2, 3, 4)

    Args:
        array (numpy.ndarray): The cube values, copied on construction.

    Raises:
        DimensionError: If the array is not 3-dimensional or has an empty axis.
        ValueError: If the array contains non-finite values.
    """

    array: np.ndarray

    def __post_init__(self):
        array = _frozen_array(self.array, 3, "SpectralCube")
        if 0 in array.shape:
            raise DimensionError(f"SpectralCube axes must be positive, got {array.shape}.")
        if not np.all(np.isfinite(array)):
            raise ValueError("SpectralCube entries must be finite.")
        object.__setattr__(self, "array", array)

    @property
    def rows(self) -> int:
        """int: Number of pixel rows."""
        return self.array.shape[0]

    @property
    def cols(self) -> int:
        """int: Number of pixel columns."""
        return self.array.shape[1]

    @property
    def bands(self) -> int:
        """int: Number of spectral bands."""
        return self.array.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        """tuple[int, int, int]: ``(rows, cols, bands)``."""
        return self.array.shape

    @property
    def data(self) -> np.ndarray:
        """numpy.ndarray: Row-major flat view, band index fastest."""
        return self.array.reshape(-1)

    def band(self, k: int) -> np.ndarray:
        """Returns the ``k``-th band image."""
        return self.array[:, :, k]

    def pixels(self) -> np.ndarray:
        """Returns the cube as a ``(rows * cols) x bands`` matrix."""
        return self.array.reshape(-1, self.bands)


@dataclasses.dataclass(frozen=True)
class Ll1Factor:
    """Factor triple ``(A_r, B_r, c_r)`` of one material.

    Attributes:
        A (numpy.ndarray): ``rows x L_r`` row factor.
        B (numpy.ndarray): ``cols x L_r`` column factor.
        c (numpy.ndarray): Endmember spectrum of length ``bands``.
    """

    A: np.ndarray
    B: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        A = _frozen_array(self.A, 2, "A_r")
        B = _frozen_array(self.B, 2, "B_r")
        c = _frozen_array(self.c, 1, "c_r")
        if A.shape[1] != B.shape[1]:
            raise DimensionError(
                f"A_r and B_r must have the same number of columns, got {A.shape[1]} and {B.shape[1]}."
            )
        for name, value in (("A_r", A), ("B_r", B), ("c_r", c)):
            if not np.all(np.isfinite(value)):
                raise ValueError(f"{name} entries must be finite.")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "c", c)

    @property
    def rank(self) -> int:
        """int: The rank cap ``L_r`` (column count of the factors)."""
        return self.A.shape[1]

    def abundance(self) -> np.ndarray:
        """Returns ``S_r = A_r B_r^T``."""
        return self.A @ self.B.T


@dataclasses.dataclass(frozen=True)
class Ll1Model:
    """Block-term model ``sum_r (A_r B_r^T) o c_r``.

    Args:
        factors (tuple[Ll1Factor, ...]): One factor triple per material.

    Raises:
        DimensionError: If the materials disagree on the image shape or band count.
    """

    factors: tuple[Ll1Factor, ...]

    def __post_init__(self):
        factors = tuple(self.factors)
        if not factors:
            raise DimensionError("An Ll1Model needs at least one material.")
        rows, cols, bands = factors[0].A.shape[0], factors[0].B.shape[0], factors[0].c.shape[0]
        for index, factor in enumerate(factors):
            if (factor.A.shape[0], factor.B.shape[0], factor.c.shape[0]) != (rows, cols, bands):
                raise DimensionError(f"Material {index} does not match the shape of material 0.")
        object.__setattr__(self, "factors", factors)

    @property
    def R(self) -> int:
        """int: Number of materials."""
        return len(self.factors)

    @property
    def ranks(self) -> tuple[int, ...]:
        """tuple[int, ...]: Rank caps ``L_r``."""
        return tuple(factor.rank for factor in self.factors)

    @property
    def shape(self) -> tuple[int, int, int]:
        """tuple[int, int, int]: Shape of the assembled cube."""
        first = self.factors[0]
        return first.A.shape[0], first.B.shape[0], first.c.shape[0]

    def assemble(self) -> SpectralCube:
        """Returns the cube described by the model."""
        return assemble_lmm(factors_to_abundances(self))


@dataclasses.dataclass(frozen=True)
class AbundanceSet:
    """Abundance maps ``S_r`` and endmembers ``c_r`` of ``R`` materials.

    Args:
        abundances (numpy.ndarray): ``R x rows x cols`` stack of abundance maps.
        endmembers (numpy.ndarray): ``R x bands`` endmember matrix.
        normalized (bool, optional): Whether the maps are expected to sum to one
            per pixel. Defaults to False.
        tolerance (float, optional): Tolerance of the nonnegativity and sum-to-one
            checks. Defaults to 1e-6.

    Raises:
        DimensionError: If the stacks disagree on the material count.
        ValueError: If a map is negative beyond tolerance, or if a normalized set
            does not sum to one.
    """

    abundances: np.ndarray
    endmembers: np.ndarray
    normalized: bool = False
    tolerance: float = 1e-6

    def __post_init__(self):
        abundances = _frozen_array(self.abundances, 3, "abundances")
        endmembers = _frozen_array(self.endmembers, 2, "endmembers")
        if abundances.shape[0] != endmembers.shape[0]:
            raise DimensionError(
                f"Got {abundances.shape[0]} abundance maps for {endmembers.shape[0]} endmembers."
            )
        if abundances.size and abundances.min() < -self.tolerance:
            raise ValueError("Abundance maps must be nonnegative.")
        object.__setattr__(self, "abundances", abundances)
        object.__setattr__(self, "endmembers", endmembers)
        if self.normalized and self.sum_violation() > self.tolerance:
            raise ValueError(
                f"Abundances do not sum to one per pixel (violation {self.sum_violation():.3e})."
            )

    @property
    def R(self) -> int:
        """int: Number of materials."""
        return self.abundances.shape[0]

    @property
    def spatial_shape(self) -> tuple[int, int]:
        """tuple[int, int]: ``(rows, cols)`` of the abundance maps."""
        return self.abundances.shape[1:]

    @property
    def bands(self) -> int:
        """int: Endmember length."""
        return self.endmembers.shape[1]

    def sums(self) -> np.ndarray:
        """Returns the per-pixel sum of the abundance maps."""
        return self.abundances.sum(axis=0)

    def sum_violation(self) -> float:
        """Returns ``max |sum_r S_r(i, j) - 1|``."""
        return float(np.max(np.abs(self.sums() - 1.0)))

    def as_cube(self) -> SpectralCube:
        """Returns the maps stacked as a ``rows x cols x R`` cube."""
        return SpectralCube(np.moveaxis(self.abundances, 0, -1))

    @classmethod
    def from_cube(cls, cube: SpectralCube, endmembers: np.ndarray, **kwargs) -> "AbundanceSet":
        """Builds a set from a ``rows x cols x R`` abundance cube.

        Args:
            cube (:class:`SpectralCube`): Abundance stack, material index last.
            endmembers (numpy.ndarray): ``R x bands`` endmember matrix.
            **kwargs: Forwarded to the constructor.

        Returns:
            :class:`AbundanceSet`: The abundance set.
        """
        return cls(np.moveaxis(cube.array, -1, 0), endmembers, **kwargs)


def assemble_lmm(abundances: AbundanceSet) -> SpectralCube:
    """Assembles ``Y(i, j, k) = sum_r S_r(i, j) c_r(k)``.

    Args:
        abundances (:class:`AbundanceSet`): Abundance maps and endmembers.

    Returns:
        :class:`SpectralCube`: The ``rows x cols x bands`` mixture.
    """
    return SpectralCube(np.einsum("rij,rk->ijk", abundances.abundances, abundances.endmembers))


def factors_to_abundances(model: Ll1Model) -> AbundanceSet:
    """Expands every factor pair into its abundance map ``S_r = A_r B_r^T``.

    Args:
        model (:class:`Ll1Model`): The factored model.

    Returns:
        :class:`AbundanceSet`: The abundance maps with the model endmembers.
    """
    maps = np.stack([factor.abundance() for factor in model.factors])
    endmembers = np.stack([factor.c for factor in model.factors])
    return AbundanceSet(maps, endmembers, tolerance=np.inf)


def mode3_apply(cube: SpectralCube, P: np.ndarray) -> SpectralCube:
    """Applies a matrix to every pixel spectrum, ``out(i, j, :) = P cube(i, j, :)``.

    Args:
        cube (:class:`SpectralCube`): Input cube with ``K_in`` bands.
        P (numpy.ndarray): ``K_out x K_in`` matrix.

    Raises:
        DimensionError: If the column count of ``P`` differs from the band count.

    Returns:
        :class:`SpectralCube`: Cube with ``K_out`` bands and the same spatial shape.
    """
    P = np.asarray(P, dtype=np.float64)
    if P.ndim != 2 or P.shape[1] != cube.bands:
        raise DimensionError(f"Cannot apply a {P.shape} matrix to a cube with {cube.bands} bands.")
    return SpectralCube(np.einsum("ijk,mk->ijm", cube.array, P))
