"""Rotated patch sampling and sliding-window stitching.

Patch centers are real pixel coordinates ``(row, col)``. A patch of side ``B``
rotated by ``theta`` degrees samples the map on a ``B x B`` grid centered on
the patch center whose axes are turned clockwise by ``theta``, so that
``extract_rotated_patch(m, c, theta + 90, B)`` equals
``numpy.rot90(extract_rotated_patch(m, c, theta, B), k=-1)``.
"""

import dataclasses
import logging
import math

from enum import StrEnum
from typing import Callable

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

from .exceptions import DimensionError, SamplingError
from .tensor_core import AbundanceSet

logger = logging.getLogger(__name__)

_SNAP_TOLERANCE = 1e-9


class ImageKind(StrEnum):
    """Image a patch was sampled from."""

    HSI = "HSI"
    MSI = "MSI"


@dataclasses.dataclass(frozen=True)
class PatchSample:
    """A square patch and the metadata of its draw.

    Attributes:
        image_id (:class:`ImageKind`): Image the patch comes from.
        material (int): Material index ``r``.
        center (tuple[float, float]): Patch center ``(row, col)`` in pixels.
        theta_deg (float): Clockwise rotation in ``[0, 360)``.
        side (int): Side length ``B`` in pixels.
        values (numpy.ndarray): ``B x B`` patch values.
    """

    image_id: ImageKind
    material: int
    center: tuple[float, float]
    theta_deg: float
    side: int
    values: np.ndarray


def _rotation_terms(theta_deg: float) -> tuple[float, float]:
    """Returns ``(cos, sin)`` with exact values on multiples of 90 degrees."""
    theta = float(theta_deg) % 360.0
    exact = {0.0: (1.0, 0.0), 90.0: (0.0, 1.0), 180.0: (-1.0, 0.0), 270.0: (0.0, -1.0)}
    if theta in exact:
        return exact[theta]
    radians = math.radians(theta)
    return math.cos(radians), math.sin(radians)


def is_lattice_angle(theta_deg: float) -> bool:
    """Returns True when ``theta_deg`` is a multiple of 90 degrees."""
    return float(theta_deg) % 90.0 == 0.0


def half_extent(side: float, theta_deg: float) -> float:
    """Distance from a patch center that must stay inside the image.

    Axis-aligned and quarter-turn patches need half their side; any other
    angle needs the circumcircle radius ``side * sqrt(2) / 2``.
    """
    if is_lattice_angle(theta_deg):
        return side / 2.0
    return side * math.sqrt(2.0) / 2.0


def center_is_valid(shape: tuple[int, int], center, side: float, theta_deg: float) -> bool:
    """Checks that a rotated patch lies inside an image of the given shape."""
    extent = half_extent(side, theta_deg)
    return all(
        position - extent >= -0.5 - _SNAP_TOLERANCE
        and position + extent <= size - 0.5 + _SNAP_TOLERANCE
        for position, size in zip(center, shape)
    )


def rotated_grid(center, theta_deg: float, rows: int, cols: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Sampling coordinates of a ``rows x cols`` grid rotated clockwise about ``center``.

    Args:
        center (tuple[float, float]): Grid center ``(row, col)``.
        theta_deg (float): Clockwise rotation in degrees.
        rows (int): Grid height.
        cols (int, optional): Grid width. Defaults to ``rows``.

    Returns:
        tuple[numpy.ndarray, numpy.ndarray]: Row and column coordinates, each
        ``rows x cols``.
    """
    cols = rows if cols is None else cols
    cos, sin = _rotation_terms(theta_deg)
    offset_rows = np.arange(rows, dtype=np.float64) - (rows - 1) / 2.0
    offset_cols = np.arange(cols, dtype=np.float64) - (cols - 1) / 2.0
    grid_rows, grid_cols = np.meshgrid(offset_rows, offset_cols, indexing="ij")
    sample_rows = center[0] + cos * grid_rows - sin * grid_cols
    sample_cols = center[1] + sin * grid_rows + cos * grid_cols
    return sample_rows, sample_cols


def _snap(coordinates: np.ndarray) -> np.ndarray:
    rounded = np.round(coordinates)
    return np.where(np.abs(coordinates - rounded) < _SNAP_TOLERANCE, rounded, coordinates)


def bilinear_sample(image: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Samples an image at real coordinates with bilinear interpolation.

    Coordinates within 1e-9 of the pixel lattice are snapped onto it, so
    lattice-aligned grids reproduce the source values exactly.

    Args:
        image (numpy.ndarray): ``H x W`` map or ``H x W x K`` cube.
        rows (numpy.ndarray): Row coordinates.
        cols (numpy.ndarray): Column coordinates, same shape as ``rows``.

    Returns:
        numpy.ndarray: Samples of shape ``rows.shape`` (plus ``K`` for cubes).
    """
    image = np.asarray(image, dtype=np.float64)
    coordinates = np.stack([_snap(np.asarray(rows)), _snap(np.asarray(cols))])
    if image.ndim == 2:
        return ndimage.map_coordinates(image, coordinates, order=1, mode="nearest")
    bands = [
        ndimage.map_coordinates(image[:, :, k], coordinates, order=1, mode="nearest")
        for k in range(image.shape[2])
    ]
    return np.stack(bands, axis=-1)


def extract_rotated_patch(image: np.ndarray, center, theta_deg: float, side: int) -> np.ndarray:
    """Extracts a ``side x side`` patch rotated clockwise by ``theta_deg`` about ``center``.

    Example:
        >>> image = np.arange(16.0).reshape(4, 4)
        >>> extract_rotated_patch(image, (1.5, 1.5), 0.0, 2)
        array([[ 5.,  6.],
               [ 9., 10.]])

    Args:
        image (numpy.ndarray): ``H x W`` map (or ``H x W x K`` cube).
        center (tuple[float, float]): Patch center ``(row, col)``.
        theta_deg (float): Clockwise rotation in degrees.
        side (int): Patch side ``B``.

    Raises:
        SamplingError: If the rotated patch does not fit inside the image.

    Returns:
        numpy.ndarray: The sampled patch.
    """
    image = np.asarray(image, dtype=np.float64)
    if not center_is_valid(image.shape[:2], center, side, theta_deg):
        raise SamplingError(
            f"Patch of side {side} rotated by {theta_deg} degrees around {tuple(center)} "
            f"leaves the {image.shape[0]}x{image.shape[1]} image."
        )
    rows, cols = rotated_grid(center, theta_deg, side)
    return bilinear_sample(image, rows, cols)


def valid_center_bounds(shape: tuple[int, int], side: int, rotate: bool) -> tuple[tuple[float, float], ...]:
    """Returns the ``(low, high)`` interval of valid centers along each axis.

    Raises:
        SamplingError: If no valid center exists.
    """
    extent = half_extent(side, 45.0 if rotate else 0.0)
    bounds = tuple((extent - 0.5, size - 0.5 - extent) for size in shape)
    for low, high in bounds:
        if low > high + _SNAP_TOLERANCE:
            raise SamplingError(
                f"No valid center for a patch of side {side} in a {shape[0]}x{shape[1]} image "
                f"({'rotated' if rotate else 'axis-aligned'})."
            )
    return tuple((low, max(low, high)) for low, high in bounds)


def draw_patch_locations(
    shape: tuple[int, int], n: int, side: int, rng: np.random.Generator, rotate: bool = True
) -> list[tuple[tuple[float, float], float]]:
    """Draws ``n`` patch centers and rotation angles.

    Centers are uniform over the valid region and angles uniform over
    ``[0, 360)`` (always 0 when ``rotate`` is False).

    Returns:
        list[tuple[tuple[float, float], float]]: ``(center, theta_deg)`` draws.
    """
    (row_low, row_high), (col_low, col_high) = valid_center_bounds(shape, side, rotate)
    locations = []
    for _ in range(n):
        center = (float(rng.uniform(row_low, row_high)), float(rng.uniform(col_low, col_high)))
        theta = float(rng.uniform(0.0, 360.0)) if rotate else 0.0
        locations.append((center, theta))
    return locations


def extract_patch_stack(maps: np.ndarray, locations, side: int) -> np.ndarray:
    """Extracts co-located patches from every map.

    Args:
        maps (numpy.ndarray): ``R x H x W`` abundance stack.
        locations (list): ``(center, theta_deg)`` draws shared by all maps.
        side (int): Patch side.

    Returns:
        numpy.ndarray: ``R x n x side x side`` patches.
    """
    maps = np.asarray(maps, dtype=np.float64)
    stack = np.empty((maps.shape[0], len(locations), side, side))
    for index, (center, theta) in enumerate(locations):
        rows, cols = rotated_grid(center, theta, side)
        coordinates = np.stack([_snap(rows), _snap(cols)])
        for material in range(maps.shape[0]):
            stack[material, index] = ndimage.map_coordinates(
                maps[material], coordinates, order=1, mode="nearest"
            )
    return stack


def sample_patch_set(
    abundances: AbundanceSet | np.ndarray,
    n: int,
    side: int,
    seed: int | np.random.Generator,
    rotate: bool = True,
    image_id: ImageKind = ImageKind.HSI,
) -> list[list[PatchSample]]:
    """Samples ``n`` co-located patches from every abundance map.

    All materials share the same list of ``(center, theta)`` draws.

    Args:
        abundances (:class:`AbundanceSet` | numpy.ndarray): Maps to sample from.
        n (int): Number of draws.
        side (int): Patch side.
        seed (int | numpy.random.Generator): Seed or generator of the draws.
        rotate (bool, optional): Randomize rotations. Defaults to True.
        image_id (:class:`ImageKind`, optional): Source image tag. Defaults to HSI.

    Raises:
        SamplingError: If the maps are too small for a single patch.

    Returns:
        list[list[PatchSample]]: ``R`` lists of ``n`` samples.
    """
    maps = abundances.abundances if isinstance(abundances, AbundanceSet) else np.asarray(abundances)
    rng = np.random.default_rng(seed)
    locations = draw_patch_locations(maps.shape[1:], n, side, rng, rotate)
    stack = extract_patch_stack(maps, locations, side)
    return [
        [
            PatchSample(ImageKind(image_id), material, center, theta, side, stack[material, index])
            for index, (center, theta) in enumerate(locations)
        ]
        for material in range(maps.shape[0])
    ]


def _axis_coverage(size: int, side: int, scale: int, stride: int) -> np.ndarray:
    windows = (size - side) // stride + 1
    positions = np.arange(size * scale)
    step = stride * scale
    low = np.maximum((positions - side * scale) // step + 1, 0)
    high = np.minimum(positions // step, windows - 1)
    return np.maximum(high - low + 1, 0)


def coverage_counts(shape: tuple[int, int], side: int, scale: int, stride: int = 1) -> np.ndarray:
    """Number of upscaled windows covering each output pixel.

    Args:
        shape (tuple[int, int]): Low-resolution map shape.
        side (int): Low-resolution window side.
        scale (int): Upscaling factor ``s``.
        stride (int, optional): Window stride. Defaults to 1.

    Returns:
        numpy.ndarray: ``(rows * s) x (cols * s)`` integer coverage map.
    """
    return np.outer(
        _axis_coverage(shape[0], side, scale, stride),
        _axis_coverage(shape[1], side, scale, stride),
    )


def slide_stitch(
    patches_fn: Callable[[np.ndarray], np.ndarray],
    low_res: np.ndarray,
    side: int,
    scale: int,
    stride: int = 1,
) -> np.ndarray:
    """Super-resolves a map window by window and averages the overlaps.

    Windows are scanned row by row; ``patches_fn`` receives them as one
    ``N x side x side`` batch and must return ``N x (side*s) x (side*s)``.

    Args:
        patches_fn (Callable): Batched window translator.
        low_res (numpy.ndarray): ``H x W`` low-resolution map.
        side (int): Window side ``B_H``.
        scale (int): Upscaling factor ``s``.
        stride (int, optional): Window stride. Defaults to 1.

    Raises:
        DimensionError: If the map is smaller than one window or the translator
            returns patches of the wrong shape.

    Returns:
        numpy.ndarray: ``(H*s) x (W*s)`` stitched map.
    """
    low_res = np.asarray(low_res, dtype=np.float64)
    if low_res.shape[0] < side or low_res.shape[1] < side:
        raise DimensionError(f"Map {low_res.shape} is smaller than one {side}x{side} window.")

    windows = sliding_window_view(low_res, (side, side))[::stride, ::stride]
    grid_rows, grid_cols = windows.shape[:2]
    outputs = np.asarray(patches_fn(windows.reshape(-1, side, side).copy()), dtype=np.float64)
    out_side = side * scale
    if outputs.shape != (grid_rows * grid_cols, out_side, out_side):
        raise DimensionError(
            f"Translator returned {outputs.shape}, expected {(grid_rows * grid_cols, out_side, out_side)}."
        )

    accumulated = np.zeros((low_res.shape[0] * scale, low_res.shape[1] * scale))
    for index, patch in enumerate(outputs):
        top = (index // grid_cols) * stride * scale
        left = (index % grid_cols) * stride * scale
        accumulated[top : top + out_side, left : left + out_side] += patch

    counts = coverage_counts(low_res.shape, side, scale, stride)
    return np.divide(accumulated, counts, out=np.zeros_like(accumulated), where=counts > 0)
