"""Forward degradation operators and synthetic scene generators.

The operators here are only ever applied forward, to synthesize observations:
the spectral response ``P`` maps HSI bands onto MSI bands and the spatial
operator blurs and subsamples by an integer factor ``s``.
"""

import dataclasses
import logging
import math

from enum import StrEnum
from typing import NamedTuple

import numpy as np
from scipy import ndimage, special

from .exceptions import DimensionError, InvalidSpecError
from .patches import bilinear_sample, is_lattice_angle, rotated_grid
from .tensor_core import AbundanceSet, Ll1Factor, Ll1Model, SpectralCube, mode3_apply

logger = logging.getLogger(__name__)


class SpatialKind(StrEnum):
    """Spatial degradation operators."""

    GAUSSIAN = "gaussian"
    NEAREST = "nearest"
    UNIFORM = "uniform"


@dataclasses.dataclass(frozen=True)
class DegradationSpec:
    """Spectral response matrix plus a spatial downsampling operator.

    Args:
        P (numpy.ndarray): ``K_M x K_H`` nonnegative spectral response.
        spatial_kind (:class:`SpatialKind`, optional): Spatial operator. Defaults to gaussian.
        s (int, optional): Downsampling factor. Defaults to 4.
        kernel_size (int, optional): Gaussian kernel side. Defaults to 5.
        sigma (float, optional): Gaussian kernel width. Defaults to 1.7.

    Raises:
        InvalidSpecError: If ``P`` has negative entries, an all-zero row, or at
            least as many rows as columns, or if ``s`` is not positive.
    """

    P: np.ndarray
    spatial_kind: SpatialKind = SpatialKind.GAUSSIAN
    s: int = 4
    kernel_size: int = 5
    sigma: float = 1.7

    def __post_init__(self):
        P = np.array(self.P, dtype=np.float64)
        if P.ndim != 2:
            raise InvalidSpecError(f"P must be a matrix, got shape {P.shape}.")
        if np.any(P < 0):
            raise InvalidSpecError("P must be nonnegative.")
        if np.any(P.max(axis=1) <= 0):
            raise InvalidSpecError("Every row of P needs a positive entry.")
        if P.shape[0] >= P.shape[1]:
            raise InvalidSpecError(f"P must have fewer rows than columns, got {P.shape}.")
        if int(self.s) < 1:
            raise InvalidSpecError(f"Downsampling factor must be positive, got {self.s}.")
        P.setflags(write=False)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "spatial_kind", SpatialKind(self.spatial_kind))
        object.__setattr__(self, "s", int(self.s))

    @property
    def K_M(self) -> int:
        """int: MSI band count."""
        return self.P.shape[0]

    @property
    def K_H(self) -> int:
        """int: HSI band count."""
        return self.P.shape[1]


def build_pm(K_H: int, K_M: int) -> np.ndarray:
    """Builds a banded spectral response that averages contiguous HSI bands.

    Row ``m`` averages the ``m``-th group of ``K_H // K_M`` bands; the last
    group also takes the remainder.

    Example:
        >>> build_pm(4, 2)
        array([[0.5, 0.5, 0. , 0. ],
               [0. , 0. , 0.5, 0.5]])

    Args:
        K_H (int): HSI band count.
        K_M (int): MSI band count.

    Raises:
        InvalidSpecError: If ``K_M >= K_H`` or ``K_M < 1``.

    Returns:
        numpy.ndarray: ``K_M x K_H`` matrix with unit row sums and disjoint supports.
    """
    if K_M < 1 or K_M >= K_H:
        raise InvalidSpecError(f"Need 0 < K_M < K_H, got K_H={K_H}, K_M={K_M}.")
    width = K_H // K_M
    P = np.zeros((K_M, K_H))
    for m in range(K_M):
        start = m * width
        stop = K_H if m == K_M - 1 else start + width
        P[m, start:stop] = 1.0 / (stop - start)
    return P


def band_groups(K_H: int, K_M: int) -> list[range]:
    """Returns the HSI band support of every row of :func:`build_pm`."""
    P = build_pm(K_H, K_M)
    return [range(int(np.flatnonzero(row)[0]), int(np.flatnonzero(row)[-1]) + 1) for row in P]


def gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    """Returns a normalized ``size x size`` Gaussian kernel."""
    offsets = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    profile = np.exp(-(offsets**2) / (2.0 * sigma**2))
    kernel = np.outer(profile, profile)
    return kernel / kernel.sum()


def spatial_degrade(cube: SpectralCube, spec: DegradationSpec) -> SpectralCube:
    """Blurs and subsamples every band by the factor ``spec.s``.

    ``gaussian`` convolves each band with the kernel (symmetric reflection at
    the borders) and keeps every ``s``-th pixel, ``nearest`` keeps the top-left
    pixel of each ``s x s`` block and ``uniform`` averages each block.

    Args:
        cube (:class:`SpectralCube`): High-resolution cube.
        spec (:class:`DegradationSpec`): Degradation description.

    Raises:
        DimensionError: If the spatial dimensions are not divisible by ``s``.

    Returns:
        :class:`SpectralCube`: ``(rows / s) x (cols / s) x bands`` cube.
    """
    s = spec.s
    if cube.rows % s or cube.cols % s:
        raise DimensionError(f"Spatial shape {cube.shape[:2]} is not divisible by s={s}.")

    array = cube.array
    if spec.spatial_kind is SpatialKind.GAUSSIAN:
        kernel = gaussian_kernel(spec.kernel_size, spec.sigma)
        blurred = np.stack(
            [ndimage.correlate(array[:, :, k], kernel, mode="reflect") for k in range(cube.bands)],
            axis=-1,
        )
        return SpectralCube(blurred[::s, ::s, :])
    if spec.spatial_kind is SpatialKind.NEAREST:
        return SpectralCube(array[::s, ::s, :])
    blocks = array.reshape(cube.rows // s, s, cube.cols // s, s, cube.bands)
    return SpectralCube(blocks.mean(axis=(1, 3)))


@dataclasses.dataclass(frozen=True)
class Window:
    """Half-open rectangular crop ``[row_start, row_stop) x [col_start, col_stop)``."""

    row_start: int
    row_stop: int
    col_start: int
    col_stop: int

    def __post_init__(self):
        if self.row_stop <= self.row_start or self.col_stop <= self.col_start:
            raise DimensionError(f"Empty window {self}.")

    @property
    def height(self) -> int:
        """int: Window height."""
        return self.row_stop - self.row_start

    @property
    def width(self) -> int:
        """int: Window width."""
        return self.col_stop - self.col_start

    @property
    def center(self) -> tuple[float, float]:
        """tuple[float, float]: Window center in pixel coordinates."""
        return (self.row_start + (self.height - 1) / 2.0, self.col_start + (self.width - 1) / 2.0)

    @property
    def circumradius(self) -> float:
        """float: Radius of the circle enclosing the window."""
        return math.hypot(self.height, self.width) / 2.0

    def shifted(self, t: int) -> "Window":
        """Returns the window moved by ``t`` pixels along both axes."""
        return Window(self.row_start + t, self.row_stop + t, self.col_start + t, self.col_stop + t)


def rotate_region(image: np.ndarray, window: Window, theta_deg: float) -> np.ndarray:
    """Rotates the circle enclosing ``window`` clockwise and re-extracts the window.

    Quarter turns only permute pixels; other angles use bilinear interpolation.

    Args:
        image (numpy.ndarray): ``H x W`` map or ``H x W x K`` cube.
        window (:class:`Window`): Region to extract.
        theta_deg (float): Clockwise rotation in degrees.

    Raises:
        InvalidSpecError: If the rotated region leaves the image.

    Returns:
        numpy.ndarray: The re-extracted ``height x width`` region.
    """
    image = np.asarray(image, dtype=np.float64)
    rows, cols = rotated_grid(window.center, theta_deg, window.height, window.width)
    if is_lattice_angle(theta_deg):
        inside = rows.min() >= 0 and cols.min() >= 0
        inside = inside and rows.max() <= image.shape[0] - 1 and cols.max() <= image.shape[1] - 1
    else:
        radius = window.circumradius
        inside = all(
            position - radius >= -0.5 and position + radius <= size - 0.5
            for position, size in zip(window.center, image.shape[:2])
        )
    if not inside:
        raise InvalidSpecError(
            f"{window} rotated by {theta_deg} degrees leaves the {image.shape[0]}x{image.shape[1]} source."
        )
    return bilinear_sample(image, rows, cols)


@dataclasses.dataclass(frozen=True)
class SceneSpec:
    """Unregistered pair construction from one source cube.

    Attributes:
        source (:class:`SpectralCube`): High-resolution source scene.
        msi_window (:class:`Window`): MSI-region crop.
        hsi_window (:class:`Window`): HSI-region crop, before the shift.
        hsi_shift_t (int): Shift of the HSI region in pixels along both axes.
        hsi_rotation_deg (float): Rotation applied to the HSI region.
        degradation (:class:`DegradationSpec`): Spectral and spatial operators.
        msi_rotation_deg (float): Rotation applied to the MSI region.
        noise_sigma (float): Standard deviation of additive Gaussian noise, 0 to disable.
        noise_seed (int): Seed of the noise draws.
    """

    source: SpectralCube
    msi_window: Window
    hsi_window: Window
    hsi_shift_t: int
    hsi_rotation_deg: float
    degradation: DegradationSpec
    msi_rotation_deg: float = 0.0
    noise_sigma: float = 0.0
    noise_seed: int = 0


class UnregisteredPair(NamedTuple):
    """Observations and ground truths of one unregistered scene."""

    msi: SpectralCube
    hsi: SpectralCube
    sri_msi: SpectralCube
    sri_hsi: SpectralCube


def make_unregistered_pair(scene: SceneSpec) -> UnregisteredPair:
    """Builds an unregistered HSI/MSI pair from one source cube.

    Args:
        scene (:class:`SceneSpec`): Scene construction parameters.

    Raises:
        InvalidSpecError: If a rotated window leaves the source.
        DimensionError: If the HSI region is not divisible by ``s`` or ``P``
            does not match the source bands.

    Returns:
        :class:`UnregisteredPair`: ``(Y_M, Y_H, sri_M, sri_H)``.
    """
    source = scene.source.array
    sri_msi = SpectralCube(rotate_region(source, scene.msi_window, scene.msi_rotation_deg))
    hsi_window = scene.hsi_window.shifted(scene.hsi_shift_t)
    sri_hsi = SpectralCube(rotate_region(source, hsi_window, scene.hsi_rotation_deg))

    msi = mode3_apply(sri_msi, scene.degradation.P)
    hsi = spatial_degrade(sri_hsi, scene.degradation)
    if scene.noise_sigma > 0:
        rng = np.random.default_rng(scene.noise_seed)
        msi = SpectralCube(msi.array + rng.normal(0.0, scene.noise_sigma, msi.shape))
        hsi = SpectralCube(hsi.array + rng.normal(0.0, scene.noise_sigma, hsi.shape))

    logger.info(
        "Built unregistered pair: MSI %s, HSI %s (shift %d, rotation %.1f deg).",
        msi.shape,
        hsi.shape,
        scene.hsi_shift_t,
        scene.hsi_rotation_deg,
    )
    return UnregisteredPair(msi, hsi, sri_msi, sri_hsi)


def synth_source_cube(seed: int, rows: int, cols: int, bands: int, R: int) -> AbundanceSet:
    """Draws a smooth linear-mixture scene to stand in for a real source cube.

    Abundances are sums of Gaussian blobs normalized per pixel; endmembers are
    smooth positive spectra.

    Args:
        seed (int): Random seed.
        rows (int): Scene height.
        cols (int): Scene width.
        bands (int): Number of bands.
        R (int): Number of materials.

    Returns:
        :class:`AbundanceSet`: Normalized abundances and endmembers; assemble
        them with :func:`fresco.tensor_core.assemble_lmm`.
    """
    rng = np.random.default_rng(seed)
    grid_rows, grid_cols = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    maps = np.empty((R, rows, cols))
    for material in range(R):
        field = np.full((rows, cols), 0.05)
        for _ in range(3):
            center_row, center_col = rng.uniform(0, rows), rng.uniform(0, cols)
            width = rng.uniform(0.15, 0.35) * min(rows, cols)
            field += np.exp(-((grid_rows - center_row) ** 2 + (grid_cols - center_col) ** 2) / (2 * width**2))
        maps[material] = field
    maps /= maps.sum(axis=0, keepdims=True)

    wavelengths = np.linspace(0.0, 1.0, bands)
    endmembers = np.empty((R, bands))
    for material in range(R):
        spectrum = np.full(bands, 0.1)
        for _ in range(2):
            peak, width = rng.uniform(0.0, 1.0), rng.uniform(0.1, 0.3)
            spectrum += rng.uniform(0.3, 0.8) * np.exp(-((wavelengths - peak) ** 2) / (2 * width**2))
        endmembers[material] = spectrum
    return AbundanceSet(maps, endmembers, normalized=True)


@dataclasses.dataclass(frozen=True)
class SceneDims:
    """Spatial and spectral sizes of a coupled LL1 scene."""

    I_H: int
    J_H: int
    K_H: int
    I_M: int
    J_M: int
    K_M: int


@dataclasses.dataclass(frozen=True)
class Ll1Conditions:
    """The four dimension inequalities of the MSR recoverability result.

    Attributes:
        hsi_size (bool): ``I_H J_H >= L_H^2 R``.
        msi_size (bool): ``I_M J_M >= L_M^2 R``.
        hsi_kruskal (bool): ``min(I_H // L_H, R) + min(J_H // L_H, R) + min(K_H, R) >= 2R + 2``.
        msi_kruskal (bool): Same inequality for the MSI.
    """

    hsi_size: bool
    msi_size: bool
    hsi_kruskal: bool
    msi_kruskal: bool

    @property
    def all_satisfied(self) -> bool:
        """bool: True when every inequality holds."""
        return all(dataclasses.astuple(self))


def check_ll1_conditions(dims: SceneDims, L_H: int, L_M: int, R: int) -> Ll1Conditions:
    """Evaluates the dimension conditions of the MSR recoverability result.

    Example:
        >>> dims = SceneDims(24, 24, 20, 48, 48, 4)
        >>> check_ll1_conditions(dims, 2, 3, 3).all_satisfied
        True
    """

    def kruskal(I, J, K, L):
        return min(I // L, R) + min(J // L, R) + min(K, R) >= 2 * R + 2

    return Ll1Conditions(
        hsi_size=dims.I_H * dims.J_H >= L_H**2 * R,
        msi_size=dims.I_M * dims.J_M >= L_M**2 * R,
        hsi_kruskal=kruskal(dims.I_H, dims.J_H, dims.K_H, L_H),
        msi_kruskal=kruskal(dims.I_M, dims.J_M, dims.K_M, L_M),
    )


@dataclasses.dataclass(frozen=True)
class Ll1Scene:
    """Generated coupled LL1 scene.

    Attributes:
        hsi_model (:class:`Ll1Model`): HSI factors with endmembers ``c_r^H``.
        msi_model (:class:`Ll1Model`): MSI factors with endmembers ``P c_r^H``.
        degradation (:class:`DegradationSpec`): Spectral response used.
        conditions (:class:`Ll1Conditions`): Dimension conditions.
        sum_violation (float): Largest per-pixel deviation from sum-to-one over
            both images.
        projection_converged (bool): Whether the alternating projection reached
            its tolerance.
    """

    hsi_model: Ll1Model
    msi_model: Ll1Model
    degradation: DegradationSpec
    conditions: Ll1Conditions
    sum_violation: float
    projection_converged: bool

    @property
    def warning(self) -> bool:
        """bool: True when a recoverability condition is violated."""
        return not self.conditions.all_satisfied

    def sri_msi(self) -> SpectralCube:
        """Returns the MSI-region super-resolution image ``sum_r S_r^M o c_r^H``."""
        maps = np.stack([factor.abundance() for factor in self.msi_model.factors])
        endmembers = np.stack([factor.c for factor in self.hsi_model.factors])
        return SpectralCube(np.einsum("rij,rk->ijk", maps, endmembers))


def _refit_low_rank(maps: np.ndarray, L: int) -> tuple[np.ndarray, np.ndarray]:
    """Truncated factorization of every map with the factors clamped to be nonnegative."""
    A = np.empty((maps.shape[0], maps.shape[1], L))
    B = np.empty((maps.shape[0], maps.shape[2], L))
    for material, matrix in enumerate(maps):
        U, sigma, Vt = np.linalg.svd(matrix, full_matrices=False)
        left = U[:, :L] * np.sqrt(sigma[:L])
        right = Vt[:L].T * np.sqrt(sigma[:L])
        signs = np.where(left.sum(axis=0) < 0, -1.0, 1.0)
        A[material] = np.maximum(left * signs, 0.0)
        B[material] = np.maximum(right * signs, 0.0)
    return A, B


def _project_sum_to_one(A: np.ndarray, B: np.ndarray, iterations: int, tolerance: float):
    """Alternates per-pixel normalization and nonnegative rank-``L`` refits."""
    L = A.shape[2]
    for iteration in range(iterations + 1):
        maps = np.einsum("ril,rjl->rij", A, B)
        violation = float(np.max(np.abs(maps.sum(axis=0) - 1.0)))
        if violation <= tolerance:
            return A, B, violation, True
        if iteration == iterations:
            break
        A, B = _refit_low_rank(maps / np.maximum(maps.sum(axis=0, keepdims=True), 1e-12), L)
    logger.warning(
        "Sum-to-one projection stopped after %d iterations with violation %.3e.", iterations, violation
    )
    return A, B, violation, False


def synth_ll1_scene(
    seed: int,
    dims: SceneDims,
    L_H: int,
    L_M: int,
    R: int,
    projection_iters: int = 50,
    tolerance: float = 1e-6,
) -> Ll1Scene:
    """Draws a coupled LL1 scene with shared endmembers.

    Factors and endmembers are i.i.d. uniform on ``(0, 1)``. The abundances are
    then pushed towards the sum-to-one constraint by alternating per-pixel
    normalization with nonnegative rank-``L`` refits, capped at
    ``projection_iters`` rounds.

    Args:
        seed (int): Random seed.
        dims (:class:`SceneDims`): Image sizes.
        L_H (int): HSI rank cap.
        L_M (int): MSI rank cap.
        R (int): Number of materials.
        projection_iters (int, optional): Projection round cap. Defaults to 50.
        tolerance (float, optional): Sum-to-one tolerance. Defaults to 1e-6.

    Raises:
        InvalidSpecError: If ``K_M >= K_H``.

    Returns:
        :class:`Ll1Scene`: The generated scene; ``warning`` is set when a
        recoverability condition is violated.
    """
    rng = np.random.default_rng(seed)
    conditions = check_ll1_conditions(dims, L_H, L_M, R)
    if not conditions.all_satisfied:
        logger.warning("Recoverability conditions violated: %s", conditions)

    P = build_pm(dims.K_H, dims.K_M)
    endmembers = rng.uniform(0.0, 1.0, (R, dims.K_H))

    sides = {}
    converged = True
    violation = 0.0
    for name, (I, J, L) in {"hsi": (dims.I_H, dims.J_H, L_H), "msi": (dims.I_M, dims.J_M, L_M)}.items():
        A = rng.uniform(0.0, 1.0, (R, I, L))
        B = rng.uniform(0.0, 1.0, (R, J, L))
        A, B, side_violation, side_converged = _project_sum_to_one(A, B, projection_iters, tolerance)
        sides[name] = (A, B)
        converged = converged and side_converged
        violation = max(violation, side_violation)

    hsi_model = Ll1Model(tuple(Ll1Factor(A, B, c) for A, B, c in zip(*sides["hsi"], endmembers)))
    msi_model = Ll1Model(tuple(Ll1Factor(A, B, P @ c) for A, B, c in zip(*sides["msi"], endmembers)))
    return Ll1Scene(
        hsi_model=hsi_model,
        msi_model=msi_model,
        degradation=DegradationSpec(P, SpatialKind.GAUSSIAN, max(1, dims.I_M // dims.I_H)),
        conditions=conditions,
        sum_violation=violation,
        projection_converged=converged,
    )


_BASIS_TERMS = (
    lambda u, v: np.ones_like(u),
    lambda u, v: u,
    lambda u, v: v,
    lambda u, v: u**2 + v**2,
    lambda u, v: u**2 - v**2,
    lambda u, v: u * v,
    lambda u, v: u**3,
    lambda u, v: u**2 * v,
    lambda u, v: u * v**2,
    lambda u, v: v**3,
)

_MAX_MAP_LATENT = 6


def _patch_basis(side: int, d: int) -> np.ndarray:
    """Polynomial basis sampled at pixel centers of a patch, in patch-side units."""
    offsets = (np.arange(side, dtype=np.float64) + 0.5 - side / 2.0) / side
    u, v = np.meshgrid(offsets, offsets, indexing="ij")
    return np.stack([term(u, v).ravel() for term in _BASIS_TERMS[:d]], axis=1)


@dataclasses.dataclass(frozen=True)
class LatentPatchModel:
    """Toy generative model of co-located HSI/MSI abundance patches.

    A latent ``z`` is mapped to a patch by ``g(z) = expit(E W z)`` where ``W``
    is an invertible mixing matrix and ``E`` samples smooth polynomial basis
    images on the patch grid. ``E_H`` and ``E_M`` sample the same basis on the
    ``B_H`` and ``B_M = s B_H`` grids, so ``g_M o g_H^-1`` is a true
    super-resolution map.

    Attributes:
        d (int): Latent dimension.
        R (int): Number of materials.
        B_H (int): HSI patch side.
        scale (int): Upscaling factor ``s``.
        mixing (numpy.ndarray): ``d x d`` invertible mixing ``W``.
        basis_hsi (numpy.ndarray): ``B_H^2 x d`` lift ``E_H``.
        basis_msi (numpy.ndarray): ``B_M^2 x d`` lift ``E_M``.
        left_inverse_hsi (numpy.ndarray): Left inverse of ``E_H``.
        left_inverse_msi (numpy.ndarray): Left inverse of ``E_M``.
        means (numpy.ndarray): ``R x d`` latent means ``mu_r``.
        scales (numpy.ndarray): ``R x d`` latent standard deviations.
        theta_gain (float): Amplitude of the rotation-dependent mean shift.
    """

    d: int
    R: int
    B_H: int
    scale: int
    mixing: np.ndarray
    basis_hsi: np.ndarray
    basis_msi: np.ndarray
    left_inverse_hsi: np.ndarray
    left_inverse_msi: np.ndarray
    means: np.ndarray
    scales: np.ndarray
    theta_gain: float = 0.5

    @property
    def B_M(self) -> int:
        """int: MSI patch side."""
        return self.B_H * self.scale

    def hsi_patches(self, z: np.ndarray) -> np.ndarray:
        """Applies ``g_H`` to ``... x d`` latents, returning ``... x B_H x B_H`` patches."""
        return self._generate(z, self.basis_hsi, self.B_H)

    def msi_patches(self, z: np.ndarray) -> np.ndarray:
        """Applies ``g_M`` to ``... x d`` latents, returning ``... x B_M x B_M`` patches."""
        return self._generate(z, self.basis_msi, self.B_M)

    def _generate(self, z, basis, side):
        z = np.asarray(z, dtype=np.float64)
        activations = np.einsum("pk,...k->...p", basis, z @ self.mixing.T)
        return special.expit(activations).reshape(z.shape[:-1] + (side, side))

    def invert_hsi(self, patches: np.ndarray) -> np.ndarray:
        """Applies ``g_H^-1`` to ``... x B_H x B_H`` patches."""
        patches = np.asarray(patches, dtype=np.float64)
        flat = special.logit(patches.reshape(patches.shape[:-2] + (-1,)))
        coefficients = np.einsum("kp,...p->...k", self.left_inverse_hsi, flat)
        return np.linalg.solve(self.mixing, coefficients[..., None])[..., 0]

    def invert_msi(self, patches: np.ndarray) -> np.ndarray:
        """Applies ``g_M^-1`` to ``... x B_M x B_M`` patches."""
        patches = np.asarray(patches, dtype=np.float64)
        flat = special.logit(patches.reshape(patches.shape[:-2] + (-1,)))
        coefficients = np.einsum("kp,...p->...k", self.left_inverse_msi, flat)
        return np.linalg.solve(self.mixing, coefficients[..., None])[..., 0]

    def oracle_translate(self, hsi_patches: np.ndarray) -> np.ndarray:
        """The ideal translator ``f* = g_M o g_H^-1``."""
        return self.msi_patches(self.invert_hsi(hsi_patches))

    def sample_latents(self, material: int, thetas: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Draws one latent per angle from the density of ``material``.

        Args:
            material (int): Material index.
            thetas (numpy.ndarray): Patch rotations in degrees.
            rng (numpy.random.Generator): Random generator.

        Returns:
            numpy.ndarray: ``n x d`` latents.
        """
        thetas = np.radians(np.asarray(thetas, dtype=np.float64))
        mean = np.broadcast_to(self.means[material], (len(thetas), self.d)).copy()
        mean[:, 0] += self.theta_gain * np.cos(thetas)
        if self.d > 1:
            mean[:, 1] += self.theta_gain * np.sin(thetas)
        return mean + rng.standard_normal((len(thetas), self.d)) * self.scales[material]

    def hsi_batch(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draws ``R x n x B_H x B_H`` HSI patches sharing one angle per draw."""
        thetas = rng.uniform(0.0, 360.0, n)
        return np.stack([self.hsi_patches(self.sample_latents(r, thetas, rng)) for r in range(self.R)])

    def msi_batch(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draws ``R x n x B_M x B_M`` MSI patches, independent of the HSI draws."""
        thetas = rng.uniform(0.0, 360.0, n)
        return np.stack([self.msi_patches(self.sample_latents(r, thetas, rng)) for r in range(self.R)])

    def abundance_maps(
        self, size: int, seed: int, bands: int = 10
    ) -> tuple[AbundanceSet, AbundanceSet]:
        """Builds full HSI/MSI abundance maps whose every window follows the model.

        Each material gets one global polynomial field in the span of the
        patch basis. The span is closed under translation for ``d <= 6``, so
        every axis-aligned ``B_H`` window of the HSI map is ``g_H(z)`` for some
        ``z`` and ``f*`` maps it onto the matching window of the MSI map.

        Args:
            size (int): HSI map side; the MSI map side is ``size * s``.
            seed (int): Random seed.
            bands (int, optional): Length of the random endmembers. Defaults to 10.

        Raises:
            InvalidSpecError: If ``d`` exceeds 6.

        Returns:
            tuple[AbundanceSet, AbundanceSet]: HSI and MSI abundance sets sharing
            their endmembers.
        """
        if self.d > _MAX_MAP_LATENT:
            raise InvalidSpecError(f"Full maps need d <= {_MAX_MAP_LATENT}, got {self.d}.")
        rng = np.random.default_rng(seed)

        def coordinates(points, pixel):
            offsets = (np.arange(points, dtype=np.float64) + 0.5) * pixel - size / 2.0
            return np.meshgrid(offsets / self.B_H, offsets / self.B_H, indexing="ij")

        grids = {"hsi": coordinates(size, 1.0), "msi": coordinates(size * self.scale, 1.0 / self.scale)}
        maps = {"hsi": [], "msi": []}
        for material in range(self.R):
            weights = rng.standard_normal(self.d)
            raw_hsi = sum(w * term(*grids["hsi"]) for w, term in zip(weights, _BASIS_TERMS))
            gain = 1.5 / max(float(np.std(raw_hsi)), 1e-12)
            offset = float(self.means[material] @ self.mixing[0]) - gain * float(np.mean(raw_hsi))
            for name, (u, v) in grids.items():
                raw = sum(w * term(u, v) for w, term in zip(weights, _BASIS_TERMS))
                maps[name].append(special.expit(gain * raw + offset))

        endmembers = rng.uniform(0.1, 1.0, (self.R, bands))
        return (
            AbundanceSet(np.stack(maps["hsi"]), endmembers),
            AbundanceSet(np.stack(maps["msi"]), endmembers),
        )


def synth_patch_model(seed: int, d: int, R: int, B_H: int, s: int) -> LatentPatchModel:
    """Draws a latent patch model with well-separated material densities.

    Args:
        seed (int): Random seed.
        d (int): Latent dimension, at most ``B_H^2`` and at most 10.
        R (int): Number of materials.
        B_H (int): HSI patch side.
        s (int): Upscaling factor.

    Raises:
        InvalidSpecError: If the latent dimension is too large.

    Returns:
        :class:`LatentPatchModel`: The generated model.
    """
    if d > B_H**2 or d > len(_BASIS_TERMS) or d < 1:
        raise InvalidSpecError(f"Latent dimension {d} is not supported for {B_H}x{B_H} patches.")
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    mixing = Q * rng.uniform(0.5, 2.0, d)

    basis_hsi = _patch_basis(B_H, d)
    basis_msi = _patch_basis(B_H * s, d)
    if np.linalg.matrix_rank(basis_hsi) < d:
        raise InvalidSpecError(f"Patch basis is rank deficient for d={d}, B_H={B_H}.")

    direction = rng.standard_normal(d)
    direction /= np.linalg.norm(direction)
    means = np.outer(2.5 * (np.arange(R) - (R - 1) / 2.0), direction)
    scales = rng.uniform(0.3, 0.6, (R, d))
    return LatentPatchModel(
        d=d,
        R=R,
        B_H=B_H,
        scale=s,
        mixing=mixing,
        basis_hsi=basis_hsi,
        basis_msi=basis_msi,
        left_inverse_hsi=np.linalg.pinv(basis_hsi),
        left_inverse_msi=np.linalg.pinv(basis_msi),
        means=means,
        scales=scales,
    )
