"""Run configuration: defaults, the ``key = value`` file format and typed sections.

A run configuration file holds one ``section.field = value`` entry per line,
``#`` starts a comment::

    # small synthetic run
    msr.lambda_lr = 1e-3
    hsr.t_max = 200
    scene.kind = scene

Every key is parsed with the type of the matching field and validated by the
section dataclass; unknown keys are rejected.
"""

import copy
import dataclasses
import logging
import pathlib

from typing import Any

from . import frescoconfig
from .adversarial import HsrConfig
from .degradation import DegradationSpec, SceneDims, SceneSpec, SpatialKind, Window, build_pm
from .exceptions import ConfigError, FrescoError
from .networks import NetSpec
from .pm_estimator import PmEstimatorConfig, banded_omega, read_omega
from .tensor_core import SpectralCube
from .unmixing import STEP_RULES, MsrConfig

logger = logging.getLogger(__name__)

SCENE_KINDS = ("scene", "ll1", "patch")
OMEGA_SHORTHANDS = ("banded", "none")


def get_fresco_config() -> dict[str, dict[str, Any]]:
    """Gets a copy of the default run settings.

    Returns:
        dict[str, dict[str, Any]]: One mapping of field defaults per section.
    """
    return copy.deepcopy(frescoconfig.fresco)


@dataclasses.dataclass(frozen=True)
class SceneConfig:
    """Synthetic data generation parameters.

    Attributes:
        kind (str): ``scene`` (unregistered pair cut from a smooth source
            cube), ``ll1`` (coupled LL1 factors) or ``patch`` (latent patch model).
        source_rows (int): Source cube height.
        source_cols (int): Source cube width.
        bands (int): HSI band count ``K_H``.
        msi_bands (int): MSI band count ``K_M``.
        materials (int): Number of materials ``R``.
        scale (int): Downsampling factor ``s``.
        spatial_kind (str): Spatial degradation operator.
        kernel_size (int): Gaussian kernel side.
        sigma (float): Gaussian kernel width.
        msi_row (int): Top row of the MSI window.
        msi_col (int): Left column of the MSI window.
        msi_size (int): Side of the MSI window.
        hsi_row (int): Top row of the HSI window before the shift.
        hsi_col (int): Left column of the HSI window before the shift.
        hsi_size (int): Side of the HSI window, divisible by ``scale``.
        shift_t (int): Diagonal shift of the HSI window.
        hsi_rotation_deg (float): HSI region rotation.
        msi_rotation_deg (float): MSI region rotation.
        noise_sigma (float): Additive noise level.
        latent_dim (int): Latent dimension of the ``patch`` kind.
    """

    kind: str = "scene"
    source_rows: int = 96
    source_cols: int = 96
    bands: int = 20
    msi_bands: int = 4
    materials: int = 3
    scale: int = 4
    spatial_kind: str = "gaussian"
    kernel_size: int = 5
    sigma: float = 1.7
    msi_row: int = 16
    msi_col: int = 16
    msi_size: int = 48
    hsi_row: int = 16
    hsi_col: int = 16
    hsi_size: int = 48
    shift_t: int = 8
    hsi_rotation_deg: float = 0.0
    msi_rotation_deg: float = 0.0
    noise_sigma: float = 0.0
    latent_dim: int = 4

    def __post_init__(self):
        self.validate()

    def validate(self):
        """Raises :class:`ConfigError` when a field is out of range."""
        if self.kind not in SCENE_KINDS:
            raise ConfigError(f"scene.kind must be one of {SCENE_KINDS}, got {self.kind!r}.")
        if self.spatial_kind not in tuple(SpatialKind):
            raise ConfigError(f"scene.spatial_kind must be one of {tuple(map(str, SpatialKind))}.")
        for name in ("source_rows", "source_cols", "bands", "msi_bands", "materials", "scale",
                     "kernel_size", "msi_size", "hsi_size", "latent_dim"):
            if getattr(self, name) < 1:
                raise ConfigError(f"scene.{name} must be positive, got {getattr(self, name)}.")
        if self.msi_bands >= self.bands:
            raise ConfigError(f"scene.msi_bands ({self.msi_bands}) must be below scene.bands ({self.bands}).")
        if self.hsi_size % self.scale:
            raise ConfigError(f"scene.hsi_size ({self.hsi_size}) must be divisible by scene.scale ({self.scale}).")
        if self.sigma <= 0 or self.noise_sigma < 0:
            raise ConfigError("scene.sigma must be positive and scene.noise_sigma nonnegative.")

    def degradation(self) -> DegradationSpec:
        """Returns the banded spectral response and the spatial operator."""
        return DegradationSpec(
            build_pm(self.bands, self.msi_bands), SpatialKind(self.spatial_kind), self.scale,
            self.kernel_size, self.sigma,
        )

    def scene_spec(self, source: SpectralCube, noise_seed: int = 0) -> SceneSpec:
        """Returns the unregistered pair construction for ``source``."""
        return SceneSpec(
            source=source,
            msi_window=Window(self.msi_row, self.msi_row + self.msi_size, self.msi_col, self.msi_col + self.msi_size),
            hsi_window=Window(self.hsi_row, self.hsi_row + self.hsi_size, self.hsi_col, self.hsi_col + self.hsi_size),
            hsi_shift_t=self.shift_t,
            hsi_rotation_deg=self.hsi_rotation_deg,
            degradation=self.degradation(),
            msi_rotation_deg=self.msi_rotation_deg,
            noise_sigma=self.noise_sigma,
            noise_seed=noise_seed,
        )

    def ll1_dims(self) -> SceneDims:
        """Returns the image sizes of the ``ll1`` kind."""
        low = self.hsi_size // self.scale
        return SceneDims(low, low, self.bands, self.msi_size, self.msi_size, self.msi_bands)


_SECTIONS = {
    "msr": MsrConfig,
    "hsr": HsrConfig,
    "pm": PmEstimatorConfig,
    "scene": SceneConfig,
    "net": NetSpec,
}

_CHOICES = {
    ("msr", "step_rule"): STEP_RULES,
    ("scene", "kind"): SCENE_KINDS,
    ("scene", "spatial_kind"): tuple(str(kind) for kind in SpatialKind),
}


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_int(text: str) -> int:
    value = float(text) if any(c in text.lower() for c in ".e") else int(text)
    if isinstance(value, float):
        if not value.is_integer():
            raise ValueError(f"expected an integer, got {text!r}")
        value = int(value)
    return value


_PARSERS = {int: _parse_int, float: float, bool: _parse_bool, str: str}


def _schema() -> dict[str, dict[str, Any]]:
    """Maps every ``section.field`` key to its value parser."""
    schema = {}
    for section, cls in _SECTIONS.items():
        for field in dataclasses.fields(cls):
            if field.name == "omega":
                schema[f"{section}.{field.name}"] = str
            else:
                schema[f"{section}.{field.name}"] = _PARSERS[field.type]
    return schema


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Complete configuration of a run.

    Attributes:
        msr (:class:`MsrConfig`): Unmixing parameters.
        hsr (:class:`HsrConfig`): Adversarial training parameters.
        pm (:class:`PmEstimatorConfig`): Response estimator parameters, without ``omega``.
        scene (:class:`SceneConfig`): Synthetic data parameters.
        net (:class:`NetSpec`): Network architecture.
        omega (str): ``banded``, ``none`` or the path of a ``row col`` file.
    """

    msr: MsrConfig = dataclasses.field(default_factory=MsrConfig)
    hsr: HsrConfig = dataclasses.field(default_factory=HsrConfig)
    pm: PmEstimatorConfig = dataclasses.field(default_factory=PmEstimatorConfig)
    scene: SceneConfig = dataclasses.field(default_factory=SceneConfig)
    net: NetSpec = dataclasses.field(default_factory=NetSpec)
    omega: str = "banded"

    def __post_init__(self):
        self.validate()

    def validate(self):
        """Checks the constraints linking the sections.

        Raises:
            ConfigError: If the material counts or scales disagree.
        """
        if self.net.R != self.msr.R:
            raise ConfigError(f"net.R ({self.net.R}) must equal msr.R ({self.msr.R}).")
        if self.scene.materials != self.msr.R:
            raise ConfigError(f"scene.materials ({self.scene.materials}) must equal msr.R ({self.msr.R}).")
        if self.net.scale != self.scene.scale:
            raise ConfigError(f"net.scale ({self.net.scale}) must equal scene.scale ({self.scene.scale}).")

    @classmethod
    def from_mapping(cls, values: dict[str, dict[str, Any]]) -> "RunConfig":
        """Builds a configuration from per-section field mappings.

        Raises:
            ConfigError: If a section fails validation.
        """
        sections = {}
        for section, section_cls in _SECTIONS.items():
            fields = dict(values.get(section, {}))
            omega = fields.pop("omega", None) if section == "pm" else None
            if omega is not None:
                sections["omega"] = omega
            try:
                sections[section] = section_cls(**fields)
            except ConfigError:
                raise
            except (FrescoError, TypeError) as error:
                raise ConfigError(f"Invalid [{section}] settings: {error}") from error
        return cls(**sections)

    @classmethod
    def default(cls) -> "RunConfig":
        """Returns the configuration built from :func:`get_fresco_config`."""
        return cls.from_mapping(get_fresco_config())

    def to_mapping(self) -> dict[str, dict[str, Any]]:
        """Returns the per-section field mappings."""
        values = {section: dataclasses.asdict(getattr(self, section)) for section in _SECTIONS}
        values["pm"]["omega"] = self.omega
        return values

    def to_text(self) -> str:
        """Serializes the configuration in the run configuration file format."""
        lines = ["# fresco run configuration"]
        for section, fields in self.to_mapping().items():
            lines.append("")
            for name, value in fields.items():
                lines.append(f"{section}.{name} = {_format_value(value)}")
        return "\n".join(lines) + "\n"

    def estimator_config(self, K_H: int, K_M: int) -> PmEstimatorConfig:
        """Returns the response estimator parameters with ``omega`` resolved.

        Raises:
            ConfigError: If the omega file cannot be read.
        """
        if self.omega == "banded":
            omega = banded_omega(K_H, K_M)
        elif self.omega == "none":
            omega = frozenset()
        else:
            path = pathlib.Path(self.omega)
            if not path.is_file():
                raise ConfigError(f"pm.omega: {path} is neither a shorthand {OMEGA_SHORTHANDS} nor a file.")
            omega = read_omega(path)
        return dataclasses.replace(self.pm, omega=omega)


def parse_run_config(text: str, source: str = "<string>") -> RunConfig:
    """Parses run configuration text on top of the defaults.

    Args:
        text (str): File content.
        source (str, optional): Name used in error messages.

    Raises:
        ConfigError: If a line is malformed, a key is unknown or duplicated, a
            value does not parse, or a section fails validation. Line errors
            name the source, the line number and the key.

    Returns:
        :class:`RunConfig`: The configuration.
    """
    schema = _schema()
    values = get_fresco_config()
    seen = {}
    for number, line in enumerate(text.splitlines(), start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        if "=" not in content:
            raise ConfigError(f"{source}:{number}: expected 'key = value', got {line.strip()!r}.")
        key, raw = (part.strip() for part in content.split("=", 1))
        if key not in schema:
            raise ConfigError(f"{source}:{number}: unknown key {key!r}.")
        if key in seen:
            raise ConfigError(f"{source}:{number}: key {key!r} already set on line {seen[key]}.")
        seen[key] = number
        section, name = key.split(".", 1)
        try:
            value = schema[key](raw)
        except ValueError as error:
            raise ConfigError(f"{source}:{number}: cannot parse {key!r}: {error}") from error
        choices = _CHOICES.get((section, name))
        if choices is not None and value not in choices:
            raise ConfigError(f"{source}:{number}: {key!r} must be one of {choices}, got {value!r}.")
        values[section][name] = value

    try:
        return RunConfig.from_mapping(values)
    except ConfigError as error:
        raise ConfigError(f"{source}: {error}") from error


def load_run_config(path: pathlib.Path | str | None) -> RunConfig:
    """Loads a run configuration file, or the defaults when ``path`` is None.

    Raises:
        ConfigError: See :func:`parse_run_config`; also raised when the file
            cannot be read.
    """
    if path is None:
        return RunConfig.default()
    path = pathlib.Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as error:
        raise ConfigError(f"Cannot read run configuration {path}: {error}") from error
    config = parse_run_config(text, str(path))
    logger.info("Loaded run configuration from %s.", path)
    return config
