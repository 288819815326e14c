"""On-disk formats: FCUB spectral cubes, FRTS translator checkpoints, text
matrices and PPM previews.

FCUB layout (all little-endian)::

    offset  0  magic   b"FCUB"
    offset  4  u16     format version
    offset  6  u16     rank (always 3)
    offset  8  u64 x3  rows, cols, bands
    offset 32  f64 x (rows * cols * bands), row-major, band index fastest

FRTS layout::

    offset  0  magic   b"FRTS"
    offset  4  u16     format version
    offset  6  u32     manifest length M
    offset 10  M bytes UTF-8 JSON manifest (architecture, training parameters,
               history and the name, shape and dtype of every tensor)
    offset 10+M        f64 payload of every tensor in manifest order
"""

import dataclasses
import json
import logging
import math
import pathlib
import struct

import numpy as np
import torch

from .adversarial import HsrConfig, TranslatorState, new_state
from .exceptions import TensorFormatError
from .networks import NetSpec
from .tensor_core import SpectralCube

logger = logging.getLogger(__name__)

CUBE_MAGIC = b"FCUB"
CUBE_VERSION = 1
_CUBE_HEADER = struct.Struct("<4sHHQQQ")

CHECKPOINT_MAGIC = b"FRTS"
CHECKPOINT_VERSION = 1
_CHECKPOINT_HEADER = struct.Struct("<4sHI")

_TORCH_DTYPES = {"float64": torch.float64, "float32": torch.float32, "int64": torch.int64}


def write_tensor(path: pathlib.Path | str, cube: SpectralCube):
    """Writes a cube in the FCUB format.

    Args:
        path (pathlib.Path | str): Destination file.
        cube (:class:`SpectralCube`): Cube to write.
    """
    path = pathlib.Path(path)
    header = _CUBE_HEADER.pack(CUBE_MAGIC, CUBE_VERSION, 3, *cube.shape)
    path.write_bytes(header + cube.array.astype("<f8", order="C").tobytes())
    logger.debug("Wrote %s cube to %s.", cube.shape, path)


def read_tensor(path: pathlib.Path | str) -> SpectralCube:
    """Reads an FCUB cube.

    Example:
        >>> write_tensor("y.fcub", cube)
        >>> np.array_equal(read_tensor("y.fcub").array, cube.array)
        True

    Args:
        path (pathlib.Path | str): Source file.

    Raises:
        TensorFormatError: If the header is malformed or the payload size does
            not match the declared dimensions; the message names the byte offset.

    Returns:
        :class:`SpectralCube`: The cube.
    """
    path = pathlib.Path(path)
    data = path.read_bytes()
    if len(data) < _CUBE_HEADER.size:
        raise TensorFormatError(
            f"{path}: header truncated at byte offset {len(data)}, expected {_CUBE_HEADER.size} header bytes."
        )
    magic, version, rank, rows, cols, bands = _CUBE_HEADER.unpack_from(data)
    if magic != CUBE_MAGIC:
        raise TensorFormatError(f"{path}: bad magic {magic!r} at byte offset 0, expected {CUBE_MAGIC!r}.")
    if version != CUBE_VERSION:
        raise TensorFormatError(f"{path}: unsupported format version {version} at byte offset 4.")
    if rank != 3:
        raise TensorFormatError(f"{path}: unsupported rank {rank} at byte offset 6, expected 3.")

    expected = rows * cols * bands * 8
    actual = len(data) - _CUBE_HEADER.size
    if expected != actual:
        raise TensorFormatError(
            f"{path}: payload at byte offset {_CUBE_HEADER.size} holds {actual} bytes, "
            f"expected {expected} bytes for dims {(rows, cols, bands)}."
        )
    values = np.frombuffer(data, dtype="<f8", offset=_CUBE_HEADER.size).reshape(rows, cols, bands)
    return SpectralCube(values)


def write_matrix(path: pathlib.Path | str, matrix: np.ndarray):
    """Writes a matrix as whitespace-separated text with full precision."""
    np.savetxt(pathlib.Path(path), np.atleast_2d(np.asarray(matrix, dtype=np.float64)), fmt="%.17g")


def read_matrix(path: pathlib.Path | str) -> np.ndarray:
    """Reads a whitespace-separated text matrix; ``#`` starts a comment.

    Raises:
        TensorFormatError: If the file is not a rectangular numeric matrix.
    """
    path = pathlib.Path(path)
    try:
        return np.loadtxt(path, dtype=np.float64, ndmin=2, comments="#")
    except ValueError as error:
        raise TensorFormatError(f"{path}: not a numeric matrix: {error}") from error


def write_ppm(path: pathlib.Path | str, cube: SpectralCube, bands: tuple[int, int, int]):
    """Writes an 8-bit binary PPM preview from three bands.

    Each band is stretched independently from its minimum to its maximum.

    Raises:
        IndexError: If a band index is out of range.
    """
    channels = []
    for band in bands:
        if not 0 <= band < cube.bands:
            raise IndexError(f"Band {band} is out of range for a cube with {cube.bands} bands.")
        image = cube.band(band)
        low, high = float(image.min()), float(image.max())
        span = high - low if high > low else 1.0
        channels.append(np.round((image - low) / span * 255.0))
    pixels = np.stack(channels, axis=-1).astype(np.uint8)
    header = f"P6\n{cube.cols} {cube.rows}\n255\n".encode("ascii")
    pathlib.Path(path).write_bytes(header + pixels.tobytes())


def _checkpoint_tensors(state: TranslatorState) -> list[tuple[str, torch.Tensor]]:
    tensors = []
    for prefix, module in (("f", state.f), ("g", state.g), ("d", state.d)):
        tensors += [(f"{prefix}.{name}", value) for name, value in module.state_dict().items()]
    for prefix, optimizer in (
        ("generator_optimizer", state.generator_optimizer),
        ("discriminator_optimizer", state.discriminator_optimizer),
    ):
        for index, slots in sorted(optimizer.state_dict()["state"].items()):
            for slot, value in sorted(slots.items()):
                tensors.append((f"{prefix}.{index}.{slot}", torch.as_tensor(value)))
    return tensors


def save_checkpoint(path: pathlib.Path | str, state: TranslatorState):
    """Writes a :class:`TranslatorState` in the FRTS format."""
    tensors = _checkpoint_tensors(state)
    manifest = {
        "netspec": dataclasses.asdict(state.netspec),
        "config": dataclasses.asdict(state.config),
        "shared": state.shared,
        "iteration": state.iteration,
        "history": [list(entry) for entry in state.history],
        "tensors": [
            {"name": name, "shape": list(value.shape), "dtype": str(value.dtype).removeprefix("torch.")}
            for name, value in tensors
        ],
    }
    manifest_bytes = json.dumps(manifest, sort_keys=True).encode("utf-8")
    payload = b"".join(
        value.detach().cpu().to(torch.float64).numpy().astype("<f8").tobytes() for _, value in tensors
    )
    header = _CHECKPOINT_HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(manifest_bytes))
    pathlib.Path(path).write_bytes(header + manifest_bytes + payload)
    logger.info("Saved checkpoint with %d tensors to %s.", len(tensors), path)


def load_checkpoint(path: pathlib.Path | str) -> TranslatorState:
    """Reads an FRTS checkpoint written by :func:`save_checkpoint`.

    Raises:
        TensorFormatError: If the file is malformed; the message names the byte offset.

    Returns:
        :class:`TranslatorState`: The restored state, networks in training mode.
    """
    path = pathlib.Path(path)
    data = path.read_bytes()
    if len(data) < _CHECKPOINT_HEADER.size:
        raise TensorFormatError(f"{path}: header truncated at byte offset {len(data)}.")
    magic, version, manifest_length = _CHECKPOINT_HEADER.unpack_from(data)
    if magic != CHECKPOINT_MAGIC:
        raise TensorFormatError(f"{path}: bad magic {magic!r} at byte offset 0, expected {CHECKPOINT_MAGIC!r}.")
    if version != CHECKPOINT_VERSION:
        raise TensorFormatError(f"{path}: unsupported format version {version} at byte offset 4.")
    offset = _CHECKPOINT_HEADER.size
    if len(data) < offset + manifest_length:
        raise TensorFormatError(f"{path}: manifest at byte offset {offset} is truncated.")
    try:
        manifest = json.loads(data[offset : offset + manifest_length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as error:
        raise TensorFormatError(f"{path}: unreadable manifest at byte offset {offset}: {error}") from error
    offset += manifest_length

    entries = manifest["tensors"]
    expected = sum(8 * math.prod(entry["shape"]) for entry in entries)
    if len(data) - offset != expected:
        raise TensorFormatError(
            f"{path}: payload at byte offset {offset} holds {len(data) - offset} bytes, expected {expected}."
        )

    tensors = {}
    for entry in entries:
        count = math.prod(entry["shape"])
        values = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(entry["shape"])
        tensors[entry["name"]] = torch.from_numpy(values.copy()).to(_TORCH_DTYPES[entry["dtype"]])
        offset += 8 * count

    netspec = NetSpec(**manifest["netspec"])
    config = HsrConfig(**manifest["config"])
    state = new_state(netspec, config, config.seed, manifest["shared"])
    for prefix, module in (("f", state.f), ("g", state.g), ("d", state.d)):
        module.load_state_dict(
            {name.removeprefix(f"{prefix}."): value for name, value in tensors.items() if name.startswith(f"{prefix}.")}
        )
    for prefix, optimizer in (
        ("generator_optimizer", state.generator_optimizer),
        ("discriminator_optimizer", state.discriminator_optimizer),
    ):
        saved = optimizer.state_dict()
        for name, value in tensors.items():
            if name.startswith(f"{prefix}."):
                _, index, slot = name.split(".")
                saved["state"].setdefault(int(index), {})[slot] = value
        optimizer.load_state_dict(saved)
    state.iteration = manifest["iteration"]
    state.history = [tuple(entry) for entry in manifest["history"]]
    return state
