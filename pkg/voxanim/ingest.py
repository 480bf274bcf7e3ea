"""Dense voxel grids from binvox files and procedural generators."""

import pathlib
from dataclasses import dataclass

import numpy as np

from .errors import (
    BinvoxDimensionError,
    BinvoxHeaderError,
    DepthRangeError,
    GridShapeError,
    ModelNotFoundError,
    ModelReadError,
    TruncatedRleError,
    UnknownColorModeError,
    UnknownPrimitiveError,
)

PRIMITIVES = {"sphere", "box_shell", "menger", "checker"}
COLOR_MODES = {"constant", "height", "hash"}
DEFAULT_COLOR = (200, 200, 200)
MAX_PRIMITIVE_DEPTH = 10
# next_pow2(3**6) = 1024 = 2**MAX_PRIMITIVE_DEPTH
MAX_MENGER_LEVEL = 6

HEIGHT_PALETTE = np.array(
    [
        (46, 52, 64, 255),
        (94, 129, 172, 255),
        (136, 192, 208, 255),
        (163, 190, 140, 255),
        (235, 203, 139, 255),
        (208, 135, 112, 255),
        (191, 97, 106, 255),
        (180, 142, 173, 255),
    ],
    dtype=np.uint8,
)


def next_pow2(n):
    return 1 << max(0, int(n - 1).bit_length())


@dataclass
class VoxelGrid:
    """Dense occupancy indexed ``occupancy[x, y, z]`` plus a color assignment.

    Colors are not stored densely; ``colors_at`` materializes them for the set
    voxels when a model is built.
    """

    resolution: int
    occupancy: np.ndarray
    color_mode: str = "hash"
    color: tuple = DEFAULT_COLOR

    def __post_init__(self):
        n = self.resolution
        if n < 1 or n & (n - 1):
            raise GridShapeError(f"Grid resolution {n} is not a power of two.")
        if self.occupancy.shape != (n, n, n):
            raise GridShapeError(
                f"Occupancy shape {self.occupancy.shape} does not match resolution {n}."
            )
        if self.color_mode not in COLOR_MODES:
            raise UnknownColorModeError(
                f"Unknown color mode '{self.color_mode}'. Use one of: "
                f"{', '.join(sorted(COLOR_MODES))}."
            )
        self.occupancy = self.occupancy.astype(bool, copy=False)

    @property
    def depth(self):
        return self.resolution.bit_length() - 1

    def count(self):
        return int(np.count_nonzero(self.occupancy))

    def reduced(self, depth):
        """Coarser grid of resolution 2**depth; a cell is set if any voxel it covers is."""
        if not 1 <= depth <= self.depth:
            raise DepthRangeError(
                f"Cannot reduce a depth-{self.depth} grid to depth {depth}."
            )
        occupancy = self.occupancy
        while occupancy.shape[0] > 1 << depth:
            m = occupancy.shape[0] // 2
            occupancy = occupancy.reshape(m, 2, m, 2, m, 2).any(axis=(1, 3, 5))
        return VoxelGrid(1 << depth, occupancy, color_mode=self.color_mode, color=self.color)

    def colors_at(self, coords):
        """RGBA colors (N, 4) uint8 for integer voxel coordinates (N, 3)."""
        coords = np.asarray(coords, dtype=np.int64).reshape(-1, 3)
        out = np.empty((len(coords), 4), dtype=np.uint8)
        if self.color_mode == "constant":
            out[:, :3] = self.color
            out[:, 3] = 255
        elif self.color_mode == "height":
            band = coords[:, 1] * len(HEIGHT_PALETTE) // self.resolution
            out[:] = HEIGHT_PALETTE[band]
        else:
            h = (
                (coords[:, 0] * 73856093) ^ (coords[:, 1] * 19349663) ^ (coords[:, 2] * 83492791)
            ) & 0xFFFFFF
            out[:, 0] = 64 + (h & 0xFF) % 192
            out[:, 1] = 64 + ((h >> 8) & 0xFF) % 192
            out[:, 2] = 64 + ((h >> 16) & 0xFF) % 192
            out[:, 3] = 255
        return out


def _read_header_line(data, pos):
    end = data.find(b"\n", pos)
    if end == -1:
        raise BinvoxHeaderError("binvox header ended before the 'data' line.")
    return data[pos:end].strip(), end + 1


def parse_binvox(data, color_mode="hash", color=DEFAULT_COLOR):
    """Decode a binvox v1 byte stream into a padded, power-of-two VoxelGrid.

    The RLE payload is (value, count) byte pairs. Voxels run with y fastest,
    then z, then x; a ``dim a b c`` header reshapes to ``[x][z][y]`` with
    extents (a, b, c). Non-power-of-two dims are padded with empty voxels at the
    high end of each axis.
    """
    line, pos = _read_header_line(data, 0)
    if not line.startswith(b"#binvox"):
        raise BinvoxHeaderError("Not a binvox file: missing '#binvox' header line.")
    version = line.split()[1:2]
    if version != [b"1"]:
        raise BinvoxHeaderError(f"Unsupported binvox version line {line!r}; expected '#binvox 1'.")

    # translate/scale place the mesh in binvox's own frame; the scene places
    # models here, so those lines are only checked for well-formedness
    expected_arity = {b"dim": 3, b"translate": 3, b"scale": 1}
    dims = None
    while True:
        line, pos = _read_header_line(data, pos)
        if not line:
            continue
        key, *values = line.split()
        if key == b"data":
            break
        if key not in expected_arity:
            raise BinvoxHeaderError(f"Unknown binvox header line {line!r}.")
        if len(values) != expected_arity[key]:
            raise BinvoxHeaderError(f"Malformed binvox header line {line!r}.")
        try:
            parsed = [int(v) if key == b"dim" else float(v) for v in values]
        except ValueError as e:
            raise BinvoxHeaderError(f"Malformed binvox header line {line!r}.") from e
        if key == b"dim":
            if min(parsed) < 1:
                raise BinvoxHeaderError(f"Invalid binvox dim line {line!r}.")
            dims = tuple(parsed)
    if dims is None:
        raise BinvoxHeaderError("binvox header has no 'dim' line.")

    payload = data[pos:]
    if len(payload) % 2:
        raise TruncatedRleError(
            f"binvox RLE payload has an odd length ({len(payload)} bytes); the last pair is cut off."
        )
    raw = np.frombuffer(payload, dtype=np.uint8)
    values, counts = raw[::2], raw[1::2]
    total = int(counts.sum(dtype=np.int64))
    expected = dims[0] * dims[1] * dims[2]
    if total < expected:
        raise TruncatedRleError(
            f"binvox RLE stream covers {total} voxels but dim {dims} needs {expected}."
        )
    if total > expected:
        raise BinvoxDimensionError(
            f"binvox RLE stream covers {total} voxels, more than dim {dims} allows ({expected})."
        )

    dense = np.repeat(values != 0, counts).reshape(dims).transpose(0, 2, 1)
    n = max(2, next_pow2(max(dims)))
    occupancy = np.zeros((n, n, n), dtype=bool)
    sx, sy, sz = dense.shape
    occupancy[:sx, :sy, :sz] = dense
    return VoxelGrid(n, occupancy, color_mode=color_mode, color=color)


def load_binvox(path, color_mode="hash", color=DEFAULT_COLOR):
    path = pathlib.Path(path)
    try:
        data = path.read_bytes()
    except FileNotFoundError as e:
        raise ModelNotFoundError(path) from e
    except OSError as e:
        raise ModelReadError(f"Could not read binvox file {path}: {e}") from e
    try:
        return parse_binvox(data, color_mode=color_mode, color=color)
    except (BinvoxHeaderError, BinvoxDimensionError, TruncatedRleError) as e:
        raise type(e)(f"{path}: {e}") from e


def _sphere(n):
    # voxel centers at (2i + 1 - n) / 2 from the cube center; integer math keeps
    # the shape exactly symmetric
    c = (2 * np.arange(n, dtype=np.int64) + 1 - n) ** 2
    yz = c[:, None] + c[None, :]
    occupancy = np.empty((n, n, n), dtype=bool)
    for x in range(n):
        occupancy[x] = c[x] + yz <= n * n
    return occupancy


def _box_shell(n):
    occupancy = np.zeros((n, n, n), dtype=bool)
    occupancy[[0, -1], :, :] = True
    occupancy[:, [0, -1], :] = True
    occupancy[:, :, [0, -1]] = True
    return occupancy


def _checker(n):
    parity = (np.arange(n) & 1).astype(bool)
    return ~(parity[:, None, None] ^ parity[None, :, None] ^ parity[None, None, :])


def _menger(level):
    size = 3 ** level
    n = max(2, next_pow2(size))
    coords = np.arange(size)
    solid = np.ones((size, size, size), dtype=bool)
    for k in range(level):
        middle = ((coords // 3 ** k) % 3 == 1).astype(np.uint8)
        centers = middle[:, None, None] + middle[None, :, None] + middle[None, None, :]
        solid &= centers < 2
    occupancy = np.zeros((n, n, n), dtype=bool)
    occupancy[:size, :size, :size] = solid
    return occupancy


def gen_primitive(kind, depth, color_mode="hash", color=DEFAULT_COLOR):
    """Generate a deterministic test grid.

    ``depth`` is log2 of the resolution for every kind except ``menger``, where
    it is the sponge level and the resolution is 3**level rounded up to a
    power of two.
    """
    if kind not in PRIMITIVES:
        raise UnknownPrimitiveError(
            f"Unknown primitive '{kind}'. Use one of: {', '.join(sorted(PRIMITIVES))}."
        )
    if not 1 <= depth <= MAX_PRIMITIVE_DEPTH:
        raise DepthRangeError(f"Primitive depth {depth} is outside [1, {MAX_PRIMITIVE_DEPTH}].")
    if kind == "menger":
        if depth > MAX_MENGER_LEVEL:
            raise DepthRangeError(
                f"Menger level {depth} needs more than 2**{MAX_PRIMITIVE_DEPTH} voxels per "
                f"axis; use a level up to {MAX_MENGER_LEVEL}."
            )
        occupancy = _menger(depth)
    else:
        n = 1 << depth
        occupancy = {"sphere": _sphere, "box_shell": _box_shell, "checker": _checker}[kind](n)
    return VoxelGrid(occupancy.shape[0], occupancy, color_mode=color_mode, color=color)
