"""Sparse voxel octree: node format, builder, validation, stats and the .svo codec.

Octant convention everywhere: ``octant = (bx << 2) | (by << 1) | bz`` where a
bit is set when the child occupies the upper half along that axis.
"""

import pathlib
import struct
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Optional

import numpy as np

from .errors import (
    BadMagicError,
    DepthRangeError,
    GridResolutionError,
    IndexOutOfRangeError,
    InvalidNodeError,
    ModelNotFoundError,
    ModelReadError,
    SvoFormatError,
    TrailingDataError,
    TruncatedPayloadError,
    UnsupportedVersionError,
)

MAGIC = b"SVOA"
VERSION = 1
MAX_DEPTH = 16
DEFAULT_MAX_BUILD_DEPTH = 10
HEADER = struct.Struct("<4sIIII")

NODE_DTYPE = np.dtype(
    [
        ("child_base", "<u4"),
        ("attr_base", "<u4"),
        ("valid_mask", "u1"),
        ("leaf_mask", "u1"),
        ("reserved", "<u2"),
    ]
)
NODE_BYTES = NODE_DTYPE.itemsize
ATTR_BYTES = 4

OCTANT_BITS = np.array([[(k >> 2) & 1, (k >> 1) & 1, k & 1] for k in range(8)], dtype=np.int64)

# violation kinds
RANGE = "range"
STRUCTURE = "structure"


class SvoNode(NamedTuple):
    child_base: int
    attr_base: int
    valid_mask: int
    leaf_mask: int


class VoxelAttribute(NamedTuple):
    r: int
    g: int
    b: int
    a: int


class ChildRef(NamedTuple):
    kind: str  # "node" or "leaf"
    index: int


def _popcount(mask):
    return bin(mask).count("1")


@dataclass(frozen=True, eq=False)
class SvoModel:
    depth: int
    nodes: np.ndarray
    attributes: np.ndarray = field(default_factory=lambda: np.zeros((0, 4), dtype=np.uint8))

    def __eq__(self, other):
        if not isinstance(other, SvoModel):
            return NotImplemented
        return (
            self.depth == other.depth
            and np.array_equal(self.nodes, other.nodes)
            and np.array_equal(self.attributes, other.attributes)
        )

    __hash__ = None

    @property
    def node_count(self):
        return len(self.nodes)

    @property
    def leaf_count(self):
        return len(self.attributes)

    def node(self, index):
        cb, ab, vm, lm, _ = self.nodes[index].tolist()
        return SvoNode(cb, ab, vm, lm)

    @cached_property
    def child_table(self):
        """Per-node list of 8 decoded children for traversal.

        Entries are None (absent), a node index (>= 0) or ``~attr_index`` (< 0)
        for a leaf voxel.
        """
        table = []
        for cb, ab, vm, lm, _ in self.nodes.tolist():
            children = [None] * 8
            next_node, next_attr = cb, ab
            for octant in range(8):
                bit = 1 << octant
                if not vm & bit:
                    continue
                if lm & bit:
                    children[octant] = ~next_attr
                    next_attr += 1
                else:
                    children[octant] = next_node
                    next_node += 1
            table.append(children)
        return table

    @cached_property
    def attribute_tuples(self):
        return [VoxelAttribute(*row) for row in self.attributes.tolist()]


def node_child(model, node_index, octant):
    """Resolve a child by popcount rank over the node's masks."""
    node = model.node(node_index)
    bit = 1 << octant
    if not node.valid_mask & bit:
        return None
    below = bit - 1
    if node.leaf_mask & bit:
        rank = _popcount(node.valid_mask & node.leaf_mask & below)
        return ChildRef("leaf", node.attr_base + rank)
    rank = _popcount(node.valid_mask & ~node.leaf_mask & below)
    return ChildRef("node", node.child_base + rank)


def _occupancy_pyramid(occupancy, depth):
    """Bottom-up any-reduction; element l has resolution 2**l."""
    levels = [occupancy]
    for _ in range(depth):
        prev = levels[-1]
        m = prev.shape[0] // 2
        levels.append(prev.reshape(m, 2, m, 2, m, 2).any(axis=(1, 3, 5)))
    levels.reverse()
    return levels


def build_from_grid(grid, depth, max_depth=DEFAULT_MAX_BUILD_DEPTH):
    """Reduce a dense grid to a sparse octree.

    Empty subtrees are dropped. Nodes are laid out breadth-first, so every
    node's internal children sit contiguously after it in octant order, and
    leaf attributes of each last-level node are contiguous too.

    ``max_depth`` caps the build (the dense grid is held in memory); it can be
    raised up to ``MAX_DEPTH``.
    """
    limit = min(max_depth, MAX_DEPTH)
    if not 1 <= depth <= limit:
        raise DepthRangeError(f"Octree depth {depth} is outside [1, {limit}].")
    if grid.resolution != 1 << depth:
        raise GridResolutionError(
            f"Grid resolution {grid.resolution} does not match depth {depth} "
            f"(expected {1 << depth} per axis)."
        )

    pyramid = _occupancy_pyramid(grid.occupancy, depth)
    weights = 1 << np.arange(8)
    coords = np.zeros((1, 3), dtype=np.int64)
    next_start = 1
    chunks = []
    attributes = np.zeros((0, 4), dtype=np.uint8)

    for level in range(depth):
        children = 2 * coords[:, None, :] + OCTANT_BITS[None, :, :]
        occ = pyramid[level + 1][children[..., 0], children[..., 1], children[..., 2]]
        counts = occ.sum(axis=1)
        starts = np.cumsum(counts) - counts
        valid = (occ * weights).sum(axis=1)

        chunk = np.zeros(len(coords), dtype=NODE_DTYPE)
        chunk["valid_mask"] = valid
        rows, octants = np.nonzero(occ)
        selected = children[rows, octants]
        if level == depth - 1:
            chunk["leaf_mask"] = valid
            chunk["attr_base"] = np.where(counts > 0, starts, 0)
            attributes = grid.colors_at(selected)
        else:
            chunk["child_base"] = np.where(counts > 0, next_start + starts, 0)
            next_start += len(selected)
            coords = selected
        chunks.append(chunk)

    return SvoModel(depth, np.concatenate(chunks), np.ascontiguousarray(attributes))


class Violation(NamedTuple):
    node: Optional[int]
    kind: str
    message: str


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations

    def add(self, node, kind, message):
        self.violations.append(Violation(node, kind, message))

    def __str__(self):
        if self.ok:
            return "valid"
        return "\n".join(
            f"node {v.node}: {v.message}" if v.node is not None else v.message
            for v in self.violations
        )


def validate(model):
    """Check every node invariant; violations carry the node index."""
    report = ValidationReport()
    n = model.node_count
    a = model.leaf_count
    if not 1 <= model.depth <= MAX_DEPTH:
        report.add(None, STRUCTURE, f"depth {model.depth} outside [1, {MAX_DEPTH}]")
    if n == 0:
        report.add(None, STRUCTURE, "model has no root node")
        return report

    rows = model.nodes.tolist()
    in_range = [True] * n
    for i, (cb, ab, vm, lm, reserved) in enumerate(rows):
        if lm & ~vm:
            report.add(i, STRUCTURE, "leaf not valid")
        if reserved:
            report.add(i, STRUCTURE, "reserved field not zero")
        internal = _popcount(vm & ~lm & 0xFF)
        leaves = _popcount(vm & lm)
        if internal and cb <= i:
            report.add(i, STRUCTURE, f"child_base {cb} not after parent")
            in_range[i] = False
        if internal and cb + internal > n:
            report.add(i, RANGE, f"child_base {cb} out of range ({internal} children, {n} nodes)")
            in_range[i] = False
        if leaves and ab + leaves > a:
            report.add(i, RANGE, f"attr_base {ab} out of range ({leaves} leaves, {a} attributes)")

    if not report.ok:
        return report

    # level walk: leaves only at maximum depth, each node owned by one parent
    seen = [0] * n
    seen[0] = 1
    level_nodes = [0]
    for level in range(model.depth):
        last = level == model.depth - 1
        next_nodes = []
        for i in level_nodes:
            cb, _, vm, lm, _ = rows[i]
            if last and vm & ~lm:
                report.add(i, STRUCTURE, "internal child at maximum depth")
            if not last and lm:
                report.add(i, STRUCTURE, "leaf above maximum depth")
            for k in range(_popcount(vm & ~lm & 0xFF)):
                child = cb + k
                seen[child] += 1
                if seen[child] > 1:
                    report.add(child, STRUCTURE, "node referenced more than once")
                else:
                    next_nodes.append(child)
        level_nodes = next_nodes
    unreachable = [i for i, count in enumerate(seen) if count == 0]
    if unreachable:
        report.add(unreachable[0], STRUCTURE, f"{len(unreachable)} node(s) unreachable from root")
    return report


class SvoStats(NamedTuple):
    node_count: int
    leaf_count: int
    byte_size: int
    depth: int
    fill_ratio: float


def stats(model):
    return SvoStats(
        node_count=model.node_count,
        leaf_count=model.leaf_count,
        byte_size=HEADER.size + NODE_BYTES * model.node_count + ATTR_BYTES * model.leaf_count,
        depth=model.depth,
        fill_ratio=model.leaf_count / float(8 ** model.depth),
    )


def serialize(model):
    header = HEADER.pack(MAGIC, VERSION, model.depth, model.node_count, model.leaf_count)
    nodes = np.ascontiguousarray(model.nodes, dtype=NODE_DTYPE)
    attributes = np.ascontiguousarray(model.attributes, dtype=np.uint8)
    return header + nodes.tobytes() + attributes.tobytes()


def deserialize(data):
    if len(data) < HEADER.size:
        raise TruncatedPayloadError(
            f"SVO stream is {len(data)} bytes, shorter than the {HEADER.size}-byte header."
        )
    magic, version, depth, node_count, attr_count = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagicError(f"Bad magic {magic!r}; expected {MAGIC!r}.")
    if version != VERSION:
        raise UnsupportedVersionError(f"Unsupported SVO version {version}; expected {VERSION}.")
    if not 1 <= depth <= MAX_DEPTH or node_count == 0:
        raise SvoFormatError(
            f"SVO header is invalid (depth {depth}, {node_count} nodes)."
        )
    expected = HEADER.size + NODE_BYTES * node_count + ATTR_BYTES * attr_count
    if len(data) < expected:
        raise TruncatedPayloadError(
            f"SVO payload truncated: header promises {expected} bytes, got {len(data)}."
        )
    if len(data) > expected:
        raise TrailingDataError(f"SVO stream has {len(data) - expected} bytes after the payload.")

    nodes = np.frombuffer(data, dtype=NODE_DTYPE, count=node_count, offset=HEADER.size).copy()
    attributes = (
        np.frombuffer(
            data, dtype=np.uint8, count=ATTR_BYTES * attr_count,
            offset=HEADER.size + NODE_BYTES * node_count,
        )
        .reshape(attr_count, ATTR_BYTES)
        .copy()
    )
    model = SvoModel(depth, nodes, attributes)
    report = validate(model)
    if not report.ok:
        if any(v.kind == RANGE for v in report.violations):
            raise IndexOutOfRangeError(f"SVO indices out of range:\n{report}")
        raise InvalidNodeError(f"SVO nodes are malformed:\n{report}")
    return model


def save_model(model, path):
    pathlib.Path(path).write_bytes(serialize(model))


def load_model(path):
    path = pathlib.Path(path)
    try:
        data = path.read_bytes()
    except FileNotFoundError as e:
        raise ModelNotFoundError(path) from e
    except OSError as e:
        raise ModelReadError(f"Could not read model {path}: {e}") from e
    try:
        return deserialize(data)
    except SvoFormatError as e:
        raise type(e)(f"{path}: {e}") from e


def iter_leaves(model):
    """Yield ``(x, y, z, attribute)`` for every leaf by exhaustive walk."""
    table = model.child_table
    attrs = model.attribute_tuples
    stack = [(0, 0, 0, 0, 0)]
    while stack:
        node, level, x, y, z = stack.pop()
        for octant, child in enumerate(table[node]):
            if child is None:
                continue
            cx = 2 * x + ((octant >> 2) & 1)
            cy = 2 * y + ((octant >> 1) & 1)
            cz = 2 * z + (octant & 1)
            if child < 0:
                yield cx, cy, cz, attrs[~child]
            else:
                stack.append((child, level + 1, cx, cy, cz))
