"""Top-down parametric octree traversal in an object's local frame.

The octree occupies the box [-h, +h] per axis, so per-axis half extents carry
the object's (possibly anisotropic) scale. Negative direction components are
mirrored about the box center and recorded in a mirror mask that shares the
octant bit layout; child lookups XOR the mask back out.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

from .errors import InvalidBoundsError
from .geometry import Vec3
from .svo import VoxelAttribute

INF = math.inf
EXIT = 8


@dataclass(frozen=True)
class OctreeBounds:
    half_extent: Vec3

    def __post_init__(self):
        if not all(0.0 < h < INF for h in self.half_extent):
            raise InvalidBoundsError(
                f"Octree half extents {tuple(self.half_extent)} must be finite and positive."
            )

    @classmethod
    def from_scale(cls, scale):
        return cls(Vec3(scale.x * 0.5, scale.y * 0.5, scale.z * 0.5))


UNIT_BOUNDS = OctreeBounds(Vec3(0.5, 0.5, 0.5))


class BoxParams(NamedTuple):
    tx0: float
    tx1: float
    ty0: float
    ty1: float
    tz0: float
    tz1: float
    mirror: int


class TraversalHit(NamedTuple):
    t_hit: float
    t_enter: float
    t_exit: float
    attribute: VoxelAttribute
    normal_local: Vec3
    leaf_path: tuple
    voxel: tuple


def _slab(o, d, h):
    if d > 0.0:
        return (-h - o) / d, (h - o) / d
    # parallel to the slab: +/-inf with signs from where the origin sits
    return (-INF if o >= -h else INF), (INF if o <= h else -INF)


def ray_box_params(ray_local, bounds):
    (ox, oy, oz), (dx, dy, dz) = ray_local
    hx, hy, hz = bounds.half_extent
    a = 0
    if dx < 0.0:
        ox, dx, a = -ox, -dx, a | 4
    if dy < 0.0:
        oy, dy, a = -oy, -dy, a | 2
    if dz < 0.0:
        oz, dz, a = -oz, -dz, a | 1
    tx0, tx1 = _slab(ox, dx, hx)
    ty0, ty1 = _slab(oy, dy, hy)
    tz0, tz1 = _slab(oz, dz, hz)
    t_exit = min(tx1, ty1, tz1)
    if max(tx0, ty0, tz0) >= t_exit or t_exit < 0.0:
        return None
    return BoxParams(tx0, tx1, ty0, ty1, tz0, tz1, a)


def first_node(tx0, ty0, tz0, txm, tym, tzm):
    """Octant the ray enters first; ties pick the entry axis in order x, y, z."""
    octant = 0
    if tx0 >= ty0 and tx0 >= tz0:
        if tym < tx0:
            octant |= 2
        if tzm < tx0:
            octant |= 1
    elif ty0 >= tz0:
        if txm < ty0:
            octant |= 4
        if tzm < ty0:
            octant |= 1
    else:
        if txm < tz0:
            octant |= 4
        if tym < tz0:
            octant |= 2
    return octant


def next_node(tx1, ty1, tz1, octant):
    """Sibling the ray moves into after leaving ``octant``, or EXIT."""
    if tx1 <= ty1 and tx1 <= tz1:
        bit = 4
    elif ty1 <= tz1:
        bit = 2
    else:
        bit = 1
    return EXIT if octant & bit else octant | bit


def _midplane(t0, t1, d, o, h, level, i):
    if d > 0.0:
        return 0.5 * (t0 + t1)
    mid = -h + (2 * i + 1) * h / (1 << level)
    return INF if o < mid else -INF


def iter_hits(model, ray_local, bounds):
    """Yield every leaf the ray crosses, nearest first.

    Iterative with an explicit stack of capacity ``model.depth``.
    """
    params = ray_box_params(ray_local, bounds)
    if params is None:
        return
    tx0, tx1, ty0, ty1, tz0, tz1, a = params
    table = model.child_table
    attrs = model.attribute_tuples
    (ox, oy, oz), (dx, dy, dz) = ray_local
    hx, hy, hz = bounds.half_extent
    adx, ady, adz = abs(dx), abs(dy), abs(dz)
    t_enter = max(tx0, ty0, tz0)
    t_exit = min(tx1, ty1, tz1)
    nx = Vec3(1.0 if a & 4 else -1.0, 0.0, 0.0)
    ny = Vec3(0.0, 1.0 if a & 2 else -1.0, 0.0)
    nz = Vec3(0.0, 0.0, 1.0 if a & 1 else -1.0)

    depth = model.depth
    stack = [None] * depth
    paths = [0] * depth
    txm = _midplane(tx0, tx1, adx, ox, hx, 0, 0)
    tym = _midplane(ty0, ty1, ady, oy, hy, 0, 0)
    tzm = _midplane(tz0, tz1, adz, oz, hz, 0, 0)
    stack[0] = [0, tx0, ty0, tz0, tx1, ty1, tz1, txm, tym, tzm, 0, 0, 0,
                first_node(tx0, ty0, tz0, txm, tym, tzm)]
    sp = 1

    while sp:
        frame = stack[sp - 1]
        cur = frame[13]
        if cur == EXIT:
            sp -= 1
            continue
        node, px0, py0, pz0, px1, py1, pz1, pxm, pym, pzm, ix, iy, iz, _ = frame
        if cur & 4:
            cx0, cx1 = pxm, px1
        else:
            cx0, cx1 = px0, pxm
        if cur & 2:
            cy0, cy1 = pym, py1
        else:
            cy0, cy1 = py0, pym
        if cur & 1:
            cz0, cz1 = pzm, pz1
        else:
            cz0, cz1 = pz0, pzm
        frame[13] = next_node(cx1, cy1, cz1, cur)
        if cx1 <= 0.0 or cy1 <= 0.0 or cz1 <= 0.0:
            continue

        real = cur ^ a
        child = table[node][real]
        if child is None:
            continue
        cix = 2 * ix + ((real >> 2) & 1)
        ciy = 2 * iy + ((real >> 1) & 1)
        ciz = 2 * iz + (real & 1)
        paths[sp - 1] = real

        if child < 0:
            if cx0 >= cy0 and cx0 >= cz0:
                t_entry, normal = cx0, nx
            elif cy0 >= cz0:
                t_entry, normal = cy0, ny
            else:
                t_entry, normal = cz0, nz
            yield TraversalHit(
                t_hit=t_entry if t_entry > 0.0 else 0.0,
                t_enter=t_enter,
                t_exit=t_exit,
                attribute=attrs[~child],
                normal_local=normal,
                leaf_path=tuple(paths[:sp]),
                voxel=(cix, ciy, ciz),
            )
            continue

        level = sp
        cxm = _midplane(cx0, cx1, adx, ox, hx, level, cix)
        cym = _midplane(cy0, cy1, ady, oy, hy, level, ciy)
        czm = _midplane(cz0, cz1, adz, oz, hz, level, ciz)
        stack[sp] = [child, cx0, cy0, cz0, cx1, cy1, cz1, cxm, cym, czm, cix, ciy, ciz,
                     first_node(cx0, cy0, cz0, cxm, cym, czm)]
        sp += 1


def traverse(model, ray_local, bounds):
    """Nearest leaf hit along a local-space ray, or None."""
    return next(iter_hits(model, ray_local, bounds), None)
