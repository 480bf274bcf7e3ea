"""Vectors, rotations, rigid transforms and rays.

All values are immutable and 64-bit. Nothing here holds state, so every
function is safe to call from render threads.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import (
    DegenerateRotationError,
    DegenerateVectorError,
    InvalidTransformError,
    NegativeRayParameterError,
)

ROTATION_TOLERANCE = 1e-6

# rotation (9) + translation (3) + scale (3) reals at 8 bytes each
ANIMATION_STATE_BYTES = 15 * 8
# the single 4x4 homogeneous matrix alternative, stored as float32
HOMOGENEOUS_MATRIX_BYTES_F32 = 16 * 4


class Vec3(NamedTuple):
    x: float
    y: float
    z: float

    def __add__(self, other):
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other):
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def __mul__(self, k):
        return Vec3(self.x * k, self.y * k, self.z * k)

    __rmul__ = __mul__

    def __neg__(self):
        return Vec3(-self.x, -self.y, -self.z)

    def dot(self, other):
        return self.x * other.x + self.y * other.y + self.z * other.z

    def cross(self, other):
        return Vec3(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )

    def norm(self):
        return math.sqrt(self.dot(self))

    def normalized(self):
        n = self.norm()
        if n <= 1e-12:
            raise DegenerateVectorError(f"Cannot normalize near-zero vector {tuple(self)}.")
        return Vec3(self.x / n, self.y / n, self.z / n)

    def is_finite(self):
        return all(math.isfinite(c) for c in self)


ZERO = Vec3(0.0, 0.0, 0.0)
ONE = Vec3(1.0, 1.0, 1.0)


def vec3(values):
    """Build a Vec3 from any 3-sequence, coercing to float."""
    x, y, z = values
    return Vec3(float(x), float(y), float(z))


class Quaternion(NamedTuple):
    w: float
    x: float
    y: float
    z: float

    def norm(self):
        return math.sqrt(self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z)

    def normalized(self):
        n = self.norm()
        if n <= 1e-12:
            raise DegenerateRotationError(
                f"Quaternion {tuple(self)} is degenerate (norm {n:.3g}); it cannot "
                f"represent a rotation."
            )
        return Quaternion(self.w / n, self.x / n, self.y / n, self.z / n)

    @classmethod
    def identity(cls):
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_axis_angle(cls, axis, degrees):
        axis = vec3(axis)
        n = axis.norm()
        if n <= 1e-12:
            raise DegenerateRotationError(f"Rotation axis {tuple(axis)} has zero length.")
        half = math.radians(degrees) / 2.0
        s = math.sin(half) / n
        return cls(math.cos(half), axis.x * s, axis.y * s, axis.z * s)

    @staticmethod
    def nlerp(a, b, s):
        """Normalized linear interpolation along the shortest arc.

        Equal endpoints return ``a`` unchanged so piecewise-constant tracks
        reproduce their keys bit for bit.
        """
        if a == b:
            return a
        dot = a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z
        if dot < 0.0:
            b = Quaternion(-b.w, -b.x, -b.y, -b.z)
        return Quaternion(
            a.w + (b.w - a.w) * s,
            a.x + (b.x - a.x) * s,
            a.y + (b.y - a.y) * s,
            a.z + (b.z - a.z) * s,
        ).normalized()


class Mat3(NamedTuple):
    """Row-major 3x3 matrix."""

    m00: float
    m01: float
    m02: float
    m10: float
    m11: float
    m12: float
    m20: float
    m21: float
    m22: float

    @classmethod
    def identity(cls):
        return cls(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0)

    @classmethod
    def from_columns(cls, c0, c1, c2):
        return cls(c0.x, c1.x, c2.x, c0.y, c1.y, c2.y, c0.z, c1.z, c2.z)

    def column(self, i):
        return Vec3(self[i], self[3 + i], self[6 + i])

    def transpose(self):
        return Mat3(
            self.m00, self.m10, self.m20,
            self.m01, self.m11, self.m21,
            self.m02, self.m12, self.m22,
        )

    def apply(self, v):
        return Vec3(
            self.m00 * v.x + self.m01 * v.y + self.m02 * v.z,
            self.m10 * v.x + self.m11 * v.y + self.m12 * v.z,
            self.m20 * v.x + self.m21 * v.y + self.m22 * v.z,
        )

    def __matmul__(self, other):
        if isinstance(other, Vec3):
            return self.apply(other)
        a = np.array(self, dtype=np.float64).reshape(3, 3)
        b = np.array(other, dtype=np.float64).reshape(3, 3)
        return Mat3(*(float(v) for v in (a @ b).ravel()))

    def det(self):
        return float(np.linalg.det(np.array(self, dtype=np.float64).reshape(3, 3)))

    def is_rotation(self, tol=ROTATION_TOLERANCE):
        m = np.array(self, dtype=np.float64).reshape(3, 3)
        return bool(
            np.all(np.isfinite(m))
            and np.allclose(m @ m.T, np.eye(3), atol=tol)
            and abs(np.linalg.det(m) - 1.0) <= tol
        )


def rotation_from_quaternion(q):
    """Convert a quaternion into its rotation matrix M_R (normalizing first)."""
    w, x, y, z = q.normalized()
    return Mat3(
        1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
        2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
        2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y),
    )


@dataclass(frozen=True)
class RigidTransform:
    """Per-object animation state: rotation M_R, translation and per-axis scale.

    Equality is exact and componentwise, which is what dirty detection relies on.
    """

    rotation: Mat3 = Mat3.identity()
    translation: Vec3 = ZERO
    scale: Vec3 = ONE

    def __post_init__(self):
        if not self.translation.is_finite():
            raise InvalidTransformError(f"Translation {tuple(self.translation)} must be finite.")
        if not self.scale.is_finite() or min(self.scale) <= 0.0:
            raise InvalidTransformError(
                f"Scale {tuple(self.scale)} must be finite and strictly positive on every axis."
            )
        if not self.rotation.is_rotation():
            raise DegenerateRotationError(
                "Rotation matrix is not orthonormal with determinant +1."
            )

    @classmethod
    def identity(cls):
        return cls()

    @classmethod
    def from_quaternion(cls, q, translation=ZERO, scale=ONE):
        return cls(rotation_from_quaternion(q), vec3(translation), vec3(scale))

    def apply_point(self, p):
        """Forward model transform of a local point: rotate, then translate."""
        return self.rotation.apply(p) + self.translation

    def apply_direction(self, d):
        return self.rotation.apply(d)

    def to_homogeneous(self):
        """The equivalent single 4x4 matrix T * R * S, including scale."""
        m = np.eye(4)
        r = np.array(self.rotation, dtype=np.float64).reshape(3, 3)
        m[:3, :3] = r * np.array(self.scale)
        m[:3, 3] = self.translation
        return m


def inverse_rigid(tf):
    """Inverse rotation (the transpose) and inverse translation (the negation)."""
    return tf.rotation.transpose(), -tf.translation


class Ray(NamedTuple):
    origin: Vec3
    direction: Vec3

    @classmethod
    def toward(cls, origin, direction):
        """Build a ray, normalizing the direction."""
        return cls(vec3(origin), vec3(direction).normalized())


def ray_at(ray, t):
    if t < 0:
        raise NegativeRayParameterError(f"Ray parameter t={t} is negative; rays start at t=0.")
    o, d = ray
    return Vec3(o.x + t * d.x, o.y + t * d.y, o.z + t * d.z)


def transform_ray_world_to_local(ray, tf):
    """Move a world ray into an object's local frame.

    Direction is premultiplied by the inverse rotation; the origin is first
    translated by the inverse translation, then rotated the same way. Scale is
    left to the traversal bounds, so the direction stays unit length and t is
    the same in both frames.
    """
    inv_rotation, inv_translation = inverse_rigid(tf)
    return Ray(
        inv_rotation.apply(ray.origin + inv_translation),
        inv_rotation.apply(ray.direction),
    )
