"""Scene of independent SVO objects: transforms, keyframe tracks, dirty flags, camera."""

import bisect
import json
import math
import pathlib
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from . import cache
from .errors import (
    BadRotationError,
    CameraError,
    DegenerateRotationError,
    DegenerateVectorError,
    DuplicateObjectIdError,
    ModelNotFoundError,
    ModelReadError,
    NegativeTimeError,
    SceneFormatError,
    UnknownModelError,
    UnknownTrackObjectError,
    UnsortedKeyframesError,
)
from .geometry import ONE, ZERO, Mat3, Quaternion, RigidTransform, Vec3, vec3
from .svo import SvoModel

DEFAULT_FOV = 60.0
DEFAULT_SIZE = (640, 480)
DEFAULT_CAMERA_POSITION = (0.0, 0.0, 3.0)
DEFAULT_BACKGROUND = (0, 0, 0)


class BoundingSphere(NamedTuple):
    center: Vec3
    radius: float


def bounding_sphere(obj):
    """Sphere around the scaled model cube; depends only on translation and scale."""
    sx, sy, sz = obj.transform.scale
    return BoundingSphere(obj.transform.translation, 0.5 * math.sqrt(sx * sx + sy * sy + sz * sz))


@dataclass(eq=False)
class SceneObject:
    id: int
    model: SvoModel
    transform: RigidTransform = field(default_factory=RigidTransform)
    dirty: bool = False
    model_name: str = ""
    _sphere: Optional[BoundingSphere] = field(default=None, init=False, repr=False)

    @property
    def sphere(self):
        if self._sphere is None:
            self._sphere = bounding_sphere(self)
        return self._sphere

    def set_transform(self, transform):
        """Replace the transform; returns True (and marks dirty) only if it changed."""
        if transform == self.transform:
            return False
        self.transform = transform
        self._sphere = None
        self.dirty = True
        return True


@dataclass
class Camera:
    """Pinhole camera. ``orientation`` columns are right, up and back (the view
    direction is minus the third column)."""

    position: Vec3
    orientation: Mat3
    vertical_fov: float = DEFAULT_FOV
    width: int = DEFAULT_SIZE[0]
    height: int = DEFAULT_SIZE[1]
    dirty: bool = True

    def __post_init__(self):
        if not 0.0 < self.vertical_fov < 180.0:
            raise CameraError(f"Camera fov {self.vertical_fov} must be in (0, 180) degrees.")
        if self.width < 1 or self.height < 1:
            raise CameraError(f"Camera resolution {self.width}x{self.height} must be at least 1x1.")
        if not self.orientation.is_rotation():
            raise CameraError("Camera orientation must be orthonormal.")

    @classmethod
    def look_at(cls, position, target, up=(0.0, 1.0, 0.0), fov=DEFAULT_FOV, width=DEFAULT_SIZE[0],
                height=DEFAULT_SIZE[1]):
        position = vec3(position)
        forward = (vec3(target) - position).normalized()
        right = forward.cross(vec3(up))
        if right.norm() <= 1e-9:
            raise CameraError("Camera up vector is parallel to the view direction.")
        right = right.normalized()
        true_up = right.cross(forward)
        return cls(position, Mat3.from_columns(right, true_up, -forward), float(fov), width, height)

    @property
    def forward(self):
        return -self.orientation.column(2)

    def set_pose(self, position, orientation):
        """Move the camera; returns True (and marks dirty) only if the pose changed."""
        position = vec3(position)
        if position == self.position and orientation == self.orientation:
            return False
        self.position = position
        self.orientation = orientation
        self.dirty = True
        return True


class Keyframe(NamedTuple):
    time: float
    translation: Vec3 = ZERO
    rotation: Quaternion = Quaternion.identity()
    scale: Vec3 = ONE


def _lerp(a, b, s):
    return a + (b - a) * s


@dataclass
class AnimationTrack:
    object_id: int
    keyframes: tuple

    def __post_init__(self):
        self.keyframes = tuple(self.keyframes)
        if not self.keyframes:
            raise UnsortedKeyframesError(f"Track for object {self.object_id} has no keyframes.")
        for i in range(1, len(self.keyframes)):
            if not self.keyframes[i].time > self.keyframes[i - 1].time:
                raise UnsortedKeyframesError(
                    f"Track for object {self.object_id}: keyframe {i} time "
                    f"{self.keyframes[i].time} is not after {self.keyframes[i - 1].time}."
                )
        self._times = [k.time for k in self.keyframes]

    def sample(self, time):
        """Transform at ``time``: lerp translation/scale, nlerp rotation, clamped at the ends."""
        keys = self.keyframes
        i = bisect.bisect_right(self._times, time)
        if i == 0:
            key = keys[0]
        elif i == len(keys) or keys[i - 1].time == time:
            key = keys[i - 1]
        else:
            a, b = keys[i - 1], keys[i]
            s = (time - a.time) / (b.time - a.time)
            return RigidTransform.from_quaternion(
                Quaternion.nlerp(a.rotation, b.rotation, s),
                _lerp(a.translation, b.translation, s),
                _lerp(a.scale, b.scale, s),
            )
        return RigidTransform.from_quaternion(key.rotation, key.translation, key.scale)


@dataclass
class Scene:
    objects: list
    camera: Camera
    tracks: list = field(default_factory=list)
    background: tuple = DEFAULT_BACKGROUND
    evaluated: bool = False

    def __post_init__(self):
        self._by_id = {}
        for obj in self.objects:
            if obj.id in self._by_id:
                raise DuplicateObjectIdError(f"Object id {obj.id} is used more than once.")
            self._by_id[obj.id] = obj
        for track in self.tracks:
            if track.object_id not in self._by_id:
                raise UnknownTrackObjectError(
                    f"Track references object {track.object_id}, which is not in the scene."
                )

    def object(self, object_id):
        return self._by_id[object_id]


def evaluate_animation(scene, time):
    """Advance tracked objects to ``time``.

    An object turns dirty when its evaluated transform differs from the one it
    holds (exact comparison), and on the very first evaluation. Flags are only
    cleared by ``mark_clean``.
    """
    if time < 0:
        raise NegativeTimeError(f"Animation time {time} is negative.")
    first = not scene.evaluated
    for track in scene.tracks:
        obj = scene.object(track.object_id)
        obj.set_transform(track.sample(time))
        if first:
            obj.dirty = True
    scene.evaluated = True


def mark_clean(scene):
    for obj in scene.objects:
        obj.dirty = False
    scene.camera.dirty = False


# scene documents


def _number(value, location):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise SceneFormatError(f"{location} must be a finite number, got {value!r}.")
    return float(value)


def _vector(value, location, default):
    if value is None:
        return Vec3(*default)
    if not isinstance(value, list) or len(value) != 3:
        raise SceneFormatError(f"{location} must be a list of 3 numbers, got {value!r}.")
    return Vec3(*(_number(v, f"{location}[{i}]") for i, v in enumerate(value)))


def _scale(value, location):
    scale = _vector(value, location, (1.0, 1.0, 1.0))
    if min(scale) <= 0.0:
        raise SceneFormatError(f"{location} must be strictly positive, got {list(scale)}.")
    return scale


def _rotation(value, location):
    if value is None:
        return Quaternion.identity()
    try:
        if isinstance(value, dict) and "quat" in value:
            quat = value["quat"]
            if not isinstance(quat, list) or len(quat) != 4:
                raise BadRotationError(f"{location}.quat must be a list of 4 numbers.")
            return Quaternion(*(_number(v, f"{location}.quat[{i}]") for i, v in enumerate(quat))).normalized()
        if isinstance(value, dict) and "axis" in value:
            axis = _vector(value["axis"], f"{location}.axis", (0.0, 0.0, 1.0))
            angle = _number(value.get("angle_deg", 0.0), f"{location}.angle_deg")
            return Quaternion.from_axis_angle(axis, angle)
    except (DegenerateRotationError, SceneFormatError) as e:
        raise BadRotationError(f"Bad rotation at {location}: {e}") from e
    raise BadRotationError(
        f"Bad rotation at {location}: expected {{'axis': [x, y, z], 'angle_deg': a}} "
        f"or {{'quat': [w, x, y, z]}}, got {value!r}."
    )


def _int_id(value, location):
    if isinstance(value, bool) or not isinstance(value, int):
        raise SceneFormatError(f"{location} must be an integer, got {value!r}.")
    return value


def _object_list(doc, key):
    value = doc.get(key, [])
    if not isinstance(value, list):
        raise SceneFormatError(f"'{key}' must be a list.")
    for i, item in enumerate(value):
        if not isinstance(item, dict):
            raise SceneFormatError(f"{key}[{i}] must be an object.")
    return value


def load_scene(text, base_dir=".", width=DEFAULT_SIZE[0], height=DEFAULT_SIZE[1]):
    """Parse a JSON scene document and load every model it references."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SceneFormatError(f"Scene is not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise SceneFormatError("Scene document must be a JSON object.")

    models_doc = doc.get("models", {})
    if not isinstance(models_doc, dict):
        raise SceneFormatError("'models' must map names to .svo paths.")
    models = {}
    for name, ref in models_doc.items():
        if not isinstance(ref, str):
            raise SceneFormatError(f"models.{name} must be a path string.")
        try:
            models[name] = cache.get_model(ref, base_dir)
        except ModelNotFoundError as e:
            raise ModelNotFoundError(e.path, f"models.{name}") from e

    objects = []
    seen = set()
    for i, item in enumerate(_object_list(doc, "objects")):
        where = f"objects[{i}]"
        object_id = _int_id(item.get("id"), f"{where}.id")
        if object_id in seen:
            raise DuplicateObjectIdError(f"{where}.id: object id {object_id} is used more than once.")
        seen.add(object_id)
        name = item.get("model")
        if name not in models:
            raise UnknownModelError(f"{where}.model: '{name}' is not declared in 'models'.")
        rotation = _rotation(item.get("rotation"), f"{where}.rotation")
        transform = RigidTransform.from_quaternion(
            rotation,
            _vector(item.get("translation"), f"{where}.translation", (0.0, 0.0, 0.0)),
            _scale(item.get("scale"), f"{where}.scale"),
        )
        objects.append(SceneObject(object_id, models[name], transform, model_name=name))

    tracks = []
    for i, item in enumerate(_object_list(doc, "tracks")):
        where = f"tracks[{i}]"
        object_id = _int_id(item.get("object"), f"{where}.object")
        if object_id not in seen:
            raise UnknownTrackObjectError(f"{where}.object: no object with id {object_id}.")
        keys_doc = item.get("keys")
        if not isinstance(keys_doc, list) or not keys_doc:
            raise SceneFormatError(f"{where}.keys must be a non-empty list.")
        keys = []
        for j, key in enumerate(keys_doc):
            kwhere = f"{where}.keys[{j}]"
            if not isinstance(key, dict):
                raise SceneFormatError(f"{kwhere} must be an object.")
            time = _number(key.get("time"), f"{kwhere}.time")
            if keys and not time > keys[-1].time:
                raise UnsortedKeyframesError(
                    f"{kwhere}.time: {time} is not after the previous keyframe ({keys[-1].time})."
                )
            keys.append(
                Keyframe(
                    time,
                    _vector(key.get("translation"), f"{kwhere}.translation", (0.0, 0.0, 0.0)),
                    _rotation(key.get("rotation"), f"{kwhere}.rotation"),
                    _scale(key.get("scale"), f"{kwhere}.scale"),
                )
            )
        tracks.append(AnimationTrack(object_id, keys))

    camera_doc = doc.get("camera", {})
    if not isinstance(camera_doc, dict):
        raise SceneFormatError("'camera' must be an object.")
    try:
        camera = Camera.look_at(
            _vector(camera_doc.get("position"), "camera.position", DEFAULT_CAMERA_POSITION),
            _vector(camera_doc.get("look_at"), "camera.look_at", (0.0, 0.0, 0.0)),
            _vector(camera_doc.get("up"), "camera.up", (0.0, 1.0, 0.0)),
            _number(camera_doc.get("fov_deg", DEFAULT_FOV), "camera.fov_deg"),
            width,
            height,
        )
    except (CameraError, DegenerateVectorError) as e:
        raise SceneFormatError(f"camera: {e}") from e

    background = doc.get("background", list(DEFAULT_BACKGROUND))
    if (
        not isinstance(background, list)
        or len(background) != 3
        or not all(isinstance(c, int) and not isinstance(c, bool) and 0 <= c <= 255 for c in background)
    ):
        raise SceneFormatError(f"background must be [r, g, b] with 0-255 integers, got {background!r}.")

    return Scene(objects, camera, tracks, tuple(background))


def load_scene_file(path, width=DEFAULT_SIZE[0], height=DEFAULT_SIZE[1]):
    """Load a scene document; model paths resolve relative to the document."""
    path = pathlib.Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ModelReadError(f"Could not read scene file {path}: {e}") from e
    return load_scene(text, base_dir=path.parent, width=width, height=height)
