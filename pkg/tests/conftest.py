import math

import numpy as np
import pytest

from voxanim import cache, ingest, svo
from voxanim.geometry import Quaternion, RigidTransform, Vec3
from voxanim.scene import Camera, Scene, SceneObject


def grid_from(occupancy, color_mode="hash"):
    occupancy = np.asarray(occupancy, dtype=bool)
    return ingest.VoxelGrid(occupancy.shape[0], occupancy, color_mode=color_mode)


def model_from(occupancy, color_mode="hash"):
    grid = grid_from(occupancy, color_mode)
    return svo.build_from_grid(grid, grid.depth)


def random_occupancy(rng, depth, fill=0.3):
    n = 1 << depth
    return rng.random((n, n, n)) < fill


def random_unit(rng):
    while True:
        v = rng.normal(size=3)
        n = float(np.linalg.norm(v))
        if n > 1e-6:
            return Vec3(*(float(c) / n for c in v))


def random_transform(rng, max_scale=2.0):
    q = Quaternion(*(float(c) for c in rng.normal(size=4)))
    translation = Vec3(*(float(c) for c in rng.uniform(-5, 5, size=3)))
    scale = Vec3(*(float(c) for c in rng.uniform(0.2, max_scale, size=3)))
    return RigidTransform.from_quaternion(q, translation, scale)


def dda_first_hit(occupancy, half_extent, origin, direction):
    """Reference traversal: march the dense grid voxel by voxel.

    Returns ``(t_entry, (ix, iy, iz))`` for the first occupied voxel, or None.
    """
    n = occupancy.shape[0]
    t0, t1 = -math.inf, math.inf
    for o, d, h in zip(origin, direction, half_extent):
        if d == 0.0:
            if not -h <= o <= h:
                return None
            continue
        a, b = (-h - o) / d, (h - o) / d
        t0, t1 = max(t0, min(a, b)), min(t1, max(a, b))
    if t0 >= t1 or t1 < 0.0:
        return None
    t = max(t0, 0.0)

    index, step, t_max, t_delta = [], [], [], []
    for o, d, h in zip(origin, direction, half_extent):
        cell = 2.0 * h / n
        p = o + d * t
        i = min(n - 1, max(0, int(math.floor((p + h) / cell))))
        index.append(i)
        if d > 0.0:
            step.append(1)
            t_max.append((-h + (i + 1) * cell - o) / d)
            t_delta.append(cell / d)
        elif d < 0.0:
            step.append(-1)
            t_max.append((-h + i * cell - o) / d)
            t_delta.append(-cell / d)
        else:
            step.append(0)
            t_max.append(math.inf)
            t_delta.append(math.inf)

    while True:
        if occupancy[index[0], index[1], index[2]]:
            return t, tuple(index)
        axis = min(range(3), key=lambda k: t_max[k])
        t = t_max[axis]
        index[axis] += step[axis]
        if not 0 <= index[axis] < n:
            return None
        t_max[axis] += t_delta[axis]


def subdivision_counts(occupancy):
    """(node_count, leaf_count) by recursively splitting the grid into octants."""

    def walk(block):
        if block.shape[0] == 1:
            return 0
        h = block.shape[0] // 2
        total = 1
        for x in (0, h):
            for y in (0, h):
                for z in (0, h):
                    sub = block[x:x + h, y:y + h, z:z + h]
                    if sub.any():
                        total += walk(sub)
        return total

    return walk(np.asarray(occupancy, dtype=bool)), int(np.count_nonzero(occupancy))


def quadratic_sphere_hit(origin, direction, center, radius):
    """Exact ray-sphere test: True if the ray (t >= 0) meets the open ball."""
    oc = [o - c for o, c in zip(origin, center)]
    b = sum(d * v for d, v in zip(direction, oc))
    c = sum(v * v for v in oc) - radius * radius
    disc = b * b - c
    if disc <= 0.0:
        return False
    return -b + math.sqrt(disc) >= 0.0


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def isolated_home(tmp_path, monkeypatch):
    """Generated primitives are cached under tmp_path instead of the user dir."""
    monkeypatch.setattr(cache, "_cache_dir", lambda: tmp_path)
    monkeypatch.setattr(cache, "_loaded", {})
    return tmp_path


@pytest.fixture
def full_model():
    """Depth-1 model with all eight voxels set."""
    return model_from(np.ones((2, 2, 2), dtype=bool))


@pytest.fixture
def sphere_model():
    grid = ingest.gen_primitive("sphere", 3)
    return svo.build_from_grid(grid, grid.depth)


@pytest.fixture
def small_camera():
    return Camera.look_at((0.0, 0.0, 4.0), (0.0, 0.0, 0.0), fov=50.0, width=24, height=16)


@pytest.fixture
def two_object_scene(sphere_model, small_camera):
    """Two spheres side by side, both in view."""
    left = SceneObject(1, sphere_model, RigidTransform(translation=Vec3(-0.8, 0.0, 0.0)))
    right = SceneObject(2, sphere_model, RigidTransform(translation=Vec3(0.8, 0.0, 0.0)))
    return Scene([left, right], small_camera, background=(10, 20, 30))


@pytest.fixture
def scene_dir(tmp_path, sphere_model, full_model):
    """A directory holding two .svo models and an animated scene document."""
    svo.save_model(sphere_model, tmp_path / "ball.svo")
    svo.save_model(full_model, tmp_path / "cube.svo")
    (tmp_path / "scene.json").write_text(
        """{
  "models": {"ball": "ball.svo", "cube": "cube.svo"},
  "objects": [
    {"id": 1, "model": "ball", "translation": [-0.8, 0, 0]},
    {"id": 2, "model": "cube", "translation": [0.8, 0, 0], "scale": [0.5, 0.5, 0.5]}
  ],
  "tracks": [
    {"object": 1, "keys": [
      {"time": 0, "translation": [-0.8, 0, 0]},
      {"time": 1, "translation": [-0.8, 0.5, 0]}
    ]}
  ],
  "camera": {"position": [0, 0, 4], "look_at": [0, 0, 0], "fov_deg": 50},
  "background": [5, 5, 5]
}""",
        encoding="utf-8",
    )
    return tmp_path
