"""Primary-ray renderer: bounding-sphere culling, front-to-back tracing and the hit buffer.

A frame is split into contiguous row bands. With more than one band, each band
is rendered in a worker process and returns its own rows of the image and of the
hit buffer plus its own counters, merged after the join. The output does not
depend on the thread count.
"""

import enum
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from typing import NamedTuple, Optional

import numpy as np

from .errors import BufferSizeMismatchError, PixelOutOfRangeError, PoolMismatchError
from .geometry import Ray, Vec3, transform_ray_world_to_local
from .scene import Scene, SceneObject
from .traversal import OctreeBounds, traverse

AMBIENT = 0.2
DIFFUSE = 0.8


class SphereHit(NamedTuple):
    object_id: int
    d: float
    t_center: float
    t_boundary: float


class HitKind(enum.Enum):
    MISS = "miss"
    SINGLE_SPHERE = "single"
    MULTI_SPHERE = "multi"


class HitRecord(NamedTuple):
    color: Optional[tuple]
    normal: Optional[Vec3]
    t: float
    object_id: Optional[int]
    hit_kind: HitKind
    sphere_count: int = 0


MISS_RECORD = HitRecord(None, None, math.inf, None, HitKind.MISS, 0)


@dataclass
class HitBuffer:
    """Last frame's record per pixel, row-major."""

    width: int
    height: int
    records: list = None

    def __post_init__(self):
        if self.records is None:
            self.records = [MISS_RECORD] * (self.width * self.height)
        elif len(self.records) != self.width * self.height:
            raise BufferSizeMismatchError(
                f"Hit buffer holds {len(self.records)} records, expected {self.width}x{self.height}."
            )

    @classmethod
    def for_camera(cls, camera):
        return cls(camera.width, camera.height)

    def rows(self, rows):
        return self.records[rows.start * self.width:rows.stop * self.width]

    def store_rows(self, rows, records):
        self.records[rows.start * self.width:rows.stop * self.width] = records


@dataclass
class FrameStats:
    rays: int = 0
    sphere_tests: int = 0
    svo_traversals: int = 0
    pixels_reused: int = 0
    render_ms: float = 0.0

    @property
    def pixels_traced(self):
        return self.rays - self.pixels_reused

    def __add__(self, other):
        return FrameStats(*(getattr(self, f.name) + getattr(other, f.name) for f in fields(self)))


@dataclass
class Image:
    width: int
    height: int
    pixels: np.ndarray = None

    def __post_init__(self):
        if self.pixels is None:
            self.pixels = np.zeros((self.height, self.width, 3), dtype=np.uint8)
        elif self.pixels.shape != (self.height, self.width, 3):
            raise BufferSizeMismatchError(
                f"Pixel array shape {self.pixels.shape} does not match {self.width}x{self.height}."
            )


@dataclass
class RenderOptions:
    culling: bool = True
    sorting: bool = True
    hbo: Optional[HitBuffer] = None
    threads: int = 1
    pool: Optional["RenderPool"] = None


def generate_primary_ray(camera, px, py):
    """Ray through the center of pixel (px, py); row 0 is the top of the image."""
    if not (0 <= px < camera.width and 0 <= py < camera.height):
        raise PixelOutOfRangeError(
            f"Pixel ({px}, {py}) is outside the {camera.width}x{camera.height} image."
        )
    tan_half = math.tan(math.radians(camera.vertical_fov) * 0.5)
    sx = (2.0 * (px + 0.5) / camera.width - 1.0) * tan_half * camera.width / camera.height
    sy = (1.0 - 2.0 * (py + 0.5) / camera.height) * tan_half
    rot = camera.orientation
    direction = rot.column(0) * sx + rot.column(1) * sy - rot.column(2)
    return Ray(camera.position, direction.normalized())


def _approach(ray, sphere, object_id):
    l = sphere.center - ray.origin
    t_center = l.dot(ray.direction)
    ll = l.dot(l)
    d2 = max(0.0, ll - t_center * t_center)
    r2 = sphere.radius * sphere.radius
    if ll <= r2:
        t_boundary = 0.0
    elif d2 < r2:
        t_boundary = max(0.0, t_center - math.sqrt(r2 - d2))
    else:
        # no intersection; content still lies beyond the near edge of the sphere
        t_boundary = max(0.0, t_center - sphere.radius)
    return SphereHit(object_id, math.sqrt(d2), t_center, t_boundary)


def ray_sphere_test(ray, sphere, object_id=None):
    """Closest-approach test; spheres entirely behind the origin miss."""
    hit = _approach(ray, sphere, object_id)
    if hit.d >= sphere.radius or hit.t_center + sphere.radius < 0.0:
        return None
    return hit


def _sort_key(hit):
    return hit.t_center, hit.object_id


def cull_and_sort(scene, ray):
    hits = (ray_sphere_test(ray, obj.sphere, obj.id) for obj in scene.objects)
    return sorted((h for h in hits if h is not None), key=_sort_key)


def _trace(objects, ray, candidates, sphere_count, early_exit):
    best = None
    best_key = None
    traversals = 0
    for candidate in candidates:
        if early_exit and best is not None and best_key[0] < candidate.t_boundary:
            break
        obj, bounds = objects[candidate.object_id]
        local = transform_ray_world_to_local(ray, obj.transform)
        hit = traverse(obj.model, local, bounds)
        traversals += 1
        if hit is not None and (best is None or (hit.t_hit, obj.id) < best_key):
            best, best_key = (obj, hit), (hit.t_hit, obj.id)

    if best is None:
        return MISS_RECORD._replace(sphere_count=sphere_count), traversals
    obj, hit = best
    kind = HitKind.SINGLE_SPHERE if sphere_count == 1 else HitKind.MULTI_SPHERE
    record = HitRecord(
        color=tuple(hit.attribute[:3]),
        normal=obj.transform.rotation.apply(hit.normal_local),
        t=hit.t_hit,
        object_id=obj.id,
        hit_kind=kind,
        sphere_count=sphere_count,
    )
    return record, traversals


def _object_table(scene):
    return {obj.id: (obj, OctreeBounds.from_scale(obj.transform.scale)) for obj in scene.objects}


def trace_ray(scene, ray, candidates):
    """Trace sorted candidates nearest-first, stopping once the best hit is in front of
    the next candidate's sphere."""
    record, _ = _trace(_object_table(scene), ray, candidates, len(candidates), True)
    return record


def shade(record, ray, background):
    if record.hit_kind is HitKind.MISS:
        return tuple(background)
    k = AMBIENT + DIFFUSE * max(0.0, -record.normal.dot(ray.direction))
    return tuple(min(255, int(math.floor(c * k + 0.5))) for c in record.color)


def _render_band(scene, culling, sorting, previous, rows):
    """Render the rows in ``rows``; returns ``(pixels, records, stats)`` for the band.

    ``previous`` holds last frame's records for these rows, or None without a hit
    buffer, in which case ``records`` is None too.
    """
    camera = scene.camera
    width = camera.width
    objects = _object_table(scene)
    pixels = np.zeros((len(rows), width, 3), dtype=np.uint8)
    records = None if previous is None else list(previous)
    stats = FrameStats()
    ids = sorted(objects)
    spheres = [(obj.id, obj.sphere) for obj in scene.objects]
    for row, py in enumerate(rows):
        for px in range(width):
            ray = generate_primary_ray(camera, px, py)
            stats.rays += 1
            approaches = [_approach(ray, sphere, oid) for oid, sphere in spheres]
            stats.sphere_tests += len(approaches)
            hits = [
                a for a, (_, sphere) in zip(approaches, spheres)
                if a.d < sphere.radius and a.t_center + sphere.radius >= 0.0
            ]

            record = None
            if records is not None and not camera.dirty and len(hits) == 1:
                last = records[row * width + px]
                obj = objects[hits[0].object_id][0]
                if (
                    last.hit_kind is HitKind.SINGLE_SPHERE
                    and last.object_id == obj.id
                    and not obj.dirty
                ):
                    record = last
                    stats.pixels_reused += 1
                else:
                    record, n = _trace(objects, ray, hits, 1, True)
                    stats.svo_traversals += n

            if record is None:
                if culling:
                    candidates = hits
                else:
                    by_id = {a.object_id: a for a in approaches}
                    candidates = [by_id[oid] for oid in ids]
                if sorting:
                    candidates = sorted(candidates, key=_sort_key)
                else:
                    candidates = sorted(candidates, key=lambda a: a.object_id)
                record, n = _trace(objects, ray, candidates, len(hits), sorting)
                stats.svo_traversals += n

            if records is not None:
                records[row * width + px] = record
            pixels[row, px] = shade(record, ray, scene.background)
    return pixels, records, stats


# worker-process side of RenderPool
_worker_models = {}


def _init_worker(models):
    global _worker_models
    _worker_models = models


def _band_job(camera, states, background, culling, sorting, previous, rows):
    objects = [
        SceneObject(oid, _worker_models[oid], transform, dirty) for oid, transform, dirty in states
    ]
    return _render_band(Scene(objects, camera, background=background), culling, sorting, previous, rows)


class RenderPool:
    """Worker processes holding the scene's models.

    Models are sent once, when the pool starts. Each frame then ships only the
    camera, per-object transforms and dirty flags, and the hit buffer rows of
    each band.
    """

    def __init__(self, scene, workers):
        self.workers = max(1, workers)
        self.models = {obj.id: obj.model for obj in scene.objects}
        self._executor = ProcessPoolExecutor(
            max_workers=self.workers, initializer=_init_worker, initargs=(self.models,)
        )

    def check(self, scene):
        if {obj.id for obj in scene.objects} != set(self.models) or any(
            self.models[obj.id] is not obj.model for obj in scene.objects
        ):
            raise PoolMismatchError("Render pool was started for a different set of models.")

    def render_bands(self, scene, culling, sorting, hbo, bands):
        self.check(scene)
        states = [(obj.id, obj.transform, obj.dirty) for obj in scene.objects]
        futures = [
            self._executor.submit(
                _band_job, scene.camera, states, scene.background, culling, sorting,
                None if hbo is None else hbo.rows(rows), rows,
            )
            for rows in bands
        ]
        return [f.result() for f in futures]

    def close(self):
        self._executor.shutdown()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _bands(height, count):
    count = max(1, min(count, height))
    step, extra = divmod(height, count)
    start = 0
    for i in range(count):
        stop = start + step + (1 if i < extra else 0)
        yield range(start, stop)
        start = stop


def render_frame(scene, options=None):
    """Render one frame of an evaluated scene.

    With more than one band the bands run on a RenderPool: ``options.pool`` if
    given, else a pool started and stopped for this frame. Dirty flags are read,
    never cleared; call ``mark_clean`` afterwards. Returns ``(Image, FrameStats)``.
    """
    options = options or RenderOptions()
    camera = scene.camera
    hbo = options.hbo
    if hbo is not None and (hbo.width, hbo.height) != (camera.width, camera.height):
        raise BufferSizeMismatchError(
            f"Hit buffer is {hbo.width}x{hbo.height} but the camera renders "
            f"{camera.width}x{camera.height}."
        )

    image = Image(camera.width, camera.height)
    start = time.perf_counter()
    bands = list(_bands(camera.height, options.threads))
    if len(bands) == 1:
        previous = None if hbo is None else hbo.rows(bands[0])
        results = [_render_band(scene, options.culling, options.sorting, previous, bands[0])]
    elif options.pool is not None:
        results = options.pool.render_bands(scene, options.culling, options.sorting, hbo, bands)
    else:
        with RenderPool(scene, len(bands)) as pool:
            results = pool.render_bands(scene, options.culling, options.sorting, hbo, bands)

    stats = FrameStats()
    for rows, (pixels, records, band_stats) in zip(bands, results):
        image.pixels[rows.start:rows.stop] = pixels
        if hbo is not None:
            hbo.store_rows(rows, records)
        stats = stats + band_stats
    stats.render_ms = (time.perf_counter() - start) * 1000.0
    return image, stats


def write_ppm(image):
    """Binary P6 bytes, rows from the top."""
    header = f"P6\n{image.width} {image.height}\n255\n".encode("ascii")
    return header + np.ascontiguousarray(image.pixels, dtype=np.uint8).tobytes()
