import os
import pathlib

import click

from . import ingest, svo
from .errors import ModelNotFoundError, SceneFormatError, SvoFormatError, UnknownColorModeError

PRIMITIVE_PREFIX = "primitive:"

_loaded = {}


def _cache_dir():
    root = os.environ.get("VOXANIM_HOME") or click.get_app_dir("voxanim")
    path = pathlib.Path(root) / "primitives"
    path.mkdir(exist_ok=True, parents=True)
    return path


def parse_primitive_ref(ref):
    """Split 'primitive:<kind>/<depth>[/<color_mode>]' into its parts."""
    body = ref[len(PRIMITIVE_PREFIX):]
    parts = body.split("/")
    if len(parts) not in (2, 3) or not parts[1].isdigit():
        raise SceneFormatError(
            f"Invalid primitive reference '{ref}'. Use primitive:<kind>/<depth>[/<color_mode>]."
        )
    color_mode = parts[2] if len(parts) == 3 else "hash"
    if color_mode not in ingest.COLOR_MODES:
        raise UnknownColorModeError(
            f"Unknown color mode '{color_mode}' in '{ref}'. "
            f"Use one of: {', '.join(sorted(ingest.COLOR_MODES))}."
        )
    return parts[0], int(parts[1]), color_mode


def get_primitive(kind, depth, color_mode="hash"):
    """Build a primitive model, using an on-disk cache.

    Generators are deterministic, so a cached file stays valid as long as the
    format version in its name matches. A cache file that no longer parses is
    rebuilt.
    """
    cache_path = _cache_dir() / f"{kind}-{depth}-{color_mode}.v{svo.VERSION}.svo"
    if cache_path.exists():
        try:
            return svo.load_model(cache_path)
        except SvoFormatError:
            pass

    grid = ingest.gen_primitive(kind, depth, color_mode=color_mode)
    model = svo.build_from_grid(grid, grid.depth)
    tmp_path = cache_path.with_suffix(".tmp")
    svo.save_model(model, tmp_path)
    tmp_path.replace(cache_path)
    return model


def get_model(ref, base_dir="."):
    """Load a model by file path (relative to ``base_dir``) or primitive reference.

    Files are memoized per process on (path, mtime, size), so a scene that
    references one model from many objects reads it once.
    """
    if ref.startswith(PRIMITIVE_PREFIX):
        return get_primitive(*parse_primitive_ref(ref))

    path = (pathlib.Path(base_dir) / ref).resolve()
    try:
        st = path.stat()
    except FileNotFoundError as e:
        raise ModelNotFoundError(path) from e
    key = (str(path), st.st_mtime_ns, st.st_size)
    model = _loaded.get(key)
    if model is None:
        model = svo.load_model(path)
        _loaded[key] = model
    return model
