"""Demo scene: a rolling wheel, a swinging door and two idle bodies under a fixed camera."""

import json
import pathlib

from . import ingest, svo

DEMO_MODELS = {
    "wheel": ("sphere", "hash"),
    "door": ("box_shell", "constant"),
    "sponge": ("menger", "height"),
    "block": ("checker", "hash"),
}


def _menger_level(depth):
    # largest sponge whose padded grid does not exceed 2**depth
    level = 1
    while level < ingest.MAX_MENGER_LEVEL and 3 ** (level + 1) <= 1 << depth:
        level += 1
    return level


def scene_document(model_paths, duration=2.0):
    """Scene JSON for the demo: objects 1 and 2 animate, 3 and 4 stay put."""
    return {
        "models": model_paths,
        "objects": [
            {"id": 1, "model": "wheel", "translation": [-1.2, 0.0, 0.0], "scale": [0.8, 0.8, 0.8]},
            {"id": 2, "model": "door", "translation": [1.2, 0.0, 0.0], "scale": [0.6, 1.0, 0.1]},
            {"id": 3, "model": "sponge", "translation": [-0.8, -0.1, -1.5], "scale": [0.9, 0.9, 0.9]},
            {"id": 4, "model": "block", "translation": [0.9, -0.2, -1.8],
             "rotation": {"axis": [0, 1, 0], "angle_deg": 30}, "scale": [0.7, 0.7, 0.7]},
        ],
        "tracks": [
            {
                "object": 1,
                "keys": [
                    {"time": 0.0, "translation": [-1.2, 0.0, 0.0],
                     "rotation": {"axis": [0, 0, 1], "angle_deg": 0}, "scale": [0.8, 0.8, 0.8]},
                    {"time": duration / 2, "translation": [-0.6, 0.0, 0.0],
                     "rotation": {"axis": [0, 0, 1], "angle_deg": -90}, "scale": [0.8, 0.8, 0.8]},
                    {"time": duration, "translation": [0.0, 0.0, 0.0],
                     "rotation": {"axis": [0, 0, 1], "angle_deg": -180}, "scale": [0.8, 0.8, 0.8]},
                ],
            },
            {
                "object": 2,
                "keys": [
                    {"time": 0.0, "translation": [1.2, 0.0, 0.0], "scale": [0.6, 1.0, 0.1]},
                    {"time": duration, "translation": [1.2, 0.0, 0.0],
                     "rotation": {"axis": [0, 1, 0], "angle_deg": 75}, "scale": [0.6, 1.0, 0.1]},
                ],
            },
        ],
        "camera": {"position": [0.0, 0.6, 4.0], "look_at": [0.0, 0.0, -0.5], "fov_deg": 50},
        "background": [24, 26, 33],
    }


def write_demo(out_dir, depth=5):
    """Write the four demo models and ``scene.json`` into ``out_dir``; returns the scene path."""
    out_dir = pathlib.Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}
    for name, (kind, color_mode) in DEMO_MODELS.items():
        level = _menger_level(depth) if kind == "menger" else depth
        grid = ingest.gen_primitive(kind, level, color_mode=color_mode)
        svo.save_model(svo.build_from_grid(grid, grid.depth), out_dir / f"{name}.svo")
        paths[name] = f"{name}.svo"
    scene_path = out_dir / "scene.json"
    scene_path.write_text(json.dumps(scene_document(paths), indent=2), encoding="utf-8")
    return scene_path
