from .renderer import HitBuffer, RenderOptions, RenderPool, render_frame, write_ppm
from .scene import evaluate_animation, load_scene, load_scene_file, mark_clean
from .svo import build_from_grid, deserialize, load_model, save_model, serialize

__all__ = [
    "HitBuffer",
    "RenderOptions",
    "RenderPool",
    "build_from_grid",
    "deserialize",
    "evaluate_animation",
    "load_model",
    "load_scene",
    "load_scene_file",
    "mark_clean",
    "render_frame",
    "save_model",
    "serialize",
    "write_ppm",
]
