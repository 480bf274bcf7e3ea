import contextlib
import os
import pathlib
import time
from dataclasses import dataclass

import click
from tabulate import tabulate

from . import demo, ingest, svo
from .errors import (
    IO,
    PARSE,
    VALIDATION,
    DepthRangeError,
    InvalidModeError,
    ModelValidationError,
    VoxanimError,
)
from .renderer import HitBuffer, RenderOptions, RenderPool, render_frame, write_ppm
from .report import (
    BENCH_MODES,
    BenchReport,
    build_info_text,
    format_bench_table,
    format_frame_csv,
    format_model_table,
    format_report_csv,
)
from .scene import evaluate_animation, load_scene_file, mark_clean


class IOFailure(click.ClickException):
    exit_code = 3


class ParseFailure(click.ClickException):
    exit_code = 4


class ValidationFailure(click.ClickException):
    exit_code = 5


_EXCEPTIONS = {IO: IOFailure, PARSE: ParseFailure, VALIDATION: ValidationFailure}


def _failure(e):
    """Map a library or OS error onto the click exception with the right exit code."""
    if isinstance(e, VoxanimError):
        return _EXCEPTIONS[e.category](str(e))
    if isinstance(e, OSError):
        return IOFailure(str(e))
    return ValidationFailure(str(e))


def _parse_size(ctx, param, value):
    try:
        width, height = (int(v) for v in value.lower().split("x"))
    except ValueError:
        raise click.BadParameter(f"'{value}' is not WIDTHxHEIGHT, e.g. 640x480.")
    if width < 1 or height < 1:
        raise click.BadParameter(f"'{value}' must be at least 1x1.")
    return width, height


def _thread_count(threads):
    return threads or os.cpu_count() or 1


def _render_pool(scene, threads):
    if threads > 1 and scene.camera.height > 1:
        return RenderPool(scene, threads)
    return contextlib.nullcontext()


@dataclass
class RenderConfig:
    scene: pathlib.Path
    out_dir: pathlib.Path
    width: int = 640
    height: int = 480
    frames: int = 1
    fps: float = 30.0
    culling: bool = True
    sorting: bool = True
    hbo: bool = True
    threads: int = 1

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"Image size {self.width}x{self.height} must be at least 1x1.")
        if not self.fps > 0:
            raise ValueError(f"--fps must be positive, got {self.fps}.")
        if self.frames < 1:
            raise ValueError(f"--frames must be at least 1, got {self.frames}.")


BENCH_OPTIONS = {
    "static": dict(animate=False, culling=False, sorting=False, hbo=False),
    "animated": dict(animate=True, culling=False, sorting=False, hbo=False),
    "animated-opt": dict(animate=True, culling=True, sorting=True, hbo=True),
}


def run_bench(scene, mode, frames=30, seconds=None, warmup=0, fps=30.0, threads=1, progress=None):
    """Render a benchmark sequence with a static camera and return a BenchReport.

    ``static`` renders the scene as loaded and never evaluates animation.
    With ``seconds`` set, frames are rendered until that much wall-clock time
    has passed instead of a fixed count. The first ``warmup`` frames are
    rendered but not reported. Timing covers ``render_frame`` only.
    """
    if mode not in BENCH_OPTIONS:
        raise InvalidModeError(f"Unknown bench mode '{mode}'. Use one of: {', '.join(BENCH_MODES)}.")
    setup = BENCH_OPTIONS[mode]
    hbo = HitBuffer.for_camera(scene.camera) if setup["hbo"] else None
    report = BenchReport(mode)

    with _render_pool(scene, threads) as pool:
        options = RenderOptions(setup["culling"], setup["sorting"], hbo, threads, pool)
        k = 0
        started = time.perf_counter()
        while True:
            if seconds is None:
                if k >= warmup + frames:
                    break
            elif k >= warmup and time.perf_counter() - started >= seconds:
                break
            if setup["animate"]:
                evaluate_animation(scene, k / fps)
            _, stats = render_frame(scene, options)
            mark_clean(scene)
            if k >= warmup:
                report.frames.append(stats)
            if progress:
                progress(k, stats)
            k += 1
    return report


@click.group()
@click.version_option()
def cli():
    "Build, inspect, render and benchmark rigid-body animated sparse voxel octrees"


@cli.command()
@click.option("--input", "input_path", type=click.Path(dir_okay=False), help="binvox file to convert")
@click.option("--shape", type=click.Choice(sorted(ingest.PRIMITIVES)), help="Generate a primitive instead")
@click.option("--depth", type=int, default=None,
              help="Octree depth (menger: sponge level). Defaults to the grid's own depth.")
@click.option("--color", "color_mode", type=click.Choice(sorted(ingest.COLOR_MODES)), default="hash",
              show_default=True, help="How voxel colors are assigned")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False), help="Output .svo path")
def build(input_path, shape, depth, color_mode, out_path):
    "Build an .svo model from a binvox file or a procedural shape"
    if bool(input_path) == bool(shape):
        raise click.UsageError("Give exactly one of --input or --shape.")
    try:
        if shape:
            grid = ingest.gen_primitive(shape, 5 if depth is None else depth, color_mode=color_mode)
        else:
            grid = ingest.load_binvox(input_path, color_mode=color_mode)
            if depth is None and grid.depth > svo.DEFAULT_MAX_BUILD_DEPTH:
                raise DepthRangeError(
                    f"{input_path} has depth {grid.depth}, above the build cap of "
                    f"{svo.DEFAULT_MAX_BUILD_DEPTH}. Pass --depth to reduce it."
                )
            if depth is not None and depth != grid.depth:
                grid = grid.reduced(depth)
        model = svo.build_from_grid(grid, grid.depth)
        report = svo.validate(model)
        if not report.ok:
            raise ModelValidationError(f"Built model failed validation:\n{report}")
        svo.save_model(model, out_path)
    except (VoxanimError, OSError) as e:
        raise _failure(e) from e
    click.echo(f"Wrote {out_path}")
    click.echo(format_model_table(svo.stats(model)))


@cli.command()
@click.argument("path", type=click.Path(dir_okay=False))
@click.option("--leaves", is_flag=True, help="List every leaf voxel")
def info(path, leaves):
    "Show node/leaf counts, size and per-object animation footprint of an .svo model"
    try:
        model = svo.load_model(path)
        file_size = pathlib.Path(path).stat().st_size
    except (VoxanimError, OSError) as e:
        raise _failure(e) from e
    click.echo(
        build_info_text(
            svo.stats(model),
            file_size=file_size,
            leaves=svo.iter_leaves(model) if leaves else None,
        )
    )


def _common_render_options(func):
    func = click.option("--verbose", "-v", is_flag=True, help="Print one line per frame to stderr")(func)
    func = click.option("--threads", type=click.IntRange(min=1), envvar="VOXANIM_THREADS",
                        show_envvar=True, help="Render threads (default: CPU count)")(func)
    func = click.option("--fps", type=float, default=30.0, show_default=True,
                        help="Animation time step is 1/fps")(func)
    func = click.option("--size", default="640x480", show_default=True, callback=_parse_size,
                        help="Image size as WIDTHxHEIGHT")(func)
    func = click.option("--scene", "scene_path", required=True, type=click.Path(dir_okay=False),
                        help="Scene JSON document")(func)
    return func


@cli.command()
@_common_render_options
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False), help="Frame directory")
@click.option("--frames", type=click.IntRange(min=1), default=1, show_default=True, help="Number of frames")
@click.option("--no-culling", is_flag=True, help="Traverse every object for every ray")
@click.option("--no-sorting", is_flag=True, help="Trace in id order without early exit")
@click.option("--no-hbo", is_flag=True, help="Disable hit buffer reuse")
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), help="Write frame stats here instead of stdout")
def render(scene_path, size, fps, threads, verbose, out_dir, frames, no_culling, no_sorting, no_hbo, csv_path):
    "Render an animation sequence to frame_NNNNN.ppm files"
    written = []
    try:
        config = RenderConfig(
            pathlib.Path(scene_path), pathlib.Path(out_dir), size[0], size[1], frames, fps,
            not no_culling, not no_sorting, not no_hbo, _thread_count(threads),
        )
        scene = load_scene_file(config.scene, config.width, config.height)
        config.out_dir.mkdir(parents=True, exist_ok=True)
        hbo = HitBuffer.for_camera(scene.camera) if config.hbo else None
        lines = []
        with _render_pool(scene, config.threads) as pool:
            options = RenderOptions(config.culling, config.sorting, hbo, config.threads, pool)
            for k in range(config.frames):
                evaluate_animation(scene, k / config.fps)
                image, stats = render_frame(scene, options)
                mark_clean(scene)
                frame_path = config.out_dir / f"frame_{k:05}.ppm"
                frame_path.write_bytes(write_ppm(image))
                written.append(frame_path)
                line = format_frame_csv("render", k, stats, header=(k == 0))
                if csv_path:
                    lines.append(line)
                else:
                    click.echo(line, nl=False)
                if verbose:
                    click.echo(f"frame {k}: {stats.render_ms:.1f} ms, {stats.pixels_reused} reused", err=True)
        if csv_path:
            pathlib.Path(csv_path).write_text("".join(lines), encoding="utf-8")
    except (VoxanimError, OSError, ValueError) as e:
        for path in written:
            path.unlink(missing_ok=True)
        raise _failure(e) from e


@cli.command()
@_common_render_options
@click.option("--mode", required=True, type=click.Choice(BENCH_MODES), help="Benchmark mode")
@click.option("--frames", type=click.IntRange(min=1), default=30, show_default=True, help="Frames to time")
@click.option("--seconds", type=float, default=None, help="Run for this many seconds instead of --frames")
@click.option("--warmup", type=click.IntRange(min=0), default=0, show_default=True,
              help="Frames rendered before timing starts")
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), help="Write the report as CSV")
def bench(scene_path, size, fps, threads, verbose, mode, frames, seconds, warmup, csv_path):
    "Time static, animated or optimized animated rendering"
    if seconds is not None and seconds <= 0:
        raise click.BadParameter("--seconds must be positive.", param_hint="--seconds")

    def progress(k, stats):
        if verbose:
            click.echo(f"frame {k}: {stats.render_ms:.1f} ms", err=True)

    try:
        scene = load_scene_file(scene_path, size[0], size[1])
        report = run_bench(scene, mode, frames, seconds, warmup, fps, _thread_count(threads), progress)
        if csv_path:
            pathlib.Path(csv_path).write_text(format_report_csv(report), encoding="utf-8")
    except (VoxanimError, OSError, ValueError) as e:
        raise _failure(e) from e
    click.echo(format_bench_table([report]))


@cli.command(name="demo")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False), help="Output directory")
@click.option("--depth", type=click.IntRange(1, ingest.MAX_PRIMITIVE_DEPTH), default=5, show_default=True,
              help="Depth of the generated models")
def demo_command(out_dir, depth):
    "Write a four-object demo scene (two animated, two idle)"
    try:
        scene_path = demo.write_demo(out_dir, depth)
    except (VoxanimError, OSError) as e:
        raise _failure(e) from e
    click.echo(f"Wrote {scene_path}")
    rows = [[name, kind, mode] for name, (kind, mode) in demo.DEMO_MODELS.items()]
    click.echo(tabulate(rows, headers=["Model", "Shape", "Color"], tablefmt="simple"))
