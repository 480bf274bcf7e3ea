import csv
import io
from dataclasses import dataclass, field

from tabulate import tabulate

from .geometry import ANIMATION_STATE_BYTES, HOMOGENEOUS_MATRIX_BYTES_F32
from .renderer import FrameStats

BENCH_MODES = ("static", "animated", "animated-opt")
FRAME_COLUMNS = ["mode", "frame", "ms", "rays", "sphere_tests", "svo_traversals", "pixels_reused"]
SUMMARY_COLUMNS = ["mode", "avg_ms", "fps"]


@dataclass
class BenchReport:
    mode: str
    frames: list = field(default_factory=list)

    @property
    def frame_ms(self):
        return [f.render_ms for f in self.frames]

    @property
    def avg_ms(self):
        if not self.frames:
            return 0.0
        return sum(self.frame_ms) / len(self.frames)

    @property
    def fps(self):
        avg = self.avg_ms
        return 1000.0 / avg if avg > 0 else float("inf")

    @property
    def total(self):
        return sum(self.frames, FrameStats())


def frame_row(mode, index, stats):
    return [mode, index, stats.render_ms, stats.rays, stats.sphere_tests,
            stats.svo_traversals, stats.pixels_reused]


def format_frame_csv(mode, index, stats, header=False):
    """One CSV line per frame, optionally preceded by the column header."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    if header:
        writer.writerow(FRAME_COLUMNS)
    writer.writerow(frame_row(mode, index, stats))
    return out.getvalue()


def format_report_csv(report):
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(FRAME_COLUMNS)
    for i, stats in enumerate(report.frames):
        writer.writerow(frame_row(report.mode, i, stats))
    writer.writerow(SUMMARY_COLUMNS)
    writer.writerow([report.mode, report.avg_ms, report.fps])
    return out.getvalue()


def parse_report_csv(text):
    """Read reports back from CSV text; returns {mode: (BenchReport, avg_ms, fps)}.

    Frame rows rebuild FrameStats exactly (floats are written with repr). The
    summary values are returned as written so callers can check them.
    """
    reports = {}
    for row in csv.reader(io.StringIO(text)):
        if not row or row == FRAME_COLUMNS or row == SUMMARY_COLUMNS:
            continue
        mode = row[0]
        entry = reports.setdefault(mode, [BenchReport(mode), None, None])
        if len(row) == len(FRAME_COLUMNS):
            _, _, ms, rays, tests, traversals, reused = row
            entry[0].frames.append(
                FrameStats(int(rays), int(tests), int(traversals), int(reused), float(ms))
            )
        elif len(row) == len(SUMMARY_COLUMNS):
            entry[1], entry[2] = float(row[1]), float(row[2])
        else:
            raise ValueError(f"Unexpected report row with {len(row)} fields: {row!r}")
    return {mode: tuple(entry) for mode, entry in reports.items()}


def format_model_table(model_stats, file_size=None):
    data = [
        ["Depth", model_stats.depth],
        ["Nodes", f"{model_stats.node_count:,}"],
        ["Leaves", f"{model_stats.leaf_count:,}"],
        ["Size (bytes)", f"{model_stats.byte_size:,}"],
        ["Fill ratio", f"{model_stats.fill_ratio:.6f}"],
    ]
    if file_size is not None:
        data.append(["File size (bytes)", f"{file_size:,}"])
    return tabulate(data, tablefmt="simple", colalign=("left", "right"))


def format_footprint_table():
    data = [
        ["Animation state per object (float64 R, T, S)", f"{ANIMATION_STATE_BYTES} B"],
        ["4x4 homogeneous matrix (float32)", f"{HOMOGENEOUS_MATRIX_BYTES_F32} B"],
    ]
    return tabulate(data, tablefmt="simple", colalign=("left", "right"))


def format_leaves_table(leaves, limit=None):
    rows = []
    for i, (x, y, z, attr) in enumerate(leaves):
        if limit is not None and i >= limit:
            break
        rows.append([x, y, z, f"#{attr.r:02x}{attr.g:02x}{attr.b:02x}", attr.a])
    return tabulate(rows, headers=["X", "Y", "Z", "Color", "Alpha"], tablefmt="simple", numalign="right")


def format_bench_table(reports):
    rows = []
    for r in reports:
        total = r.total
        rows.append([r.mode, len(r.frames), f"{r.avg_ms:.2f}", f"{r.fps:.2f}",
                     total.svo_traversals, total.pixels_reused])
    headers = ["Mode", "Frames", "Avg ms", "FPS", "Traversals", "Reused"]
    return tabulate(rows, headers=headers, tablefmt="simple", numalign="right")


def build_info_text(model_stats, file_size=None, leaves=None):
    """Plain-text report for ``voxanim info``."""
    sections = []

    sections.append("MODEL")
    sections.append("-" * 50)
    sections.append(format_model_table(model_stats, file_size))
    sections.append("")

    sections.append("ANIMATION FOOTPRINT")
    sections.append("-" * 50)
    sections.append(format_footprint_table())
    sections.append("")

    if leaves is not None:
        sections.append("LEAVES")
        sections.append("-" * 50)
        sections.append(format_leaves_table(leaves))
        sections.append("")

    return "\n".join(sections)
