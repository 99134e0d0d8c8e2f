"""Monte Carlo localization study over a voxel phantom.

For every voxel, ``runs_per_point`` localization attempts are simulated:
a random sensor orientation and one geomagnetic residual per attempt,
a noisy measurement per wire, then ranging and lateration. Per-voxel
means feed quartile statistics and error maps.

Random draws come from a per-voxel counter-based stream (see
``magloc.core.voxel_stream``), so outputs are independent of the worker
count and scheduling.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from magloc import __version__, core
from magloc.body import BodyModel, _infer_resolution
from magloc.config import ScenarioConfig
from magloc.errors import EmptySliceError, MaglocError, SaturationError
from magloc.fieldmodel import earth_residual, field_vectors, flux_density_at, validate_saturation
from magloc.geometry import WireSet, random_rotation
from magloc.locate import localize
from magloc.sensor import measure

log = logging.getLogger(__name__)

POINTS_HEADER = (
    "x", "y", "z", "mean_err", "mean_ex", "mean_ey", "mean_ez", "saturated_runs", "failed_runs"
)
STAT_NAMES = {"X": "X error", "Y": "Y error", "Z": "Z error", "position": "position error"}
_ROW_PREFIX = {
    "maximum": "Maximum",
    "median": "Median",
    "q1": "1st quartile",
    "q3": "3rd quartile",
}


@dataclass(frozen=True)
class PointResult:
    position: tuple[float, float, float]
    mean_error: float
    mean_axis_error: tuple[float, float, float]
    saturated_runs: int
    failed_runs: int
    # (runs, 4): position error, then signed x, y, z errors; NaN rows for failed runs
    run_errors: np.ndarray | None = field(default=None, compare=False, repr=False)

    @property
    def all_failed(self) -> bool:
        return not math.isfinite(self.mean_error)


@dataclass(eq=False)
class PointResults:
    """Struct-of-arrays form of many ``PointResult`` rows."""

    positions: np.ndarray
    mean_error: np.ndarray
    mean_axis_error: np.ndarray
    saturated_runs: np.ndarray
    failed_runs: np.ndarray

    def __len__(self) -> int:
        return len(self.positions)

    def __getitem__(self, i) -> PointResult:
        return PointResult(
            tuple(self.positions[i].tolist()),
            float(self.mean_error[i]),
            tuple(self.mean_axis_error[i].tolist()),
            int(self.saturated_runs[i]),
            int(self.failed_runs[i]),
        )

    @classmethod
    def from_points(cls, points) -> "PointResults":
        points = list(points)
        return cls(
            np.array([p.position for p in points], dtype=float).reshape(-1, 3),
            np.array([p.mean_error for p in points], dtype=float),
            np.array([p.mean_axis_error for p in points], dtype=float).reshape(-1, 3),
            np.array([p.saturated_runs for p in points], dtype=np.int64),
            np.array([p.failed_runs for p in points], dtype=np.int64),
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(POINTS_HEADER)
        for pos, err, ax, sat, fail in zip(
            self.positions.tolist(),
            self.mean_error.tolist(),
            self.mean_axis_error.tolist(),
            self.saturated_runs.tolist(),
            self.failed_runs.tolist(),
        ):
            wr.writerow([repr(v) for v in (*pos, err, *ax)] + [sat, fail])
        return buf.getvalue()

    @classmethod
    def read_csv(cls, path) -> "PointResults":
        path = Path(path)
        if path.is_dir():
            path = path / "points.csv"
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or tuple(rows[0]) != POINTS_HEADER:
            raise MaglocError(f"{path}: not a points.csv file")
        data = np.array(rows[1:], dtype=float).reshape(-1, len(POINTS_HEADER))
        return cls(
            data[:, 0:3].copy(),
            data[:, 3].copy(),
            data[:, 4:7].copy(),
            data[:, 7].astype(np.int64),
            data[:, 8].astype(np.int64),
        )


@dataclass(frozen=True)
class ErrorStats:
    maximum: float
    q1: float
    median: float
    q3: float


def error_stats(values) -> ErrorStats:
    """Maximum and quartiles (linear interpolation between closest ranks)."""
    v = np.asarray(values, dtype=float).ravel()
    v = v[np.isfinite(v)]
    if v.size == 0:
        raise ValueError("no finite values to summarize")
    q1, q2, q3 = np.percentile(v, [25, 50, 75])
    return ErrorStats(float(v.max()), float(q1), float(q2), float(q3))


def summarize(point_results) -> dict[str, ErrorStats]:
    """Statistics over voxels of per-voxel mean errors, keyed X, Y, Z and position."""
    if not isinstance(point_results, PointResults):
        point_results = PointResults.from_points(point_results)
    if len(point_results) == 0:
        raise ValueError("cannot summarize an empty result set")
    return {
        "X": error_stats(point_results.mean_axis_error[:, 0]),
        "Y": error_stats(point_results.mean_axis_error[:, 1]),
        "Z": error_stats(point_results.mean_axis_error[:, 2]),
        "position": error_stats(point_results.mean_error),
    }


def summary_rows(stats: dict[str, ErrorStats]) -> list[tuple[str, float]]:
    """Table rows (name, value in cm) in the usual report order."""
    rows = []
    for stat in ("maximum", "median", "q1", "q3"):
        for key in ("X", "Y", "Z", "position"):
            rows.append((f"{_ROW_PREFIX[stat]} {STAT_NAMES[key]}", 100.0 * getattr(stats[key], stat)))
    return rows


def format_summary(stats: dict[str, ErrorStats], title: str = "") -> str:
    lines = ["# errors in cm over voxels of per-voxel mean errors"]
    if title:
        lines.insert(0, f"# {title}")
    lines += [f"{name} = {value:.4f}" for name, value in summary_rows(stats)]
    return "\n".join(lines) + "\n"


def simulate_point(
    voxel,
    wireset: WireSet,
    config: ScenarioConfig,
    rng_stream: np.random.Generator | None = None,
    voxel_index: int = 0,
) -> PointResult:
    """Reference (unbatched) simulation of one voxel through the public API.

    Draws are taken in the same order as the batched kernels, so with the
    default stream both agree to rounding.
    """
    rng = rng_stream if rng_stream is not None else core.voxel_stream(config.seed, voxel_index)
    voxel = np.asarray(voxel, dtype=float)
    true_fields = [flux_density_at(w, voxel, config.mu) for w in wireset]
    runs = config.runs_per_point
    run_errors = np.full((runs, 4), np.nan)
    saturated = 0
    for r in range(runs):
        orientation = random_rotation(rng)
        residual = earth_residual(config.residual, rng, config.earth_mapping)
        meas = [measure(b, residual, orientation, config.magnetometer, rng) for b in true_fields]
        if any(mm.saturated for mm in meas):
            saturated += 1
        try:
            est = localize(meas, wireset, config.magnetometer, config.mu).as_array()
        except MaglocError:
            continue
        d = est - voxel
        run_errors[r] = (math.sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]), *d)
    ok = np.isfinite(run_errors[:, 0])
    if ok.any():
        mean_err = float(run_errors[ok, 0].mean())
        mean_ax = tuple(float(v) for v in np.abs(run_errors[ok, 1:]).mean(axis=0))
    else:
        mean_err, mean_ax = math.nan, (math.nan,) * 3
    return PointResult(
        tuple(voxel.tolist()), mean_err, mean_ax, saturated, int(runs - ok.sum()), run_errors
    )


@dataclass(eq=False)
class ScenarioResult:
    points: PointResults
    stats: dict[str, ErrorStats]
    manifest: str
    wireset: WireSet
    body: BodyModel
    backend: str


def simulate_voxels(
    voxels,
    wireset: WireSet,
    config: ScenarioConfig,
    threads: int = 1,
    backend: str | None = None,
    indices=None,
    chunk: int | None = None,
) -> PointResults:
    """Batched simulation of many voxels; ``indices`` select the random streams."""
    voxels = np.ascontiguousarray(voxels, dtype=float).reshape(-1, 3)
    if indices is None:
        indices = np.arange(len(voxels))
    indices = np.asarray(indices, dtype=np.int64)
    plan = core.KernelPlan.build(
        wireset, config.magnetometer, config.residual, config.earth_mapping, config.mu
    )
    kernel = core.get_kernel(backend)
    runs = config.runs_per_point
    per_run = core.draws_per_run(len(wireset))
    chunk = chunk or core.default_chunk(len(wireset), runs)
    starts = list(range(0, len(voxels), chunk))

    def work(start):
        sl = slice(start, start + chunk)
        pos = voxels[sl]
        uni = core.block_uniforms(config.seed, indices[sl], runs, per_run)
        return kernel(pos, field_vectors(wireset, pos, config.mu), uni, plan)

    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, starts))
    else:
        parts = [work(s) for s in starts]

    if parts:
        means = np.concatenate([p[0] for p in parts])
        sat = np.concatenate([p[1] for p in parts])
        fail = np.concatenate([p[2] for p in parts])
    else:
        means, sat, fail = np.zeros((0, 4)), np.zeros(0, np.int64), np.zeros(0, np.int64)
    return PointResults(voxels.copy(), means[:, 0].copy(), means[:, 1:].copy(), sat, fail)


def build_manifest(config: ScenarioConfig, wireset: WireSet, body: BodyModel, backend: str) -> str:
    wire_lines = "\n".join(
        f"wire.{i} = axis={w.axis} offset_a={w.offset[0]!r} offset_b={w.offset[1]!r} current={w.current!r}"
        for i, w in enumerate(wireset)
    )
    n, m, p = wireset.counts
    return (
        "# magloc run manifest\n"
        + config.to_ini()
        + "\n[run]\n"
        + f"version = {__version__}\n"
        + f"backend = {backend}\n"
        + f"voxels = {len(body)}\n"
        + f"voxel_resolution = {body.resolution!r}\n"
        + f"mode = {wireset.mode}\n"
        + f"family_counts = {n}, {m}, {p}\n"
        + "\n[wireset]\n"
        + wire_lines
        + "\n"
    )


def run_scenario(
    config: ScenarioConfig,
    threads: int = 1,
    backend: str | None = None,
    body: BodyModel | None = None,
    write: bool = True,
) -> ScenarioResult:
    """Simulate every voxel of the phantom and (optionally) write the outputs.

    Raises ``SaturationError`` before simulating if any wire exceeds the
    magnetometer range anywhere in the body.
    """
    backend = backend or core.BACKEND
    body = body if body is not None else config.build_body()
    wireset = config.build_wireset(body.bounding_box)
    report = validate_saturation(wireset, body, config.magnetometer.range_max, config.mu)
    if not report.ok:
        raise SaturationError(report)
    log.info(
        "simulating %d voxels x %d runs, %d wires, backend=%s, threads=%d",
        len(body), config.runs_per_point, len(wireset), backend, threads,
    )
    points = simulate_voxels(body.voxels, wireset, config, threads=threads, backend=backend)
    stats = summarize(points)
    manifest = build_manifest(config, wireset, body, backend)
    result = ScenarioResult(points, stats, manifest, wireset, body, backend)
    if write and config.output:
        write_outputs(result, config.output)
    return result


def write_outputs(result: ScenarioResult, outdir) -> Path:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "points.csv").write_text(result.points.to_csv())
    n, m, p = result.wireset.counts
    title = f"{len(result.wireset)} wires (X={n}, Y={m}, Z={p}), {len(result.points)} voxels"
    (out / "summary.txt").write_text(format_summary(result.stats, title))
    (out / "manifest.txt").write_text(result.manifest)
    return out


# -- error maps --------------------------------------------------------------

_AX = {"x": 0, "y": 1, "z": 2}
# (row axis, column axis) of the grid for a slice normal / projection plane
_SLICE_GRID = {"x": ("z", "y"), "y": ("z", "x"), "z": ("y", "x")}
_PLANE_GRID = {"xz": ("z", "x"), "yz": ("z", "y"), "xy": ("y", "x")}


@dataclass(eq=False)
class ErrorMap:
    """2-D grid of mean errors in cm; NaN marks cells outside the body.

    Rows run from the largest row coordinate down, so a vertical map
    reads head-up.
    """

    row_axis: str
    col_axis: str
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    title: str = ""

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow([f"{self.row_axis}\\{self.col_axis} [m]"] + [f"{c:.4f}" for c in self.cols])
        for r, row in zip(self.rows, self.values):
            wr.writerow([f"{r:.4f}"] + ["" if not np.isfinite(v) else f"{v:.4f}" for v in row])
        return buf.getvalue()

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_csv())
        return path

    def band_mean(self, lo: float, hi: float) -> float:
        """Mean cell value over rows whose coordinate lies in a fractional band.

        ``lo`` and ``hi`` are fractions of the occupied row-coordinate span
        (0 = lowest occupied row, 1 = highest).
        """
        occupied = np.any(np.isfinite(self.values), axis=1)
        r = self.rows[occupied]
        vmin, vmax = r.min(), r.max()
        span = vmax - vmin
        sel = occupied & (self.rows >= vmin + lo * span - 1e-12) & (self.rows <= vmin + hi * span + 1e-12)
        cells = self.values[sel]
        cells = cells[np.isfinite(cells)]
        if cells.size == 0:
            raise EmptySliceError(f"no cells in band [{lo}, {hi}]")
        return float(cells.mean())


def _grid(coords_rows, coords_cols, values, res, row_axis, col_axis, title):
    r0, c0 = coords_rows.min(), coords_cols.min()
    ri = np.rint((coords_rows - r0) / res).astype(np.int64)
    ci = np.rint((coords_cols - c0) / res).astype(np.int64)
    nr, nc = ri.max() + 1, ci.max() + 1
    sums = np.zeros((nr, nc))
    counts = np.zeros((nr, nc))
    np.add.at(sums, (ri, ci), values)
    np.add.at(counts, (ri, ci), 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        grid = sums / counts
    grid[counts == 0] = np.nan
    rows = r0 + np.arange(nr) * res
    cols = c0 + np.arange(nc) * res
    return ErrorMap(row_axis, col_axis, rows[::-1], cols, grid[::-1], title)


def _finite(point_results):
    if not isinstance(point_results, PointResults):
        point_results = PointResults.from_points(point_results)
    ok = np.isfinite(point_results.mean_error)
    return point_results.positions[ok], point_results.mean_error[ok] * 100.0


def export_error_map(point_results, axis: str, slice_coordinate: float, path=None) -> ErrorMap:
    """Planar slice of per-voxel mean errors (cm) normal to ``axis`` at ``slice_coordinate``."""
    axis = axis.lower()
    if axis not in _AX:
        raise ValueError(f"axis must be one of x, y, z; got {axis!r}")
    pos, err = _finite(point_results)
    if len(pos) == 0:
        raise EmptySliceError("no voxels with finite errors")
    res = _infer_resolution(pos)
    sel = np.abs(pos[:, _AX[axis]] - slice_coordinate) <= res / 2 + 1e-9
    if not sel.any():
        raise EmptySliceError(f"slice {axis}={slice_coordinate} does not intersect the body")
    row_axis, col_axis = _SLICE_GRID[axis]
    emap = _grid(
        pos[sel, _AX[row_axis]], pos[sel, _AX[col_axis]], err[sel], res, row_axis, col_axis,
        f"slice {axis}={slice_coordinate}",
    )
    if path is not None:
        emap.write(path)
    return emap


def export_projection(point_results, plane: str = "xz", path=None) -> ErrorMap:
    """Whole-body map: per grid column of ``plane``, the mean over the third axis."""
    plane = "".join(sorted(plane.lower()))
    if plane not in _PLANE_GRID:
        raise ValueError(f"plane must be one of xy, xz, yz; got {plane!r}")
    pos, err = _finite(point_results)
    if len(pos) == 0:
        raise EmptySliceError("no voxels with finite errors")
    res = _infer_resolution(pos)
    row_axis, col_axis = _PLANE_GRID[plane]
    emap = _grid(
        pos[:, _AX[row_axis]], pos[:, _AX[col_axis]], err, res, row_axis, col_axis,
        f"projection {plane}",
    )
    if path is not None:
        emap.write(path)
    return emap
