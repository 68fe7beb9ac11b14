"""
Reading and writing run artifacts: path CSV/binary replay files, density
snapshots, per-step streams and JSON reports.

Binary layouts are an 8-byte magic, a little-endian int64 header, a
little-endian float64 header and a float64 payload. Nothing time-dependent is
written, so reruns are byte-identical.
"""

import json
import logging
from pathlib import Path

import jsonschema
import numpy as np
from pydantic import BaseModel

from app.errors import ConfigError
from app.models import DensityField, FilterState, FilterTrajectory, GridSpec, PathSample
from app.schemas.reports import GridModel, TrajectoryManifest

# Configure logging
logger = logging.getLogger(__name__)

PATH_MAGIC = b"ZKPATH01"
DENSITY_MAGIC = b"ZKDENS01"
FLOAT_FORMAT = "%.17g"


def _write_csv(file: Path, columns: list[str], rows: np.ndarray) -> None:
    np.savetxt(file, rows, fmt=FLOAT_FORMAT, delimiter=",", header=",".join(columns), comments="")


def _read_csv(file: Path) -> tuple[list[str], np.ndarray]:
    with open(file, encoding="utf-8") as handle:
        columns = handle.readline().strip().split(",")
    rows = np.loadtxt(file, delimiter=",", skiprows=1, ndmin=2)
    return columns, rows


def write_path_csv(path: PathSample, file: Path) -> None:
    """Columns t, x_1..x_d, y_1..y_{d1-d}."""
    d, d1 = path.d, path.z.shape[1]
    columns = ["t"] + [f"x_{i + 1}" for i in range(d)] + [f"y_{i + 1}" for i in range(d1 - d)]
    _write_csv(file, columns, np.column_stack([path.times, path.z]))


def write_path_binary(path: PathSample, file: Path) -> None:
    steps, d1 = path.steps, path.z.shape[1]
    d2 = path.w.shape[1]
    with open(file, "wb") as handle:
        handle.write(PATH_MAGIC)
        handle.write(np.array([steps, d1, d2, path.d, path.seed], dtype="<i8").tobytes())
        handle.write(np.array([path.dt], dtype="<f8").tobytes())
        for array in (path.times, path.w, path.z):
            handle.write(np.ascontiguousarray(array, dtype="<f8").tobytes())


def read_path_binary(file: Path) -> PathSample:
    """Exact replay of a path written by write_path_binary."""
    raw = Path(file).read_bytes()
    if raw[:8] != PATH_MAGIC:
        raise ConfigError(f"{file} is not a path replay file")
    steps, d1, d2, d, seed = (int(v) for v in np.frombuffer(raw, dtype="<i8", count=5, offset=8))
    dt = float(np.frombuffer(raw, dtype="<f8", count=1, offset=48)[0])
    payload = np.frombuffer(raw, dtype="<f8", offset=56)
    n_times, n_w = steps + 1, steps * d2
    times = payload[:n_times].copy()
    w = payload[n_times:n_times + n_w].reshape(steps, d2).copy()
    z = payload[n_times + n_w:].reshape(steps + 1, d1).copy()
    return PathSample(dt=dt, times=times, w=w, z=z, d=d, seed=seed)


def write_density_csv(field: DensityField, file: Path) -> None:
    """Columns x_1..x_d, value; one row per node (C order)."""
    grid = field.grid
    columns = [f"x_{i + 1}" for i in range(grid.d)] + ["value"]
    rows = np.column_stack([grid.points.reshape(-1, grid.d), field.values.ravel()])
    _write_csv(file, columns, rows)


def write_density_binary(state: FilterState, file: Path) -> None:
    grid = state.grid
    with open(file, "wb") as handle:
        handle.write(DENSITY_MAGIC)
        handle.write(np.array([grid.d, *grid.nodes], dtype="<i8").tobytes())
        handle.write(np.array([state.t, *grid.lower, *grid.h], dtype="<f8").tobytes())
        handle.write(np.ascontiguousarray(state.pibar.values, dtype="<f8").tobytes())


def read_density_binary(file: Path) -> FilterState:
    raw = Path(file).read_bytes()
    if raw[:8] != DENSITY_MAGIC:
        raise ConfigError(f"{file} is not a density snapshot")
    d = int(np.frombuffer(raw, dtype="<i8", count=1, offset=8)[0])
    nodes = tuple(int(v) for v in np.frombuffer(raw, dtype="<i8", count=d, offset=16))
    offset = 16 + 8 * d
    header = np.frombuffer(raw, dtype="<f8", count=1 + 2 * d, offset=offset)
    grid = GridSpec(lower=tuple(header[1:1 + d]), h=tuple(header[1 + d:]), nodes=nodes)
    values = np.frombuffer(raw, dtype="<f8", offset=offset + 8 * (1 + 2 * d)).reshape(nodes)
    return FilterState.from_values(float(header[0]), values, grid)


def stream_columns(m: int) -> list[str]:
    return (
        ["t", "mass", "min_value", "max_value", "peak"]
        + [f"p_beta_{k + 1}" for k in range(m)]
        + [f"w_hat_{k + 1}" for k in range(m)]
    )


def write_streams_csv(traj: FilterTrajectory, file: Path) -> None:
    """Per-step streams; the increment columns of the last row are nan."""
    increments = np.vstack([traj.w_hat, np.full((1, traj.m), np.nan)])
    rows = np.column_stack(
        [traj.times, traj.mass, traj.min_value, traj.max_value, traj.peak_values, traj.p_beta, increments]
    )
    _write_csv(file, stream_columns(traj.m), rows)


def write_trajectory(
    traj: FilterTrajectory,
    out_dir: Path,
    seed: int,
    scenario: str,
    snapshot_format: str = "binary",
) -> TrajectoryManifest:
    """Write streams, snapshots and the manifest that indexes them."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    streams_file = f"streams_seed{seed}.csv"
    write_streams_csv(traj, out_dir / streams_file)

    snapshot_files = []
    for state, k in zip(traj.snapshots, traj.snapshot_steps):
        if snapshot_format == "csv":
            name = f"density_seed{seed}_step{k:06d}.csv"
            write_density_csv(state.pibar, out_dir / name)
        else:
            name = f"density_seed{seed}_step{k:06d}.bin"
            write_density_binary(state, out_dir / name)
        snapshot_files.append(name)

    grid = traj.grid
    manifest = TrajectoryManifest(
        seed=seed,
        scenario=scenario,
        dt=traj.dt,
        grid=GridModel(lower=list(grid.lower), h=list(grid.h), nodes=list(grid.nodes)),
        peak_index=list(traj.peak_index),
        streams_file=streams_file,
        snapshot_format=snapshot_format,
        snapshot_steps=list(traj.snapshot_steps),
        snapshot_files=snapshot_files,
    )
    write_json(manifest, out_dir / f"trajectory_seed{seed}.json")
    logger.info(f"[CLI] Wrote trajectory for seed {seed} to {out_dir}")
    return manifest


def read_trajectory(out_dir: Path, seed: int) -> FilterTrajectory:
    """Rebuild a FilterTrajectory from the files written by write_trajectory."""
    out_dir = Path(out_dir)
    manifest_file = out_dir / f"trajectory_seed{seed}.json"
    if not manifest_file.exists():
        raise FileNotFoundError(f"No trajectory manifest {manifest_file}")
    manifest = TrajectoryManifest.model_validate_json(manifest_file.read_text(encoding="utf-8"))
    grid = GridSpec(
        lower=tuple(manifest.grid.lower), h=tuple(manifest.grid.h), nodes=tuple(manifest.grid.nodes)
    )

    columns, rows = _read_csv(out_dir / manifest.streams_file)
    m = sum(1 for name in columns if name.startswith("p_beta_"))
    snapshots = []
    for name, k in zip(manifest.snapshot_files, manifest.snapshot_steps):
        if manifest.snapshot_format == "csv":
            _, table = _read_csv(out_dir / name)
            values = table[:, -1].reshape(grid.nodes)
            snapshots.append(FilterState.from_values(float(rows[k, 0]), values, grid))
        else:
            snapshots.append(read_density_binary(out_dir / name))

    return FilterTrajectory(
        grid=grid,
        dt=manifest.dt,
        times=rows[:, 0],
        mass=rows[:, 1],
        min_value=rows[:, 2],
        max_value=rows[:, 3],
        p_beta=rows[:, 5:5 + m],
        w_hat=rows[:-1, 5 + m:5 + 2 * m],
        peak_index=tuple(manifest.peak_index),
        peak_values=rows[:, 4],
        snapshots=tuple(snapshots),
        snapshot_steps=tuple(manifest.snapshot_steps),
    )


def write_innovation_csv(times: np.ndarray, p_beta: np.ndarray, innovation: np.ndarray, file: Path) -> None:
    """Per-step diagnostics streams: t, P_t[beta], innovation increments (nan on the last row)."""
    m = p_beta.shape[1]
    padded = np.vstack([innovation, np.full((1, m), np.nan)])
    columns = ["t"] + [f"p_beta_{k + 1}" for k in range(m)] + [f"w_check_{k + 1}" for k in range(m)]
    _write_csv(file, columns, np.column_stack([times, p_beta, padded]))


def write_json(model: BaseModel, file: Path) -> None:
    """Validate a report against its JSON Schema and write it."""
    payload = json.loads(model.model_dump_json())
    jsonschema.validate(payload, type(model).model_json_schema())
    Path(file).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
