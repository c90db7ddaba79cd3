"""Field snapshot files.

Each snapshot is a CSV file with one row per node, in the mesh's row-major
node order, with header ``x_m,y_m,w_kgm3,theta_K,P_Pa``.  Next to it sits
a legacy VTK file carrying the same fields as point data (and optionally
cell data such as a spalling zone map).  File names embed the time in
whole seconds, zero-padded to six digits: ``snapshot_001800.csv``.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping

import numpy as np

from .assembly import NodalState
from .mesh import Mesh, write_vtk

SNAPSHOT_HEADER = ("x_m", "y_m", "w_kgm3", "theta_K", "P_Pa")


def snapshot_stem(t: float) -> str:
    return f"snapshot_{int(round(t)):06d}"


def write_snapshot(state: NodalState, mesh: Mesh, t: float, directory,
                   cell_data: Mapping[str, np.ndarray] | None = None) -> tuple[Path, Path]:
    """Write the CSV and VTK files of one snapshot; returns both paths."""
    directory = Path(directory)
    if state.n_nodes != mesh.n_nodes:
        raise ValueError(f"state has {state.n_nodes} nodes, mesh has {mesh.n_nodes}")
    table = np.column_stack([mesh.nodes[:, 0], mesh.nodes[:, 1], state.w, state.theta, state.P])
    if not np.all(np.isfinite(table)):
        raise ValueError(f"snapshot at t = {t:g} s contains non-finite values")
    stem = snapshot_stem(t)
    csv_path = directory / f"{stem}.csv"
    vtk_path = directory / f"{stem}.vtk"
    try:
        np.savetxt(csv_path, table, delimiter=",", header=",".join(SNAPSHOT_HEADER), comments="", fmt="%.17g")
        write_vtk(mesh, vtk_path, {"w": state.w, "theta": state.theta, "P": state.P}, cell_data,
                  title=f"hygrotherm snapshot t={t:g} s")
    except OSError as exc:
        raise OSError(f"cannot write snapshot to {directory}: {exc}") from exc
    return csv_path, vtk_path


def read_snapshot(path) -> tuple[np.ndarray, NodalState]:
    """Read a snapshot CSV; returns node coordinates and the nodal state."""
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip().split(",")
    if tuple(header) != SNAPSHOT_HEADER:
        raise ValueError(f"{path}: unexpected header {header}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, :2], NodalState(data[:, 2].copy(), data[:, 3].copy(), data[:, 4].copy())
