"""Matplotlib renderings of field snapshots and spalling zone maps.

Figures are built on :class:`matplotlib.figure.Figure` objects and written
straight to files, so no GUI backend or global pyplot state is involved.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib.collections import PolyCollection
from matplotlib.colors import BoundaryNorm, ListedColormap
from matplotlib.figure import Figure
from matplotlib.patches import Patch

from .assembly import NodalState
from .mesh import Mesh
from .spalling import SpallingReport, Zone

_FIELDS = (
    ("w", "water content [kg/m$^3$]", "Blues"),
    ("theta", "temperature [K]", "inferno"),
    ("P", "pore pressure [MPa]", "viridis"),
)
_ZONE_COLOURS = {Zone.A_SPALLED: "#b2182b", Zone.B_UNSTABLE: "#f4a582", Zone.C_STABLE: "#d1e5f0"}


def _cells(mesh: Mesh) -> PolyCollection:
    return PolyCollection(mesh.nodes[mesh.elements], edgecolors="none")


def plot_fields(state: NodalState, mesh: Mesh, t: float, path) -> Path:
    """Three-panel figure of water content, temperature and pore pressure."""
    path = Path(path)
    fig = Figure(figsize=(13, 4), layout="constrained")
    axes = fig.subplots(1, 3)
    for ax, (name, label, cmap) in zip(axes, _FIELDS):
        values = getattr(state, name) / (1e6 if name == "P" else 1.0)
        # Element values as the mean of the corner values; accurate enough for display.
        cells = _cells(mesh)
        cells.set_array(values[mesh.elements].mean(axis=1))
        cells.set_cmap(cmap)
        ax.add_collection(cells)
        ax.set_xlim(mesh.nodes[:, 0].min(), mesh.nodes[:, 0].max())
        ax.set_ylim(mesh.nodes[:, 1].min(), mesh.nodes[:, 1].max())
        ax.set_aspect("equal")
        ax.set_xlabel("x [m]")
        ax.set_ylabel("y [m]")
        fig.colorbar(cells, ax=ax, label=label, shrink=0.85)
    fig.suptitle(f"t = {t / 60:g} min")
    fig.savefig(path, dpi=110)
    return path


def plot_zones(report: SpallingReport, mesh: Mesh, path) -> Path:
    """Element map of the spalled, unstable and stable zones."""
    path = Path(path)
    zones = sorted(_ZONE_COLOURS)
    cmap = ListedColormap([_ZONE_COLOURS[z] for z in zones])
    norm = BoundaryNorm(np.arange(len(zones) + 1) - 0.5, cmap.N)
    fig = Figure(figsize=(5, 4.6), layout="constrained")
    ax = fig.subplots()
    cells = _cells(mesh)
    cells.set_array(np.asarray(report.zones, dtype=float))
    cells.set_cmap(cmap)
    cells.set_norm(norm)
    ax.add_collection(cells)
    ax.set_xlim(mesh.nodes[:, 0].min(), mesh.nodes[:, 0].max())
    ax.set_ylim(mesh.nodes[:, 1].min(), mesh.nodes[:, 1].max())
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    labels = {Zone.A_SPALLED: "spalled", Zone.B_UNSTABLE: "unstable", Zone.C_STABLE: "stable core"}
    ax.legend(handles=[Patch(color=_ZONE_COLOURS[z], label=f"{labels[z]} ({report.count(z)})") for z in zones],
              loc="upper right", fontsize="small")
    ax.set_title(f"spalling zones, t = {report.time / 60:g} min")
    fig.savefig(path, dpi=110)
    return path
