"""Pore-pressure spalling assessment.

An element is taken to spall when the pore pressure reduced by the
porosity reaches the temperature-dependent tensile strength at its
centre,

    margin = phi * P - f_t(theta) >= 0.

Spalling is irreversible, so the spalled set of a trajectory only grows.
Non-spalled elements are split into the stable core (the edge-connected
component holding the element nearest the domain centroid) and material
cut off from that core by spalled elements.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from . import materials as mt
from .assembly import NodalState
from .mesh import Mesh
from .solver import Trajectory


class Zone(enum.IntEnum):
    A_SPALLED = 0
    B_UNSTABLE = 1
    C_STABLE = 2


@dataclass(frozen=True)
class SpallingReport:
    """Zone classification of every element at one snapshot.

    Attributes
    ----------
    time : float
        Snapshot time [s].
    zones : ndarray of int
        :class:`Zone` value of every element.
    margins : ndarray
        ``phi * P - f_t(theta)`` at every element centre [Pa].
    """

    time: float
    zones: np.ndarray
    margins: np.ndarray

    def count(self, zone: Zone) -> int:
        return int(np.count_nonzero(self.zones == zone))

    @property
    def spalled(self) -> np.ndarray:
        return self.zones == Zone.A_SPALLED


def _centre_values(mesh: Mesh, nodal: np.ndarray) -> np.ndarray:
    # Bilinear shape functions all equal 1/4 at the reference centre.
    return np.asarray(nodal, dtype=float)[mesh.elements].mean(axis=1)


def evaluate_criterion(state: NodalState, mesh: Mesh, phi: float | None = None,
                       f_t0: float | None = None, mat: mt.MaterialConstants = mt.DEFAULT_MATERIAL) -> np.ndarray:
    """Spalling margin ``phi * P - f_t(theta)`` at every element centre [Pa].

    ``phi`` and ``f_t0`` default to the values held by ``mat``.
    """
    phi = mat.porosity if phi is None else phi
    f_t0 = mat.f_t0 if f_t0 is None else f_t0
    theta = _centre_values(mesh, state.theta)
    P = _centre_values(mesh, state.P)
    strength = mt.tensile_strength(theta, replace(mat, f_t0=f_t0))
    return phi * P - strength


def _adjacency_matrix(mesh: Mesh) -> sp.csr_matrix:
    neighbours = mesh.element_adjacency()
    rows = np.repeat(np.arange(mesh.n_elements), [len(n) for n in neighbours])
    cols = np.fromiter((j for n in neighbours for j in n), dtype=np.int64, count=rows.size)
    data = np.ones(rows.size)
    return sp.csr_matrix((data, (rows, cols)), shape=(mesh.n_elements, mesh.n_elements))


def classify_zones(mesh: Mesh, spalled, adjacency: sp.csr_matrix | None = None) -> np.ndarray:
    """Zone of every element given the spalled flags.

    Among the intact elements, the edge-connected component containing the
    intact element nearest the domain centroid (lowest index on ties) is
    the stable core; every other intact element is unstable.
    """
    spalled = np.asarray(spalled, dtype=bool)
    if spalled.shape != (mesh.n_elements,):
        raise ValueError(f"expected {mesh.n_elements} spalled flags, got shape {spalled.shape}")
    zones = np.full(mesh.n_elements, int(Zone.B_UNSTABLE))
    zones[spalled] = Zone.A_SPALLED
    intact = np.nonzero(~spalled)[0]
    if intact.size == 0:
        return zones
    adjacency = _adjacency_matrix(mesh) if adjacency is None else adjacency
    _, labels = connected_components(adjacency[intact][:, intact], directed=False)
    centres = mesh.element_centers()
    centroid = mesh.nodes.mean(axis=0)
    dist = np.linalg.norm(centres[intact] - centroid, axis=1)
    # argmin returns the first minimum, i.e. the lowest element index.
    core = labels[int(np.argmin(dist))]
    zones[intact[labels == core]] = Zone.C_STABLE
    return zones


class SpallingTracker:
    """Incremental zone classification over successive snapshots.

    The spalled set is cumulative: an element that has met the criterion
    once stays spalled.
    """

    def __init__(self, mesh: Mesh, phi: float | None = None, f_t0: float | None = None,
                 mat: mt.MaterialConstants = mt.DEFAULT_MATERIAL):
        self.mesh = mesh
        self.phi = phi
        self.f_t0 = f_t0
        self.mat = mat
        self.spalled = np.zeros(mesh.n_elements, dtype=bool)
        self._adjacency = _adjacency_matrix(mesh)

    def update(self, t: float, state: NodalState) -> SpallingReport:
        margins = evaluate_criterion(state, self.mesh, self.phi, self.f_t0, self.mat)
        self.spalled = self.spalled | (margins >= 0.0)
        zones = classify_zones(self.mesh, self.spalled, self._adjacency)
        return SpallingReport(float(t), zones, margins)


def track(trajectory: Trajectory, mesh: Mesh, phi: float | None = None, f_t0: float | None = None,
          mat: mt.MaterialConstants = mt.DEFAULT_MATERIAL) -> list[SpallingReport]:
    """Reports for every snapshot of ``trajectory`` with cumulative spalling."""
    if len(trajectory) == 0:
        raise ValueError("trajectory has no snapshots")
    tracker = SpallingTracker(mesh, phi, f_t0, mat)
    return [tracker.update(t, state) for t, state in zip(trajectory.times, trajectory.states)]


def write_report(reports: list[SpallingReport], path) -> Path:
    """Write reports as CSV with columns ``time_s,element_id,zone,margin_Pa``."""
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["time_s", "element_id", "zone", "margin_Pa"])
            for rep in reports:
                for e, (z, m) in enumerate(zip(rep.zones, rep.margins)):
                    writer.writerow([repr(rep.time), e, Zone(int(z)).name, repr(float(m))])
    except OSError as exc:
        raise OSError(f"cannot write spalling report {path}: {exc}") from exc
    return path
