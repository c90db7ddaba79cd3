"""Structured quadrilateral meshes, bilinear elements and Gauss quadrature.

Node numbering of a structured mesh is row-major: node ``j * (nx + 1) + i``
sits at ``(i * Lx / nx, j * Ly / ny)``.  Element ``j * nx + i`` has the
counter-clockwise corner nodes ``(i, j), (i+1, j), (i+1, j+1), (i, j+1)``,
which map to the reference corners ``(-1,-1), (1,-1), (1,1), (-1,1)``.

Local edge ``k`` of an element joins local nodes ``k`` and ``(k + 1) % 4``,
so edges 0..3 are bottom, right, top and left of an axis-aligned element.
Side tags of :func:`build_structured_mesh` use the same order.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np


class BoundaryTag(enum.IntEnum):
    FIRE = 0
    AMBIENT = 1

    @classmethod
    def parse(cls, value) -> "BoundaryTag":
        if isinstance(value, cls):
            return value
        try:
            return cls[str(value).strip().upper()]
        except KeyError:
            raise ValueError(f"unknown boundary tag {value!r}; expected FIRE or AMBIENT") from None


class InvertedElementError(ValueError):
    """Raised when an element has a non-positive Jacobian determinant."""


REFERENCE_CORNERS = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
LOCAL_EDGES = np.array([[0, 1], [1, 2], [2, 3], [3, 0]])
SIDE_NAMES = ("bottom", "right", "top", "left")


@dataclass(frozen=True, eq=False)
class Mesh:
    """Quadrilateral mesh with tagged boundary edges.

    Attributes
    ----------
    nodes : ndarray, shape (N_n, 2)
        Node coordinates [m].
    elements : ndarray, shape (N_e, 4)
        Counter-clockwise node indices.
    edge_element, edge_local : ndarray, shape (N_b,)
        Owning element and local edge index of every boundary edge.
    edge_tag : ndarray, shape (N_b,)
        :class:`BoundaryTag` value of every boundary edge.
    shape : tuple or None
        ``(nx, ny)`` for structured meshes.
    """

    nodes: np.ndarray
    elements: np.ndarray
    edge_element: np.ndarray
    edge_local: np.ndarray
    edge_tag: np.ndarray
    shape: tuple[int, int] | None = None
    lengths: tuple[float, float] | None = None

    def __post_init__(self):
        for name in ("nodes", "elements", "edge_element", "edge_local", "edge_tag"):
            arr = getattr(self, name)
            arr.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def n_boundary_edges(self) -> int:
        return len(self.edge_element)

    @cached_property
    def edge_nodes(self) -> np.ndarray:
        """Global node pairs of the boundary edges, shape (N_b, 2)."""
        local = LOCAL_EDGES[self.edge_local]
        return np.take_along_axis(self.elements[self.edge_element], local, axis=1)

    def edges(self) -> np.ndarray:
        """All distinct element edges (interior and boundary) as sorted node pairs."""
        pairs = self.elements[:, LOCAL_EDGES].reshape(-1, 2)
        return np.unique(np.sort(pairs, axis=1), axis=0)

    def element_centers(self) -> np.ndarray:
        return self.nodes[self.elements].mean(axis=1)

    def element_adjacency(self) -> list[list[int]]:
        """Edge-neighbours of every element."""
        pairs = np.sort(self.elements[:, LOCAL_EDGES], axis=2).reshape(-1, 2)
        owner = np.repeat(np.arange(self.n_elements), 4)
        keys = pairs[:, 0].astype(np.int64) * self.n_nodes + pairs[:, 1]
        order = np.argsort(keys, kind="stable")
        keys, owner = keys[order], owner[order]
        neighbours: list[list[int]] = [[] for _ in range(self.n_elements)]
        same = np.nonzero(keys[1:] == keys[:-1])[0]
        for k in same:
            a, b = int(owner[k]), int(owner[k + 1])
            neighbours[a].append(b)
            neighbours[b].append(a)
        return neighbours

    def transformed(self, matrix, offset=(0.0, 0.0)) -> "Mesh":
        """Same topology with node coordinates mapped by ``x -> matrix @ x + offset``."""
        nodes = self.nodes @ np.asarray(matrix, dtype=float).T + np.asarray(offset, dtype=float)
        return Mesh(
            nodes, self.elements.copy(), self.edge_element.copy(), self.edge_local.copy(),
            self.edge_tag.copy(), self.shape, self.lengths,
        )


def build_structured_mesh(
    Lx: float, Ly: float, nx: int, ny: int, side_tags: Sequence = (BoundaryTag.FIRE,) * 4
) -> Mesh:
    """Uniform ``nx`` x ``ny`` mesh of the rectangle ``[0, Lx] x [0, Ly]``.

    ``side_tags`` gives the tag of the bottom, right, top and left sides.
    """
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise ValueError(f"mesh counts must be positive integers, got nx={nx!r}, ny={ny!r}")
    if not (Lx > 0 and Ly > 0):
        raise ValueError(f"mesh lengths must be positive, got Lx={Lx!r}, Ly={Ly!r}")
    if len(side_tags) != 4:
        raise ValueError("side_tags needs exactly four entries (bottom, right, top, left)")
    tags = [BoundaryTag.parse(t) for t in side_tags]
    nx, ny = int(nx), int(ny)

    xs = np.linspace(0.0, Lx, nx + 1)
    ys = np.linspace(0.0, Ly, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    i, j = i.ravel(), j.ravel()
    n0 = j * (nx + 1) + i
    elements = np.column_stack([n0, n0 + 1, n0 + nx + 2, n0 + nx + 1])

    ex = np.arange(nx)
    ey = np.arange(ny)
    edge_element = np.concatenate([ex, ey * nx + nx - 1, (ny - 1) * nx + ex[::-1], ey[::-1] * nx])
    edge_local = np.concatenate([np.full(nx, 0), np.full(ny, 1), np.full(nx, 2), np.full(ny, 3)])
    edge_tag = np.concatenate([
        np.full(nx, tags[0]), np.full(ny, tags[1]), np.full(nx, tags[2]), np.full(ny, tags[3])
    ]).astype(np.int64)
    return Mesh(nodes, elements, edge_element, edge_local, edge_tag, (nx, ny), (float(Lx), float(Ly)))


@dataclass(frozen=True)
class ShapeEval:
    """Bilinear basis evaluated at a set of reference points.

    ``N`` has shape (q, 4) and ``dN`` (q, 4, 2).  The physical quantities
    are filled in by :func:`element_geometry`.
    """

    N: np.ndarray
    dN: np.ndarray
    dN_phys: np.ndarray | None = None
    detJ: np.ndarray | None = None


def shape_functions(xi, eta) -> ShapeEval:
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    sx = REFERENCE_CORNERS[:, 0]
    sy = REFERENCE_CORNERS[:, 1]
    N = 0.25 * (1.0 + np.outer(xi, sx)) * (1.0 + np.outer(eta, sy))
    dNx = 0.25 * sx[None, :] * (1.0 + np.outer(eta, sy))
    dNy = 0.25 * sy[None, :] * (1.0 + np.outer(xi, sx))
    return ShapeEval(N=N, dN=np.stack([dNx, dNy], axis=-1))


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray

    @property
    def size(self) -> int:
        return len(self.weights)


def gauss_rule_1d(n: int) -> QuadratureRule:
    if int(n) != n or not 1 <= n <= 10:
        raise ValueError(f"Gauss order must be an integer in [1, 10], got {n!r}")
    x, w = np.polynomial.legendre.leggauss(int(n))
    return QuadratureRule(x, w)


def gauss_rule(n_per_axis: int) -> QuadratureRule:
    """Tensor-product Gauss-Legendre rule on the reference square."""
    line = gauss_rule_1d(n_per_axis)
    XI, ETA = np.meshgrid(line.points, line.points, indexing="ij")
    W = np.outer(line.weights, line.weights)
    return QuadratureRule(np.column_stack([XI.ravel(), ETA.ravel()]), W.ravel())


def _geometry(coords: np.ndarray, ref: ShapeEval):
    # coords (E, 4, 2); ref.dN (q, 4, 2) -> J (E, q, 2, 2) with J[a, b] = dx_a / dxi_b
    J = np.einsum("eia,qib->eqab", coords, ref.dN)
    det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
    if np.any(det <= 0.0):
        bad = np.unique(np.nonzero(det <= 0.0)[0])
        raise InvertedElementError(f"non-positive Jacobian determinant in element(s) {bad[:10].tolist()}")
    inv = np.empty_like(J)
    inv[..., 0, 0] = J[..., 1, 1] / det
    inv[..., 1, 1] = J[..., 0, 0] / det
    inv[..., 0, 1] = -J[..., 0, 1] / det
    inv[..., 1, 0] = -J[..., 1, 0] / det
    # grad_x N = J^{-T} grad_xi N
    grads = np.einsum("qib,eqba->eqia", ref.dN, inv)
    return det, grads


def element_geometry(mesh: Mesh, e: int, rule: QuadratureRule) -> ShapeEval:
    """Basis values, physical gradients and det J of element ``e`` at the rule's points."""
    ref = shape_functions(rule.points[:, 0], rule.points[:, 1])
    det, grads = _geometry(mesh.nodes[mesh.elements[e]][None], ref)
    return ShapeEval(N=ref.N, dN=ref.dN, dN_phys=grads[0], detJ=det[0])


def mesh_geometry(mesh: Mesh, rule: QuadratureRule):
    """Vectorised :func:`element_geometry` over all elements.

    Returns ``(N, detJ, grads)`` with shapes (q, 4), (E, q), (E, q, 4, 2).
    """
    ref = shape_functions(rule.points[:, 0], rule.points[:, 1])
    det, grads = _geometry(mesh.nodes[mesh.elements], ref)
    return ref.N, det, grads


def write_vtk(
    mesh: Mesh,
    path,
    point_data: Mapping[str, np.ndarray] | None = None,
    cell_data: Mapping[str, np.ndarray] | None = None,
    title: str = "hygrotherm mesh",
) -> Path:
    """Write a legacy ASCII VTK unstructured grid (quad cells, type 9)."""
    path = Path(path)
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID"]
    lines.append(f"POINTS {mesh.n_nodes} double")
    lines += [f"{x:.17g} {y:.17g} 0" for x, y in mesh.nodes]
    lines.append(f"CELLS {mesh.n_elements} {5 * mesh.n_elements}")
    lines += ["4 " + " ".join(map(str, c)) for c in mesh.elements]
    lines.append(f"CELL_TYPES {mesh.n_elements}")
    lines += ["9"] * mesh.n_elements
    for header, count, data in (("POINT_DATA", mesh.n_nodes, point_data), ("CELL_DATA", mesh.n_elements, cell_data)):
        if not data:
            continue
        lines.append(f"{header} {count}")
        for name, values in data.items():
            values = np.asarray(values)
            if values.shape != (count,):
                raise ValueError(f"{header.lower()} field {name!r} has shape {values.shape}, expected ({count},)")
            kind = "int" if np.issubdtype(values.dtype, np.integer) else "double"
            lines.append(f"SCALARS {name} {kind} 1")
            lines.append("LOOKUP_TABLE default")
            lines += [f"{v:.17g}" if kind == "double" else str(int(v)) for v in values]
    path.write_text("\n".join(lines) + "\n", encoding="ascii")
    return path
