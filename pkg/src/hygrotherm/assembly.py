"""Element integrals and global assembly of the time-step block system.

One time step solves, for ``X = (w, theta, P)`` stacked nodewise by field,

    (1/dt) C (X - X_n) + K X + R(X) = F

where ``C`` and ``K`` are frozen at the previous state and only the
dehydration term, the radiation term and the nodal isotherm are implicit.

Signs follow the weak form of the two balance equations.  In particular
``F^w`` collects ``(1/dt) int w_d(theta_n) N - int_boundary beta_c P_inf N``
and enters the first block row as ``-F^w``; the convective heat term enters
``F^theta`` with a minus sign.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import materials as mt
from .mesh import BoundaryTag, Mesh, QuadratureRule, gauss_rule, gauss_rule_1d, mesh_geometry


class AssemblyError(ValueError):
    """Non-finite material data or inconsistent sizes during assembly."""


@dataclass
class NodalState:
    """Nodal values of water content [kg/m^3], temperature [K] and pressure [Pa]."""

    w: np.ndarray
    theta: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float)
        self.theta = np.asarray(self.theta, dtype=float)
        self.P = np.asarray(self.P, dtype=float)
        if not (self.w.shape == self.theta.shape == self.P.shape) or self.w.ndim != 1:
            raise AssemblyError(
                f"field shapes differ: w{self.w.shape}, theta{self.theta.shape}, P{self.P.shape}"
            )

    @property
    def n_nodes(self) -> int:
        return self.w.size

    def vector(self) -> np.ndarray:
        return np.concatenate([self.w, self.theta, self.P])

    @classmethod
    def from_vector(cls, X) -> "NodalState":
        X = np.asarray(X, dtype=float)
        if X.ndim != 1 or X.size % 3:
            raise AssemblyError(f"state vector length {X.size} is not a multiple of 3")
        w, theta, P = np.split(X.copy(), 3)
        return cls(w, theta, P)

    def copy(self) -> "NodalState":
        return NodalState(self.w.copy(), self.theta.copy(), self.P.copy())


@dataclass(frozen=True)
class BoundaryConditions:
    """Environment and film coefficients.

    ``theta_fire`` drives FIRE edges (convection and radiation),
    ``theta_ambient`` drives AMBIENT edges (convection only), ``P_inf`` all
    edges.  All three are functions of time in seconds.
    """

    theta_fire: Callable[[float], float]
    theta_ambient: Callable[[float], float]
    P_inf: Callable[[float], float]
    alpha_c: float = 25.0
    beta_c: float = 0.019
    emissivity: float = 0.7
    sigma: float = 5.67e-8


class Discretization:
    """Quadrature data and sparsity pattern of a mesh, computed once."""

    def __init__(self, mesh: Mesh, n_gauss: int = 5, n_gauss_edge: int = 5):
        self.mesh = mesh
        self.rule: QuadratureRule = gauss_rule(n_gauss)
        self.N, detJ, self.grads = mesh_geometry(mesh, self.rule)
        self.detw = detJ * self.rule.weights[None, :]
        # Per-point products of basis functions and of their gradients, so
        # that element matrices reduce to one contraction over the points.
        self._NN = np.einsum("qi,qj->qij", self.N, self.N).reshape(self.N.shape[0], 16)
        self._GG = np.einsum("eqia,eqja->eqij", self.grads, self.grads).reshape(*self.detw.shape, 16)

        line = gauss_rule_1d(n_gauss_edge)
        s = line.points
        self.edge_N = np.column_stack([0.5 * (1.0 - s), 0.5 * (1.0 + s)])
        self.edge_nodes = mesh.edge_nodes
        ends = mesh.nodes[self.edge_nodes]
        self.edge_length = np.linalg.norm(ends[:, 1] - ends[:, 0], axis=1)
        self.edge_w = 0.5 * self.edge_length[:, None] * line.weights[None, :]
        self.fire = mesh.edge_tag == BoundaryTag.FIRE

        n = mesh.n_nodes
        el = mesh.elements
        rows = np.repeat(el, 4, axis=1).ravel()
        cols = np.tile(el, (1, 4)).ravel()
        pattern = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n))
        pattern.sum_duplicates()
        pattern.sort_indices()
        self._indptr = pattern.indptr
        self._indices = pattern.indices
        keys = np.repeat(np.arange(n), np.diff(pattern.indptr)).astype(np.int64) * n + pattern.indices
        self._nnz = keys.size
        self._elem_map = np.searchsorted(keys, rows.astype(np.int64) * n + cols)
        er = np.repeat(self.edge_nodes, 2, axis=1).ravel()
        ec = np.tile(self.edge_nodes, (1, 2)).ravel()
        self._edge_map = np.searchsorted(keys, er.astype(np.int64) * n + ec)

    @property
    def n_nodes(self) -> int:
        return self.mesh.n_nodes

    # -- interpolation -------------------------------------------------
    def at_points(self, nodal: np.ndarray) -> np.ndarray:
        """Values of a nodal field at the bulk quadrature points, shape (E, q)."""
        return np.einsum("qi,ei->eq", self.N, nodal[self.mesh.elements])

    def grad_at_points(self, nodal: np.ndarray) -> np.ndarray:
        return np.einsum("eqia,ei->eqa", self.grads, nodal[self.mesh.elements])

    def at_edge_points(self, nodal: np.ndarray) -> np.ndarray:
        return nodal[self.edge_nodes] @ self.edge_N.T

    # -- element kernels -----------------------------------------------
    def mass(self, coef) -> np.ndarray:
        coef = np.broadcast_to(coef, self.detw.shape)
        return ((coef * self.detw) @ self._NN).reshape(-1, 4, 4)

    def stiffness(self, coef) -> np.ndarray:
        coef = np.broadcast_to(coef, self.detw.shape)
        return np.einsum("eq,eqk->ek", coef * self.detw, self._GG).reshape(-1, 4, 4)

    def load(self, f) -> np.ndarray:
        f = np.broadcast_to(f, self.detw.shape)
        return np.einsum("eq,qi->ei", f * self.detw, self.N)

    def edge_mass(self, coef, mask=None) -> np.ndarray:
        coef = np.broadcast_to(coef, self.edge_w.shape) * self.edge_w
        if mask is not None:
            coef = coef * mask[:, None]
        return np.einsum("bs,si,sj->bij", coef, self.edge_N, self.edge_N)

    def edge_load(self, f, mask=None) -> np.ndarray:
        f = np.broadcast_to(f, self.edge_w.shape) * self.edge_w
        if mask is not None:
            f = f * mask[:, None]
        return f @ self.edge_N

    # -- global assembly -----------------------------------------------
    def matrix(self, elem: np.ndarray | None = None, edge: np.ndarray | None = None) -> sp.csr_matrix:
        data = np.zeros(self._nnz)
        if elem is not None:
            data += np.bincount(self._elem_map, weights=elem.ravel(), minlength=self._nnz)
        if edge is not None:
            data += np.bincount(self._edge_map, weights=edge.ravel(), minlength=self._nnz)
        n = self.n_nodes
        return sp.csr_matrix((data, self._indices, self._indptr), shape=(n, n))

    def vector(self, elem: np.ndarray | None = None, edge: np.ndarray | None = None) -> np.ndarray:
        n = self.n_nodes
        out = np.zeros(n)
        if elem is not None:
            out += np.bincount(self.mesh.elements.ravel(), weights=elem.ravel(), minlength=n)
        if edge is not None:
            out += np.bincount(self.edge_nodes.ravel(), weights=edge.ravel(), minlength=n)
        return out

    def element_edges(self, e: int) -> np.ndarray:
        return np.nonzero(self.mesh.edge_element == e)[0]


def _check_finite(name: str, values: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(values)):
        bad = np.argwhere(~np.isfinite(values))[0]
        raise AssemblyError(f"non-finite {name} at quadrature index {tuple(int(i) for i in bad)}")
    return values


# -- batched element contributions ------------------------------------------

def capacity_blocks(disc: Discretization, state_n: NodalState, mat=mt.DEFAULT_MATERIAL):
    """C^ww, C^thetaw and C^thetatheta of every element, each shape (E, 4, 4)."""
    th = disc.at_points(state_n.theta)
    h_alpha = _check_finite("evaporation enthalpy", mt.evaporation_enthalpy(th.ravel()).reshape(th.shape))
    cs = mt.specific_heat_solid(th.ravel()).reshape(th.shape)
    _, dwd = mt.dehydrated_water(th.ravel(), mat)
    heat = _check_finite("heat capacity", mat.rho_s * cs - mat.h_d * dwd.reshape(th.shape))
    return disc.mass(1.0), disc.mass(h_alpha), disc.mass(heat)


def conduction_blocks(disc: Discretization, state_n: NodalState, bc: BoundaryConditions, mat=mt.DEFAULT_MATERIAL):
    """Bulk parts of K^wP, K^thetatheta per element and their edge parts per boundary edge."""
    th = disc.at_points(state_n.theta)
    pp = disc.at_points(state_n.P)
    kappa = mt.permeability(th.ravel(), pp.ravel(), mat).reshape(th.shape)
    lam = mt.thermal_conductivity(th.ravel()).reshape(th.shape)
    _check_finite("permeability", kappa)
    _check_finite("thermal conductivity", lam)
    kwp = disc.stiffness(kappa / mat.g)
    ktt = disc.stiffness(lam)
    return kwp, ktt, disc.edge_mass(bc.beta_c), disc.edge_mass(bc.alpha_c)


def load_blocks(disc: Discretization, state_n: NodalState, t_next: float, dt: float,
                bc: BoundaryConditions, mat=mt.DEFAULT_MATERIAL):
    """Element and edge parts of F^w and F^theta."""
    th = disc.at_points(state_n.theta)
    pp = disc.at_points(state_n.P)
    wd, _ = mt.dehydrated_water(th.ravel(), mat)
    wd = wd.reshape(th.shape)
    kappa = mt.permeability(th.ravel(), pp.ravel(), mat).reshape(th.shape)
    gt = disc.grad_at_points(state_n.theta)
    gp = disc.grad_at_points(state_n.P)
    convective = -mat.C_w * kappa / mat.g * np.einsum("eqa,eqa->eq", gt, gp)
    _check_finite("convective heat term", convective)

    fire_t = float(bc.theta_fire(t_next))
    amb_t = float(bc.theta_ambient(t_next))
    p_inf = float(bc.P_inf(t_next))
    theta_env = np.where(disc.fire, fire_t, amb_t)

    fw_elem = disc.load(wd / dt)
    fw_edge = -disc.edge_load(bc.beta_c * p_inf)
    ft_elem = disc.load(convective)
    ft_edge = disc.edge_load(bc.alpha_c * theta_env[:, None])
    ft_edge = ft_edge + disc.edge_load(bc.emissivity * bc.sigma * fire_t**4, mask=disc.fire)
    return fw_elem, fw_edge, ft_elem, ft_edge


def nonlinear_blocks(disc: Discretization, theta_next: np.ndarray, dt: float,
                     bc: BoundaryConditions, mat=mt.DEFAULT_MATERIAL, jacobian: bool = True):
    """R^w (per element), R^theta (per edge) and their theta-Jacobians."""
    th = disc.at_points(theta_next)
    wd, dwd = mt.dehydrated_water(th.ravel(), mat)
    rw = disc.load(wd.reshape(th.shape) / dt)
    tau = disc.at_edge_points(theta_next)
    es = bc.emissivity * bc.sigma
    rt = disc.edge_load(es * tau * np.abs(tau) ** 3, mask=disc.fire)
    if not jacobian:
        return rw, rt
    drw = disc.mass(dwd.reshape(th.shape) / dt)
    drt = disc.edge_mass(4.0 * es * np.abs(tau) ** 3, mask=disc.fire)
    return rw, rt, drw, drt


# -- single-element views -------------------------------------------------

def _edge_into_element(disc: Discretization, e: int, edge_blocks: np.ndarray) -> np.ndarray:
    out = np.zeros((4,) * (edge_blocks.ndim - 1))
    nodes = disc.mesh.elements[e]
    for b in disc.element_edges(e):
        loc = [int(np.nonzero(nodes == n)[0][0]) for n in disc.edge_nodes[b]]
        if edge_blocks.ndim == 3:
            out[np.ix_(loc, loc)] += edge_blocks[b]
        else:
            out[loc] += edge_blocks[b]
    return out


def element_capacity(disc: Discretization, e: int, state_n: NodalState, mat=mt.DEFAULT_MATERIAL):
    """Capacity blocks ``(C^ww_e, C^thetaw_e, C^thetatheta_e)`` of one element."""
    return tuple(b[e] for b in capacity_blocks(disc, state_n, mat))


def element_conduction(disc: Discretization, e: int, state_n: NodalState, bc: BoundaryConditions,
                       mat=mt.DEFAULT_MATERIAL):
    """``(K^wP_e, K^thetatheta_e)`` of one element including its boundary edges."""
    kwp, ktt, kwp_edge, ktt_edge = conduction_blocks(disc, state_n, bc, mat)
    return (kwp[e] + _edge_into_element(disc, e, kwp_edge),
            ktt[e] + _edge_into_element(disc, e, ktt_edge))


def element_nonlinear(disc: Discretization, e: int, theta_next: np.ndarray, dt: float,
                      bc: BoundaryConditions, mat=mt.DEFAULT_MATERIAL):
    """``(R^w_e, R^theta_e, dR^w_e, dR^theta_e)`` for element ``e``."""
    rw, rt, drw, drt = nonlinear_blocks(disc, theta_next, dt, bc, mat)
    return rw[e], _edge_into_element(disc, e, rt), drw[e], _edge_into_element(disc, e, drt)


def element_load(disc: Discretization, e: int, state_n: NodalState, t_next: float, dt: float,
                 bc: BoundaryConditions, mat=mt.DEFAULT_MATERIAL):
    """``(F^w_e, F^theta_e)`` of element ``e`` including its boundary edges."""
    fw, fw_edge, ft, ft_edge = load_blocks(disc, state_n, t_next, dt, bc, mat)
    return fw[e] + _edge_into_element(disc, e, fw_edge), ft[e] + _edge_into_element(disc, e, ft_edge)


# -- global system ----------------------------------------------------------

@dataclass
class BlockSystem:
    """Assembled matrices and loads of one time step.

    Block unknown order is ``(w, theta, P)``.  Matrix blocks are kept
    separately; :attr:`C`, :attr:`K` give the full ``3N x 3N`` matrices.
    """

    disc: Discretization
    bc: BoundaryConditions
    mat: mt.MaterialConstants
    dt: float
    t_next: float
    Cww: sp.csr_matrix
    Ctw: sp.csr_matrix
    Ctt: sp.csr_matrix
    Kwp: sp.csr_matrix
    Ktt: sp.csr_matrix
    Fw: np.ndarray
    Ft: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.disc.n_nodes

    @cached_property
    def C(self) -> sp.csr_matrix:
        n = self.n_nodes
        Z = sp.csr_matrix((n, n))
        return sp.bmat([[self.Cww, None, None], [-self.Ctw, self.Ctt, None], [None, None, Z]], format="csr")

    @cached_property
    def K(self) -> sp.csr_matrix:
        n = self.n_nodes
        Z = sp.csr_matrix((n, n))
        return sp.bmat([[None, None, self.Kwp], [None, self.Ktt, None], [None, None, Z]], format="csr")

    @cached_property
    def F(self) -> np.ndarray:
        return np.concatenate([-self.Fw, self.Ft, np.zeros(self.n_nodes)])

    def split(self, X):
        return np.split(np.asarray(X, dtype=float), 3)

    def nonlinear(self, X) -> np.ndarray:
        """R(X) = (-R^w(theta), R^theta(theta), w - Phi(theta, P))."""
        w, th, p = self.split(X)
        rw, rt = nonlinear_blocks(self.disc, th, self.dt, self.bc, self.mat, jacobian=False)
        phi, _, _ = mt.sorption_isotherm(th, p, self.mat)
        return np.concatenate([-self.disc.vector(elem=rw), self.disc.vector(edge=rt), w - phi])

    def residual_blocks(self, X, X_n):
        """Residual split into its three block rows."""
        w, th, p = self.split(X)
        w0, th0, _ = self.split(X_n)
        dt = self.dt
        rw, rt = nonlinear_blocks(self.disc, th, dt, self.bc, self.mat, jacobian=False)
        phi, _, _ = mt.sorption_isotherm(th, p, self.mat)
        r1 = self.Cww @ (w - w0) / dt + self.Kwp @ p - self.disc.vector(elem=rw) + self.Fw
        r2 = (self.Ctt @ (th - th0) - self.Ctw @ (w - w0)) / dt + self.Ktt @ th + self.disc.vector(edge=rt) - self.Ft
        r3 = w - phi
        return r1, r2, r3

    def residual(self, X, X_n) -> np.ndarray:
        return np.concatenate(self.residual_blocks(X, X_n))

    def jacobian_blocks(self, X):
        """3x3 nested list of sparse blocks of the residual Jacobian (``None`` = zero)."""
        w, th, p = self.split(X)
        _, _, drw, drt = nonlinear_blocks(self.disc, th, self.dt, self.bc, self.mat)
        _, dphi_dt, dphi_dp = mt.sorption_isotherm(th, p, self.mat)
        n = self.n_nodes
        eye = sp.identity(n, format="csr")
        return [
            [self.Cww / self.dt, -self.disc.matrix(elem=drw), self.Kwp],
            [-self.Ctw / self.dt, self.Ctt / self.dt + self.Ktt + self.disc.matrix(edge=drt), None],
            [eye, sp.diags(-dphi_dt, format="csr"), sp.diags(-dphi_dp, format="csr")],
        ]

    def jacobian(self, X) -> sp.csr_matrix:
        return sp.bmat(self.jacobian_blocks(X), format="csr")

    def dump(self, directory) -> list[Path]:
        """Write every matrix block as ``row col value`` text files."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        written = []
        for name in ("Cww", "Ctw", "Ctt", "Kwp", "Ktt"):
            m = getattr(self, name).tocoo()
            path = directory / f"{name}.coo"
            np.savetxt(path, np.column_stack([m.row, m.col, m.data]), fmt=["%d", "%d", "%.17g"])
            written.append(path)
        return written


def assemble(disc: Discretization, state_n: NodalState, t_next: float, dt: float,
             bc: BoundaryConditions, mat=mt.DEFAULT_MATERIAL) -> BlockSystem:
    """Assemble the block system for the step ending at ``t_next``."""
    if state_n.n_nodes != disc.n_nodes:
        raise AssemblyError(f"state has {state_n.n_nodes} nodes, mesh has {disc.n_nodes}")
    if not dt > 0:
        raise AssemblyError(f"time step must be positive, got {dt!r}")
    cww, ctw, ctt = capacity_blocks(disc, state_n, mat)
    kwp, ktt, kwp_edge, ktt_edge = conduction_blocks(disc, state_n, bc, mat)
    fw, fw_edge, ft, ft_edge = load_blocks(disc, state_n, t_next, dt, bc, mat)
    return BlockSystem(
        disc=disc, bc=bc, mat=mat, dt=float(dt), t_next=float(t_next),
        Cww=disc.matrix(elem=cww), Ctw=disc.matrix(elem=ctw), Ctt=disc.matrix(elem=ctt),
        Kwp=disc.matrix(elem=kwp, edge=kwp_edge), Ktt=disc.matrix(elem=ktt, edge=ktt_edge),
        Fw=disc.vector(elem=fw, edge=fw_edge), Ft=disc.vector(elem=ft, edge=ft_edge),
    )
