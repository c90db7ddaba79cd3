"""Rothe time stepping and Newton solution of each step.

The Newton update solves the full ``3N`` Jacobian system.  Its third block
row is ``[I, -dPhi/dtheta, -dPhi/dP]``, so the water-content increment is
eliminated exactly and only the ``2N`` temperature/pressure system is
factorised (rows and columns equilibrated, sparse LU).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import materials as mt
from .assembly import BlockSystem, BoundaryConditions, Discretization, NodalState, assemble
from .mesh import Mesh

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    """Time-stepping and Newton parameters (times in seconds)."""

    dt: float = 5.0
    t_end: float = 3600.0
    newton_tol: float = 1e-8
    newton_max_iter: int = 15
    relaxation: float = 1.0
    max_backtracks: int = 8
    retry_halving: int = 0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if not self.t_end >= 0:
            raise ValueError(f"t_end must be non-negative, got {self.t_end!r}")
        if not self.newton_tol > 0:
            raise ValueError(f"newton_tol must be positive, got {self.newton_tol!r}")
        if int(self.newton_max_iter) != self.newton_max_iter or self.newton_max_iter < 1:
            raise ValueError(f"newton_max_iter must be an integer >= 1, got {self.newton_max_iter!r}")
        if not 0 < self.relaxation <= 1:
            raise ValueError(f"relaxation must lie in (0, 1], got {self.relaxation!r}")
        if self.retry_halving < 0:
            raise ValueError("retry_halving must be >= 0")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


class SolverError(RuntimeError):
    pass


class NonFiniteResidual(SolverError):
    pass


class NewtonFailure(SolverError):
    """Newton did not converge; carries the last (scaled) residual norm."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class StepFailure(SolverError):
    def __init__(self, step: int, time: float, cause: Exception, trajectory: "Trajectory"):
        super().__init__(f"time step {step} (t = {time:g} s) failed: {cause}")
        self.step = step
        self.time = time
        self.cause = cause
        self.trajectory = trajectory


@dataclass(frozen=True)
class StepDiagnostics:
    step: int
    time: float
    iterations: int
    residual: float

    def line(self) -> str:
        return f"{self.step}\t{self.time:.6g}\t{self.iterations}\t{self.residual:.3e}"


@dataclass
class Trajectory:
    times: list[float] = field(default_factory=list)
    states: list[NodalState] = field(default_factory=list)
    diagnostics: list[StepDiagnostics] = field(default_factory=list)

    def append(self, t: float, state: NodalState) -> None:
        if self.times and not t > self.times[-1]:
            raise ValueError(f"snapshot times must increase: {t} after {self.times[-1]}")
        self.times.append(float(t))
        self.states.append(state.copy())

    def __len__(self) -> int:
        return len(self.times)

    def at(self, t: float) -> NodalState:
        """Snapshot recorded closest to time ``t``."""
        k = int(np.argmin(np.abs(np.asarray(self.times) - t)))
        return self.states[k]


@dataclass(frozen=True)
class NewtonResult:
    state: NodalState
    iterations: int
    residual: float


def initial_state(mesh: Mesh, theta_0: float, P_0: float, mat=mt.DEFAULT_MATERIAL) -> NodalState:
    """Uniform temperature and pressure with water content on the isotherm."""
    if not theta_0 > 0:
        raise ValueError(f"initial temperature must be positive, got {theta_0!r}")
    n = mesh.n_nodes
    w0 = float(mt.sorption_isotherm(theta_0, P_0, mat)[0][0])
    return NodalState(np.full(n, w0), np.full(n, float(theta_0)), np.full(n, float(P_0)))


_FIELDS = ("w", "theta", "P")


def step_residual(X_next, X_n, sys: BlockSystem) -> np.ndarray:
    """(1/dt) C (X_next - X_n) + K X_next + R(X_next) - F."""
    X_next = X_next.vector() if isinstance(X_next, NodalState) else np.asarray(X_next, dtype=float)
    X_n = X_n.vector() if isinstance(X_n, NodalState) else np.asarray(X_n, dtype=float)
    if X_next.shape != X_n.shape or X_next.size != 3 * sys.n_nodes:
        raise ValueError(f"state sizes {X_next.shape}, {X_n.shape} do not match {3 * sys.n_nodes} unknowns")
    for name, X in (("state", X_next), ("previous state", X_n)):
        if not np.all(np.isfinite(X)):
            k = int(np.nonzero(~np.isfinite(X))[0][0])
            raise NonFiniteResidual(f"non-finite {name} in field {_FIELDS[k // sys.n_nodes]} at node {k % sys.n_nodes}")
    r = sys.residual(X_next, X_n)
    if not np.all(np.isfinite(r)):
        k = int(np.nonzero(~np.isfinite(r))[0][0])
        raise NonFiniteResidual(f"non-finite residual in field {_FIELDS[k // sys.n_nodes]} at node {k % sys.n_nodes}")
    return r


def residual_norm(r: np.ndarray, sys: BlockSystem) -> float:
    """Largest block-wise ratio ``||r_b|| / max(1, ||F_b||)`` over the three block rows."""
    n = sys.n_nodes
    F = sys.F
    return max(
        float(np.linalg.norm(r[k * n:(k + 1) * n]) / max(1.0, np.linalg.norm(F[k * n:(k + 1) * n])))
        for k in range(3)
    )


def _equilibrate(A: sp.csr_matrix):
    row = np.asarray(abs(A).max(axis=1).todense()).ravel()
    row[row == 0.0] = 1.0
    A = sp.diags(1.0 / row) @ A
    col = np.asarray(abs(A).max(axis=0).todense()).ravel()
    col[col == 0.0] = 1.0
    return (A @ sp.diags(1.0 / col)).tocsc(), row, col


class LinearizedStep:
    """Factorised Newton Jacobian at one iterate.

    ``solve(r)`` returns ``dX`` with ``J dX = -r``; ``scaled_norm`` measures
    an increment in the equilibrated (dimensionless) variables.
    """

    def __init__(self, sys: BlockSystem, X: np.ndarray):
        self.n = sys.n_nodes
        _, th, p = np.split(X, 3)
        J = sys.jacobian_blocks(X)
        _, self.dphi_t, self.dphi_p = mt.sorption_isotherm(th, p, sys.mat)
        Dt = sp.diags(self.dphi_t)
        Dp = sp.diags(self.dphi_p)
        self.A11, A12, A13 = J[0]
        self.A21, A22, _ = J[1]
        # heat rows first, so the diagonal pairs heat with theta and water
        # with P; pivots then stay on the diagonal and a symmetric ordering
        # keeps its fill even once the pressure field is large
        S = sp.bmat(
            [[self.A21 @ Dt + A22, self.A21 @ Dp], [self.A11 @ Dt + A12, self.A11 @ Dp + A13]], format="csr"
        )
        S, self.row, self.col = _equilibrate(S)
        try:
            self.lu = spla.splu(S, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=1e-3,
                                options=dict(SymmetricMode=True))
        except RuntimeError as exc:
            raise NewtonFailure(f"singular Jacobian: {exc}", residual=math.inf, iterations=0) from exc

    def solve(self, r: np.ndarray) -> np.ndarray:
        n = self.n
        r1, r2, r3 = np.split(r, 3)
        b = np.concatenate([-r2 + self.A21 @ r3, -r1 + self.A11 @ r3])
        y = self.lu.solve(b / self.row) / self.col
        d_th, d_p = y[:n], y[n:]
        d_w = -r3 + self.dphi_t * d_th + self.dphi_p * d_p
        return np.concatenate([d_w, d_th, d_p])

    def scaled_norm(self, dX: np.ndarray) -> float:
        return float(np.linalg.norm(dX[self.n:] * self.col))


def chop_update(X_old: np.ndarray, X_new: np.ndarray, mat=mt.DEFAULT_MATERIAL) -> np.ndarray:
    """Limit per-node pressure updates so RH does not jump across an isotherm breakpoint.

    A node whose relative humidity would cross a curvature breakpoint of
    the isotherm in one iteration is placed just past that breakpoint; a
    pressure that would turn non-positive is reduced to a tenth of its old
    value instead.
    """
    n = X_old.size // 3
    th0, p0 = X_old[n:2 * n], X_old[2 * n:]
    th1, p1 = X_new[n:2 * n], X_new[2 * n:].copy()
    p1 = np.where((p1 <= 0.0) & (p0 > 0.0), 0.1 * p0, p1)
    rh0 = p0 / mt.saturation_pressure(th0)
    psat1 = mt.saturation_pressure(th1)
    rh1 = p1 / psat1
    edges = mt.isotherm_breakpoints(th1, mat)
    up = np.full(n, np.inf)
    down = np.full(n, -np.inf)
    for k in range(edges.shape[1]):
        e = edges[:, k]
        up = np.where((rh0 < e) & (e < up), e, up)
        down = np.where((rh0 > e) & (e > down), e, down)
    eps = 1e-6
    rh1 = np.where(rh1 > up, up + eps, rh1)
    rh1 = np.where(rh1 < down, down - eps, rh1)
    changed = rh1 != p1 / psat1
    out = X_new.copy()
    out[2 * n:] = np.where(changed, rh1 * psat1, p1)
    return out


def newton_update(sys: BlockSystem, X: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Solve ``J dX = -r`` for the Newton increment."""
    return LinearizedStep(sys, X).solve(r)


def newton_solve(X_n: NodalState, sys: BlockSystem, cfg: SolverConfig, guess: NodalState | None = None) -> NewtonResult:
    """Newton iteration for one time step, warm-started from ``guess`` (default ``X_n``).

    ``iterations`` counts residual evaluations of accepted iterates, so a
    start that already satisfies the tolerance reports one iteration.

    Each correction is first limited per node by :func:`chop_update`.  When
    the full correction does not decrease the residual norm it is scaled by
    ``cfg.relaxation`` up to ``cfg.max_backtracks`` times; if no scaled trial
    decreases the norm either, the full correction is kept.
    """
    if np.any(X_n.theta <= 0):
        raise ValueError("previous state has non-positive temperature")
    Xn = X_n.vector()
    X = (guess or X_n).vector()
    r = step_residual(X, Xn, sys)
    norm = residual_norm(r, sys)
    for it in range(1, cfg.newton_max_iter + 1):
        if norm <= cfg.newton_tol:
            return NewtonResult(NodalState.from_vector(X), it, norm)
        if it == cfg.newton_max_iter:
            break
        dX = newton_update(sys, X, r)
        full = None
        step = 1.0
        accepted = None
        for attempt in range(cfg.max_backtracks + 1):
            X_try = chop_update(X, X + step * dX, sys.mat)
            try:
                r_try = step_residual(X_try, Xn, sys)
            except NonFiniteResidual:
                r_try = None
            if r_try is not None:
                n_try = residual_norm(r_try, sys)
                if full is None and attempt == 0:
                    full = (X_try, r_try, n_try)
                if n_try < norm:
                    accepted = (X_try, r_try, n_try)
                    break
            if cfg.relaxation == 1.0:
                break
            step *= cfg.relaxation
        if accepted is None:
            accepted = full
        if accepted is None:
            raise NewtonFailure("residual became non-finite", residual=norm, iterations=it)
        X, r, norm = accepted
    raise NewtonFailure(
        f"no convergence after {cfg.newton_max_iter} iterations (residual {norm:.3e})",
        residual=norm, iterations=cfg.newton_max_iter,
    )


def _solve_step(disc, state, t, dt, bc, mat, cfg, halvings):
    sys = assemble(disc, state, t + dt, dt, bc, mat)
    try:
        result = newton_solve(state, sys, cfg)
        return result, result.iterations
    except NewtonFailure:
        if halvings <= 0:
            raise
    half = dt / 2
    first, n1 = _solve_step(disc, state, t, half, bc, mat, cfg, halvings - 1)
    second, n2 = _solve_step(disc, first.state, t + half, half, bc, mat, cfg, halvings - 1)
    return second, n1 + n2


def run(mesh: Mesh | Discretization, mat: mt.MaterialConstants, bc: BoundaryConditions,
        cfg: SolverConfig, initial: NodalState, snapshot_every: float | None = None,
        diagnostics: TextIO | None = None, callback=None) -> Trajectory:
    """Advance ``initial`` with uniform steps of ``cfg.dt`` up to ``cfg.t_end``.

    Snapshots are recorded at t = 0, every ``snapshot_every`` seconds and at
    the final time.  On a failed step :class:`StepFailure` is raised with
    the partial trajectory attached.
    """
    disc = mesh if isinstance(mesh, Discretization) else Discretization(mesh)
    traj = Trajectory()
    state = initial.copy()
    traj.append(0.0, state)
    if callback is not None:
        callback(0.0, state)
    every = None if snapshot_every is None else int(round(snapshot_every / cfg.dt))
    n_steps = cfg.n_steps
    for k in range(1, n_steps + 1):
        t_prev = (k - 1) * cfg.dt
        t = k * cfg.dt
        try:
            result, iterations = _solve_step(disc, state, t_prev, cfg.dt, bc, mat, cfg, cfg.retry_halving)
        except (SolverError, ValueError, ArithmeticError) as exc:
            raise StepFailure(k, t, exc, traj) from exc
        state = result.state
        diag = StepDiagnostics(k, t, iterations, result.residual)
        traj.diagnostics.append(diag)
        if diagnostics is not None:
            print(diag.line(), file=diagnostics, flush=True)
        log.debug("step %d t=%g iterations=%d residual=%.3e", k, t, iterations, result.residual)
        if (every and k % every == 0) or k == n_steps:
            traj.append(t, state)
            if callback is not None:
                callback(t, state)
    return traj
