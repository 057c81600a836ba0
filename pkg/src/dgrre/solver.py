"""Semidiscrete scheme, Crank-Nicolson time stepping and trajectories.

Unknowns are stored as flat coefficient vectors in the orthonormal
broken basis, so every Galerkin system has the identity as mass matrix.
The stress ``tau_h`` is eliminated from the third equation,

    int tau_h Z = int W'(u_h) Z + gamma A_h(u_h, Z),

and the Crank-Nicolson system is reduced to the velocity alone because
the strain update is linear in the new velocity.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import basis
from .assembly import DGMatrices, check_coercivity, dg_matrices
from .mesh import Mesh1D
from .model import ModelParams
from .space import BrokenField, integrate, project_l2, ritz_project

log = logging.getLogger(__name__)


class StepFailure(RuntimeError):
    def __init__(self, message: str, residuals: list[float]):
        super().__init__(message)
        self.residuals = residuals


@dataclass(frozen=True)
class SolveConfig:
    T: float = 0.5
    dt_coeff: float = 1.0  # dt = dt_coeff / N^2
    dt: float | None = None  # explicit override
    newton_tol: float = 1e-11
    newton_maxit: int = 30
    sigma: float | None = None
    history: int = 3
    refresh_ratio: float = 0.25

    def __post_init__(self):
        if self.history < 3:
            raise ValueError("history depth must be at least 3")
        if not self.T >= 0:
            raise ValueError("final time must be non-negative")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("time step must be positive")
        if not self.dt_coeff > 0:
            raise ValueError("dt coefficient must be positive")

    def time_step(self, n_elements: int) -> float:
        return self.dt if self.dt is not None else self.dt_coeff / n_elements**2


@dataclass(frozen=True, eq=False)
class SolverState:
    t: float
    u: BrokenField
    v: BrokenField
    tau: BrokenField


class Discretization:
    """Assembled operators for one mesh, degree and parameter set."""

    def __init__(self, mesh: Mesh1D, degree: int, params: ModelParams, sigma: float | None = None):
        if mesh.bc_mode != params.bc_mode:
            raise ValueError("mesh and model disagree on the boundary mode")
        params.well.require(2)
        self.mesh, self.degree, self.params = mesh, degree, params
        self.mats: DGMatrices = dg_matrices(mesh, degree, sigma)
        self.sigma = self.mats.sigma
        self.nb = degree + 1
        self.N = mesh.n_elements
        self.n = self.N * self.nb
        self.nq = basis.default_points(degree)
        rule = basis.gauss_rule(self.nq)
        s = basis.norm_factors(degree)
        self._w = rule.weights
        self._sV = basis.vander_at(self.nq, degree) * s  # (nq, nb)
        self._sqrt_h = np.sqrt(mesh.element_widths)[:, None]
        self.Gp = self.mats.G_plus
        self.Gm = self.mats.G_minus
        self.A = self.mats.A
        self.C = (self.Gm.T @ self.Gm).tocsr()
        # block-diagonal sparsity pattern for the W'' blocks
        e = np.arange(self.N)[:, None, None] * self.nb
        i = np.arange(self.nb)
        self._rows = (e + i[None, :, None] + 0 * i[None, None, :]).ravel()
        self._cols = (e + 0 * i[None, :, None] + i[None, None, :]).ravel()
        self._outer = np.einsum("q,qi,qj->qij", 0.5 * self._w, self._sV, self._sV)

    # -- pointwise helpers -------------------------------------------------------
    def values(self, c: np.ndarray) -> np.ndarray:
        return (c.reshape(self.N, self.nb) / self._sqrt_h) @ self._sV.T

    def project_values(self, q: np.ndarray) -> np.ndarray:
        return (0.5 * self._sqrt_h * ((q * self._w) @ self._sV)).ravel()

    def field(self, c: np.ndarray) -> BrokenField:
        return BrokenField(self.mesh, c.reshape(self.N, self.nb).copy())

    # -- scheme pieces -----------------------------------------------------------
    def tau(self, u: np.ndarray) -> np.ndarray:
        W = self.params.well
        return self.project_values(W.derivative(self.values(u), 1)) + self.params.gamma * (self.A @ u)

    def tau_jacobian_blocks(self, u: np.ndarray) -> sp.csr_matrix:
        W2 = self.params.well.derivative(self.values(u), 2)  # (N, nq)
        blocks = np.einsum("eq,qij->eij", W2, self._outer)
        return sp.csr_matrix((blocks.ravel(), (self._rows, self._cols)), shape=(self.n, self.n))

    def rhs(self, u: np.ndarray, v: np.ndarray, tau: np.ndarray | None = None):
        tau = self.tau(u) if tau is None else tau
        return self.Gm @ v, self.Gp @ tau - self.params.mu * (self.C @ v)

    def energy(self, u: np.ndarray, v: np.ndarray) -> float:
        Wq = self.params.well(self.values(u))
        return float(
            0.5 * self.params.gamma * u @ (self.A @ u)
            + integrate(self.mesh, Wq).sum()
            + 0.5 * v @ v
        )

    def mean(self, c: np.ndarray) -> float:
        return float(self.mats.mean_row @ c)

    def state(self, t: float, u: np.ndarray, v: np.ndarray, tau: np.ndarray | None = None) -> SolverState:
        tau = self.tau(u) if tau is None else tau
        return SolverState(t, self.field(u), self.field(v), self.field(tau))


# -- module-level operations ---------------------------------------------------

def eliminate_tau(u: BrokenField, params: ModelParams, sigma: float | None = None) -> BrokenField:
    disc = Discretization(u.mesh, u.degree, params, sigma)
    return disc.field(disc.tau(u.flat))


def semidiscrete_rhs(u: BrokenField, v: BrokenField, params: ModelParams, sigma: float | None = None):
    disc = Discretization(u.mesh, u.degree, params, sigma)
    du, dv = disc.rhs(u.flat, v.flat)
    return disc.field(du), disc.field(dv)


def energy_discrete(state: SolverState, params: ModelParams, sigma: float | None = None) -> float:
    """``gamma/2 A_h(u,u) + int W(u) + 1/2 |v|^2``."""
    disc = Discretization(state.u.mesh, state.u.degree, params, sigma)
    return disc.energy(state.u.flat, state.v.flat)


class CrankNicolson:
    """Crank-Nicolson stepper with a modified Newton iteration.

    The Jacobian is exact whenever it is rebuilt; between rebuilds its LU
    factors are reused and refreshed once the contraction rate degrades.
    """

    def __init__(self, disc: Discretization, dt: float, tol: float = 1e-11, maxit: int = 30,
                 refresh_ratio: float = 0.25):
        self.disc, self.dt, self.tol, self.maxit = disc, dt, tol, maxit
        self.refresh_ratio = refresh_ratio
        a = 0.5 * dt
        self.a = a
        d = disc
        self._base = (sp.identity(d.n, format="csr") + a * d.params.mu * d.C
                      - a * a * d.params.gamma * (d.Gp @ d.A @ d.Gm)).tocsr()
        self._lu = None
        self.n_factorizations = 0
        self.last_iterations = 0
        self.last_residuals: list[float] = []

    def _factor(self, u: np.ndarray):
        d, a = self.disc, self.a
        J = self._base - a * a * (d.Gp @ d.tau_jacobian_blocks(u) @ d.Gm)
        self._lu = splu(J.tocsc())
        self.n_factorizations += 1

    def step(self, u: np.ndarray, v: np.ndarray, tau: np.ndarray | None = None):
        d, a = self.disc, self.a
        du_n, dv_n = d.rhs(u, v, tau)
        b_u = u + a * du_n
        b_v = v + a * dv_n
        mu = d.params.mu
        scale = 1.0 + np.linalg.norm(v) + np.linalg.norm(dv_n) * self.dt
        w = v.copy()
        residuals: list[float] = []
        fresh = False
        for it in range(self.maxit + 1):
            u_new = b_u + a * (d.Gm @ w)
            tau_new = d.tau(u_new)
            R = w - b_v - a * (d.Gp @ tau_new) + a * mu * (d.C @ w)
            r = float(np.linalg.norm(R))
            residuals.append(r)
            if r <= self.tol * scale:
                break
            if it == self.maxit:
                raise StepFailure(f"Newton failed after {self.maxit} iterations", residuals)
            if self._lu is None:
                self._factor(u_new)
                fresh = True
            elif len(residuals) > 1 and r > self.refresh_ratio * residuals[-2]:
                if fresh and r >= residuals[-2]:
                    raise StepFailure("Newton iteration diverged", residuals)
                self._factor(u_new)
                fresh = True
            w = w - self._lu.solve(R)
        self.last_iterations = len(residuals) - 1
        self.last_residuals = residuals
        return u_new, w, tau_new


def time_quotients(levels: list[np.ndarray], dt: float) -> tuple[np.ndarray | None, np.ndarray | None]:
    """Backward first and second quotients from the last levels (newest last)."""
    first = (levels[-1] - levels[-2]) / dt if len(levels) >= 2 else None
    second = (levels[-1] - 2 * levels[-2] + levels[-3]) / dt**2 if len(levels) >= 3 else None
    return first, second


@dataclass
class Trajectory:
    """Strided snapshots plus per-step diagnostics."""

    disc: Discretization
    dt: float
    states: list[SolverState] = field(default_factory=list)
    times: list[float] = field(default_factory=list)
    energy: list[float] = field(default_factory=list)
    mean_u: list[float] = field(default_factory=list)
    dissipation: list[float] = field(default_factory=list)  # running int mu |G^- v|^2
    newton_iterations: list[int] = field(default_factory=list)
    failure: str | None = None

    @property
    def final(self) -> SolverState:
        return self.states[-1]


def step_count(T: float, dt: float) -> int:
    n = int(round(T / dt))
    if abs(n * dt - T) > 1e-12 * max(1.0, T):
        n = int(np.ceil(T / dt))
    return n


Observer = Callable[[int, float, list, Discretization, bool], None]


def initial_state(disc: Discretization, u0, du0, v0) -> SolverState:
    """Ritz projection of the strain (mean matched) and L2 projection of the velocity."""
    u = ritz_project(u0, du0, disc.mesh, disc.degree, disc.sigma).flat
    v = project_l2(v0, disc.mesh, disc.degree).flat
    return disc.state(0.0, u, v)


def run(
    disc: Discretization,
    initial: SolverState,
    config: SolveConfig,
    *,
    stride: int = 1,
    observer: Observer | None = None,
    keep: Callable[[int, int], bool] | None = None,
) -> Trajectory:
    """Advance to ``config.T``; ``observer(n, t, window, disc, final)`` sees every level.

    ``window`` holds up to ``config.history`` recent ``(t, u, v, tau)``
    coefficient tuples, newest last. ``keep(n, n_steps)`` selects the
    stored states; by default every strided snapshot is kept.
    """
    check_coercivity(disc.mats)
    dt = config.time_step(disc.N)
    n_steps = step_count(config.T, dt)
    stepper = CrankNicolson(disc, dt, config.newton_tol, config.newton_maxit, config.refresh_ratio)
    traj = Trajectory(disc, dt)
    u, v, tau = initial.u.flat.copy(), initial.v.flat.copy(), initial.tau.flat.copy()
    window = [(0.0, u, v, tau)]
    diss = 0.0
    mu = disc.params.mu
    prev_rate = mu * float(np.sum((disc.Gm @ v) ** 2))

    def record(n, t):
        traj.energy.append(disc.energy(u, v))
        traj.mean_u.append(disc.mean(u))
        traj.dissipation.append(diss)
        stored = keep(n, n_steps) if keep is not None else (n % stride == 0 or n == n_steps)
        if stored:
            traj.states.append(disc.state(t, u, v, tau))
            traj.times.append(t)
        if observer is not None:
            observer(n, t, window, disc, n == n_steps)

    record(0, 0.0)
    for n in range(1, n_steps + 1):
        t = n * dt
        try:
            u, v, tau = stepper.step(u, v, tau)
        except StepFailure as exc:
            traj.failure = f"step {n} at t={t:.6g}: {exc} (residuals {exc.residuals[-3:]})"
            log.error(traj.failure)
            break
        traj.newton_iterations.append(stepper.last_iterations)
        rate = mu * float(np.sum((disc.Gm @ v) ** 2))
        diss += 0.5 * dt * (rate + prev_rate)
        prev_rate = rate
        window.append((t, u, v, tau))
        if len(window) > config.history:
            window.pop(0)
        record(n, t)
    return traj
