"""Coarse-versus-fine check of the relative entropy stability bound.

A fine run stands in for the exact solution.  The coarse run supplies the
reconstructions ``(R_1[u_h], R[v_h])``, the stability constant
``K[R_1[u_h]]`` and the full estimator as the source term.  The bound

    eta_R(t) <= (eta_R(0) + int_0^t E_s^2 ds) exp(int_0^t K ds)

is compared in log form because ``exp(int K)`` overflows quickly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .driver import RunConfig, run_case
from .estimator import Accumulator
from .model import stability_constant_K, stability_constants
from .reconstruct import (
    entropy_constituents,
    h1_distance_sq,
    merged_mesh,
    reconstruct_R1,
    reconstruct_Rv,
)


@dataclass
class GronwallReport:
    t: list[float] = field(default_factory=list)
    eta_R: list[float] = field(default_factory=list)
    K: list[float] = field(default_factory=list)
    int_K: list[float] = field(default_factory=list)
    int_E: list[float] = field(default_factory=list)
    log_lhs: list[float] = field(default_factory=list)
    log_rhs: list[float] = field(default_factory=list)

    @property
    def margins(self) -> np.ndarray:
        """``log rhs - log lhs``; nonnegative where the bound holds."""
        return np.array(self.log_rhs) - np.array(self.log_lhs)

    @property
    def holds(self) -> bool:
        m = self.margins
        return bool(m.size and np.all(m >= -1e-12))


def _slope_sup(R, samples: int = 201) -> float:
    xi = np.linspace(-1.0, 1.0, samples)
    return float(np.abs(R.derivative().at_reference(xi)).max())


def _max_abs(f, samples: int = 201) -> float:
    return float(np.abs(f.at_reference(np.linspace(-1.0, 1.0, samples))).max())


def gronwall_check(N_coarse: int = 32, N_fine: int = 128, p: int = 1, T: float = 0.125,
                   p_fine: int | None = None, test: str = "test1") -> GronwallReport:
    """Run both resolutions and evaluate the bound at every coarse level.

    ``N_fine`` must be a multiple of ``N_coarse`` so that every coarse
    time level is also a fine one and the meshes are nested.
    """
    if N_fine % N_coarse:
        raise ValueError("N_fine must be a multiple of N_coarse")
    ratio = (N_fine // N_coarse) ** 2  # fine steps per coarse step
    coarse_cfg = RunConfig(test=test, N=N_coarse, p=p, T=T, stride=1, full_estimator=True)
    fine_cfg = RunConfig(test=test, N=N_fine, p=p_fine or p, T=T, stride=ratio, full_estimator=False)
    coarse = run_case(coarse_cfg, keep=lambda n, n_steps: True)
    fine = run_case(fine_cfg, keep=lambda n, n_steps: n % ratio == 0 or n == n_steps)
    for r in (coarse, fine):
        if r.trajectory.failure:
            raise RuntimeError(r.trajectory.failure)
    cs, fs = coarse.trajectory.states, fine.trajectory.states
    if len(cs) != len(fs) or not np.allclose([s.t for s in cs], [s.t for s in fs]):
        raise ValueError("coarse and fine time levels do not line up; choose T on the coarse grid")
    params = coarse.disc.params
    dt = coarse.trajectory.dt
    mesh = merged_mesh(coarse.disc.mesh, fine.disc.mesh)
    E_int = coarse.report.column("int_E_t_sq")

    R1 = [reconstruct_R1(s.u, s.tau, params) for s in cs]
    out = GronwallReport()
    acc_diss, acc_K = Accumulator(), Accumulator()
    eta0 = None
    for n, (sc, sf) in enumerate(zip(cs, fs)):
        if n == 0:
            Rv = reconstruct_Rv(R1[1], R1[0], sc.v, dt)  # forward quotient at the start
        else:
            Rv = reconstruct_Rv(R1[n], R1[n - 1], sc.v, dt)
        u_f, v_f = _on(sf.u, mesh), _on(sf.v, mesh)
        u_r, v_r = _on(R1[n], mesh), _on(Rv, mesh)
        diss = acc_diss.add(sc.t, h1_distance_sq(v_f, v_r, mesh)) if n else 0.0
        pair = entropy_constituents(u_f, v_f, u_r, v_r, params, mesh, dissipation=diss)
        M = max(_max_abs(sc.u), _max_abs(sf.u), _max_abs(R1[n]))
        K = stability_constant_K(_slope_sup(R1[n]), params.gamma, stability_constants(M, params))
        int_K = acc_K.add(sc.t, K) if n else 0.0
        if eta0 is None:
            eta0 = pair.eta_R
        src = float(E_int[n]) if n < E_int.size and math.isfinite(E_int[n]) else 0.0
        out.t.append(sc.t)
        out.eta_R.append(pair.eta_R)
        out.K.append(K)
        out.int_K.append(int_K)
        out.int_E.append(src)
        out.log_lhs.append(math.log(pair.eta_R) if pair.eta_R > 0 else -math.inf)
        out.log_rhs.append(math.log(eta0 + src) + int_K if eta0 + src > 0 else -math.inf)
    return out


def _on(f, mesh):
    """Re-express a broken field on a refinement of its mesh."""
    from .space import BrokenField, project_l2

    if f.mesh == mesh:
        return f
    return project_l2(f, mesh, f.degree, f.degree + 2) if isinstance(f, BrokenField) else f
