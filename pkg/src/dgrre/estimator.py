"""A posteriori quantities: the elliptic estimator, the computed indicator,
the full estimator, the initial estimator, the entropy errors and the
EOC/EI bookkeeping.

Every time derivative is a backward difference quotient of the quantity
under the derivative, formed from consecutive time levels.  All level
quantities used below are linear in the level data, so quotients are
taken directly on the per-level arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import basis
from .model import InitialData, ModelParams
from .operators import composed_derivative
from .space import BrokenField, integrate, quadrature_points


# -- elementary estimators ---------------------------------------------------

@dataclass(frozen=True)
class Eta1Terms:
    element: float  # sum_K h_K^2 ||f + w''||^2_K
    flux: float  # sum_e h_e [[w']]^2
    value: float  # sigma^2 sum_e [[w]]^2 / h_e

    @property
    def squared(self) -> float:
        return self.element + self.flux + self.value

    @property
    def total(self) -> float:
        return math.sqrt(self.squared)


def eta1(w_h: BrokenField, f, sigma: float | None = None, n_points: int | None = None) -> Eta1Terms:
    """Residual estimator of ``-w'' = f`` for the interior-penalty form.

    ``f`` is a broken field or a callable of ``x``. The element residual
    is ``f + w''``, the strong residual of that equation.
    """
    from .assembly import default_sigma

    mesh = w_h.mesh
    sigma = default_sigma(w_h.degree) if sigma is None else sigma
    if n_points is None:
        fd = f.degree if isinstance(f, BrokenField) else 3 * w_h.degree
        n_points = basis.default_points(max(fd, w_h.degree))
    if isinstance(f, BrokenField):
        fq = f.at_quadrature(n_points)
    else:
        fq = np.broadcast_to(np.asarray(f(quadrature_points(mesh, n_points)), dtype=float),
                             (mesh.n_elements, n_points))
    r = fq + w_h.derivative(2).at_quadrature(n_points)
    hK = mesh.element_widths
    he = mesh.face_h
    return Eta1Terms(
        element=float(np.sum(hK**2 * integrate(mesh, r * r))),
        flux=float(np.sum(he * w_h.derivative().jumps() ** 2)),
        value=float(sigma**2 * np.sum(w_h.jumps() ** 2 / he)),
    )


def eoc(values: Sequence[float], widths: Sequence[float]) -> np.ndarray:
    """Local slopes ``log(a_{i+1}/a_i) / log(h_{i+1}/h_i)``."""
    a = np.asarray(values, dtype=float)
    h = np.asarray(widths, dtype=float)
    if a.shape != h.shape or a.size < 2:
        raise ValueError("need matching sequences of length >= 2")
    if np.any(a <= 0) or np.any(h <= 0):
        raise ValueError("EOC needs positive values and widths")
    return np.log(a[1:] / a[:-1]) / np.log(h[1:] / h[:-1])


def effectivity(indicator_max: float, error_max: float) -> float:
    if not error_max > 0:
        raise ValueError("effectivity index needs a positive error")
    return indicator_max / error_max


# -- per-level data ----------------------------------------------------------

@dataclass
class LevelData:
    """Linear per-level quantities feeding every estimator term."""

    res: np.ndarray  # (tau - W'(u))/gamma + u'' at quadrature points
    ju: np.ndarray  # [[u]]
    jdu: np.ndarray  # [[u']]
    jtau: np.ndarray  # [[tau]]
    jwp: np.ndarray  # [[W'(u)]]
    jv: np.ndarray  # [[v]]
    sob: np.ndarray  # d^{p+1}/dx^{p+1} W'(u) at quadrature points

    def combine(self, coeffs: Sequence[float], others: Sequence["LevelData"]) -> "LevelData":
        names = self.__dataclass_fields__
        out = {}
        for name in names:
            out[name] = sum(c * getattr(o, name) for c, o in zip(coeffs, others))
        return LevelData(**out)


class LevelEvaluator:
    def __init__(self, mesh, degree: int, params: ModelParams, sigma: float):
        self.mesh, self.p, self.params, self.sigma = mesh, degree, params, sigma
        self.nq = basis.default_points(3 * degree)
        params.well.require(degree + 2)
        self.hK = mesh.element_widths
        self.he = mesh.face_h
        self.h = mesh.h_max

    def level(self, u: BrokenField, v: BrokenField, tau: BrokenField) -> LevelData:
        W, g = self.params.well, self.params.gamma
        nq = self.nq
        uq = u.at_quadrature(nq)
        res = (tau.at_quadrature(nq) - W.derivative(uq, 1)) / g + u.derivative(2).at_quadrature(nq)
        um, up = u.face_traces()
        sob = composed_derivative(u, lambda x, j: W.derivative(x, j + 1), self.p + 1, nq)
        return LevelData(
            res=res,
            ju=um - up,
            jdu=u.derivative().jumps(),
            jtau=tau.jumps(),
            jwp=W.derivative(um, 1) - W.derivative(up, 1),
            jv=v.jumps(),
            sob=sob,
        )

    # squared building blocks
    def eta1_sq(self, d: LevelData) -> float:
        return float(
            np.sum(self.hK**2 * integrate(self.mesh, d.res**2))
            + np.sum(self.he * d.jdu**2)
            + self.sigma**2 * np.sum(d.ju**2 / self.he)
        )

    def jump_inv_h(self, j: np.ndarray) -> float:
        return float(np.sum(j**2 / self.he))

    @staticmethod
    def jump_sq(j: np.ndarray) -> float:
        return float(np.sum(j**2))

    def sobolev(self, d: LevelData, power: int) -> float:
        return float(np.sum(self.hK**power * integrate(self.mesh, d.sob**2)))


# -- time integration ----------------------------------------------------------

class Accumulator:
    """Trapezoid integral over snapshot times.

    An integrand that only becomes available at a later level is extended
    back to the start with its first value.
    """

    def __init__(self, t0: float = 0.0):
        self.t0 = t0
        self.value = 0.0
        self._last: tuple[float, float] | None = None

    def add(self, t: float, y: float):
        if self._last is None:
            self.value += (t - self.t0) * y
        else:
            t_prev, y_prev = self._last
            self.value += 0.5 * (t - t_prev) * (y + y_prev)
        self._last = (t, y)
        return self.value


# -- reports --------------------------------------------------------------------

INDICATOR_COLUMNS = (
    "t",
    "Etilde_jump_u", "Etilde_jump_dtu", "Etilde_sobolev", "Etilde",
    "int_Etilde",
    "eta1_u_sq", "jump_tau_sq", "jump_u_sq",
    "eta1_dtu_sq", "jump_dtWp_sq", "jump_v_inv_h",
    "int_part3",
    "H_part1", "H_part2", "H_part3", "H_R",
)

FULL_COLUMNS = (
    "E_eta1_u", "E_eta1_dtu", "E_eta1_dttu", "E_jump_u", "E_jump_dtu", "E_sobolev_2p",
    "E_jump_tau", "E_jump_dtttau", "E_jump_u_h", "E_jump_dttWp",
    "E_jump_dttau", "E_jump_dtWp", "E_jump_dtv",
    "E_sobolev_dt", "E_sobolev", "E_sobolev_dtt",
    "E_t_sq", "int_E_t_sq",
)

ERROR_COLUMNS = ("u_dg", "u_l2", "v_l2", "v_dg", "int_v_dg", "int_v_dg_sq", "e_R", "e_R_sq_variant", "e_M")


@dataclass
class EstimatorReport:
    columns: list[str]
    rows: list[dict] = field(default_factory=list)
    E0: dict | None = None
    meta: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return np.array([r.get(name, np.nan) for r in self.rows], dtype=float)

    def max_of(self, name: str) -> float:
        c = self.column(name)
        c = c[np.isfinite(c)]
        return float(c.max()) if c.size else math.nan

    def summary(self) -> dict:
        out = {"snapshots": len(self.rows), "t_final": self.rows[-1]["t"] if self.rows else 0.0}
        out["max_H_R"] = self.max_of("H_R")
        if "e_R" in self.columns:
            out["max_e_R"] = self.max_of("e_R")
            out["max_e_M"] = self.max_of("e_M")
            out["max_e_R_sq_variant"] = self.max_of("e_R_sq_variant")
            if out["max_e_R"] > 0:
                out["EI"] = effectivity(out["max_H_R"], out["max_e_R"])
            # diagnostic only: indicator against the unweighted strain error
            u_dg = self.max_of("u_dg")
            if u_dg > 0:
                out["EI_u_dg"] = out["max_H_R"] / u_dg
        if "E_t_sq" in self.columns:
            out["int_E_t_sq_final"] = self.rows[-1].get("int_E_t_sq", math.nan) if self.rows else math.nan
        if self.E0 is not None:
            out["E0"] = self.E0["E0"]
        out.update(self.meta)
        return out


class EstimatorMonitor:
    """Solver observer evaluating indicators at snapshot levels.

    ``stride`` selects snapshot steps; the previous two levels are always
    available in the solver window, so quotients never depend on the stride.
    """

    def __init__(self, disc, dt: float, *, stride: int = 1, exact: Callable | None = None,
                 full: bool = True, stationary_exact: bool = False):
        self.disc, self.dt, self.stride = disc, dt, max(1, int(stride))
        p, params = disc.degree, disc.params
        self.params = params
        self.ev = LevelEvaluator(disc.mesh, p, params, disc.sigma)
        self.exact = exact
        self.full = full
        self._cache: dict[int, LevelData] = {}
        self.acc = {k: Accumulator() for k in ("Etilde", "part3", "v_dg", "v_dg_sq", "E_t_sq")}
        cols = list(INDICATOR_COLUMNS) + (list(FULL_COLUMNS) if full else [])
        if exact is not None:
            cols += list(ERROR_COLUMNS)
            nq = basis.default_points(3 * p)
            self._xq = quadrature_points(disc.mesh, nq)
            self._nq = nq
            self._exact_cache = None
            self._stationary = stationary_exact
        self.report = EstimatorReport(cols, meta={"N": disc.N, "p": p, "dt": dt, "h": disc.mesh.h_max})

    def _level(self, n: int, entry) -> LevelData:
        d = self._cache.get(n)
        if d is None:
            _, u, v, tau = entry
            f = self.disc.field
            d = self.ev.level(f(u), f(v), f(tau))
            self._cache[n] = d
            for k in [k for k in self._cache if k < n - 2]:
                del self._cache[k]
        return d

    def __call__(self, n: int, t: float, window, disc, final: bool = False):
        if n % self.stride and not final:
            return
        self.report.rows.append(self.evaluate(n, t, window))

    def _exact_values(self, t: float):
        if self._stationary and self._exact_cache is not None:
            return self._exact_cache
        vals = self.exact(self._xq, t)
        if self._stationary:
            self._exact_cache = vals
        return vals

    def evaluate(self, n: int, t: float, window) -> dict:
        ev, dt, params = self.ev, self.dt, self.params
        g, mu = params.gamma, params.mu
        k = len(window)
        levels = [self._level(n - (k - 1 - i), window[i]) for i in range(max(0, k - 3), k)]
        d0 = levels[-1]
        d1 = d0.combine([1 / dt, -1 / dt], levels[-2:]) if len(levels) >= 2 else None
        d2 = (d0.combine([1 / dt**2, -2 / dt**2, 1 / dt**2], levels[-3:])
              if len(levels) >= 3 else None)
        h = ev.h
        p = ev.p
        row: dict = {"t": t}

        # computed indicator
        row["Etilde_jump_u"] = ev.jump_inv_h(d0.ju)
        row["Etilde_jump_dtu"] = mu * ev.jump_inv_h(d1.ju) if d1 is not None else math.nan
        row["Etilde_sobolev"] = ev.sobolev(d0, 2 * p)
        et = row["Etilde_jump_u"] + row["Etilde_sobolev"]
        if d1 is not None:
            et += row["Etilde_jump_dtu"]
            row["int_Etilde"] = self.acc["Etilde"].add(t, et)
        else:
            # the quotient term enters once the first quotient exists
            row["int_Etilde"] = self.acc["Etilde"].value
        row["Etilde"] = et
        row["eta1_u_sq"] = ev.eta1_sq(d0)
        row["jump_tau_sq"] = ev.jump_sq(d0.jtau)
        row["jump_u_sq"] = ev.jump_sq(d0.ju)
        row["jump_v_inv_h"] = ev.jump_inv_h(d0.jv)
        if d1 is not None:
            row["eta1_dtu_sq"] = ev.eta1_sq(d1)
            row["jump_dtWp_sq"] = ev.jump_sq(d1.jwp)
            integrand = row["eta1_dtu_sq"] + h / g**2 * row["jump_dtWp_sq"] + row["jump_v_inv_h"]
            row["int_part3"] = self.acc["part3"].add(t, integrand)
        else:
            row["eta1_dtu_sq"] = row["jump_dtWp_sq"] = math.nan
            row["int_part3"] = self.acc["part3"].value
        row["H_part1"] = math.sqrt(max(row["int_Etilde"], 0.0))
        row["H_part2"] = math.sqrt(g) * math.sqrt(row["eta1_u_sq"] + h / g**2 * (row["jump_tau_sq"] + row["jump_u_sq"]))
        row["H_part3"] = 0.5 * math.sqrt(mu) * math.sqrt(max(row["int_part3"], 0.0))
        row["H_R"] = row["H_part1"] + row["H_part2"] + row["H_part3"]

        if self.full:
            self._full_terms(row, d0, d1, d2, t)
        if self.exact is not None:
            self._errors(row, t, window[-1])
        return row

    def _full_terms(self, row, d0, d1, d2, t):
        ev, g, mu, h, p = self.ev, self.params.gamma, self.params.mu, self.ev.h, self.ev.p
        nan = math.nan
        row["E_eta1_u"] = row["eta1_u_sq"]
        row["E_jump_u"] = ev.jump_inv_h(d0.ju)
        row["E_sobolev_2p"] = ev.sobolev(d0, 2 * p)
        row["E_jump_tau"] = h / g**2 * ev.jump_sq(d0.jtau)
        row["E_jump_u_h"] = h / g**2 * ev.jump_sq(d0.ju)
        row["E_sobolev"] = ev.sobolev(d0, 2 * p + 2) / g**2
        if d1 is not None:
            row["E_eta1_dtu"] = mu * ev.eta1_sq(d1)
            row["E_jump_dtu"] = mu * ev.jump_inv_h(d1.ju)
            row["E_jump_dttau"] = h * mu / g**2 * ev.jump_sq(d1.jtau)
            row["E_jump_dtWp"] = h * mu / g**2 * ev.jump_sq(d1.jwp)
            row["E_jump_dtv"] = h * ev.jump_sq(d1.jv)
            row["E_sobolev_dt"] = ev.sobolev(d1, 2 * p + 2) / g**2
        else:
            for k in ("E_eta1_dtu", "E_jump_dtu", "E_jump_dttau", "E_jump_dtWp", "E_jump_dtv", "E_sobolev_dt"):
                row[k] = nan
        if d2 is not None:
            row["E_eta1_dttu"] = ev.eta1_sq(d2)
            row["E_jump_dtttau"] = h / g**2 * ev.jump_sq(d2.jtau)
            row["E_jump_dttWp"] = h / g**2 * ev.jump_sq(d2.jwp)
            row["E_sobolev_dtt"] = ev.sobolev(d2, 2 * p + 2) / g**2
        else:
            for k in ("E_eta1_dttu", "E_jump_dtttau", "E_jump_dttWp", "E_sobolev_dtt"):
                row[k] = nan
        total = sum(row[k] for k in FULL_COLUMNS[:16] if not math.isnan(row[k]))
        row["E_t_sq"] = total
        row["int_E_t_sq"] = self.acc["E_t_sq"].add(t, total)

    def _errors(self, row, t, entry):
        _, u, v, _ = entry
        mesh, nq = self.disc.mesh, self._nq
        ue, due, ve, dve = self._exact_values(t)
        uh, vh = self.disc.field(u), self.disc.field(v)
        he = mesh.face_h

        def dg_and_l2(fh, fe, dfe):
            dq = fh.derivative().at_quadrature(nq)
            vq = fh.at_quadrature(nq)
            dg = float(np.sum(integrate(mesh, (dfe - dq) ** 2)) + np.sum(fh.jumps() ** 2 / he))
            l2 = float(np.sum(integrate(mesh, (fe - vq) ** 2)))
            return math.sqrt(dg), math.sqrt(l2)

        u_dg, u_l2 = dg_and_l2(uh, ue, due)
        v_dg, v_l2 = dg_and_l2(vh, ve, dve)
        row["u_dg"], row["u_l2"], row["v_l2"], row["v_dg"] = u_dg, u_l2, v_l2, v_dg
        row["int_v_dg"] = self.acc["v_dg"].add(t, v_dg)
        row["int_v_dg_sq"] = self.acc["v_dg_sq"].add(t, v_dg**2)
        g, mu = self.params.gamma, self.params.mu
        base = math.sqrt(g) * u_dg + v_l2
        row["e_R"] = base + math.sqrt(0.25 * mu * row["int_v_dg"])
        row["e_R_sq_variant"] = base + math.sqrt(0.25 * mu * row["int_v_dg_sq"])
        row["e_M"] = row["e_R"] + u_l2


def estimator_initial(data: InitialData, state, params: ModelParams, sigma: float) -> dict:
    """Initial estimator with its data-error and discrete parts."""
    u, v, tau = state.u, state.v, state.tau
    mesh = u.mesh
    ev = LevelEvaluator(mesh, u.degree, params, sigma)
    d = ev.level(u, v, tau)
    nq = ev.nq
    x = quadrature_points(mesh, nq)
    du_err = data.du0(x) - u.derivative().at_quadrature(nq)
    u_dg_sq = float(np.sum(integrate(mesh, du_err**2)) + np.sum(u.jumps() ** 2 / mesh.face_h))
    v_sq = float(np.sum(integrate(mesh, (data.v0(x) - v.at_quadrature(nq)) ** 2)))
    g, h = params.gamma, mesh.h_max
    out = {
        "u_dg_sq": u_dg_sq,
        "v_l2_sq": v_sq,
        "eta1_sq": g * ev.eta1_sq(d),
        "jumps": h / g**2 * (ev.jump_sq(d.jtau) + ev.jump_sq(d.ju)),
    }
    out["E0"] = sum(out.values())
    return out


# -- convergence tables ------------------------------------------------------------

@dataclass
class ConvergenceTable:
    degree: int
    N: list[int] = field(default_factory=list)
    error: list[float] = field(default_factory=list)
    indicator: list[float] = field(default_factory=list)
    widths: list[float] = field(default_factory=list)
    with_error: bool = True

    def add(self, N: int, h: float, indicator: float, error: float | None = None):
        self.N.append(N)
        self.widths.append(h)
        self.indicator.append(indicator)
        self.error.append(math.nan if error is None else error)

    @staticmethod
    def _eoc_column(values, widths):
        out = [0.0]
        for i in range(1, len(values)):
            a, b = values[i - 1], values[i]
            if not (a > 0 and b > 0 and math.isfinite(a) and math.isfinite(b)):
                out.append(math.nan)
            else:
                out.append(float(eoc([a, b], widths[i - 1:i + 1])[0]))
        return out

    @property
    def eoc_error(self):
        return self._eoc_column(self.error, self.widths)

    @property
    def eoc_indicator(self):
        return self._eoc_column(self.indicator, self.widths)

    @property
    def ei(self):
        return [i / e if e > 0 else math.nan for i, e in zip(self.indicator, self.error)]

    def header(self) -> list[str]:
        return ["N", "error", "EOC", "indicator", "EOC", "EI"] if self.with_error else ["N", "indicator", "EOC"]

    def formatted_rows(self) -> list[list[str]]:
        def f(x):
            return "nan" if not math.isfinite(x) else f"{x:.6e}"

        def r(x, d):
            return "nan" if not math.isfinite(x) else f"{x:.{d}f}"

        rows = []
        for i, N in enumerate(self.N):
            if self.with_error:
                rows.append([str(N), f(self.error[i]), r(self.eoc_error[i], 3), f(self.indicator[i]),
                             r(self.eoc_indicator[i], 3), r(self.ei[i], 2)])
            else:
                rows.append([str(N), f(self.indicator[i]), r(self.eoc_indicator[i], 3)])
        return rows
