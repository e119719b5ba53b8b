"""Characteristic curves of the Vlasov flow and their variational derivatives.

A particle of species i moves in the mean-field potential phi = U * rho_j
of the other species: X' = V, V' = -phi'(X).  Along with (X, V) the
integrator carries the derivatives (dX/dv, dV/dv) with respect to the
initial velocity, which solve d^2/ds^2 (dX/dv) = -phi''(X) dX/dv.  For a
static field the particle energy V^2/2 + phi(X) is conserved.
"""

from __future__ import annotations

import bisect
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline, PPoly, make_interp_spline

from ..errors import ConfigurationError, ConvergenceError
from ..kernel import DEFAULT_POTENTIAL, InteractionPotential, SpatialGrid, extend_field

log = logging.getLogger(__name__)


class StaticField:
    """phi(x) = h sum_j U(x - x_j) rho_j for a fixed density of the other species.

    The sum is evaluated from the exact potential at the grid nodes (or a
    table ``refine`` times finer) and represented by a quintic spline, so phi, phi' and
    phi'' are mutually consistent (the particle energy is an exact invariant
    of the interpolated flow).  Pinned grids extend rho by its halo values;
    beyond |x| = L + 1 the field is continued with constant force and the
    crossing is flagged.  Periodic grids wrap x into the cell.
    """

    def __init__(self, grid: SpatialGrid, density, halo=None,
                 pot: InteractionPotential = DEFAULT_POTENTIAL, refine: int = 1):
        density = np.asarray(density, dtype=float)
        if density.shape != (grid.n_nodes,):
            raise ConfigurationError("density length does not match the grid")
        self.grid, self.pot = grid, pot
        width = int(math.ceil(1.0 / grid.h)) + 2
        if grid.boundary == "periodic":
            width = max(width, grid.n_nodes)
        nodes = grid.x[0] + grid.h * np.arange(-width, grid.n_nodes + width)
        mass = grid.h * extend_field(grid, density, width, halo)
        fine_h = grid.h / refine
        if grid.boundary == "periodic":
            xs = grid.x[0] + fine_h * np.arange(grid.n_nodes * refine + 1)
        else:
            self._edge = grid.half_length + 1.0
            n = int(math.ceil(2 * self._edge / fine_h))
            xs = np.linspace(-self._edge, self._edge, n + 1)
        diff = xs[:, None] - nodes[None, :]
        phi = (pot.profile(diff)) @ mass
        if grid.boundary == "periodic":
            phi[-1] = phi[0]
            spline = make_interp_spline(xs, phi, k=5, bc_type="periodic")
        else:
            d1 = pot.derivative(diff[[0, -1]]) @ mass
            d2 = pot.second_derivative(diff[[0, -1]]) @ mass
            spline = make_interp_spline(xs, phi, k=5, bc_type=([(1, d1[0]), (2, d2[0])],
                                                               [(1, d1[1]), (2, d2[1])]))
        poly = PPoly.from_spline(spline)
        keep = np.diff(poly.x) > 0  # drop the zero-length pieces at repeated knots
        self._breaks = poly.x[:-1][keep].tolist()
        self._coef = poly.c[:, keep].T.tolist()
        self.exited = False

    def _eval(self, x: float) -> tuple[float, float, float]:
        i = min(max(bisect.bisect_right(self._breaks, x) - 1, 0), len(self._breaks) - 1)
        u = x - self._breaks[i]
        c5, c4, c3, c2, c1, c0 = self._coef[i]
        p = ((((c5 * u + c4) * u + c3) * u + c2) * u + c1) * u + c0
        dp = (((5 * c5 * u + 4 * c4) * u + 3 * c3) * u + 2 * c2) * u + c1
        d2p = ((20 * c5 * u + 12 * c4) * u + 6 * c3) * u + 2 * c2
        return p, dp, d2p

    @classmethod
    def zero(cls, grid: SpatialGrid) -> "StaticField":
        return cls(grid, np.zeros(grid.n_nodes), (0.0, 0.0) if grid.boundary == "pinned" else None)

    def derivatives(self, x: float, t: float = 0.0) -> tuple[float, float, float]:
        """(phi, phi', phi'') at x."""
        g = self.grid
        if g.boundary == "periodic":
            x = g.x[0] + (x - g.x[0]) % g.period
        elif abs(x) > self._edge:
            if not self.exited:
                log.info("trajectory left the tabulated range at x=%.4g; constant-force extension", x)
            self.exited = True
            xe = math.copysign(self._edge, x)
            p, slope, _ = self._eval(xe)
            return p + slope * (x - xe), slope, 0.0
        return self._eval(x)

    @property
    def static(self) -> bool:
        return True


class SampledField:
    """Time-sampled potential phi(t_k, x_i): cubic spline in x, linear in t."""

    def __init__(self, grid: SpatialGrid, times, phis):
        times = np.asarray(times, dtype=float)
        phis = np.asarray(phis, dtype=float)
        if phis.shape != (len(times), grid.n_nodes) or len(times) < 1:
            raise ConfigurationError("phis must have shape (len(times), Nx)")
        if np.any(np.diff(times) <= 0):
            raise ConfigurationError("sample times must increase strictly")
        self.grid, self.times = grid, times
        if grid.boundary == "periodic":
            xs = np.append(grid.x, grid.x[0] + grid.period)
            self._splines = [CubicSpline(xs, np.append(p, p[0]), bc_type="periodic") for p in phis]
        else:
            self._splines = [CubicSpline(grid.x, p, bc_type="clamped") for p in phis]
        self.exited = False

    def _at(self, k: int, x: float):
        sp = self._splines[k]
        return float(sp(x)), float(sp(x, 1)), float(sp(x, 2))

    def derivatives(self, x: float, t: float = 0.0) -> tuple[float, float, float]:
        g = self.grid
        if g.boundary == "periodic":
            x = g.x[0] + (x - g.x[0]) % g.period
        elif abs(x) > g.half_length:
            if not self.exited:
                log.info("trajectory left the sampled range at x=%.4g; constant-field extension", x)
            self.exited = True
            x = math.copysign(g.half_length, x)
        if len(self.times) == 1 or t <= self.times[0]:
            return self._at(0, x)
        if t >= self.times[-1]:
            return self._at(len(self.times) - 1, x)
        k = int(np.searchsorted(self.times, t)) - 1
        a = (t - self.times[k]) / (self.times[k + 1] - self.times[k])
        lo, hi = self._at(k, x), self._at(k + 1, x)
        return tuple((1 - a) * p + a * q for p, q in zip(lo, hi))

    @property
    def static(self) -> bool:
        return len(self.times) == 1


@dataclass(frozen=True)
class TrajectoryState:
    s: float
    X: float
    V: float
    dXdv: float
    dVdv: float
    energy: float


@dataclass(frozen=True)
class Trajectory:
    states: list
    exited: bool

    @property
    def s(self) -> np.ndarray:
        return np.array([p.s for p in self.states])

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(p, name) for p in self.states])

    def energy_drift(self) -> float:
        e = self.column("energy")
        return float(np.max(np.abs(e - e[0])))


def integrate_characteristics(field, start: tuple[float, float, float], s_span: float,
                              tol: float = 1e-12, n_samples: int = 201) -> Trajectory:
    """Integrate from (t, x, v) over s in [t, t + s_span] with DOP853 at rtol = atol = tol."""
    t0, x0, v0 = map(float, start)
    if s_span == 0 or n_samples < 2:
        raise ConfigurationError("need a nonzero s_span and n_samples >= 2")

    def rhs(s, y):
        _, dphi, d2phi = field.derivatives(y[0], s)
        return [y[1], -dphi, y[3], -d2phi * y[2]]

    s_eval = np.linspace(t0, t0 + s_span, n_samples)
    sol = solve_ivp(rhs, (t0, t0 + s_span), [x0, v0, 0.0, 1.0], method="DOP853",
                    rtol=tol, atol=tol, t_eval=s_eval)
    if not sol.success:
        raise ConvergenceError(f"characteristics integration failed: {sol.message}")
    states = []
    for s, (X, V, dX, dV) in zip(sol.t, sol.y.T):
        phi = field.derivatives(X, s)[0]
        states.append(TrajectoryState(s=float(s), X=float(X), V=float(V), dXdv=float(dX),
                                      dVdv=float(dV), energy=0.5 * V * V + phi))
    return Trajectory(states=states, exited=bool(field.exited))
