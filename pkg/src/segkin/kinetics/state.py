"""Phase-space state, run configuration and the Strang-split time step."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..dispersion import CollisionModel
from ..errors import ConfigurationError, ConvergenceError, DomainError
from ..kernel import DEFAULT_POTENTIAL, InteractionPotential, SpatialGrid, VelocityGrid, vlasov_force

log = logging.getLogger(__name__)

TRANSPORTS = ("spectral", "muscl")


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SpeciesState:
    """(f1, f2) sampled on xgrid x vgrid (arrays of shape (Nx, Nv)) at time t."""

    xgrid: SpatialGrid
    vgrid: VelocityGrid
    f1: np.ndarray = field(repr=False)
    f2: np.ndarray = field(repr=False)
    t: float = 0.0

    def __post_init__(self):
        shape = (self.xgrid.n_nodes, self.vgrid.n_nodes)
        if self.vgrid.kind != "uniform":
            raise ConfigurationError("the simulator needs a uniform velocity grid")
        for name in ("f1", "f2"):
            arr = np.asarray(getattr(self, name))
            if arr.shape != shape:
                raise ConfigurationError(f"{name} has shape {arr.shape}, expected {shape}")
            object.__setattr__(self, name, _frozen(arr))

    @property
    def cell(self) -> float:
        return self.xgrid.h * self.vgrid.dv

    def densities(self) -> tuple[np.ndarray, np.ndarray]:
        dv = self.vgrid.dv
        return self.f1.sum(axis=1) * dv, self.f2.sum(axis=1) * dv

    def masses(self) -> tuple[float, float]:
        return float(self.f1.sum() * self.cell), float(self.f2.sum() * self.cell)

    def momentum(self) -> float:
        return float(((self.f1 + self.f2) @ self.vgrid.nodes).sum() * self.cell)

    def kinetic_energy(self) -> float:
        return float(0.5 * ((self.f1 + self.f2) @ self.vgrid.nodes**2).sum() * self.cell)

    def symmetry_defect(self) -> float:
        """max |f1(x, v) - f2(-x, -v)|."""
        return float(np.max(np.abs(self.f1 - self.f2[::-1, ::-1])))

    def with_arrays(self, f1, f2, t) -> "SpeciesState":
        return SpeciesState(self.xgrid, self.vgrid, f1, f2, t)


def maxwellian_state(xgrid: SpatialGrid, vgrid: VelocityGrid, densities, beta: float,
                     t: float = 0.0) -> SpeciesState:
    """f_i(x, v) = rho_i(x) mu(v) with the 1D Maxwellian at inverse temperature beta."""
    if abs(vgrid.beta - beta) > 1e-14:
        raise ConfigurationError("velocity grid was built for a different beta")
    rho1, rho2 = (np.broadcast_to(np.asarray(r, dtype=float), (xgrid.n_nodes,)) for r in densities)
    if np.any(rho1 <= 0) or np.any(rho2 <= 0):
        raise DomainError("densities must be positive")
    mu = vgrid.maxwellian()
    return SpeciesState(xgrid, vgrid, np.outer(rho1, mu), np.outer(rho2, mu), t)


@dataclass(frozen=True)
class SimConfig:
    """Time stepping parameters.

    ``pinned_halos`` gives ((left, right) for rho1, (left, right) for rho2)
    and is required on pinned grids.  ``cfl_limit`` bounds
    dt * max(vmax / h, max|F| / dv).
    """

    dt: float
    beta: float
    t_end: float = 1.0
    collision: CollisionModel = field(default_factory=lambda: CollisionModel("bgk", 1.0, 1.0))
    potential: InteractionPotential = DEFAULT_POTENTIAL
    transport: str = "spectral"
    cfl_limit: float | None = None
    pinned_halos: tuple | None = None
    base_width: float = 0.5
    output_every: int = 1

    def __post_init__(self):
        bad = []
        if not self.dt > 0:
            bad.append("dt must be positive")
        if not self.beta > 0:
            bad.append("beta must be positive")
        if self.t_end < 0:
            bad.append("t_end must be non negative")
        if self.transport not in TRANSPORTS:
            bad.append(f"unknown transport {self.transport!r}")
        if self.collision.kind == "bgk_hard_sphere_frequency":
            bad.append("the simulator supports constant collision frequency only")
        if self.collision.kind != "none" and self.collision.alpha * self.collision.nu0 < 0:
            bad.append("negative relaxation time")
        if self.output_every < 1:
            bad.append("output_every must be >= 1")
        if bad:
            raise ConfigurationError("; ".join(bad), bad)
        if self.cfl_limit is None:
            object.__setattr__(self, "cfl_limit", 4.0 if self.transport == "spectral" else 1.0)

    @property
    def relaxation_rate(self) -> float:
        if self.collision.kind == "none":
            return 0.0
        return self.collision.alpha * self.collision.nu0

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def with_dt(self, dt: float) -> "SimConfig":
        return replace(self, dt=dt)


# ------------------------------------------------------------------- transport


def _spectral_shift(u: np.ndarray, shift: np.ndarray, spacing: float, axis: int) -> np.ndarray:
    """u(y - shift) on a periodic grid by Fourier interpolation along ``axis``.

    ``shift`` broadcasts against the other axis (one value per row/column).
    """
    n = u.shape[axis]
    kappa = 2.0 * math.pi * np.fft.rfftfreq(n, spacing)
    if axis == 0:
        phase = np.exp(-1j * np.outer(kappa, shift))
    else:
        phase = np.exp(-1j * np.outer(shift, kappa))
    return np.fft.irfft(np.fft.rfft(u, axis=axis) * phase, n=n, axis=axis)


def _van_leer(r):
    return (r + np.abs(r)) / (1.0 + np.abs(r))


def _muscl_axis0(u: np.ndarray, nu: np.ndarray, ghost_left, ghost_right) -> np.ndarray:
    """Flux-limited Lax-Wendroff update along axis 0, Courant number ``nu`` per column.

    Ghost rows (2 each side) close the stencil; TVD and positivity preserving
    for |nu| <= 1.
    """
    p = np.concatenate([ghost_left, u, ghost_right], axis=0)  # n + 4 rows
    d = np.diff(p, axis=0)  # d[j] = p[j+1] - p[j], n + 3 rows
    nu = np.broadcast_to(nu, (u.shape[1],))
    tiny = 1e-300
    # faces between p[j] and p[j+1] for j = 1 .. n+1 (n + 1 faces)
    dc = d[1:-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        r_pos = np.where(np.abs(dc) > tiny, d[:-2] / np.where(dc == 0, 1.0, dc), 0.0)
        r_neg = np.where(np.abs(dc) > tiny, d[2:] / np.where(dc == 0, 1.0, dc), 0.0)
    pos = nu >= 0
    flux_pos = nu * (p[1:-2] + 0.5 * (1.0 - nu) * _van_leer(r_pos) * dc)
    flux_neg = nu * (p[2:-1] - 0.5 * (1.0 + nu) * _van_leer(r_neg) * dc)
    flux = np.where(pos, flux_pos, flux_neg)
    return u - (flux[1:] - flux[:-1])


class Stepper:
    """Strang splitting: half x-transport, half kick, collision, half kick, half x-transport."""

    def __init__(self, xgrid: SpatialGrid, vgrid: VelocityGrid, config: SimConfig):
        if abs(vgrid.beta - config.beta) > 1e-14:
            raise ConfigurationError("velocity grid was built for a different beta")
        self.xgrid, self.vgrid, self.config = xgrid, vgrid, config
        self.v = vgrid.nodes
        self.mu = vgrid.maxwellian()
        self.pinned = xgrid.boundary == "pinned"
        if self.pinned:
            if config.pinned_halos is None:
                raise ConfigurationError("pinned grids need pinned_halos in the config")
            self.halos = tuple(tuple(float(a) for a in h) for h in config.pinned_halos)
        else:
            self.halos = (None, None)
        self.force_max = 0.0

    # -- pieces ------------------------------------------------------------

    def _base(self, x, halo):
        left, right = halo
        return left + (right - left) * 0.5 * (1.0 + np.tanh(x / self.config.base_width))

    def transport_x(self, f: np.ndarray, tau: float, species: int) -> np.ndarray:
        grid = self.xgrid
        shift = self.v * tau
        if self.config.transport == "spectral":
            if not self.pinned:
                return _spectral_shift(f, shift, grid.h, axis=0)
            halo = self.halos[species]
            x = grid.x
            base_old = np.outer(self._base(x, halo), self.mu)
            base_new = self._base(x[:, None] - shift[None, :], halo) * self.mu[None, :]
            return base_new + _spectral_shift(f - base_old, shift, grid.h, axis=0)
        nu = shift / grid.h
        if self.pinned:
            left, right = self.halos[species]
            gl = np.tile(left * self.mu, (2, 1))
            gr = np.tile(right * self.mu, (2, 1))
        else:
            gl, gr = f[-2:], f[:2]
        return _muscl_axis0(f, nu, gl, gr)

    def forces(self, f1, f2):
        dv = self.vgrid.dv
        rho1, rho2 = f1.sum(axis=1) * dv, f2.sum(axis=1) * dv
        pot = self.config.potential
        method = "spectral" if (self.config.transport == "spectral" and not self.pinned) else "analytic"
        F1 = vlasov_force(pot, self.xgrid, rho2, halo=self.halos[1], method=method)
        F2 = vlasov_force(pot, self.xgrid, rho1, halo=self.halos[0], method=method)
        return F1, F2

    def kick(self, f: np.ndarray, force: np.ndarray, tau: float) -> np.ndarray:
        shift = force * tau
        if self.config.transport == "spectral":
            return _spectral_shift(f, shift, self.vgrid.dv, axis=1)
        nu = shift / self.vgrid.dv
        zeros = np.zeros((2, f.shape[0]))
        return _muscl_axis0(f.T, nu, zeros, zeros).T

    def collide(self, f1, f2, tau):
        rate = self.config.relaxation_rate
        if rate == 0.0:
            return f1, f2
        M1, M2 = local_maxwellians(f1, f2, self.v, self.vgrid.dv)
        decay = math.exp(-rate * tau)
        return M1 + (f1 - M1) * decay, M2 + (f2 - M2) * decay

    def cfl(self, f1, f2) -> float:
        F1, F2 = self.forces(f1, f2)
        fmax = float(max(np.max(np.abs(F1)), np.max(np.abs(F2))))
        self.force_max = fmax
        return self.config.dt * max(self.vgrid.vmax / self.xgrid.h, fmax / self.vgrid.dv)

    # -- full step -----------------------------------------------------------

    def _kick_both(self, f1, f2, tau):
        F1, F2 = self.forces(f1, f2)
        fmax = float(max(np.max(np.abs(F1)), np.max(np.abs(F2))))
        self.force_max = max(self.force_max, fmax)
        number = self.config.dt * max(self.vgrid.vmax / self.xgrid.h, fmax / self.vgrid.dv)
        if number > self.config.cfl_limit * (1.0 + 1e-12):
            raise ConfigurationError(f"CFL number {number:.3f} exceeds limit {self.config.cfl_limit}")
        return self.kick(f1, F1, tau), self.kick(f2, F2, tau)

    def step(self, state: SpeciesState) -> SpeciesState:
        # palindromic composition X/2 V/2 C V/2 X/2 (second order)
        dt = self.config.dt
        f1 = self.transport_x(state.f1, 0.5 * dt, 0)
        f2 = self.transport_x(state.f2, 0.5 * dt, 1)
        f1, f2 = self._kick_both(f1, f2, 0.5 * dt)
        f1, f2 = self.collide(f1, f2, dt)
        f1, f2 = self._kick_both(f1, f2, 0.5 * dt)
        f1 = self.transport_x(f1, 0.5 * dt, 0)
        f2 = self.transport_x(f2, 0.5 * dt, 1)
        return state.with_arrays(f1, f2, state.t + dt)


def step(state: SpeciesState, config: SimConfig) -> SpeciesState:
    """One Strang step (convenience wrapper; use Stepper for loops)."""
    return Stepper(state.xgrid, state.vgrid, config).step(state)


# ------------------------------------------------------------------- collisions


def local_maxwellians(f1: np.ndarray, f2: np.ndarray, v: np.ndarray, dv: float,
                      tol: float = 1e-14, max_iter: int = 30):
    """Discrete Maxwellians M_i = exp(a_i + b v + c v^2) per x row.

    The exponents are Newton-corrected so that, on the grid, M_i carries
    the mass of f_i and M1 + M2 carries the momentum and kinetic energy of
    f1 + f2 exactly.
    """
    n1 = f1.sum(axis=1) * dv
    n2 = f2.sum(axis=1) * dv
    if np.any(n1 <= 0) or np.any(n2 <= 0):
        raise DomainError("local density is not positive; cannot build the collision target")
    ftot = f1 + f2
    n = n1 + n2
    J = ftot @ v * dv
    K = ftot @ (v * v) * dv
    target = np.stack([n1, n2, J, K], axis=1)
    u = J / n
    T = np.maximum(K / n - u * u, 1e-3)
    c = -0.5 / T
    b = u / T
    a1 = np.log(n1) - 0.5 * np.log(2 * math.pi * T) - 0.5 * u * u / T
    a2 = np.log(n2) - 0.5 * np.log(2 * math.pi * T) - 0.5 * u * u / T
    powers = np.stack([v**p for p in range(5)])  # (5, Nv)
    for _ in range(max_iter):
        e = np.exp(b[:, None] * v + c[:, None] * v * v)
        m = (e @ powers.T) * dv  # (Nx, 5) raw moments of exp(b v + c v^2)
        s1, s2 = np.exp(a1), np.exp(a2)
        st = s1 + s2
        resid = np.stack([s1 * m[:, 0], s2 * m[:, 0], st * m[:, 1], st * m[:, 2]], axis=1) - target
        scale = np.abs(target) + n[:, None]
        if np.max(np.abs(resid) / scale) < tol:
            break
        jac = np.empty((len(n), 4, 4))
        jac[:, 0] = np.stack([s1 * m[:, 0], 0 * s1, s1 * m[:, 1], s1 * m[:, 2]], axis=1)
        jac[:, 1] = np.stack([0 * s2, s2 * m[:, 0], s2 * m[:, 1], s2 * m[:, 2]], axis=1)
        jac[:, 2] = np.stack([s1 * m[:, 1], s2 * m[:, 1], st * m[:, 2], st * m[:, 3]], axis=1)
        jac[:, 3] = np.stack([s1 * m[:, 2], s2 * m[:, 2], st * m[:, 3], st * m[:, 4]], axis=1)
        delta = np.linalg.solve(jac, -resid[:, :, None])[:, :, 0]
        a1, a2, b, c = a1 + delta[:, 0], a2 + delta[:, 1], b + delta[:, 2], c + delta[:, 3]
    else:
        raise ConvergenceError("collision target moment matching did not converge",
                               residual=float(np.max(np.abs(resid) / scale)))
    e = np.exp(b[:, None] * v + c[:, None] * v * v)
    return np.exp(a1)[:, None] * e, np.exp(a2)[:, None] * e
