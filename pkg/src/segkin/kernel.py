"""Interaction potential, grids, convolution and the Vlasov force.

All objects here are immutable; the functions are pure and can be called
concurrently.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate, interpolate, special

from .errors import ConfigurationError, DomainError

POTENTIAL_FAMILIES = ("polynomial_bump", "mollifier", "tabulated")


def _bump_constant(power: int) -> float:
    # 1 / int_{-1}^{1} (1 - x^2)^p dx
    return math.gamma(power + 1.5) / (math.sqrt(math.pi) * math.gamma(power + 1))


@dataclass(frozen=True)
class InteractionPotential:
    """Repulsive cross-species kernel U(|x|) supported on |x| < 1.

    ``polynomial_bump`` is ``c (1 - x^2)^(degree/2)``, ``mollifier`` is
    ``c exp(-1/(1 - x^2))`` and ``tabulated`` is a clamped cubic spline
    through ``samples`` (pairs ``(r, U(r))`` on ``[0, 1]``).  The constant
    ``norm_const`` makes the integral over the real line equal to one.
    """

    family: str = "polynomial_bump"
    degree: int = 6
    samples: tuple[tuple[float, float], ...] | None = None
    range: float = 1.0
    norm_const: float = field(init=False, default=1.0)
    _spline: object = field(init=False, default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.family not in POTENTIAL_FAMILIES:
            raise ConfigurationError(f"unknown potential family {self.family!r}")
        if self.range != 1.0:
            raise ConfigurationError("the interaction range is fixed to 1")
        if self.family == "polynomial_bump":
            if self.degree < 2 or self.degree % 2:
                raise ConfigurationError("polynomial_bump degree must be an even integer >= 2")
            object.__setattr__(self, "norm_const", _bump_constant(self.degree // 2))
        elif self.family == "mollifier":
            raw, _ = integrate.quad(lambda x: math.exp(-1.0 / (1.0 - x * x)), -1.0, 1.0,
                                    epsabs=1e-14, epsrel=1e-13, limit=200)
            object.__setattr__(self, "norm_const", 1.0 / raw)
        else:
            self._init_tabulated()

    def _init_tabulated(self):
        if not self.samples or len(self.samples) < 4:
            raise ConfigurationError("tabulated potential needs at least 4 samples")
        r, u = np.asarray(self.samples, dtype=float).T
        order = np.argsort(r)
        r, u = r[order], u[order]
        if r[0] != 0.0 or abs(r[-1] - 1.0) > 1e-12:
            raise ConfigurationError("tabulated samples must span r in [0, 1]")
        if np.any(u < 0):
            raise ConfigurationError("tabulated potential must be non negative")
        u = u.copy()
        u[-1] = 0.0
        spline = interpolate.CubicSpline(r, u, bc_type=((1, 0.0), (1, 0.0)))
        object.__setattr__(self, "_spline", spline)
        total = 2.0 * float(spline.integrate(0.0, 1.0))
        if total <= 0:
            raise ConfigurationError("tabulated potential has zero mass")
        object.__setattr__(self, "norm_const", 1.0 / total)

    @property
    def name(self) -> str:
        if self.family == "polynomial_bump":
            return f"polynomial_bump(degree={self.degree})"
        if self.family == "tabulated":
            return f"tabulated({len(self.samples)} samples)"
        return self.family

    def profile(self, x):
        """U(|x|) for signed x."""
        x = np.abs(np.asarray(x, dtype=float))
        inside = x < 1.0
        out = np.zeros_like(x)
        xi = x[inside]
        if self.family == "polynomial_bump":
            out[inside] = self.norm_const * (1.0 - xi * xi) ** (self.degree // 2)
        elif self.family == "mollifier":
            out[inside] = self.norm_const * np.exp(-1.0 / (1.0 - xi * xi))
        else:
            out[inside] = self.norm_const * np.clip(self._spline(xi), 0.0, None)
        return out

    def derivative(self, x):
        """d/dx U(|x|) for signed x (an odd function)."""
        x = np.asarray(x, dtype=float)
        a = np.abs(x)
        inside = a < 1.0
        out = np.zeros_like(x)
        xi = x[inside]
        if self.family == "polynomial_bump":
            p = self.degree // 2
            out[inside] = -2.0 * p * self.norm_const * xi * (1.0 - xi * xi) ** (p - 1)
        elif self.family == "mollifier":
            s = 1.0 - xi * xi
            out[inside] = self.norm_const * np.exp(-1.0 / s) * (-2.0 * xi / s**2)
        else:
            out[inside] = self.norm_const * np.sign(xi) * self._spline(np.abs(xi), 1)
        return out

    def second_derivative(self, x):
        """d^2/dx^2 U(|x|) for signed x."""
        x = np.asarray(x, dtype=float)
        inside = np.abs(x) < 1.0
        out = np.zeros_like(x)
        xi = x[inside]
        if self.family == "polynomial_bump":
            p = self.degree // 2
            s = 1.0 - xi * xi
            term = -2.0 * p * s ** (p - 1)
            if p >= 2:
                term = term + 4.0 * p * (p - 1) * xi * xi * s ** (p - 2)
            out[inside] = self.norm_const * term
        elif self.family == "mollifier":
            s = 1.0 - xi * xi
            e = np.exp(-1.0 / s)
            g = -2.0 * xi / s**2
            dg = -2.0 / s**2 - 8.0 * xi * xi / s**3
            out[inside] = self.norm_const * e * (g * g + dg)
        else:
            out[inside] = self.norm_const * self._spline(np.abs(xi), 2)
        return out


DEFAULT_POTENTIAL = InteractionPotential()


def load_tabulated_potential(path: str | Path) -> InteractionPotential:
    """Read a two-column CSV ``r,U(r)`` (header optional) into a potential."""
    rows, seen_header = [], False
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError):
                if rows or seen_header:
                    raise ConfigurationError(f"{path}: malformed potential row {row!r}") from None
                seen_header = True
    return InteractionPotential(family="tabulated", samples=tuple(rows))


def make_potential(name: str = "polynomial_bump", degree: int = 6,
                   table: str | Path | None = None) -> InteractionPotential:
    """Potential selected by name, as used by the configuration file."""
    if name == "tabulated":
        if table is None:
            raise ConfigurationError("tabulated potential requires a CSV path")
        return load_tabulated_potential(table)
    return InteractionPotential(family=name, degree=degree)


def eval_potential(pot: InteractionPotential, r):
    """U(r) for r >= 0; exactly zero for r >= 1."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0) or np.any(np.isnan(r_arr)):
        raise DomainError("eval_potential requires r >= 0")
    out = pot.profile(r_arr)
    return float(out) if out.ndim == 0 else out


def potential_mass(pot: InteractionPotential) -> float:
    """Adaptive quadrature of int U(|x|) dx over the real line."""
    val, _ = integrate.quad(lambda x: float(pot.profile(x)), 0.0, 1.0,
                            epsabs=1e-14, epsrel=1e-13, limit=200)
    return 2.0 * val


def fourier_uhat(pot: InteractionPotential, k: float) -> float:
    """U-hat(k) = int U(|x|) exp(-ikx) dx (real, even in k, U-hat(0) = 1)."""
    k = abs(float(k))
    f = lambda x: float(pot.profile(x))  # noqa: E731
    if k == 0.0:
        val, _ = integrate.quad(f, 0.0, 1.0, epsabs=1e-14, epsrel=1e-13, limit=200)
    else:
        val, _ = integrate.quad(f, 0.0, 1.0, weight="cos", wvar=k,
                                epsabs=1e-14, epsrel=1e-13, limit=200)
    return 2.0 * val


# --------------------------------------------------------------------------- grids


@dataclass(frozen=True)
class SpatialGrid:
    """Cell-centred grid on [-L, L]; node j sits at -L + (j + 1/2) h.

    The mirror image of node j is node ``n_nodes - 1 - j``, so reversing an
    array implements x -> -x exactly.  ``pinned`` grids extend fields beyond
    the interval by constant halo values; ``periodic`` grids wrap with
    period 2L.
    """

    half_length: float
    n_nodes: int
    boundary: str = "pinned"

    def __post_init__(self):
        problems = []
        if self.n_nodes < 4:
            problems.append("n_nodes must be >= 4")
        if not self.half_length > 0:
            problems.append("half_length must be positive")
        if self.boundary not in ("pinned", "periodic"):
            problems.append(f"unknown boundary {self.boundary!r}")
        if self.boundary == "pinned" and not self.half_length > 1.0:
            problems.append("pinned grids need L > 1 so the potential support fits")
        if problems:
            raise ConfigurationError("; ".join(problems), problems)

    @classmethod
    def periodic_cell(cls, period: float, n_nodes: int) -> "SpatialGrid":
        return cls(half_length=0.5 * period, n_nodes=n_nodes, boundary="periodic")

    @property
    def h(self) -> float:
        return 2.0 * self.half_length / self.n_nodes

    @property
    def period(self) -> float:
        return 2.0 * self.half_length

    @property
    def x(self) -> np.ndarray:
        return -self.half_length + (np.arange(self.n_nodes) + 0.5) * self.h

    def refined(self, factor: int = 2) -> "SpatialGrid":
        return SpatialGrid(self.half_length, self.n_nodes * factor, self.boundary)


def maxwellian_1d(v, beta: float):
    """One-dimensional Maxwellian sqrt(beta/2pi) exp(-beta v^2/2)."""
    v = np.asarray(v, dtype=float)
    return math.sqrt(beta / (2.0 * math.pi)) * np.exp(-0.5 * beta * v * v)


@dataclass(frozen=True)
class VelocityGrid:
    """Velocity nodes with quadrature weights for the reduced 1D velocity.

    ``uniform`` grids are cell-centred on [-vmax, vmax] (midpoint weights,
    mirror-symmetric); ``gauss_hermite`` grids carry Gauss-Hermite nodes for
    the Maxwellian weight at inverse temperature ``beta``, so that
    ``sum(weights * h(nodes))`` approximates ``int h(v) dv`` with
    ``h = phi * maxwellian``.
    """

    kind: str
    n_nodes: int
    beta: float
    vmax: float | None = None
    nodes: np.ndarray = field(init=False, repr=False, compare=False)
    weights: np.ndarray = field(init=False, repr=False, compare=False)
    maxwell_weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n_nodes < 2:
            raise ConfigurationError("velocity grid needs at least 2 nodes")
        if not self.beta > 0:
            raise ConfigurationError("beta must be positive")
        if self.kind == "uniform":
            vmax = self.vmax if self.vmax is not None else default_vmax(self.beta)
            if not vmax > 0:
                raise ConfigurationError("vmax must be positive")
            object.__setattr__(self, "vmax", float(vmax))
            dv = 2.0 * vmax / self.n_nodes
            nodes = -vmax + (np.arange(self.n_nodes) + 0.5) * dv
            weights = np.full(self.n_nodes, dv)
            mweights = weights * maxwellian_1d(nodes, self.beta)
        elif self.kind == "gauss_hermite":
            xs, ws = special.roots_hermitenorm(self.n_nodes)
            nodes = xs / math.sqrt(self.beta)
            mweights = ws / math.sqrt(2.0 * math.pi)
            with np.errstate(over="ignore"):
                weights = mweights / maxwellian_1d(nodes, self.beta)
            object.__setattr__(self, "vmax", float(np.max(np.abs(nodes))))
        else:
            raise ConfigurationError(f"unknown velocity grid kind {self.kind!r}")
        for name, arr in (("nodes", nodes), ("weights", weights), ("maxwell_weights", mweights)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def uniform(cls, beta: float, n_nodes: int, vmax: float | None = None) -> "VelocityGrid":
        return cls("uniform", n_nodes, beta, vmax)

    @classmethod
    def gauss_hermite(cls, beta: float, n_nodes: int) -> "VelocityGrid":
        return cls("gauss_hermite", n_nodes, beta)

    @property
    def dv(self) -> float:
        if self.kind != "uniform":
            raise ConfigurationError("dv is only defined for uniform grids")
        return 2.0 * self.vmax / self.n_nodes

    def maxwellian(self) -> np.ndarray:
        return maxwellian_1d(self.nodes, self.beta)

    def tail_mass(self) -> float:
        """Maxwellian mass outside the uniform cutoff."""
        if self.kind != "uniform":
            return 0.0
        return float(special.erfc(self.vmax * math.sqrt(0.5 * self.beta)))


def default_vmax(beta: float) -> float:
    return 7.0 / math.sqrt(beta)


# --------------------------------------------------------------------- convolution


def _support_width(h: float) -> int:
    if not h < 1.0:
        raise ConfigurationError(f"grid spacing h={h:g} does not resolve the unit potential range")
    return int(math.ceil(1.0 / h))


def kernel_stencil(pot: InteractionPotential, h: float, order: int = 0) -> np.ndarray:
    """Quadrature weights K(s h) h, s = -W..W, for U (order 0), U' or U''.

    The order-0 weights are rescaled to sum to exactly 1 so that constants
    are reproduced to roundoff (the raw trapezoid sum is 1 + O(h^4)).
    """
    width = _support_width(h)
    s = np.arange(-width, width + 1) * h
    fn = (pot.profile, pot.derivative, pot.second_derivative)[order]
    weights = fn(s) * h
    if order == 0:
        weights = weights / math.fsum(weights)
    return weights


def extend_field(grid: SpatialGrid, values, width: int, halo=None) -> np.ndarray:
    """Pad ``values`` by ``width`` nodes per side (halo constants or wrap)."""
    values = np.asarray(values, dtype=float)
    if grid.boundary == "periodic":
        return np.pad(values, width, mode="wrap")
    left, right = (values[0], values[-1]) if halo is None else halo
    return np.concatenate([np.full(width, left), values, np.full(width, right)])


def _apply_stencil(grid: SpatialGrid, stencil: np.ndarray, values, halo=None) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != grid.n_nodes:
        raise ConfigurationError("field length does not match the grid")
    if not np.all(np.isfinite(values)):
        raise DomainError("field must be finite everywhere")
    width = (len(stencil) - 1) // 2
    padded = extend_field(grid, values, width, halo)
    return np.convolve(padded, stencil, mode="valid")


def convolve(pot: InteractionPotential, grid: SpatialGrid, values, halo=None) -> np.ndarray:
    """(U * values)(x_i) by the (normalized) trapezoid rule over the support window.

    For pinned grids ``halo=(left, right)`` supplies the field beyond
    [-L, L]; by default the edge values are extended.
    """
    return _apply_stencil(grid, kernel_stencil(pot, grid.h, 0), values, halo)


def vlasov_force(pot: InteractionPotential, grid: SpatialGrid, density, halo=None,
                 method: str = "analytic") -> np.ndarray:
    """F = -d/dx (U * density).

    ``analytic`` convolves with U' directly; ``difference`` takes centred
    differences of the convolved field (kept as a cross-check); ``spectral``
    (periodic grids only) differentiates the convolved field in Fourier
    space, which is the derivative compatible with spectral transport.
    """
    if method == "analytic":
        return -_apply_stencil(grid, kernel_stencil(pot, grid.h, 1), density, halo)
    if method == "spectral":
        if grid.boundary != "periodic":
            raise ConfigurationError("spectral force needs a periodic grid")
        smooth = convolve(pot, grid, density)
        kappa = 2.0 * math.pi * np.fft.rfftfreq(grid.n_nodes, grid.h)
        if grid.n_nodes % 2 == 0:
            kappa[-1] = 0.0  # odd derivative of the Nyquist mode is not representable
        return -np.fft.irfft(1j * kappa * np.fft.rfft(smooth), n=grid.n_nodes)
    if method != "difference":
        raise ConfigurationError(f"unknown force method {method!r}")
    density = np.asarray(density, dtype=float)
    stencil = kernel_stencil(pot, grid.h, 0)
    width = (len(stencil) - 1) // 2
    padded = extend_field(grid, density, width + 1, halo)
    smooth = np.convolve(padded, stencil, mode="valid")  # n_nodes + 2 values
    return -(smooth[2:] - smooth[:-2]) / (2.0 * grid.h)
