"""Front minimizer of the excess free energy and its Hessian operator A.

The front is found by a damped Picard iteration on the Euler-Lagrange
system ``ln rho_i + beta U * rho_{i+1} = C`` with the translation mode
removed by imposing ``rho_1(x) = rho_2(-x)`` after every sweep.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.sparse import linalg as sparse_linalg

from .errors import ConfigurationError, ConvergenceError
from .kernel import DEFAULT_POTENTIAL, InteractionPotential, SpatialGrid, convolve, kernel_stencil
from .phasediag import PhasePoint, local_free_energy, pure_phases

log = logging.getLogger(__name__)


def chemical_potential(beta: float, phase: PhasePoint) -> float:
    """C = ln rho+ + beta rho- (equal to ln rho- + beta rho+ at the pure phases)."""
    return math.log(phase.rho_plus) + beta * phase.rho_minus


@dataclass(frozen=True)
class FrontProfile:
    grid: SpatialGrid
    rho1: np.ndarray
    rho2: np.ndarray
    beta: float
    chem_pot: float
    residual: float
    iterations: int
    tol: float
    phase: PhasePoint
    potential: InteractionPotential = DEFAULT_POTENTIAL
    halo1: tuple[float, float] | None = None
    halo2: tuple[float, float] | None = None
    residual_history: tuple[float, ...] = field(default=(), repr=False)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    @property
    def converged(self) -> bool:
        return self.residual <= self.tol

    def derivative(self) -> tuple[np.ndarray, np.ndarray]:
        """Centred differences of (rho1, rho2); halo values close the stencil."""
        return (_centred_difference(self.rho1, self.grid.h, self.halo1),
                _centred_difference(self.rho2, self.grid.h, self.halo2))

    def midpoint(self) -> float:
        """rho1(0) by symmetric cubic interpolation of the four central nodes."""
        n = self.grid.n_nodes
        if n % 2:
            return float(self.rho1[n // 2])
        c = n // 2
        a, b, d, e = self.rho1[c - 2], self.rho1[c - 1], self.rho1[c], self.rho1[c + 1]
        return float((-a + 9.0 * b + 9.0 * d - e) / 16.0)


def _centred_difference(values: np.ndarray, h: float, halo) -> np.ndarray:
    left, right = (values[0], values[-1]) if halo is None else halo
    padded = np.concatenate([[left], values, [right]])
    return (padded[2:] - padded[:-2]) / (2.0 * h)


def _euler_lagrange_defect(pot, grid, beta, C, rho1, rho2, halo1, halo2):
    conv1 = convolve(pot, grid, rho1, halo1)
    conv2 = convolve(pot, grid, rho2, halo2)
    d1 = np.log(rho1) + beta * conv2 - C
    d2 = np.log(rho2) + beta * conv1 - C
    return conv1, conv2, float(max(np.max(np.abs(d1)), np.max(np.abs(d2))))


def tanh_guess(grid: SpatialGrid, phase: PhasePoint, width: float = 0.5,
               shift: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """rho1 = rho/2 (1 + m tanh((x - shift)/width)), rho2 its mirror image."""
    half = 0.5 * phase.rho_total
    rho1 = half * (1.0 + phase.m * np.tanh((grid.x - shift) / width))
    return rho1, rho1[::-1].copy()


def solve_front(beta: float, grid: SpatialGrid, tol: float = 1e-10, max_iter: int = 50_000,
                damping: float = 0.5, rho_total: float = 2.0,
                pot: InteractionPotential = DEFAULT_POTENTIAL, initial=None,
                halos=None, symmetrize: bool = True) -> FrontProfile:
    """Damped Picard iteration for the symmetric front.

    ``initial`` is an optional pair of density arrays (default: tanh guess);
    ``halos`` overrides the pinned values ``((rho-, rho+), (rho+, rho-))``.
    Raises ConvergenceError carrying the last residual when ``max_iter`` is
    exhausted.
    """
    phase = pure_phases(beta, rho_total)
    if not phase.supercritical:
        raise ConfigurationError(f"subcritical beta for front: beta*rho={beta * rho_total:g} <= 2")
    if grid.boundary != "pinned":
        raise ConfigurationError("the front is computed on a pinned grid")
    if not 0.0 < damping <= 1.0:
        raise ConfigurationError("damping must lie in (0, 1]")
    C = chemical_potential(beta, phase)
    halo1, halo2 = halos if halos is not None else (
        (phase.rho_minus, phase.rho_plus), (phase.rho_plus, phase.rho_minus))
    if initial is None:
        rho1, rho2 = tanh_guess(grid, phase)
    else:
        rho1, rho2 = (np.array(r, dtype=float) for r in initial)
        if rho1.shape != (grid.n_nodes,) or rho2.shape != (grid.n_nodes,):
            raise ConfigurationError("initial guess does not match the grid")
        if np.any(rho1 <= 0) or np.any(rho2 <= 0):
            raise ConfigurationError("initial guess must be positive")
    conv1 = convolve(pot, grid, rho1, halo1)
    conv2 = convolve(pot, grid, rho2, halo2)
    history = []
    residual = math.inf
    for it in range(1, max_iter + 1):
        rho1 = (1.0 - damping) * rho1 + damping * np.exp(C - beta * conv2)
        rho2 = (1.0 - damping) * rho2 + damping * np.exp(C - beta * conv1)
        if symmetrize:
            rho1 = 0.5 * (rho1 + rho2[::-1])
            rho2 = rho1[::-1].copy()
        conv1, conv2, residual = _euler_lagrange_defect(pot, grid, beta, C, rho1, rho2, halo1, halo2)
        history.append(residual)
        if residual <= tol:
            log.debug("front converged in %d sweeps, residual %.3e", it, residual)
            return FrontProfile(grid=grid, rho1=rho1, rho2=rho2, beta=float(beta), chem_pot=C,
                                residual=residual, iterations=it, tol=tol, phase=phase,
                                potential=pot, halo1=tuple(halo1), halo2=tuple(halo2),
                                residual_history=tuple(history))
        if not np.isfinite(residual):
            break
    raise ConvergenceError(f"front solver stopped after {len(history)} sweeps, "
                           f"residual {residual:.3e} > tol {tol:.1e}", residual=residual,
                           log=history[-20:])


# ------------------------------------------------------------------ excess energy


@dataclass(frozen=True)
class ExcessEnergy:
    value: float
    value_reduced: float
    tail_sensitivity: float
    truncation_warning: bool
    tail_deviation: float


def _interface_term(pot, h, beta, rho1, rho2) -> float:
    # (beta/2) sum_{i,j} U(x_i - x_j) h^2 [r1_i - r1_j][r2_j - r2_i]
    stencil = kernel_stencil(pot, h, 0)
    width = (len(stencil) - 1) // 2
    total = 0.0
    for s in range(1, min(width, len(rho1) - 1) + 1):
        w = stencil[width + s] * h
        if w == 0.0:
            continue
        total += 2.0 * w * np.sum((rho1[:-s] - rho1[s:]) * (rho2[s:] - rho2[:-s]))
    return 0.5 * beta * total


def excess_energy_of(grid: SpatialGrid, rho1, rho2, beta: float, phase: PhasePoint,
                     pot: InteractionPotential = DEFAULT_POTENTIAL,
                     fraction: float = 1.0, grand: bool = True) -> float:
    """F_(-l,l)(rho) - 2 l phi(rho+, rho-) over the nodes with |x| < fraction L.

    With ``grand`` (default) the local density is shifted by the Lagrange
    multiplier of the mass constraint, phi -> phi - (C + 1)(r1 + r2), which
    is the functional whose critical points solve ln r_i + beta U * r_j = C.
    The unshifted form is unbounded below along mass-removing deformations.
    """
    rho1 = np.asarray(rho1, dtype=float)
    rho2 = np.asarray(rho2, dtype=float)
    if fraction < 1.0:
        keep = np.abs(grid.x) < fraction * grid.half_length
        rho1, rho2 = rho1[keep], rho2[keep]
    h = grid.h
    shift = chemical_potential(beta, phase) + 1.0 if grand else 0.0
    bulk = local_free_energy(beta, phase.rho_plus, phase.rho_minus) - shift * phase.rho_total
    local = local_free_energy(beta, rho1, rho2) - shift * (rho1 + rho2) - bulk
    return float(np.sum(local)) * h + _interface_term(pot, h, beta, rho1, rho2)


def excess_free_energy(profile: FrontProfile, tail_tol: float = 1e-6,
                       grand: bool = True) -> ExcessEnergy:
    """Excess free energy of a profile plus its change when l shrinks by 10%."""
    args = (profile.grid, profile.rho1, profile.rho2, profile.beta, profile.phase,
            profile.potential)
    full = excess_energy_of(*args, grand=grand)
    reduced = excess_energy_of(*args, fraction=0.9, grand=grand)
    ph = profile.phase
    deviation = float(max(abs(profile.rho1[0] - ph.rho_minus), abs(profile.rho1[-1] - ph.rho_plus),
                          abs(profile.rho2[0] - ph.rho_plus), abs(profile.rho2[-1] - ph.rho_minus)))
    warn = deviation > tail_tol
    if warn:
        log.warning("profile tails deviate from the pure phases by %.2e; "
                    "excess free energy is truncation dominated", deviation)
    return ExcessEnergy(value=full, value_reduced=reduced, tail_sensitivity=abs(full - reduced),
                        truncation_warning=warn, tail_deviation=deviation)


def sharp_step(grid: SpatialGrid, phase: PhasePoint) -> tuple[np.ndarray, np.ndarray]:
    """Step profile jumping at x = 0 between the pure phases."""
    rho1 = np.where(grid.x > 0, phase.rho_plus, phase.rho_minus)
    return rho1, rho1[::-1].copy()


# ---------------------------------------------------------------------- operator A


@dataclass(frozen=True)
class AOperator:
    """Discrete (Au)_i = u_i / rho_i + beta U * u_{i+1} on a pinned grid.

    ``matrix`` is the symmetric 2N x 2N assembly acting on the stacked
    vector (u1, u2); fields outside the grid are zero.
    """

    grid: SpatialGrid
    rho1: np.ndarray
    rho2: np.ndarray
    beta: float
    matrix: np.ndarray = field(repr=False)
    null_direction: np.ndarray | None = field(default=None, repr=False)

    def apply(self, u) -> np.ndarray:
        return self.matrix @ np.asarray(u, dtype=float)

    def quadratic_form(self, u) -> float:
        u = np.asarray(u, dtype=float)
        return float(self.grid.h * u @ (self.matrix @ u))

    def inner(self, u, w) -> float:
        return float(self.grid.h * np.dot(u, w))


def _conv_matrix(pot, grid):
    stencil = kernel_stencil(pot, grid.h, 0)
    width = (len(stencil) - 1) // 2
    col = np.zeros(grid.n_nodes)
    m = min(width, grid.n_nodes - 1)
    col[: m + 1] = stencil[width: width + m + 1]
    return linalg.toeplitz(col)


def build_A_from_densities(grid: SpatialGrid, rho1, rho2, beta: float,
                           pot: InteractionPotential = DEFAULT_POTENTIAL,
                           null_direction=None) -> AOperator:
    rho1 = np.broadcast_to(np.asarray(rho1, dtype=float), (grid.n_nodes,)).copy()
    rho2 = np.broadcast_to(np.asarray(rho2, dtype=float), (grid.n_nodes,)).copy()
    K = _conv_matrix(pot, grid)
    n = grid.n_nodes
    A = np.zeros((2 * n, 2 * n))
    A[np.arange(n), np.arange(n)] = 1.0 / rho1
    A[np.arange(n, 2 * n), np.arange(n, 2 * n)] = 1.0 / rho2
    A[:n, n:] = beta * K
    A[n:, :n] = beta * K
    return AOperator(grid=grid, rho1=rho1, rho2=rho2, beta=float(beta), matrix=A,
                     null_direction=null_direction)


def build_A(profile: FrontProfile) -> AOperator:
    if not profile.converged:
        raise ConvergenceError("operator A needs a converged profile", residual=profile.residual)
    d1, d2 = profile.derivative()
    return build_A_from_densities(profile.grid, profile.rho1, profile.rho2, profile.beta,
                                  profile.potential, null_direction=np.concatenate([d1, d2]))


@dataclass(frozen=True)
class GapResult:
    gap: float
    null_residual: float | None
    eigenvalues: np.ndarray = field(repr=False)


def spectral_gap(A: AOperator, n_eigs: int = 1, project: bool | None = None) -> GapResult:
    """Smallest eigenvalue(s) of A on the orthogonal complement of rho-bar'.

    The projected operator (I-P) A (I-P) + s P, with s above the spectrum,
    is handed to a Lanczos solver.  With ``project=False`` (the default when
    A has no null direction) the full spectrum is used.
    """
    M = A.matrix
    size = M.shape[0]
    if project is None:
        project = A.null_direction is not None
    null_residual = None
    if project:
        d = np.asarray(A.null_direction, dtype=float)
        norm = np.linalg.norm(d)
        null_residual = float(np.linalg.norm(M @ d) / norm)
        d = d / norm
        shift = 2.0 * float(np.max(np.abs(M).sum(axis=1)))

        def matvec(u):
            u = np.ravel(u)
            p = u - d * (d @ u)
            Ap = M @ p
            return Ap - d * (d @ Ap) + shift * d * (d @ u)

        op = sparse_linalg.LinearOperator((size, size), matvec=matvec, dtype=float)
    else:
        op = M
    k = min(n_eigs, size - 2)
    v0 = np.ones(size) / math.sqrt(size)
    vals = sparse_linalg.eigsh(op, k=k, which="SA", tol=1e-14, v0=v0,
                               ncv=min(size, max(4 * k + 20, 60)), maxiter=50 * size,
                               return_eigenvectors=False)
    vals = np.sort(vals)
    return GapResult(gap=float(vals[0]), null_residual=null_residual, eigenvalues=vals)


# --------------------------------------------------------------------- tail decay


@dataclass(frozen=True)
class TailFit:
    rate: float
    fit_residual: float
    window: tuple[float, float]


def tail_decay_rate(profile: FrontProfile, start: float = 1.5, width: float = 3.0,
                    floor: float = 1e-9) -> TailFit:
    """Least-squares slope of -ln|rho1 - rho+| on the window [start, start + width].

    The window is shrunk to nodes where the deviation stays above ``floor``
    (below it the solver tolerance pollutes the logarithm).
    """
    x = profile.x
    dev = np.abs(profile.rho1 - profile.phase.rho_plus)
    sel = (x >= start) & (x <= start + width) & (dev > floor)
    if np.count_nonzero(sel) < 3:
        raise ConfigurationError("tail window is below the resolvable floor; shrink or move it")
    xs, ys = x[sel], np.log(dev[sel])
    coeff, res, *_ = np.polyfit(xs, ys, 1, full=True)
    rms = float(math.sqrt(res[0] / len(xs))) if len(res) else 0.0
    return TailFit(rate=float(-coeff[0]), fit_residual=rms, window=(float(xs[0]), float(xs[-1])))
