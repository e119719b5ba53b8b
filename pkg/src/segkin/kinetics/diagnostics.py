"""Perturbation functionals measured against a reference equilibrium."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ConfigurationError
from ..kernel import DEFAULT_POTENTIAL, InteractionPotential, convolve
from .state import SpeciesState

log = logging.getLogger(__name__)

FIELDS = ("t", "M1", "M2", "E", "H", "Hcal", "wLinf", "L2")


@dataclass(frozen=True)
class Reference:
    """Equilibrium M = (M1, M2) with its chemical potential and pinned halos."""

    state: SpeciesState
    beta: float
    chem_pot: float
    halos: tuple | None = None
    potential: InteractionPotential = DEFAULT_POTENTIAL
    sigma: float = 1.0
    gamma: float = 2.0

    def __post_init__(self):
        if not self.sigma > 0 or not self.gamma > 1.5:
            raise ConfigurationError("weight needs Sigma > 0 and gamma > 3/2")


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    M1: float
    M2: float
    E: float
    H: float
    Hcal: float
    wLinf: float
    L2: float
    negative_nodes: int = 0

    def row(self) -> tuple:
        return tuple(getattr(self, k) for k in FIELDS)

    def as_dict(self) -> dict:
        return asdict(self)


def _xlogx(f):
    out = np.zeros_like(f)
    pos = f > 0
    out[pos] = f[pos] * np.log(f[pos])
    return out


def weight(v, sigma: float = 1.0, gamma: float = 2.0):
    return (sigma + np.asarray(v) ** 2) ** gamma


def diagnostics(state: SpeciesState, reference: Reference) -> DiagnosticsRecord:
    """Masses, energy, H-function, entropy-energy functional and norms of g = (f - M)/sqrt(M)."""
    ref = reference.state
    if ref.xgrid != state.xgrid or ref.vgrid != state.vgrid:
        raise ConfigurationError("state and reference must share grids")
    cell = state.cell
    xg, v = state.xgrid, state.vgrid.nodes
    beta = reference.beta
    d1, d2 = state.f1 - ref.f1, state.f2 - ref.f2
    M1, M2 = float(d1.sum() * cell), float(d2.sum() * cell)

    kinetic = 0.5 * float(((d1 + d2) @ (v * v)).sum()) * cell
    dv = state.vgrid.dv
    r1, r2 = ref.densities()
    dr1, dr2 = d1.sum(axis=1) * dv, d2.sum(axis=1) * dv
    pot = reference.potential
    halos = reference.halos if xg.boundary == "pinned" else (None, None)
    zero = (0.0, 0.0) if xg.boundary == "pinned" else None
    u_r1 = convolve(pot, xg, r1, halos[0])
    u_r2 = convolve(pot, xg, r2, halos[1])
    u_d2 = convolve(pot, xg, dr2, zero)
    potential = float(np.sum(dr1 * u_r2 + dr2 * u_r1 + dr1 * u_d2)) * xg.h
    E = kinetic + potential

    negative = int(np.count_nonzero(state.f1 < 0) + np.count_nonzero(state.f2 < 0))
    if negative:
        log.debug("%d negative nodes at t=%.4g (positive-part convention in H)", negative, state.t)
    H = float((_xlogx(state.f1) - _xlogx(ref.f1)).sum() + (_xlogx(state.f2) - _xlogx(ref.f2)).sum()) * cell
    const = reference.chem_pot + 1.0 + 0.5 * math.log(beta / (2.0 * math.pi))
    Hcal = H + beta * E - (M1 + M2) * const

    w = weight(v, reference.sigma, reference.gamma)
    with np.errstate(divide="ignore", invalid="ignore"):
        g1 = np.where(ref.f1 > 0, d1 / np.sqrt(ref.f1), 0.0)
        g2 = np.where(ref.f2 > 0, d2 / np.sqrt(ref.f2), 0.0)
    wLinf = float(max(np.max(np.abs(g1 * w)), np.max(np.abs(g2 * w))))
    L2 = float(math.sqrt((np.sum(g1 * g1) + np.sum(g2 * g2)) * cell))
    return DiagnosticsRecord(t=float(state.t), M1=M1, M2=M2, E=E, H=H, Hcal=Hcal,
                             wLinf=wLinf, L2=L2, negative_nodes=negative)


def equilibrium_scale(reference: Reference, norm: str = "L2") -> float:
    """The chosen norm of sqrt(M) itself (the size of the equilibrium in g units)."""
    ref = reference.state
    if norm == "L2":
        return float(math.sqrt((ref.f1.sum() + ref.f2.sum()) * ref.cell))
    w = weight(ref.vgrid.nodes, reference.sigma, reference.gamma)
    return float(max(np.max(np.sqrt(ref.f1) * w), np.max(np.sqrt(ref.f2) * w)))
