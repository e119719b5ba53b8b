"""Local free energy, pure phases and the homogeneous phase diagram."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import ConfigurationError, DomainError

CRITICAL_TOL = 1e-12
_M_MIN = 1e-16


@dataclass(frozen=True)
class PhasePoint:
    """Location (beta, rho) on the bifurcation diagram and its pure phases."""

    beta: float
    rho_total: float
    m: float
    rho_plus: float
    rho_minus: float
    regime: str

    @property
    def supercritical(self) -> bool:
        return self.regime == "supercritical"

    def as_row(self) -> tuple:
        return (self.beta, self.m, self.rho_plus, self.rho_minus, self.regime)


def local_free_energy(beta: float, r1, r2):
    """phi(r1, r2) = r1 ln r1 + r2 ln r2 + beta r1 r2."""
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    if np.any(r1 <= 0) or np.any(r2 <= 0):
        raise DomainError("local free energy needs positive densities")
    out = r1 * np.log(r1) + r2 * np.log(r2) + beta * r1 * r2
    return float(out) if out.ndim == 0 else out


def _regime(beta: float, rho_total: float) -> str:
    excess = beta * rho_total - 2.0
    if abs(excess) <= CRITICAL_TOL:
        return "critical"
    return "supercritical" if excess > 0 else "subcritical"


def order_parameter(beta: float, rho_total: float) -> float:
    """Positive root of m = tanh(beta (rho/2) m), or 0 when beta rho <= 2.

    The tanh form keeps a sign change on [tiny, 1] even when the root rounds
    to 1 (beta rho/2 >~ 19), where atanh(m) has no representable bracket.
    """
    if not (beta > 0 and rho_total > 0):
        raise DomainError("beta and rho_total must be positive")
    if _regime(beta, rho_total) != "supercritical":
        return 0.0
    slope = 0.5 * beta * rho_total
    return optimize.bisect(lambda m: m - math.tanh(slope * m), _M_MIN, 1.0,
                           xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=400)


def pure_phases(beta: float, rho_total: float = 2.0) -> PhasePoint:
    """Pure-phase densities rho+ >= rho- on the line rho1 + rho2 = rho_total."""
    m = order_parameter(beta, rho_total)
    half = 0.5 * rho_total
    # 1 - m = 1 - tanh(y) without cancellation, so rho- stays positive when m rounds to 1
    e = math.exp(-beta * rho_total * m)
    return PhasePoint(beta=float(beta), rho_total=float(rho_total), m=m,
                      rho_plus=rho_total - half * (2.0 * e / (1.0 + e)),
                      rho_minus=half * (2.0 * e / (1.0 + e)),
                      regime=_regime(beta, rho_total))


def classify_mixed_phase(beta: float, rho_total: float = 2.0) -> str:
    """Nature of (rho/2, rho/2) along the exchange direction (d, -d)."""
    if not (beta > 0 and rho_total > 0):
        raise DomainError("beta and rho_total must be positive")
    regime = _regime(beta, rho_total)
    if regime == "critical":
        return "degenerate"
    # d^2/dd^2 phi(s + d, s - d) = 2/s - 2 beta
    return "minimizer" if regime == "subcritical" else "maximizer"


def bifurcation_scan(beta_min: float, beta_max: float, rho_total: float = 2.0,
                     n_samples: int = 101) -> list[PhasePoint]:
    """Phase points on an evenly spaced beta grid, ascending."""
    if n_samples < 2:
        raise ConfigurationError("bifurcation_scan needs n_samples >= 2")
    if not (0 < beta_min < beta_max):
        raise ConfigurationError("bifurcation_scan needs 0 < beta_min < beta_max")
    return [pure_phases(float(b), rho_total) for b in np.linspace(beta_min, beta_max, n_samples)]
