"""Linear stability of the homogeneous state (1, 1) mu.

Collisionless growth rates come from the real dispersion function

    F(lam, k) = beta U^(k) int k^2 v^2 mu(v) / (lam^2 + k^2 v^2) dv,

and the collisional problem is discretized on a velocity grid.  With the
unknown written as q = sqrt(mu) phi and stored as c_j = sqrt(W_j) phi(v_j)
(W the Maxwell-weighted quadrature weights) every operator below is a plain
matrix in the Euclidean inner product, and the collision part is symmetric.

Eigenvalues are reported as growth rates: the matrices assembled here act as
the evolution generator dq/dt = G q, i.e. G = -T^alpha.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize

from .errors import AssemblyError, ConfigurationError, ConvergenceError, DomainError
from .kernel import DEFAULT_POTENTIAL, InteractionPotential, VelocityGrid, fourier_uhat, maxwellian_1d

log = logging.getLogger(__name__)

COLLISION_KINDS = ("none", "bgk", "bgk_hard_sphere_frequency")
INVARIANT_SETS = {"mixture": 3, "species": 1}
ROOT_TOL = 1e-10


@lru_cache(maxsize=4096)
def _uhat_cached(pot: InteractionPotential, k: float) -> float:
    return fourier_uhat(pot, k)


def _uhat(pot, k):
    try:
        return _uhat_cached(pot, float(k))
    except TypeError:  # unhashable tabulated samples
        return fourier_uhat(pot, k)


# -------------------------------------------------------------------- Penrose


def penrose_F(beta: float, k: float, lam: float, pot: InteractionPotential = DEFAULT_POTENTIAL,
              uhat: float | None = None) -> float:
    """Real dispersion function F(lam, k) for lam >= 0 (adaptive quadrature)."""
    if lam < 0:
        raise DomainError("penrose_F is defined for lam >= 0")
    if k == 0 and lam == 0:
        raise DomainError("F(0, 0) is undefined")
    if k == 0:
        return 0.0
    u = _uhat(pot, abs(k)) if uhat is None else uhat
    if lam == 0:
        return beta * u
    # F = beta U^ [1 - lam^2 int mu / (lam^2 + k^2 v^2) dv]; with v = (lam/|k|) t the
    # subtracted integral is (lam/|k|) int mu(lam t/|k|) / (1 + t^2) dt, and folding
    # t -> 1/t onto [0, 1] leaves a bounded smooth integrand for every lam > 0.
    s = lam / abs(k)
    norm = math.sqrt(beta / (2 * math.pi))
    r = s * math.sqrt(0.5 * beta)  # sqrt(c) with c = beta s^2 / 2, kept unsquared against underflow
    if r == 0.0:
        return beta * u

    def integrand(t):
        inner = math.exp(-(r * t) ** 2)
        outer = math.exp(-(r / t) ** 2) if t > 0 else 0.0
        return norm * (inner + outer) / (1.0 + t * t)

    # breakpoints at the scales of the outer (sqrt c) and inner (1/sqrt c) factors
    knots = sorted({0.0, 1.0, *(t for t in (r, 6.0 * r, 1.0 / (math.sqrt(2.0) * r),
                                            6.0 / (math.sqrt(2.0) * r))
                                 if 0.0 < t < 1.0)})
    total = 0.0
    for a, b in zip(knots, knots[1:]):
        val, _ = integrate.quad(integrand, a, b, epsabs=1e-14, epsrel=1e-12, limit=200)
        total += val
    return beta * u * (1.0 - 2.0 * s * total)


def growth_rate(beta: float, k: float, pot: InteractionPotential = DEFAULT_POTENTIAL,
                tol: float = ROOT_TOL) -> float | None:
    """Positive root of F(lam, k) = 1, or None when beta U^(k) <= 1."""
    if k == 0:
        raise DomainError("k = 0 is excluded")
    u = _uhat(pot, abs(k))
    if beta * u <= 1.0:
        return None
    f = lambda lam: penrose_F(beta, k, lam, pot, uhat=u) - 1.0  # noqa: E731
    hi = 1.0
    while f(hi) > 0:
        hi *= 2.0
        if hi > 1e8:
            raise ConvergenceError("could not bracket the Penrose root")
    lam = optimize.brentq(f, 0.0, hi, xtol=1e-15, rtol=8.9e-16, maxiter=500)
    defect = abs(f(lam))
    if defect > tol:
        raise ConvergenceError(f"Penrose root defect {defect:.2e} > {tol:.0e}", residual=defect)
    return lam


@dataclass(frozen=True)
class PenroseMode:
    beta: float
    k: float
    lam: float
    v: np.ndarray = field(repr=False)
    q: np.ndarray = field(repr=False)
    consistency: float
    defect: float


def penrose_mode(beta: float, k: float, lam: float, v=None,
                 pot: InteractionPotential = DEFAULT_POTENTIAL, check_tol: float = 1e-8,
                 check: bool = True) -> PenroseMode:
    """q(v) = beta k U^(k) i v sqrt(mu) / (lam + i v k), normalized by construction.

    The self-consistency integral int q sqrt(mu) dv equals F(lam, k); it is
    1 exactly at a root.  A non-root ``lam`` raises DomainError when
    ``check`` is set.
    """
    if v is None:
        v = VelocityGrid.gauss_hermite(beta, 128).nodes
    v = np.asarray(v, dtype=float)
    u = _uhat(pot, abs(k))
    q = beta * k * u * 1j * v * np.sqrt(maxwellian_1d(v, beta)) / (lam + 1j * v * k)
    # imaginary part of the integrand is odd in v, so the integral is real
    consistency = penrose_F(beta, k, lam, pot, uhat=u)
    defect = abs(consistency - 1.0)
    if check and defect > check_tol:
        raise DomainError(f"lam = {lam!r} is not a Penrose root: |int q sqrt(mu) - 1| = {defect:.2e}")
    return PenroseMode(beta=float(beta), k=float(k), lam=float(lam), v=v, q=q,
                       consistency=consistency, defect=defect)


@dataclass(frozen=True)
class Band:
    intervals: tuple[tuple[float, float], ...]
    k_max: float

    @property
    def nonempty(self) -> bool:
        return bool(self.intervals)

    def contains(self, k: float) -> bool:
        return any(lo < k < hi for lo, hi in self.intervals)


def unstable_band(beta: float, k_max: float, n_samples: int = 200,
                  pot: InteractionPotential = DEFAULT_POTENTIAL) -> Band:
    """{k in (0, k_max] : beta U^(k) > 1} with endpoints refined by root finding.

    A band open at k -> 0 is reported with lower end 0; a band still open at
    ``k_max`` ends there.
    """
    if n_samples < 2 or k_max <= 0:
        raise ConfigurationError("unstable_band needs k_max > 0 and n_samples >= 2")
    ks = k_max * np.arange(1, n_samples + 1) / n_samples
    g = lambda k: beta * _uhat(pot, k) - 1.0  # noqa: E731
    vals = np.array([g(k) for k in ks])
    intervals = []
    start = 0.0 if beta * 1.0 > 1.0 else None  # U^(0) = 1
    prev_k, prev_v = 0.0, beta - 1.0
    for k, val in zip(ks, vals):
        if (prev_v > 0) != (val > 0):
            edge = prev_k if prev_k == 0.0 else optimize.brentq(g, prev_k, k, xtol=1e-14,
                                                                  rtol=8.9e-16)
            if val > 0:
                start = edge
            else:
                intervals.append((start, edge))
                start = None
        prev_k, prev_v = k, val
    if start is not None and prev_v > 0:
        intervals.append((start, float(k_max)))
    return Band(intervals=tuple((float(a), float(b)) for a, b in intervals), k_max=float(k_max))


@dataclass(frozen=True)
class PenroseScan:
    beta: float
    k_values: np.ndarray = field(repr=False)
    uhat: np.ndarray = field(repr=False)
    lam: np.ndarray = field(repr=False)
    band: Band

    def rows(self):
        for k, u, lam in zip(self.k_values, self.uhat, self.lam):
            yield float(k), float(u), float(lam)


def penrose_scan(beta: float, k_max: float, n_samples: int = 100,
                 pot: InteractionPotential = DEFAULT_POTENTIAL) -> PenroseScan:
    """Growth rate on k_j = j k_max / n (NaN where stable), ascending in k."""
    if n_samples < 2 or k_max <= 0:
        raise ConfigurationError("penrose_scan needs k_max > 0 and n_samples >= 2")
    ks = k_max * np.arange(1, n_samples + 1) / n_samples
    uh = np.array([_uhat(pot, k) for k in ks])
    lam = np.array([np.nan if (r := growth_rate(beta, k, pot)) is None else r for k in ks])
    return PenroseScan(beta=float(beta), k_values=ks, uhat=uh, lam=lam,
                       band=unstable_band(beta, k_max, n_samples, pot))


# ------------------------------------------------------------ collisional problem


@dataclass(frozen=True)
class CollisionModel:
    """Linear relaxation surrogate for the collision operator.

    ``bgk``: L = nu0 (P - I) with P the Maxwell-weighted orthogonal projection
    onto the collision invariants.  ``bgk_hard_sphere_frequency``: the
    symmetric form L = -(I - P) N (I - P), N = nu0 (1 + |v|).  ``invariants``
    selects {1, v, v^2} (``mixture``, invariants of the summed species) or
    {1} (``species``, what survives for the antisymmetric exchange mode
    where the combined momentum and energy perturbations vanish).
    """

    kind: str = "bgk"
    nu0: float = 1.0
    alpha: float = 1.0
    invariants: str = "mixture"

    def __post_init__(self):
        bad = []
        if self.kind not in COLLISION_KINDS:
            bad.append(f"unknown collision kind {self.kind!r}")
        if self.kind != "none" and not self.nu0 > 0:
            bad.append("nu0 must be positive")
        if self.alpha < 0:
            bad.append("alpha must be non negative")
        if self.invariants not in INVARIANT_SETS:
            bad.append(f"unknown invariant set {self.invariants!r}")
        if bad:
            raise ConfigurationError("; ".join(bad), bad)

    def frequency(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if self.kind == "bgk_hard_sphere_frequency":
            return self.nu0 * (1.0 + np.abs(v))
        return np.full_like(v, self.nu0 if self.kind != "none" else 0.0)

    def with_alpha(self, alpha: float) -> "CollisionModel":
        return CollisionModel(self.kind, self.nu0, alpha, self.invariants)


def _check_moments(vgrid: VelocityGrid, tol: float = 1e-10):
    W = vgrid.maxwell_weights
    v = vgrid.nodes
    exact = (1.0, 0.0, 1.0 / vgrid.beta, 0.0, 3.0 / vgrid.beta**2)
    for p, ref in enumerate(exact):
        err = abs(np.sum(W * v**p) - ref)
        if err > tol * max(1.0, abs(ref)):
            raise ConfigurationError(f"velocity quadrature misses moment {p} by {err:.2e}")


def _invariant_basis(model: CollisionModel, vgrid: VelocityGrid):
    """Orthonormal columns spanning sqrt(W) {1, v, v^2}[:n] and the triangular factor."""
    n = INVARIANT_SETS[model.invariants]
    sw = np.sqrt(vgrid.maxwell_weights)
    B = np.stack([sw * vgrid.nodes**p for p in range(n)], axis=1)
    Q, R = np.linalg.qr(B)
    return Q, R


def collision_matrix(model: CollisionModel, vgrid: VelocityGrid, tol: float = 1e-10) -> np.ndarray:
    """Symmetric non-positive collision matrix (without the alpha factor)."""
    nv = vgrid.n_nodes
    if model.kind == "none":
        return np.zeros((nv, nv))
    Q, _ = _invariant_basis(model, vgrid)
    P = Q @ Q.T
    comp = np.eye(nv) - P
    N = np.diag(model.frequency(vgrid.nodes))
    L = -comp @ N @ comp
    L = 0.5 * (L + L.T)
    defect = float(np.max(np.abs(L @ Q))) if Q.size else 0.0
    if defect > tol:
        raise AssemblyError(f"collision matrix does not annihilate its invariants ({defect:.2e})")
    return L


@dataclass(frozen=True)
class TalphaMatrix:
    """Discrete generator G = -T^alpha at wavenumber k on ``vgrid``."""

    beta: float
    k: float
    collision: CollisionModel
    vgrid: VelocityGrid
    uhat: float
    matrix: np.ndarray = field(repr=False)
    collision_part: np.ndarray = field(repr=False)

    @property
    def alpha(self) -> float:
        return self.collision.alpha if self.collision.kind != "none" else 0.0


def build_Talpha(beta: float, k: float, collision: CollisionModel | None = None,
                 vgrid: VelocityGrid | None = None,
                 pot: InteractionPotential = DEFAULT_POTENTIAL) -> TalphaMatrix:
    """Assemble G = -i k v + i beta k U^(k) (sqrt(W) v)(sqrt(W))^T + alpha L."""
    if k == 0:
        raise DomainError("k = 0 is excluded")
    collision = collision or CollisionModel("none", alpha=0.0)
    vgrid = vgrid or VelocityGrid.gauss_hermite(beta, 128)
    if abs(vgrid.beta - beta) > 1e-14:
        raise ConfigurationError("velocity grid was built for a different beta")
    _check_moments(vgrid)
    v = vgrid.nodes
    sw = np.sqrt(vgrid.maxwell_weights)
    u = _uhat(pot, abs(k))
    G = np.diag(-1j * k * v).astype(complex)
    G += 1j * beta * k * u * np.outer(sw * v, sw)
    L = collision_matrix(collision, vgrid)
    alpha = collision.alpha if collision.kind != "none" else 0.0
    G += alpha * L
    return TalphaMatrix(beta=float(beta), k=float(k), collision=collision, vgrid=vgrid,
                        uhat=u, matrix=G, collision_part=L)


@dataclass(frozen=True)
class EigenResult:
    beta: float
    k: float
    alpha: float
    lam: complex
    mode: np.ndarray = field(repr=False)
    coords: np.ndarray = field(repr=False)
    residual: float
    eigenvalues: np.ndarray = field(repr=False)

    def summary(self) -> dict:
        return {"beta": self.beta, "k": self.k, "alpha": self.alpha,
                "lambda_real": float(self.lam.real), "lambda_imag": float(self.lam.imag),
                "residual": self.residual}


def _pick_rightmost(eigs: np.ndarray) -> int:
    scale = max(1.0, float(np.max(np.abs(eigs))))
    best = float(np.max(eigs.real))
    cands = np.flatnonzero(eigs.real >= best - 1e-12 * scale)
    # ties: largest imaginary part, then first index
    top = np.max(eigs.imag[cands])
    return int(cands[np.flatnonzero(eigs.imag[cands] >= top - 1e-12 * scale)[0]])


def rightmost_eigenvalue(op: TalphaMatrix | np.ndarray) -> EigenResult:
    """Eigenvalue of largest real part with its eigenvector and residual."""
    M = op.matrix if isinstance(op, TalphaMatrix) else np.asarray(op)
    try:
        eigs, vecs = np.linalg.eig(M)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"dense eigensolver failed: {exc}", log=[str(exc)]) from exc
    i = _pick_rightmost(eigs)
    lam, c = eigs[i], vecs[:, i]
    if isinstance(op, TalphaMatrix):
        sw = np.sqrt(op.vgrid.maxwell_weights)
        n = np.dot(sw, c)
        if abs(n) > 1e-14 * np.linalg.norm(c):
            c = c / n
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            mode = np.where(op.vgrid.weights > 0, c / np.sqrt(op.vgrid.weights), 0.0)
        mode = np.nan_to_num(mode)
        beta, k, alpha = op.beta, op.k, op.alpha
    else:
        mode = c
        beta = k = alpha = float("nan")
    residual = float(np.linalg.norm(M @ c - lam * c) / np.linalg.norm(c))
    return EigenResult(beta=beta, k=k, alpha=alpha, lam=complex(lam), mode=mode, coords=c,
                       residual=residual, eigenvalues=eigs)


def continuity_defect(op: TalphaMatrix, result: EigenResult) -> float:
    """|lam int q sqrt(mu) + i k int q v sqrt(mu)| relative to its two terms."""
    sw = np.sqrt(op.vgrid.maxwell_weights)
    n = np.dot(sw, result.coords)
    j = np.dot(sw * op.vgrid.nodes, result.coords)
    a, b = result.lam * n, 1j * op.k * j
    return float(abs(a + b) / max(abs(a) + abs(b), 1e-300))


def purely_imaginary(eigenvalues, tol: float = 1e-8) -> np.ndarray:
    """Eigenvalues whose real part vanishes within ``tol``."""
    eigenvalues = np.asarray(eigenvalues)
    return eigenvalues[np.abs(eigenvalues.real) <= tol]


def alpha_sweep(beta: float, k: float, alphas, collision: CollisionModel | None = None,
                vgrid: VelocityGrid | None = None,
                pot: InteractionPotential = DEFAULT_POTENTIAL) -> list[EigenResult]:
    base = collision or CollisionModel("bgk")
    vgrid = vgrid or VelocityGrid.gauss_hermite(beta, 128)
    return [rightmost_eigenvalue(build_Talpha(beta, k, base.with_alpha(float(a)), vgrid, pot))
            for a in alphas]


def mode_profile(op: TalphaMatrix, result: EigenResult, v) -> np.ndarray:
    """sqrt(mu(v)) q(v) on arbitrary velocities, from the eigenvector coordinates.

    Inverting the pointwise part of (lam - G) q = 0 gives
    (lam + i v k + alpha nu(v)) q = i beta k U^(k) n v sqrt(mu) + alpha (projection terms),
    whose right-hand side only involves moments of q.
    """
    v = np.asarray(v, dtype=float)
    vg = op.vgrid
    c = result.coords
    sw = np.sqrt(vg.maxwell_weights)
    n = np.dot(sw, c)
    mu = maxwellian_1d(v, op.beta)
    rhs = 1j * op.beta * op.k * op.uhat * n * v * mu
    alpha = op.alpha
    nu_v = op.collision.frequency(v) if alpha else np.zeros_like(v)
    if alpha:
        Q, R = _invariant_basis(op.collision, vg)
        npoly = Q.shape[1]
        Rinv = np.linalg.inv(R)
        # orthonormal polynomials p_m(v) = sum_p v^p Rinv[p, m]
        powers = np.stack([v**p for p in range(npoly)], axis=1)
        poly = powers @ Rinv
        N = op.collision.frequency(vg.nodes)
        a1 = Q.T @ (N * c)
        a2 = Q.T @ c
        a3 = Q.T @ (N * (Q @ a2))
        rhs = rhs + alpha * mu * (poly @ a1 + nu_v * (poly @ a2) - poly @ a3)
    return rhs / (result.lam + 1j * v * op.k + alpha * nu_v)
