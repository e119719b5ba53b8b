from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from segkin.dispersion import (CollisionModel, build_Talpha, collision_matrix, continuity_defect,
                               growth_rate, mode_profile, penrose_F, penrose_mode, penrose_scan,
                               purely_imaginary, rightmost_eigenvalue, unstable_band)
from segkin.errors import ConfigurationError, DomainError
from segkin.kernel import DEFAULT_POTENTIAL, VelocityGrid, fourier_uhat, maxwellian_1d


def closed_form_F(beta, k, lam):
    """beta U^(k) [1 - a sqrt(pi) erfcx(a)], a = lam / |k| sqrt(beta / 2)."""
    a = lam / abs(k) * math.sqrt(beta / 2.0)
    return beta * fourier_uhat(DEFAULT_POTENTIAL, k) * (1.0 - a * math.sqrt(math.pi) * special.erfcx(a))


@settings(max_examples=60, deadline=None)
@given(beta=st.floats(0.3, 6.0), k=st.floats(0.05, 8.0),
       lam=st.one_of(st.floats(0.0, 5.0), st.floats(1e-12, 1e-4)))
def test_penrose_F_matches_closed_form(beta, k, lam):
    assert penrose_F(beta, k, lam) == pytest.approx(closed_form_F(beta, k, lam), abs=1e-11)


def test_growth_rate_reference_value():
    lam = growth_rate(2.0, 0.3)
    assert lam == pytest.approx(0.1287879746125659, abs=1e-12)
    assert closed_form_F(2.0, 0.3, lam) == pytest.approx(1.0, abs=1e-12)


def test_growth_rate_none_when_stable():
    assert growth_rate(0.9, 0.5) is None
    assert growth_rate(2.0, 5.0) is None
    with pytest.raises(DomainError):
        growth_rate(2.0, 0.0)
    with pytest.raises(DomainError):
        penrose_F(2.0, 1.0, -0.1)


def test_growth_rate_decreases_with_k_near_band_edge():
    band = unstable_band(2.0, 6.0)
    lo, hi = band.intervals[0]
    assert hi == pytest.approx(3.4172105662531314, abs=1e-8)
    assert growth_rate(2.0, 0.9 * hi) > growth_rate(2.0, 0.99 * hi) > 0
    assert band.contains(1.0) and not band.contains(4.0)


def test_band_empty_below_one():
    assert not unstable_band(0.9, 10.0).nonempty


def test_penrose_scan_ascending_with_nan_outside_band():
    scan = penrose_scan(2.0, 6.0, 50)
    rows = list(scan.rows())
    ks = [r[0] for r in rows]
    assert ks == sorted(ks)
    for k, u, lam in rows:
        assert math.isnan(lam) == (2.0 * u <= 1.0)


def test_penrose_mode_normalization():
    lam = growth_rate(2.0, 1.0)
    mode = penrose_mode(2.0, 1.0, lam)
    assert mode.defect <= 1e-10
    # independent check: trapezoid rule (spectrally accurate here) on a fine uniform grid
    v = np.linspace(-12.0, 12.0, 8001)
    fine = penrose_mode(2.0, 1.0, lam, v=v)
    integral = np.sum(fine.q * np.sqrt(maxwellian_1d(v, 2.0))) * (v[1] - v[0])
    assert integral.real == pytest.approx(1.0, abs=1e-10)
    assert abs(integral.imag) <= 1e-12
    with pytest.raises(DomainError):
        penrose_mode(2.0, 1.0, lam + 0.1)


@pytest.mark.parametrize("kind", ["bgk", "bgk_hard_sphere_frequency"])
@pytest.mark.parametrize("inv", ["mixture", "species"])
def test_collision_matrix_structure(kind, inv):
    vg = VelocityGrid.gauss_hermite(2.0, 48)
    L = collision_matrix(CollisionModel(kind, 1.0, 1.0, inv), vg)
    assert np.allclose(L, L.T)
    assert np.linalg.eigvalsh(L).max() <= 1e-12
    sw = np.sqrt(vg.maxwell_weights)
    n = 3 if inv == "mixture" else 1
    for p in range(n):
        assert np.max(np.abs(L @ (sw * vg.nodes ** p))) <= 1e-10


def test_collision_model_validation():
    with pytest.raises(ConfigurationError):
        CollisionModel("landau")
    with pytest.raises(ConfigurationError):
        CollisionModel("bgk", nu0=-1.0)


def test_collisionless_eigenvalue_matches_penrose():
    op = build_Talpha(2.0, 0.3, CollisionModel("none", alpha=0.0),
                      VelocityGrid.gauss_hermite(2.0, 128))
    res = rightmost_eigenvalue(op)
    assert abs(res.lam - growth_rate(2.0, 0.3)) <= 1e-6
    assert res.residual <= 1e-10


@pytest.mark.parametrize("alpha", [0.1, 1.0, 10.0, 100.0])
def test_instability_persists_with_collisions(alpha):
    op = build_Talpha(2.0, 0.3, CollisionModel("bgk", 1.0, alpha))
    res = rightmost_eigenvalue(op)
    assert res.lam.real > 0
    assert abs(res.lam.imag) < 1e-10
    assert continuity_defect(op, res) < 1e-10
    assert purely_imaginary(res.eigenvalues).size == 0


def test_species_projection_rate():
    op = build_Talpha(2.0, 1.0, CollisionModel("bgk", 1.0, 1.0, "species"))
    assert rightmost_eigenvalue(op).lam.real == pytest.approx(0.2527169107893457, abs=1e-9)


def test_mode_profile_reconstructs_eigenvector():
    op = build_Talpha(2.0, 1.0, CollisionModel("bgk_hard_sphere_frequency", 1.0, 1.0))
    res = rightmost_eigenvalue(op)
    vg = op.vgrid
    prof = mode_profile(op, res, vg.nodes)
    expected = res.coords * np.sqrt(vg.maxwellian() / vg.weights)
    assert np.allclose(prof, expected, atol=1e-12 * np.max(np.abs(expected)))


def test_generator_rejects_mismatched_grid():
    with pytest.raises(ConfigurationError):
        build_Talpha(2.0, 1.0, vgrid=VelocityGrid.gauss_hermite(1.0, 32))


@pytest.mark.parametrize("lam", [5e-324, 2.2e-309, 1e-160, 1e-150])
def test_penrose_F_survives_underflowing_lambda(lam):
    assert penrose_F(2.0, 1.0, lam) == pytest.approx(penrose_F(2.0, 1.0, 0.0), abs=1e-14)
