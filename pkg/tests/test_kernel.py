from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from segkin.errors import ConfigurationError, DomainError
from segkin.kernel import (DEFAULT_POTENTIAL, InteractionPotential, SpatialGrid, VelocityGrid,
                           convolve, eval_potential, fourier_uhat, kernel_stencil,
                           load_tabulated_potential, make_potential, potential_mass, vlasov_force)

POTENTIALS = [InteractionPotential(), InteractionPotential(degree=2),
              InteractionPotential(family="mollifier")]


@pytest.mark.parametrize("pot", POTENTIALS, ids=lambda p: p.name)
def test_potential_has_unit_mass(pot):
    assert potential_mass(pot) == pytest.approx(1.0, abs=1e-12)


def test_default_potential_closed_form():
    x = np.array([0.0, 0.25, 0.5, 0.99])
    assert np.allclose(DEFAULT_POTENTIAL.profile(x), 35.0 / 32.0 * (1 - x * x) ** 3, rtol=1e-15)


def test_potential_vanishes_beyond_range():
    assert eval_potential(DEFAULT_POTENTIAL, 1.0) == 0.0
    assert eval_potential(DEFAULT_POTENTIAL, 3.0) == 0.0
    with pytest.raises(DomainError):
        eval_potential(DEFAULT_POTENTIAL, -0.1)


@pytest.mark.parametrize("pot", POTENTIALS, ids=lambda p: p.name)
def test_derivatives_match_finite_differences(pot):
    x = np.linspace(-0.95, 0.95, 37)
    e = 1e-6
    fd1 = (pot.profile(x + e) - pot.profile(x - e)) / (2 * e)
    fd2 = (pot.derivative(x + e) - pot.derivative(x - e)) / (2 * e)
    assert np.allclose(pot.derivative(x), fd1, atol=1e-6)
    assert np.allclose(pot.second_derivative(x), fd2, atol=1e-5)


@pytest.mark.parametrize("k", [0.0, 0.3, 1.0, 3.7, 12.0])
def test_fourier_transform_against_plain_quadrature(k):
    oracle, _ = integrate.quad(lambda x: float(DEFAULT_POTENTIAL.profile(x)) * math.cos(k * x),
                               -1.0, 1.0, epsabs=1e-14, epsrel=1e-13, limit=400)
    assert fourier_uhat(DEFAULT_POTENTIAL, k) == pytest.approx(oracle, abs=1e-12)
    assert fourier_uhat(DEFAULT_POTENTIAL, -k) == fourier_uhat(DEFAULT_POTENTIAL, k)


def test_bad_potentials_rejected():
    with pytest.raises(ConfigurationError):
        InteractionPotential(family="gaussian")
    with pytest.raises(ConfigurationError):
        InteractionPotential(degree=3)
    with pytest.raises(ConfigurationError):
        make_potential("tabulated")


def test_tabulated_potential_roundtrip(tmp_path):
    r = np.linspace(0.0, 1.0, 41)
    path = tmp_path / "u.csv"
    path.write_text("r,U\n" + "".join(f"{float(a)!r},{float(b)!r}\n" for a, b in zip(r, (1 - r * r) ** 3)))
    pot = load_tabulated_potential(path)
    assert potential_mass(pot) == pytest.approx(1.0, abs=1e-10)
    x = np.linspace(0, 0.9, 10)
    assert np.allclose(pot.profile(x), DEFAULT_POTENTIAL.profile(x), atol=1e-4)
    bad = tmp_path / "bad.csv"
    bad.write_text("r,U\n0,1\nx,y\n")
    with pytest.raises(ConfigurationError):
        load_tabulated_potential(bad)


def test_stencil_normalized_and_close_to_trapezoid():
    for h in (0.1, 0.05, 0.025):
        w = kernel_stencil(DEFAULT_POTENTIAL, h, 0)
        assert math.fsum(w) == pytest.approx(1.0, abs=1e-15)
    # unnormalized trapezoid sums approach 1 at O(h^4)
    errs = []
    for h in (0.1, 0.05):
        s = np.arange(-int(1 / h) - 1, int(1 / h) + 2) * h
        errs.append(abs(DEFAULT_POTENTIAL.profile(s).sum() * h - 1.0))
    assert errs[0] / errs[1] > 12.0


def _naive_convolution(grid, values, halo):
    w = kernel_stencil(DEFAULT_POTENTIAL, grid.h, 0)
    width = (len(w) - 1) // 2
    n = grid.n_nodes
    out = np.zeros(n)
    for i in range(n):
        for s in range(-width, width + 1):
            j = i + s
            if grid.boundary == "periodic":
                val = values[j % n]
            elif j < 0:
                val = halo[0]
            elif j >= n:
                val = halo[1]
            else:
                val = values[j]
            out[i] += w[width - s] * val
    return out


@pytest.mark.parametrize("boundary", ["pinned", "periodic"])
def test_convolution_matches_naive_double_sum(boundary):
    grid = SpatialGrid(3.0, 64, boundary)
    rng = np.random.default_rng(1)
    values = rng.uniform(0.5, 1.5, grid.n_nodes)
    halo = (0.3, 1.7)
    got = convolve(DEFAULT_POTENTIAL, grid, values, halo if boundary == "pinned" else None)
    assert np.allclose(got, _naive_convolution(grid, values, halo), rtol=0, atol=1e-14)


@settings(max_examples=25, deadline=None)
@given(c=st.floats(0.01, 10.0), n=st.integers(16, 200))
def test_convolution_reproduces_constants(c, n):
    grid = SpatialGrid(4.0, n, "periodic")
    out = convolve(DEFAULT_POTENTIAL, grid, np.full(n, c))
    assert np.allclose(out, c, rtol=1e-14)
    assert np.allclose(vlasov_force(DEFAULT_POTENTIAL, grid, np.full(n, c)), 0.0, atol=1e-13 * c)


def test_force_methods_agree_to_second_order():
    errs = []
    for n in (128, 256):
        grid = SpatialGrid(math.pi, n, "periodic")
        rho = 1.0 + 0.3 * np.sin(grid.x)
        exact = -0.3 * np.cos(grid.x) * fourier_uhat(DEFAULT_POTENTIAL, 1.0)
        a = vlasov_force(DEFAULT_POTENTIAL, grid, rho)
        s = vlasov_force(DEFAULT_POTENTIAL, grid, rho, method="spectral")
        d = vlasov_force(DEFAULT_POTENTIAL, grid, rho, method="difference")
        errs.append(max(np.max(np.abs(a - exact)), np.max(np.abs(d - exact))))
        assert np.max(np.abs(s - exact)) < 1e-5
    assert errs[0] / errs[1] > 3.0


def test_spectral_force_requires_periodic_grid():
    grid = SpatialGrid(4.0, 64)
    with pytest.raises(ConfigurationError):
        vlasov_force(DEFAULT_POTENTIAL, grid, np.ones(64), method="spectral")


def test_grid_validation_collects_all_problems():
    with pytest.raises(ConfigurationError) as exc:
        SpatialGrid(-1.0, 2, "mirror")
    assert len(exc.value.violations) == 3


def test_grid_mirror_symmetry():
    g = SpatialGrid(10.0, 256)
    assert np.allclose(g.x, -g.x[::-1], atol=1e-14)
    assert g.refined().n_nodes == 512


@pytest.mark.parametrize("beta", [0.5, 2.0, 5.0])
def test_uniform_velocity_grid_moments(beta):
    vg = VelocityGrid.uniform(beta, 128)
    mu = vg.maxwellian()
    assert vg.tail_mass() < 1e-10
    assert np.sum(mu) * vg.dv == pytest.approx(1.0, abs=1e-10)
    assert np.sum(vg.nodes ** 2 * mu) * vg.dv == pytest.approx(1.0 / beta, rel=1e-9)
    assert np.allclose(vg.nodes, -vg.nodes[::-1])


def test_gauss_hermite_grid_exact_moments():
    vg = VelocityGrid.gauss_hermite(2.0, 32)
    w = vg.maxwell_weights
    assert np.sum(w) == pytest.approx(1.0, abs=1e-14)
    assert np.sum(w * vg.nodes ** 2) == pytest.approx(0.5, abs=1e-14)
    assert np.sum(w * vg.nodes ** 4) == pytest.approx(3 * 0.25, abs=1e-13)
    with pytest.raises(ConfigurationError):
        _ = vg.dv
