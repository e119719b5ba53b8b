from __future__ import annotations

import numpy as np
import pytest

from segkin.errors import ConvergenceError
from segkin.front import (build_A, build_A_from_densities, chemical_potential, excess_energy_of,
                          excess_free_energy, sharp_step, solve_front, spectral_gap,
                          tail_decay_rate, tanh_guess)
from segkin.kernel import DEFAULT_POTENTIAL, SpatialGrid, convolve
from segkin.phasediag import pure_phases


def test_front_satisfies_euler_lagrange(front256):
    p = front256
    c1 = np.log(p.rho1) + 2.0 * convolve(DEFAULT_POTENTIAL, p.grid, p.rho2, p.halo2)
    c2 = np.log(p.rho2) + 2.0 * convolve(DEFAULT_POTENTIAL, p.grid, p.rho1, p.halo1)
    assert p.converged
    assert np.max(np.abs(c1 - p.chem_pot)) <= 1e-9
    assert np.max(np.abs(c2 - p.chem_pot)) <= 1e-9
    assert p.chem_pot == pytest.approx(0.7566621564489139, abs=1e-12)


def test_front_symmetry_and_midpoint(front256):
    p = front256
    assert np.array_equal(p.rho1, p.rho2[::-1])
    ph = pure_phases(2.0)
    assert ph.rho_minus < p.midpoint() < ph.rho_plus
    fine = solve_front(2.0, SpatialGrid(10.0, 1024))
    assert p.midpoint() == pytest.approx(fine.midpoint(), abs=1e-3)


def test_constant_start_is_fixed_point():
    ph = pure_phases(2.0)
    g = SpatialGrid(5.0, 64)
    p = solve_front(2.0, g, initial=(np.full(64, ph.rho_plus), np.full(64, ph.rho_minus)),
                    halos=((ph.rho_plus, ph.rho_plus), (ph.rho_minus, ph.rho_minus)),
                    symmetrize=False)
    assert p.iterations == 1
    assert p.residual <= 1e-12


def test_iteration_cap_raises():
    with pytest.raises(ConvergenceError) as exc:
        solve_front(2.0, SpatialGrid(10.0, 128), max_iter=3)
    assert exc.value.residual is not None


def test_excess_energy_ordering(front256):
    ph = pure_phases(2.0)
    g = front256.grid
    fe = excess_free_energy(front256)
    step = excess_energy_of(g, *sharp_step(g, ph), 2.0, ph)
    assert 0.0 < fe.value < step
    assert not fe.truncation_warning
    assert fe.tail_sensitivity < 1e-8


def test_excess_energy_literal_form_available(front256):
    literal = excess_free_energy(front256, grand=False).value
    grand = excess_free_energy(front256).value
    assert literal < grand


def test_tanh_guess_is_mirror_symmetric():
    ph = pure_phases(2.0)
    g = SpatialGrid(10.0, 100)
    r1, r2 = tanh_guess(g, ph)
    assert np.allclose(r1, r2[::-1])


def test_operator_A_translation_mode_order_h2(front256, front512):
    res = []
    for p in (front256, front512):
        A = build_A(p)
        d = A.null_direction
        res.append(np.linalg.norm(A.apply(d)) / np.linalg.norm(d))
    assert 3.0 <= res[0] / res[1] <= 5.0


def test_operator_A_symmetric_and_form_consistent(front256):
    A = build_A(front256)
    assert np.allclose(A.matrix, A.matrix.T)
    rng = np.random.default_rng(0)
    u = rng.standard_normal(A.matrix.shape[0])
    assert A.quadratic_form(u) == pytest.approx(A.inner(u, A.apply(u)), rel=1e-12)


def test_spectral_gap_matches_dense_oracle(front256):
    from scipy import linalg
    A = build_A(front256)
    gap = spectral_gap(A, n_eigs=3)
    d = A.null_direction / np.linalg.norm(A.null_direction)
    Q = linalg.null_space(d[None, :])
    dense = linalg.eigvalsh(Q.T @ A.matrix @ Q, subset_by_index=[0, 2])
    assert np.allclose(gap.eigenvalues, dense, atol=1e-9)
    assert gap.gap > 0


def test_pure_phase_operator_positive_definite():
    ph = pure_phases(2.0)
    A = build_A_from_densities(SpatialGrid(5.0, 128), ph.rho_plus, ph.rho_minus, 2.0)
    assert np.linalg.eigvalsh(A.matrix).min() > 0.3


def test_tail_decay_rate_stable_across_windows():
    p = solve_front(2.0, SpatialGrid(10.0, 1024))
    a = tail_decay_rate(p)
    b = tail_decay_rate(p, start=2.5)
    assert a.rate > 0
    assert abs(a.rate - b.rate) / a.rate < 0.05


def test_chemical_potential_formula():
    ph = pure_phases(3.0)
    assert chemical_potential(3.0, ph) == pytest.approx(np.log(ph.rho_plus) + 3.0 * ph.rho_minus)
