from __future__ import annotations

import math

import numpy as np
import pytest

from segkin.errors import ConfigurationError
from segkin.kernel import DEFAULT_POTENTIAL, SpatialGrid, vlasov_force
from segkin.kinetics import SampledField, StaticField, integrate_characteristics


def test_zero_field_gives_straight_lines():
    grid = SpatialGrid.periodic_cell(2 * math.pi, 32)
    tr = integrate_characteristics(StaticField.zero(grid), (0.5, 0.2, -0.7), 3.0, n_samples=31)
    s = tr.s - 0.5
    assert np.allclose(tr.column("X"), 0.2 - 0.7 * s, atol=1e-12)
    assert np.allclose(tr.column("V"), -0.7, atol=1e-14)
    assert np.allclose(tr.column("dXdv"), s, atol=1e-12)
    assert np.allclose(tr.column("dVdv"), 1.0, atol=1e-14)


def test_periodic_field_wraps_and_conserves_energy():
    grid = SpatialGrid.periodic_cell(8.0, 64)
    rho = 1.0 + 0.3 * np.cos(2 * math.pi * grid.x / 8.0)
    field = StaticField(grid, rho)
    p0 = field.derivatives(0.7)
    p1 = field.derivatives(0.7 + 3 * 8.0)
    assert np.allclose(p0, p1, atol=1e-14)
    tr = integrate_characteristics(field, (0.0, 0.1, 1.5), 30.0)
    assert tr.energy_drift() <= 1e-9
    assert abs(tr.column("X")[-1]) > 8.0  # crossed the cell several times


def test_static_field_force_converges_to_kernel_sum():
    errs = []
    for n in (64, 128, 256):
        grid = SpatialGrid.periodic_cell(8.0, n)
        rho = 1.0 + 0.3 * np.sin(2 * math.pi * grid.x / 8.0)
        field = StaticField(grid, rho)
        force = vlasov_force(DEFAULT_POTENTIAL, grid, rho, method="analytic")
        slopes = np.array([field.derivatives(x)[1] for x in grid.x])
        errs.append(np.max(np.abs(-slopes - force)))
    assert errs[0] / errs[1] > 12 and errs[1] / errs[2] > 12  # quintic spline: O(h^4)
    assert errs[2] < 1e-6


def test_variational_column_matches_finite_difference():
    grid = SpatialGrid.periodic_cell(8.0, 64)
    rho = 1.0 + 0.4 * np.cos(2 * math.pi * grid.x / 8.0)
    field = StaticField(grid, rho)
    v0, dv, span = 0.4, 1e-5, 10.0
    mid = integrate_characteristics(field, (0.0, 0.3, v0), span, n_samples=2)
    hi = integrate_characteristics(field, (0.0, 0.3, v0 + dv), span, n_samples=2)
    lo = integrate_characteristics(field, (0.0, 0.3, v0 - dv), span, n_samples=2)
    fd = (hi.column("X")[-1] - lo.column("X")[-1]) / (2 * dv)
    assert fd == pytest.approx(mid.column("dXdv")[-1], rel=1e-6)


def test_pinned_field_flags_exit_and_extends_linearly():
    grid = SpatialGrid(2.0, 64)
    field = StaticField(grid, np.ones(64), halo=(1.0, 1.0))
    tr = integrate_characteristics(field, (0.0, 0.0, 2.0), 5.0)
    assert tr.exited
    far = field.derivatives(20.0)
    edge = field.derivatives(3.0)
    assert far[1] == pytest.approx(edge[1], abs=1e-12)
    assert far[2] == 0.0
    assert tr.energy_drift() <= 1e-9
    inside = StaticField(grid, np.ones(64), halo=(1.0, 1.0))
    assert not integrate_characteristics(inside, (0.0, 0.0, 0.1), 1.0).exited


def test_sampled_field_interpolates_in_time():
    grid = SpatialGrid.periodic_cell(2 * math.pi, 64)
    phis = np.array([np.cos(grid.x), 3 * np.cos(grid.x)])
    field = SampledField(grid, [0.0, 2.0], phis)
    assert not field.static
    phi, dphi, _ = field.derivatives(0.4, 1.0)
    assert phi == pytest.approx(2 * math.cos(0.4), abs=1e-5)
    assert dphi == pytest.approx(-2 * math.sin(0.4), abs=1e-4)
    assert field.derivatives(0.4, 5.0)[0] == pytest.approx(3 * math.cos(0.4), abs=1e-5)


def test_field_validation():
    grid = SpatialGrid.periodic_cell(2 * math.pi, 16)
    with pytest.raises(ConfigurationError):
        StaticField(grid, np.ones(15))
    with pytest.raises(ConfigurationError):
        SampledField(grid, [1.0, 0.0], np.ones((2, 16)))
    with pytest.raises(ConfigurationError):
        integrate_characteristics(StaticField.zero(grid), (0, 0, 1), 0.0)
