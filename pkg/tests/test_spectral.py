"""Spectral checks: explicit eigenpairs and the lambda(omega) line."""
import math

import numpy as np
import pytest

from linesoliton.closed_form import SolitonParams, omega_p, psi_value, soliton_dx, soliton_value
from linesoliton.fields import Grid, assemble_linearized
from linesoliton.spectral import kernel_eigen_check, lowest_eigenpairs, spectrum_scan


def _block(p, omega, grid, n):
    base = soliton_value(SolitonParams(p, omega), grid.x)
    return assemble_linearized(grid, p, omega, base, "p_times")[n]


@pytest.fixture(scope="module")
def grid():
    return Grid(L=30.0, nx=2049, n_modes=2)


def test_ground_state_eigenvalue(grid):
    # p=3, omega=1: even ground state of L_{omega,+,0} at -omega/omega_p = -3
    rep = lowest_eigenpairs(_block(3.0, 1.0, grid, 0), 1, "even")
    assert rep.eigenvalues[0] == pytest.approx(-3.0, abs=1e-6)
    assert rep.residuals[0] < 1e-9


def test_odd_zero_mode(grid):
    rep = lowest_eigenpairs(_block(3.0, 1.0, grid, 0), 1, "odd")
    assert abs(rep.eigenvalues[0]) < 1e-6
    # eigenvector proportional to dR/dx
    v = rep.vectors[:, 0]
    dr = soliton_dx(SolitonParams(3.0, 1.0), grid.x)
    dr = dr / np.linalg.norm(dr)
    overlap = abs(np.dot(v, dr))
    assert overlap > 1.0 - 1e-8


def test_ground_state_overlap_with_psi(grid):
    rep = lowest_eigenpairs(_block(3.0, 1.0, grid, 0), 1, "even")
    psi = psi_value(SolitonParams(3.0, 1.0), grid.x)
    psi = psi / np.linalg.norm(psi)
    assert abs(np.dot(rep.vectors[:, 0], psi)) > 1.0 - 1e-8


def test_mode1_eigenvalue_formula(grid):
    wp = omega_p(3.0)
    for omega in (0.3, wp, 0.4):
        rep = lowest_eigenpairs(_block(3.0, omega, grid, 1), 1, "even")
        assert rep.eigenvalues[0] == pytest.approx(1.0 - omega / wp, abs=1e-6)


def test_kernel_eigen_check(grid):
    rep = kernel_eigen_check(3.0, 1.0 / 3.0, grid)
    assert rep["ground_residual_rel"] < 1e-5
    assert rep["ground_overlap"] > 1.0 - 1e-8
    assert abs(rep["odd_zero_measured"]) < 1e-6


def test_spectrum_scan_slope(grid):
    scan = spectrum_scan(
        3.0, np.linspace(0.30, 0.37, 6),
        lambda omega: Grid(L=30.0 / math.sqrt(0.3), nx=2049, n_modes=2),
    )[0]
    assert scan["slope_formula"] == pytest.approx(-3.0)
    assert scan["slope_measured"] == pytest.approx(-3.0, abs=1e-4)


def test_multiple_eigenvalues_sorted(grid):
    # sech^2 well deep enough for two even bound states below the continuum
    from linesoliton.fields import assemble_mode_operator

    op = assemble_mode_operator(grid, 1.0, 0, 8.0 / np.cosh(grid.x) ** 2)
    rep = lowest_eigenpairs(op, 2, "even")
    assert rep.eigenvalues == sorted(rep.eigenvalues)
    assert rep.eigenvalues[1] < op.shift  # both genuinely discrete
    assert all(r < 1e-8 for r in rep.residuals)


def test_requires_positive_count(grid):
    with pytest.raises(ValueError):
        lowest_eigenpairs(_block(3.0, 1.0, grid, 0), 0, "even")
    with pytest.raises(ValueError):
        lowest_eigenpairs(_block(3.0, 1.0, grid, 0), 1, "sideways")
