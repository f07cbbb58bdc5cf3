"""Lyapunov-Schmidt reduction: auxiliary solves, T-inverse, derivatives,
bifurcation coefficients."""
import math

import numpy as np
import pytest

from linesoliton.closed_form import (
    SolitonParams,
    omega_p,
    soliton_domega,
    soliton_value,
)
from linesoliton.fields import Grid, SymField, inner_product, norm
from linesoliton.reduction import Reduction


P = 3.0
WP = omega_p(P)


@pytest.fixture(scope="module")
def red():
    grid = Grid(L=30.0 / math.sqrt(0.8 * WP), nx=2049, n_modes=8)
    return Reduction(P, grid)


def test_project_perp(red):
    grid = red.grid
    assert norm(red.project_perp(red.kernel)) < 1e-12
    r = SymField.from_mode(grid, 0, red.base_profile)
    assert norm(red.project_perp(r) - r) == 0.0
    rng = np.random.default_rng(0)
    f = SymField(
        grid, rng.standard_normal((grid.n_modes, grid.nx))
        * np.exp(-(grid.x / 5.0) ** 2)
    ).symmetrized()
    once = red.project_perp(f)
    twice = red.project_perp(once)
    assert norm(twice - once) < 1e-13 * max(norm(once), 1.0)


def test_auxiliary_at_bifurcation_point(red):
    state = red.solve_auxiliary(WP, 0.0)
    assert norm(state.eta) < 1e-6
    assert abs(state.f_parallel) < 1e-11
    assert state.aux_residual < 1e-10


def test_auxiliary_matches_soliton_family(red):
    # eta(omega, 0) = R_omega - R_{omega_p}
    grid = red.grid
    for f in (0.85, 1.15):
        omega = f * WP
        state = red.solve_auxiliary(omega, 0.0)
        ref = soliton_value(SolitonParams(P, omega), grid.x) - red.base_profile
        diff = norm(state.eta - SymField.from_mode(grid, 0, ref))
        assert diff < 5e-6  # discretization floor of the default grid
        assert abs(state.f_parallel) < 1e-11


def test_state_invariants(red):
    state = red.solve_auxiliary(1.05 * WP, 0.04)
    assert abs(red.kernel_amplitude(state.eta)) < 1e-12
    assert inner_product(state.phi, red.kernel) == pytest.approx(0.04, abs=1e-10)
    # phi stays positive in the validity neighborhood
    assert np.min(state.phi.coeffs[0]) > -1e-12


def test_f_parallel_odd_in_a(red):
    sp = red.solve_auxiliary(1.05 * WP, 0.05)
    sm = red.solve_auxiliary(1.05 * WP, -0.05)
    assert sp.f_parallel == pytest.approx(-sm.f_parallel, rel=1e-8)


def test_solve_T_inverts_on_soliton(red):
    grid = red.grid
    state = red.solve_auxiliary(WP, 0.0)
    rhs = SymField.from_mode(grid, 0, red.base_profile)
    sol = red.solve_T(state, rhs)
    ref = SymField.from_mode(grid, 0, soliton_domega(red.params_p, grid.x))
    assert norm(sol + red.project_perp(ref)) < 1e-5


def test_solve_T_round_trip(red):
    grid = red.grid
    state = red.solve_auxiliary(WP, 0.0)
    rng = np.random.default_rng(1)
    b = SymField(
        grid, rng.standard_normal((grid.n_modes, grid.nx))
        * np.exp(-(grid.x / 4.0) ** 2)
    ).symmetrized()
    x = red.solve_T(state, b)
    assert abs(red.kernel_amplitude(x)) < 1e-10
    back = red.project_perp(red.apply_L_plus(state, x))
    target = red.project_perp(b)
    assert norm(back - target) < 1e-9 * max(norm(target), 1.0)


def test_first_derivatives_at_bifurcation(red):
    state = red.solve_auxiliary(WP, 0.0)
    bundle = red.phi_derivatives(state, 1)
    # da phi = kernel mode, dw phi = d_omega R at (omega_p, 0)
    assert norm(bundle.da_phi - red.kernel) < 1e-6
    ref = SymField.from_mode(red.grid, 0, soliton_domega(red.params_p, red.grid.x))
    assert norm(bundle.dw_phi - ref) < 1e-5


def test_higher_derivatives_in_X2(red):
    state = red.solve_auxiliary(1.05 * WP, 0.05)
    bundle = red.phi_derivatives(state, 3)
    for f in (bundle.da2_phi, bundle.dwda_phi, bundle.dw2_phi,
              bundle.da3_phi, bundle.dwda2_phi, bundle.dw2da_phi, bundle.dw3_phi):
        assert abs(red.kernel_amplitude(f)) < 1e-10 * max(norm(f), 1.0)


def test_second_derivative_against_finite_difference(red):
    state = red.solve_auxiliary(1.05 * WP, 0.05)
    bundle = red.phi_derivatives(state, 2)
    h = 1e-4
    up = red.solve_auxiliary(1.05 * WP, 0.05 + h, warm_start=state.eta).phi
    dn = red.solve_auxiliary(1.05 * WP, 0.05 - h, warm_start=state.eta).phi
    fd = (up - 2.0 * state.phi + dn) * (1.0 / h**2)
    assert norm(fd - bundle.da2_phi) < 1e-4 * norm(bundle.da2_phi)


def test_g_values_at_bifurcation(red):
    g, da_g, dw_g = red.g_value_and_derivs(WP, 0.0)
    assert abs(g) < 1e-6  # discretization floor of the default grid
    assert abs(da_g) < 1e-6
    assert dw_g == pytest.approx(-1.0 / WP, abs=1e-4)


def test_g_at_nonzero_a_consistent_with_f_parallel(red):
    a = 0.06
    state = red.solve_auxiliary(1.05 * WP, a)
    g, _, _ = red.g_value_and_derivs(1.05 * WP, a)
    assert g == pytest.approx(state.f_parallel / a, rel=1e-10)


def test_pitchfork_routes_agree(red):
    pf = red.pitchfork_coefficient()
    assert pf["discrepancy_rel"] < 1e-6
    assert pf["omega2_direct"] > 0.0  # branch opens toward omega > omega_p


def test_mass_coefficient_p5_exact():
    grid = Grid(L=30.0 / math.sqrt(omega_p(5.0)), nx=513, n_modes=4)
    red5 = Reduction(5.0, grid)
    me = red5.mass_expansion_coefficient(omega2=-0.115)
    assert me["mass2"] == -8.0  # (5-p) factor vanishes, leaving -1/omega_p
    assert me["factor"] == 0.0


def test_mass_constant_closed_form(red):
    me = red.mass_expansion_coefficient(omega2=0.1514)
    assert me["constant_mass"] == pytest.approx(
        math.pi * 4.0 / math.sqrt(3.0), rel=1e-12
    )
