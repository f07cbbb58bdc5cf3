"""Field discretization: grids, inner products, F, linearizations, solvers."""
import math

import numpy as np
import pytest

from linesoliton.closed_form import SolitonParams, omega_p, psi_value, soliton_value
from linesoliton.fields import (
    EvenLU,
    Grid,
    SymField,
    apply_F,
    assemble_jacobian,
    assemble_linearized,
    inner_product,
    load_field,
    norm,
    save_field,
)


@pytest.fixture(scope="module")
def grid():
    return Grid(L=30.0, nx=1025, n_modes=4)


def _soliton_field(grid, p, omega):
    return SymField.from_mode(grid, 0, soliton_value(SolitonParams(p, omega), grid.x))


def _kernel_field(grid, p, omega):
    return SymField.from_mode(grid, 1, psi_value(SolitonParams(p, omega), grid.x))


def test_grid_invariants(grid):
    assert grid.nx % 2 == 1
    assert grid.x[grid.nx // 2] == 0.0
    assert grid.dx == pytest.approx(2.0 * grid.L / (grid.nx - 1))
    assert grid.n_colloc >= 3 * grid.n_modes


def test_inner_product_examples(grid):
    p = 3.0
    wp = omega_p(p)
    k = _kernel_field(grid, p, wp)
    assert inner_product(k, k) == pytest.approx(1.0, abs=1e-8)
    r = _soliton_field(grid, p, wp)
    assert inner_product(r, k) == 0.0
    # <R, R> = 2 pi int R^2 = 2 pi 4 sqrt(omega_p) at p=3
    assert inner_product(r, r) == pytest.approx(
        2.0 * math.pi * 4.0 / math.sqrt(3.0), rel=1e-10
    )


def test_inner_product_grid_mismatch(grid):
    other = Grid(L=30.0, nx=513, n_modes=4)
    with pytest.raises(ValueError):
        inner_product(SymField.zeros(grid), SymField.zeros(other))


def test_apply_F_zero_and_soliton(grid):
    p, omega = 3.0, 1.0
    assert norm(apply_F(grid, p, omega, SymField.zeros(grid))) == 0.0
    # the 1e-8 relative residual needs the fine grid (4th-order stencil)
    fine = Grid(L=30.0, nx=8193, n_modes=2)
    u = _soliton_field(fine, p, omega)
    assert norm(apply_F(fine, p, omega, u)) < 1e-8 * norm(u)


def test_apply_F_fourth_order_convergence():
    p, omega = 3.0, 1.0
    res = []
    for nx in (257, 513, 1025):
        g = Grid(L=30.0, nx=nx, n_modes=2)
        u = _soliton_field(g, p, omega)
        res.append(norm(apply_F(g, p, omega, u)))
    assert res[0] / res[1] > 12.0
    assert res[1] / res[2] > 12.0


def test_kernel_mode_quadratic_response():
    p = 3.0
    wp = omega_p(p)
    g = Grid(L=30.0 / math.sqrt(wp), nx=2049, n_modes=4)
    r = _soliton_field(g, p, wp)
    k = _kernel_field(g, p, wp)
    # deltas large enough that the O(delta^2) response dominates the
    # discretization residual of the sampled soliton (~3e-7)
    res = []
    for delta in (0.08, 0.04, 0.02):
        res.append(norm(apply_F(g, p, wp, r + delta * k)))
    slope = math.log(res[0] / res[2]) / math.log(4.0)
    assert slope == pytest.approx(2.0, abs=0.05)


def test_linearized_symmetry_and_annihilation(grid):
    p, omega = 3.0, 1.0
    base = _soliton_field(grid, p, omega)
    ops = assemble_linearized(grid, p, omega, base, "one_times")
    r_prof = base.coeffs[0]
    assert np.linalg.norm(ops[0].apply(r_prof)) < 1e-5 * np.linalg.norm(r_prof)
    rng = np.random.default_rng(0)
    op = assemble_linearized(grid, p, omega, base, "p_times")[1]
    v, w = rng.standard_normal(grid.nx), rng.standard_normal(grid.nx)
    assert abs(np.dot(op.apply(v), w) - np.dot(v, op.apply(w))) < 1e-13 * (
        np.linalg.norm(v) * np.linalg.norm(w)
    )


def test_positivity_guard_for_small_p(grid):
    base = SymField.zeros(grid)  # zero base is not positive
    with pytest.raises(Exception):
        assemble_linearized(grid, 1.5, 1.0, base, "p_times")


def test_mode_decoupling(grid):
    p, omega = 3.0, 1.0
    base = _soliton_field(grid, p, omega)
    ops = assemble_linearized(grid, p, omega, base, "p_times")
    single = SymField.from_mode(grid, 2, np.exp(-grid.x**2))
    out = SymField(grid, np.vstack([
        op.apply(single.coeffs[n]) for n, op in enumerate(ops)
    ]))
    for n in range(grid.n_modes):
        if n != 2:
            assert np.linalg.norm(out.coeffs[n]) == 0.0


def test_jacobian_matches_directional_derivative(grid):
    p, omega = 3.0, 0.9
    rng = np.random.default_rng(1)
    u = _soliton_field(grid, p, omega) + 0.05 * SymField(
        grid, rng.standard_normal((grid.n_modes, grid.nx))
        * np.exp(-(grid.x / 5.0) ** 2)
    )
    u = u.symmetrized()
    v = SymField(
        grid, rng.standard_normal((grid.n_modes, grid.nx))
        * np.exp(-(grid.x / 5.0) ** 2)
    ).symmetrized()
    jac = assemble_jacobian(grid, p, omega, u)
    h = 1e-6
    fd = (apply_F(grid, p, omega, u + h * v).vector()
          - apply_F(grid, p, omega, u + (-h) * v).vector()) / (2.0 * h)
    jv = jac @ v.vector()
    assert np.linalg.norm(fd - jv) < 1e-7 * np.linalg.norm(jv)


def test_even_lu_solves_bordered_system(grid):
    p = 3.0
    wp = omega_p(p)
    u = _soliton_field(grid, p, wp)
    k = _kernel_field(grid, p, wp)
    jac = assemble_jacobian(grid, p, wp, u)
    k_vec = k.vector()
    k_dual = grid.wvec * k_vec
    lu = EvenLU(jac, grid, border_col=k_vec, border_row=k_dual)
    rng = np.random.default_rng(2)
    b = SymField(
        grid, rng.standard_normal((grid.n_modes, grid.nx))
        * np.exp(-(grid.x / 4.0) ** 2)
    ).symmetrized().vector()
    rhs = np.concatenate([b, [0.7]])
    sol = lu.solve(rhs)
    assert np.linalg.norm(jac @ sol[:-1] + k_vec * sol[-1] - b) < 1e-9
    assert abs(k_dual @ sol[:-1] - 0.7) < 1e-12


def test_shift_half_period_signs(grid):
    f = SymField(grid, np.ones((grid.n_modes, grid.nx)))
    g = f.shift_half_period()
    for n in range(grid.n_modes):
        expected = 1.0 if n % 2 == 0 else -1.0
        assert np.all(g.coeffs[n] == expected)


def test_save_load_round_trip(tmp_path, grid):
    rng = np.random.default_rng(3)
    f = SymField(
        grid, rng.standard_normal((grid.n_modes, grid.nx))
    ).symmetrized()
    path = tmp_path / "field.csv"
    save_field(path, f, meta={"p": 3.0})
    g, header = load_field(path)
    assert header["p"] == 3.0
    assert np.array_equal(f.coeffs, g.coeffs)
