"""Acceptance checks tying the closed forms, the reduction, and the
continued branch together.

Each check_* function runs one self-contained verification and returns a
record {"name", "passed", "details"}; run_all composes them.  The same
records back the test suite and the `verify` CLI subcommand, so a passing
test run and a passing CLI run are literally the same computation.
"""
from __future__ import annotations

import math

import numpy as np

from .closed_form import (
    SolitonParams,
    adaptive_quad_even,
    identity_residuals,
    omega_p,
    psi_value,
    soliton_domega,
    soliton_power_integral,
    soliton_value,
)
from .continuation import (
    fit_even_quadratic,
    trace_branch,
    trace_trivial,
    uniqueness_probe,
    verify_decay,
)
from .fields import Grid, SymField, norm
from .reduction import Reduction
from .spectral import kernel_eigen_check, spectrum_scan, _soliton_block, lowest_eigenpairs

__all__ = ["run_all", "CHECKS"]


def _grid_for(omega_min: float, nx: int = 2049, n_modes: int = 8, L: float | None = None) -> Grid:
    if L is None:
        L = 30.0 / math.sqrt(omega_min)
    return Grid(L=L, nx=nx, n_modes=n_modes)


def check_omega_p_values() -> dict:
    """Criterion 1: omega_p at p in {2, 3, 5} equals {0.8, 1/3, 0.125} exactly."""
    expected = {2.0: 0.8, 3.0: 1.0 / 3.0, 5.0: 0.125}
    values = {p: omega_p(p) for p in expected}
    passed = all(values[p] == expected[p] for p in expected)
    return {
        "name": "omega_p_closed_form",
        "passed": passed,
        "details": {"computed": {str(p): v for p, v in values.items()}},
    }


def check_spectral_formulas(nx: int = 2049) -> dict:
    """Criterion 2: n=0 ground = -omega/omega_p, n=1 lowest even = 1 - omega/omega_p
    within 1e-6 at p=3, omega in {0.3, 1/3, 0.4}; d lambda/d omega = -1/omega_p
    within 1e-4."""
    p = 3.0
    wp = omega_p(p)
    rows = []
    worst = 0.0
    for omega in (0.3, 1.0 / 3.0, 0.4):
        grid = _grid_for(omega, nx=nx, n_modes=2)
        op0 = _soliton_block(p, omega, grid, 0)
        op1 = _soliton_block(p, omega, grid, 1)
        lam0 = lowest_eigenpairs(op0, 1, "even").eigenvalues[0]
        lam1 = lowest_eigenpairs(op1, 1, "even").eigenvalues[0]
        err0 = abs(lam0 - (-omega / wp))
        err1 = abs(lam1 - (1.0 - omega / wp))
        worst = max(worst, err0, err1)
        rows.append({"omega": omega, "lambda0": lam0, "err0": err0,
                     "lambda1": lam1, "err1": err1})
    scan = spectrum_scan(
        p, np.linspace(0.30, 0.37, 6),
        lambda omega: _grid_for(omega, nx=nx, n_modes=2),
    )[0]
    slope_err = abs(scan["slope_measured"] - scan["slope_formula"])
    passed = worst < 1e-6 and slope_err < 1e-4
    return {
        "name": "spectral_eigenvalue_formulas",
        "passed": passed,
        "details": {"rows": rows, "worst_eigenvalue_error": worst,
                    "slope_measured": scan["slope_measured"],
                    "slope_error": slope_err},
    }


def check_eigenfunction_identity(nx: int = 2049) -> dict:
    """Criterion 3: L_{omega,+,0} R^{(p+1)/2} = -(omega/omega_p) R^{(p+1)/2}
    within 1e-6 relative; odd zero mode dR/dx with |lambda| < 1e-6."""
    p, omega = 3.0, 1.0 / 3.0
    grid = _grid_for(omega, nx=nx, n_modes=2)
    rep = kernel_eigen_check(p, omega, grid)
    passed = rep["ground_residual_rel"] < 1e-6 and abs(rep["odd_zero_measured"]) < 1e-6
    return {"name": "explicit_eigenfunctions", "passed": passed, "details": rep}


def check_integral_identities() -> dict:
    """Criterion 4: relative identity residuals < 1e-9 on the (p, omega, q, r)
    grid; spot value p=3, omega=1, q=3: both sides equal 2."""
    worst = 0.0
    for p in (1.5, 2.0, 3.0, 5.0):
        for omega in (0.5, 1.0, 2.0):
            params = SolitonParams(p, omega)
            for q in (1.0, 2.0, 3.0):
                for r in (1.5, 2.0, 3.0):
                    res_q, res_r = identity_residuals(params, q, r)
                    worst = max(worst, res_q, res_r)
    params = SolitonParams(3.0, 1.0)
    q = 3.0
    lhs = adaptive_quad_even(
        lambda x: soliton_value(params, x) ** q * soliton_domega(params, x), 40.0
    )
    rhs = (
        (2.0 * q - params.p + 3.0) / (2.0 * (params.p - 1.0) * (q + 1.0))
        / params.omega * soliton_power_integral(params, q + 1.0)
    )
    spot_ok = abs(lhs - 2.0) < 1e-9 and abs(rhs - 2.0) < 1e-9
    passed = worst < 1e-9 and spot_ok
    return {
        "name": "soliton_integral_identities",
        "passed": passed,
        "details": {"worst_residual": worst, "spot_lhs": lhs, "spot_rhs": rhs},
    }


def check_auxiliary_equation(nx: int = 8193) -> dict:
    """Criterion 5: ||eta(omega,0) - (R_omega - R_{omega_p})|| < 1e-8 across
    omega in (omega_p +- 0.2 omega_p); F_par(omega, 0) = 0 within 1e-11."""
    p = 3.0
    wp = omega_p(p)
    grid = _grid_for(0.8 * wp, nx=nx)
    red = Reduction(p, grid)
    rows = []
    worst_eta, worst_fpar = 0.0, 0.0
    for f in (0.8, 0.9, 1.0, 1.1, 1.2):
        omega = f * wp
        state = red.solve_auxiliary(omega, 0.0)
        ref = soliton_value(SolitonParams(p, omega), grid.x) - red.base_profile
        diff = norm(state.eta - SymField.from_mode(grid, 0, ref))
        worst_eta = max(worst_eta, diff)
        worst_fpar = max(worst_fpar, abs(state.f_parallel))
        rows.append({"omega": omega, "eta_error": diff, "f_parallel": state.f_parallel})
    passed = worst_eta < 1e-8 and worst_fpar < 1e-11
    return {
        "name": "auxiliary_equation_eta",
        "passed": passed,
        "details": {"rows": rows, "worst_eta_error": worst_eta,
                    "worst_f_parallel": worst_fpar},
    }


def check_derivative_formulas(nx: int = 2049) -> dict:
    """Criterion 6: analytic derivative bundles vs finite-difference oracles,
    relative 1e-6 (order 1), 1e-4 (order 2), 1e-3 (order 3)."""
    p = 3.0
    wp = omega_p(p)
    grid = _grid_for(0.8 * wp, nx=nx)
    red = Reduction(p, grid)
    w0, a0 = 1.05 * wp, 0.05
    state = red.solve_auxiliary(w0, a0)
    bundle = red.phi_derivatives(state, 3)
    scalars = red.fpar_derivatives(state, 3, bundle)

    def solve(w, a):
        return red.solve_auxiliary(w, a, warm_start=state.eta)

    def rel_f(x, y):
        return norm(x - y) / max(norm(y), 1e-30)

    def rel_s(x, y):
        return abs(x - y) / max(abs(y), 1e-30)

    # first and second order: step 1e-4 keeps the h^2 truncation below target
    h = 1e-4
    st = {
        (1, 0): solve(w0 + h, a0), (-1, 0): solve(w0 - h, a0),
        (0, 1): solve(w0, a0 + h), (0, -1): solve(w0, a0 - h),
        (1, 1): solve(w0 + h, a0 + h), (1, -1): solve(w0 + h, a0 - h),
        (-1, 1): solve(w0 - h, a0 + h), (-1, -1): solve(w0 - h, a0 - h),
    }
    phi = {k: s.phi for k, s in st.items()}
    fpr = {k: s.f_parallel for k, s in st.items()}
    errs = {
        "dw_phi": rel_f((phi[1, 0] - phi[-1, 0]) * (0.5 / h), bundle.dw_phi),
        "da_phi": rel_f((phi[0, 1] - phi[0, -1]) * (0.5 / h), bundle.da_phi),
        "dw2_phi": rel_f((phi[1, 0] - 2.0 * state.phi + phi[-1, 0]) * (1.0 / h**2),
                         bundle.dw2_phi),
        "da2_phi": rel_f((phi[0, 1] - 2.0 * state.phi + phi[0, -1]) * (1.0 / h**2),
                         bundle.da2_phi),
        "dwda_phi": rel_f((phi[1, 1] - phi[1, -1] - phi[-1, 1] + phi[-1, -1])
                          * (0.25 / h**2), bundle.dwda_phi),
        "dw_fpar": rel_s((fpr[1, 0] - fpr[-1, 0]) / (2 * h), scalars.dw_fpar),
        "da_fpar": rel_s((fpr[0, 1] - fpr[0, -1]) / (2 * h), scalars.da_fpar),
        "dw2_fpar": rel_s((fpr[1, 0] - 2 * state.f_parallel + fpr[-1, 0]) / h**2,
                          scalars.dw2_fpar),
        "da2_fpar": rel_s((fpr[0, 1] - 2 * state.f_parallel + fpr[0, -1]) / h**2,
                          scalars.da2_fpar),
        "dwda_fpar": rel_s((fpr[1, 1] - fpr[1, -1] - fpr[-1, 1] + fpr[-1, -1])
                           / (4 * h * h), scalars.dwda_fpar),
    }
    # third order: wider step, the aux solves only resolve ~1e-12 and the
    # difference quotient divides by h^3
    h = 2e-3
    st3 = {
        (2, 0): solve(w0 + 2 * h, a0), (-2, 0): solve(w0 - 2 * h, a0),
        (0, 2): solve(w0, a0 + 2 * h), (0, -2): solve(w0, a0 - 2 * h),
        (1, 0): solve(w0 + h, a0), (-1, 0): solve(w0 - h, a0),
        (0, 1): solve(w0, a0 + h), (0, -1): solve(w0, a0 - h),
        (1, 1): solve(w0 + h, a0 + h), (1, -1): solve(w0 + h, a0 - h),
        (-1, 1): solve(w0 - h, a0 + h), (-1, -1): solve(w0 - h, a0 - h),
    }
    phi = {k: s.phi for k, s in st3.items()}
    fpr = {k: s.f_parallel for k, s in st3.items()}
    c3 = 1.0 / (2.0 * h**3)
    errs.update({
        "dw3_phi": rel_f((phi[2, 0] - 2.0 * phi[1, 0] + 2.0 * phi[-1, 0] - phi[-2, 0]) * c3,
                         bundle.dw3_phi),
        "da3_phi": rel_f((phi[0, 2] - 2.0 * phi[0, 1] + 2.0 * phi[0, -1] - phi[0, -2]) * c3,
                         bundle.da3_phi),
        "dwda2_phi": rel_f(((phi[1, 1] - 2.0 * phi[1, 0] + phi[1, -1])
                            - (phi[-1, 1] - 2.0 * phi[-1, 0] + phi[-1, -1])) * c3,
                           bundle.dwda2_phi),
        "dw2da_phi": rel_f(((phi[1, 1] - 2.0 * phi[0, 1] + phi[-1, 1])
                            - (phi[1, -1] - 2.0 * phi[0, -1] + phi[-1, -1])) * c3,
                           bundle.dw2da_phi),
        "dw3_fpar": rel_s((fpr[2, 0] - 2 * fpr[1, 0] + 2 * fpr[-1, 0] - fpr[-2, 0]) * c3,
                          scalars.dw3_fpar),
        "da3_fpar": rel_s((fpr[0, 2] - 2 * fpr[0, 1] + 2 * fpr[0, -1] - fpr[0, -2]) * c3,
                          scalars.da3_fpar),
        "dwda2_fpar": rel_s(((fpr[1, 1] - 2 * fpr[1, 0] + fpr[1, -1])
                             - (fpr[-1, 1] - 2 * fpr[-1, 0] + fpr[-1, -1])) * c3,
                            scalars.dwda2_fpar),
        "dw2da_fpar": rel_s(((fpr[1, 1] - 2 * fpr[0, 1] + fpr[-1, 1])
                             - (fpr[1, -1] - 2 * fpr[0, -1] + fpr[-1, -1])) * c3,
                            scalars.dw2da_fpar),
    })
    tol = {1: 1e-6, 2: 1e-4, 3: 1e-3}
    order_of = {
        "dw_phi": 1, "da_phi": 1, "dw_fpar": 1, "da_fpar": 1,
        "dw2_phi": 2, "da2_phi": 2, "dwda_phi": 2,
        "dw2_fpar": 2, "da2_fpar": 2, "dwda_fpar": 2,
        "dw3_phi": 3, "da3_phi": 3, "dwda2_phi": 3, "dw2da_phi": 3,
        "dw3_fpar": 3, "da3_fpar": 3, "dwda2_fpar": 3, "dw2da_fpar": 3,
    }
    failures = [k for k, e in errs.items() if e >= tol[order_of[k]]]
    return {
        "name": "derivative_formula_oracles",
        "passed": not failures,
        "details": {"relative_errors": errs, "failures": failures},
    }


def check_g_function(nx: int = 8193) -> dict:
    """Criterion 7: g(omega_p,0) = 0 +- 1e-9, da g = 0 +- 1e-6,
    dw g = -1/omega_p +- 1e-4 (p=3: -3)."""
    p = 3.0
    wp = omega_p(p)
    grid = _grid_for(0.8 * wp, nx=nx)
    red = Reduction(p, grid)
    g, da_g, dw_g = red.g_value_and_derivs(wp, 0.0)
    passed = abs(g) < 1e-9 and abs(da_g) < 1e-6 and abs(dw_g + 1.0 / wp) < 1e-4
    return {
        "name": "reduced_function_values",
        "passed": passed,
        "details": {"g": g, "da_g": da_g, "dw_g": dw_g, "dw_g_target": -1.0 / wp},
    }


def check_pitchfork_coefficient(nx_routes: int = 4097, nx_branch: int = 1025,
                                p_list=(1.5, 2.0, 3.0, 5.0)) -> dict:
    """Criterion 8: direct formula vs (omega_p/3) da^3 F_par agree to 1e-6
    relative; both match the continued-branch quadratic fit to 1e-2, for
    p in {1.5, 2, 3, 5}."""
    rows = []
    passed = True
    for p in p_list:
        wp = omega_p(p)
        grid_r = _grid_for(wp, nx=nx_routes)
        red = Reduction(p, grid_r)
        pf = red.pitchfork_coefficient()
        grid_b = _grid_for(wp, nx=nx_branch)
        branch = trace_branch(p, 0.2, 16, grid_b)
        a = branch.amplitudes()
        om = branch.omegas()
        sel = np.abs(a) <= 0.05 + 1e-12
        _, c2 = fit_even_quadratic(a[sel], om[sel])
        fit_rel = abs(2.0 * c2 - pf["omega2_direct"]) / abs(pf["omega2_direct"])
        ok = pf["discrepancy_rel"] < 1e-6 and fit_rel < 1e-2
        passed = passed and ok
        rows.append({
            "p": p,
            "omega2_direct": pf["omega2_direct"],
            "omega2_via_d3F": pf["omega2_via_d3F"],
            "route_discrepancy_rel": pf["discrepancy_rel"],
            "omega2_branch_fit": 2.0 * c2,
            "fit_rel_error": fit_rel,
            "passed": ok,
        })
    return {"name": "pitchfork_coefficient_routes", "passed": passed,
            "details": {"rows": rows}}


def check_branch_structure(nx: int = 1025, n_modes: int = 6, n_trials: int = 100,
                           seed: int = 0) -> dict:
    """Criterion 9: omega(a) even to 1e-9; Q(a)(x,y) = Q(-a)(x,y+pi) to 1e-9;
    Q(a) > 0; uniqueness_probe classifies all converged zeros onto the two
    curves."""
    p = 3.0
    wp = omega_p(p)
    grid = _grid_for(wp, nx=nx, n_modes=n_modes)
    # the wide trace must cover every amplitude the probe can land on:
    # omega up to 1.1 omega_p puts the pitchfork amplitude near 0.66
    branch = trace_branch(p, 0.75, 25, grid)
    a = branch.amplitudes()
    order = np.argsort(a)
    pts = [branch.points[i] for i in order]
    evenness = max(
        abs(pts[i].omega - pts[len(pts) - 1 - i].omega) for i in range(len(pts) // 2)
    )
    shift_sym = max(
        norm(pts[i].field.shift_half_period() - pts[len(pts) - 1 - i].field)
        for i in range(len(pts) // 2)
    )
    min_field = min(pt.min_field for pt in branch.points)
    probe = uniqueness_probe(p, n_trials, 0.05, grid, branch, seed=seed)
    counts = probe["counts"]
    all_classified = counts["unclassified"] == 0 and counts["nonconverged"] == 0
    passed = (evenness < 1e-9 and shift_sym < 1e-9 and min_field > 0.0
              and all_classified)
    return {
        "name": "branch_structure_and_uniqueness",
        "passed": passed,
        "details": {"omega_evenness": evenness, "shift_symmetry": shift_sym,
                    "min_field": min_field, "probe_counts": counts},
    }


def check_mass_expansion(nx: int = 2049) -> dict:
    """Criterion 10: fitted a^2 mass coefficient matches
    mass_expansion_coefficient within 2%; constant term at p=3 equals
    pi 4/sqrt(3) within 1e-6 relative."""
    p = 3.0
    wp = omega_p(p)
    grid = _grid_for(wp, nx=nx)
    branch = trace_branch(p, 0.2, 16, grid)
    a = branch.amplitudes()
    ms = branch.masses()
    sel = np.abs(a) <= 0.05 + 1e-12
    _, m2_fit = fit_even_quadratic(a[sel], ms[sel])
    red = Reduction(p, grid)
    me = red.mass_expansion_coefficient()
    m2_rel = abs(m2_fit - me["mass2"]) / abs(me["mass2"])
    const_target = math.pi * 4.0 / math.sqrt(3.0)
    const_rel = abs(me["constant_mass"] - const_target) / const_target
    passed = m2_rel < 0.02 and const_rel < 1e-6
    return {
        "name": "mass_expansion",
        "passed": passed,
        "details": {"mass2_fit": m2_fit, "mass2_formula": me["mass2"],
                    "mass2_rel_error": m2_rel,
                    "constant_mass": me["constant_mass"],
                    "constant_rel_error": const_rel},
    }


def check_decay_rates(nx: int = 2049) -> dict:
    """Criterion 11: fitted x-decay rates of R_omega, psi, and Q(a) within
    epsilon = 0.05 sqrt(omega) of the predicted rates."""
    p = 3.0
    wp = omega_p(p)
    checks = []
    # trivial branch point at omega = 1: rate -> 1.0
    grid1 = _grid_for(1.0, nx=nx, n_modes=2)
    triv = trace_trivial(p, [1.0], grid1).points[0]
    rep1 = verify_decay(triv, grid1, p, 0.05)
    checks.append({"point": "trivial_omega_1", "report": rep1})
    # bifurcating point at small a, with the reduction derivative fields
    grid = _grid_for(wp, nx=nx)
    branch = trace_branch(p, 0.2, 12, grid)
    pt = max(branch.points, key=lambda q: q.a)
    red = Reduction(p, grid)
    state = red.solve_auxiliary(pt.omega, pt.a)
    bundle = red.phi_derivatives(state, 1)
    rep2 = verify_decay(pt, grid, p, 0.05 * math.sqrt(pt.omega),
                        da_field=bundle.da_phi, dw_field=bundle.dw_phi)
    checks.append({"point": "bifurcating_max_a", "report": rep2})
    # psi at omega_p: rate (p+1)/2 sqrt(omega_p), fitted directly
    from .continuation import _fit_rate
    psi = psi_value(SolitonParams(p, wp), grid.x)
    rate = _fit_rate(grid.x, psi, grid.L / 3.0, 2.0 * grid.L / 3.0)
    psi_target = 0.5 * (p + 1.0) * math.sqrt(wp)
    eps = 0.05 * math.sqrt(wp)
    psi_ok = rate is not None and abs(rate - psi_target) < eps
    checks.append({"point": "psi_profile", "fitted_rate": rate,
                   "target": psi_target, "passed": psi_ok})
    passed = rep1["all_pass"] and rep2["all_pass"] and psi_ok
    return {"name": "exponential_decay_rates", "passed": passed,
            "details": {"checks": checks}}


def check_determinism() -> dict:
    """Criterion 12: one config, two runs, bit-identical serialized results.

    Runs a representative slice of the pipeline (spectral solve with seeded
    start, auxiliary Newton, coefficient formulas) twice and compares the
    serialized records byte for byte.
    """
    from .cli import dumps_canonical

    def slice_run() -> dict:
        p = 3.0
        wp = omega_p(p)
        grid = _grid_for(wp, nx=513, n_modes=4)
        red = Reduction(p, grid)
        state = red.solve_auxiliary(1.05 * wp, 0.03)
        pf = red.pitchfork_coefficient()
        rep = kernel_eigen_check(p, wp, grid)
        return {
            "aux_residual": state.aux_residual,
            "f_parallel": state.f_parallel,
            "omega2_direct": pf["omega2_direct"],
            "omega2_via_d3F": pf["omega2_via_d3F"],
            "ground_measured": rep["ground_measured"],
        }

    first = dumps_canonical(slice_run())
    second = dumps_canonical(slice_run())
    passed = first == second
    return {"name": "determinism", "passed": passed,
            "details": {"bytes": len(first), "identical": passed}}


CHECKS = [
    check_omega_p_values,
    check_spectral_formulas,
    check_eigenfunction_identity,
    check_integral_identities,
    check_auxiliary_equation,
    check_derivative_formulas,
    check_g_function,
    check_pitchfork_coefficient,
    check_branch_structure,
    check_mass_expansion,
    check_decay_rates,
    check_determinism,
]


def run_all(progress=None, p_list=None) -> list[dict]:
    """Run the full acceptance suite; returns the twelve records in order.

    p_list widens only the pitchfork cross-check (criterion 8); the other
    criteria are pinned to the exponents their tolerances were stated for.
    """
    records = []
    for i, fn in enumerate(CHECKS, start=1):
        if fn is check_pitchfork_coefficient and p_list is not None:
            rec = fn(p_list=tuple(p_list))
        else:
            rec = fn()
        rec["criterion"] = i
        records.append(rec)
        if progress is not None:
            progress(rec)
    return records
