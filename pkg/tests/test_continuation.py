"""Newton continuation: branch structure, symmetry, fits, probes, decay."""
import math

import numpy as np
import pytest

from linesoliton.closed_form import SolitonParams, omega_p, soliton_value
from linesoliton.continuation import (
    fit_even_quadratic,
    newton_full,
    trace_branch,
    trace_trivial,
    uniqueness_probe,
    verify_decay,
)
from linesoliton.fields import Grid, SymField, norm
from linesoliton.reduction import Reduction


P = 3.0
WP = omega_p(P)


@pytest.fixture(scope="module")
def grid():
    return Grid(L=30.0 / math.sqrt(WP), nx=1025, n_modes=6)


@pytest.fixture(scope="module")
def branch(grid):
    return trace_branch(P, 0.2, 12, grid)


def test_newton_full_from_analytic_start(grid):
    # the first continuation step: predictor R + a k at a = 0.05; at a = 0
    # the mode blocks decouple and the bordered matrix is singular, so the
    # amplitude parametrization only applies off the trivial branch
    from linesoliton.continuation import _kernel_field

    a = 0.05
    r = SymField.from_mode(grid, 0, soliton_value(SolitonParams(P, WP), grid.x))
    u0 = r + a * _kernel_field(P, grid)
    pt = newton_full(P, a, (WP, u0), grid)
    assert pt.residual < 1e-8
    assert pt.omega > WP  # supercritical pitchfork
    assert pt.omega == pytest.approx(WP, abs=1e-3)


def test_branch_constraint_and_residuals(branch, grid):
    from linesoliton.continuation import _kernel_field

    k_dual = grid.wvec * _kernel_field(P, grid).vector()
    for pt in branch.points:
        # the analytic origin carries the sampled-soliton discretization
        # residual (~5e-6 at nx=1025); Newton-refined points sit far below
        assert pt.residual < 1e-5
        assert float(np.dot(k_dual, pt.field.vector())) == pytest.approx(
            pt.a, abs=1e-8
        )


def test_omega_even_in_a(branch):
    a = branch.amplitudes()
    om = branch.omegas()
    order = np.argsort(a)
    a, om = a[order], om[order]
    for i in range(len(a) // 2):
        assert a[i] == pytest.approx(-a[len(a) - 1 - i], abs=1e-12)
        assert abs(om[i] - om[len(a) - 1 - i]) < 1e-9


def test_half_period_shift_symmetry(branch):
    pts = sorted(branch.points, key=lambda q: q.a)
    for i in range(len(pts) // 2):
        diff = norm(pts[i].field.shift_half_period() - pts[len(pts) - 1 - i].field)
        assert diff < 1e-9


def test_branch_positivity(branch):
    assert all(pt.min_field > 0.0 for pt in branch.points)
    assert not any(pt.positivity_warning for pt in branch.points)


def test_restart_reproduces_downstream(branch, grid):
    pts = sorted(branch.points, key=lambda q: q.a)
    mid = pts[len(pts) // 2 + 2]
    nxt = pts[len(pts) // 2 + 3]
    re_pt = newton_full(P, nxt.a, (mid.omega, mid.field), grid)
    assert abs(re_pt.omega - nxt.omega) < 1e-8
    assert norm(re_pt.field - nxt.field) < 1e-8


def test_quadratic_fit_against_formula(branch, grid):
    a = branch.amplitudes()
    om = branch.omegas()
    sel = np.abs(a) <= 0.05 + 1e-12
    c0, c2 = fit_even_quadratic(a[sel], om[sel])
    assert c0 == pytest.approx(WP, abs=1e-6)
    red = Reduction(P, grid)
    w2 = red.pitchfork_coefficient()["omega2_direct"]
    assert 2.0 * c2 == pytest.approx(w2, rel=1e-2)


def test_trivial_branch(grid):
    br = trace_trivial(P, [0.3, WP, 0.4], grid)
    assert [pt.a for pt in br.points] == [0.0, 0.0, 0.0]
    assert all(pt.residual < 1e-5 for pt in br.points)
    assert br.kind == "trivial"


def test_uniqueness_probe_classifies_all(grid):
    wide = trace_branch(P, 0.75, 25, grid)
    report = uniqueness_probe(P, 30, 0.05, grid, wide, seed=7)
    counts = report["counts"]
    assert counts["unclassified"] == 0
    assert counts["nonconverged"] == 0
    assert counts["trivial"] + counts["bifurcating"] == 30


def test_uniqueness_probe_zero_perturbation(grid):
    wide = trace_branch(P, 0.3, 8, grid)
    report = uniqueness_probe(P, 5, 0.0, grid, wide, seed=3)
    assert report["counts"]["trivial"] == 5


def test_verify_decay_on_branch_point(branch, grid):
    pt = max(branch.points, key=lambda q: q.a)
    rep = verify_decay(pt, grid, P, 0.05 * math.sqrt(pt.omega))
    assert rep["all_pass"]
    names = [c["name"] for c in rep["checks"]]
    assert "mode0_profile" in names and "kernel_mode_profile" in names


def test_verify_decay_trivial_omega_one():
    g = Grid(L=30.0, nx=1025, n_modes=2)
    pt = trace_trivial(P, [1.0], g).points[0]
    rep = verify_decay(pt, g, P, 0.05)
    check = rep["checks"][0]
    assert check["status"] == "pass"
    assert check["fitted_rate"] == pytest.approx(1.0, abs=0.05)
