"""Closed-form soliton family: values, derivatives, integrals, identities."""
import math

import numpy as np
import pytest

from linesoliton.closed_form import (
    DomainError,
    SolitonParams,
    adaptive_quad_even,
    gamma,
    identity_residuals,
    omega_p,
    psi_value,
    sech_power_integral,
    soliton_derivatives,
    soliton_domega,
    soliton_domega2,
    soliton_dx,
    soliton_dxx,
    soliton_power_integral,
    soliton_value,
)


def test_omega_p_values():
    assert omega_p(3.0) == pytest.approx(1.0 / 3.0, abs=0)
    assert omega_p(2.0) == 0.8
    assert omega_p(5.0) == 0.125


def test_omega_p_rejects_bad_p():
    with pytest.raises(DomainError):
        omega_p(1.0)
    with pytest.raises(DomainError):
        omega_p(0.5)


def test_params_constructor_guards():
    with pytest.raises(DomainError):
        SolitonParams(1.0, 1.0)
    with pytest.raises(DomainError):
        SolitonParams(3.0, 0.0)
    with pytest.raises(DomainError):
        SolitonParams(3.0, -1.0)


def test_soliton_value_examples():
    assert float(soliton_value(SolitonParams(3.0, 1.0), 0.0)) == pytest.approx(
        math.sqrt(2.0), rel=1e-15
    )
    assert float(soliton_value(SolitonParams(2.0, 1.0), 0.0)) == pytest.approx(
        1.5, rel=1e-15
    )
    # monotone decay far out
    assert float(soliton_value(SolitonParams(3.0, 1.0), 40.0)) < 1e-16


def test_scaling_relation():
    # R_omega(x) = omega^{1/(p-1)} R_1(sqrt(omega) x)
    for p in (1.5, 2.0, 3.0, 5.0):
        for omega in (0.5, 1.3):
            x = np.linspace(-10.0, 10.0, 101)
            lhs = soliton_value(SolitonParams(p, omega), x)
            rhs = omega ** (1.0 / (p - 1.0)) * soliton_value(
                SolitonParams(p, 1.0), math.sqrt(omega) * x
            )
            r0 = float(soliton_value(SolitonParams(p, omega), 0.0))
            assert np.max(np.abs(lhs - rhs)) < 1e-13 * r0


def test_decay_envelopes():
    for p in (1.5, 3.0):
        for omega in (0.5, 1.0):
            params = SolitonParams(p, omega)
            x = np.linspace(0.0, 40.0 / math.sqrt(omega), 400)
            r = soliton_value(params, x)
            env = np.exp(-math.sqrt(omega) * np.abs(x))
            lower = omega ** (1.0 / (p - 1.0)) * env
            upper = (2.0 * (p + 1.0) * omega) ** (1.0 / (p - 1.0)) * env
            mask = r > 0.0
            assert np.all(r[mask] >= lower[mask] * (1.0 - 1e-12))
            assert np.all(r[mask] <= upper[mask] * (1.0 + 1e-12))


def test_ode_residual_with_analytic_second_derivative():
    for p in (1.5, 2.0, 3.0, 5.0):
        for omega in (0.5, 1.0, 2.0):
            params = SolitonParams(p, omega)
            x = np.linspace(-8.0, 8.0, 161)
            r = soliton_value(params, x)
            res = -soliton_dxx(params, x) + omega * r - r**p
            assert np.max(np.abs(res)) < 1e-10 * float(soliton_value(params, 0.0))


def test_derivative_identities_against_finite_differences():
    params = SolitonParams(3.0, 1.0)
    x = np.linspace(-5.0, 5.0, 51)
    h = 1e-5
    up = soliton_value(SolitonParams(3.0, 1.0 + h), x)
    dn = soliton_value(SolitonParams(3.0, 1.0 - h), x)
    fd = (up - dn) / (2.0 * h)
    dw = soliton_domega(params, x)
    assert np.max(np.abs(fd - dw)) < 1e-8 * np.max(np.abs(dw))
    hx = 1e-6
    fdx = (soliton_value(params, x + hx) - soliton_value(params, x - hx)) / (2.0 * hx)
    assert np.max(np.abs(fdx - soliton_dx(params, x))) < 1e-8


def test_soliton_derivatives_pair():
    params = SolitonParams(3.0, 1.0)
    dx_val, dw_val = soliton_derivatives(params, 0.0)
    assert float(dx_val) == 0.0
    assert float(dw_val) == pytest.approx(math.sqrt(2.0) / 2.0, rel=1e-14)


def test_soliton_domega2_against_finite_difference():
    params = SolitonParams(2.5, 0.9)
    x = np.linspace(-6.0, 6.0, 61)
    h = 1e-4
    up = soliton_domega(SolitonParams(2.5, 0.9 + h), x)
    dn = soliton_domega(SolitonParams(2.5, 0.9 - h), x)
    fd = (up - dn) / (2.0 * h)
    d2 = soliton_domega2(params, x)
    assert np.max(np.abs(fd - d2)) < 1e-6 * np.max(np.abs(d2))


def test_sech_power_integral_values():
    assert sech_power_integral(2.0) == pytest.approx(2.0, rel=1e-12)
    assert sech_power_integral(4.0) == pytest.approx(4.0 / 3.0, rel=1e-12)
    assert sech_power_integral(1.0) == pytest.approx(math.pi, rel=1e-12)
    with pytest.raises(DomainError):
        sech_power_integral(0.0)


def test_gamma_oracle():
    assert gamma(0.5) == pytest.approx(math.sqrt(math.pi), rel=1e-12)
    assert gamma(5.0) == pytest.approx(24.0, rel=1e-12)
    assert gamma(1.5) == pytest.approx(0.5 * math.sqrt(math.pi), rel=1e-12)


def test_psi_normalization():
    for p in (2.0, 3.0):
        params = SolitonParams(p, omega_p(p))
        val = adaptive_quad_even(lambda x: psi_value(params, x) ** 2, 60.0)
        assert val * math.pi == pytest.approx(1.0, abs=1e-10)


def test_psi_decay_envelope():
    params = SolitonParams(3.0, 1.0 / 3.0)
    rate = 0.5 * (params.p + 1.0) * math.sqrt(params.omega)
    x = np.linspace(2.0, 30.0, 57)
    psi = psi_value(params, x)
    k = float(psi_value(params, 0.0)) * 2.0 ** ((params.p + 1.0) / (params.p - 1.0))
    assert np.all(psi <= k * np.exp(-rate * x))


def test_power_integral_example():
    # int R^4 at p=3: (16/3) omega^{3/2}
    params = SolitonParams(3.0, 1.0 / 3.0)
    val = soliton_power_integral(params, 4.0)
    assert val == pytest.approx(16.0 / (9.0 * math.sqrt(3.0)), rel=1e-12)


def test_identity_residuals_spot_values():
    res_q, res_r = identity_residuals(SolitonParams(3.0, 1.0), 3.0, 2.0)
    assert res_q < 1e-10
    assert res_r < 1e-10
    res_q, _ = identity_residuals(SolitonParams(2.0, 0.7), 1.0, 2.0)
    assert res_q < 1e-9


def test_identity_residuals_grid():
    worst = 0.0
    for p in (1.5, 2.0, 3.0, 5.0):
        for omega in (0.5, 1.0, 2.0):
            for q in (1.0, 2.5):
                for r in (1.5, 3.0):
                    rq, rr = identity_residuals(SolitonParams(p, omega), q, r)
                    worst = max(worst, rq, rr)
    assert worst < 1e-9


def test_identity_residuals_domain_boundaries():
    params = SolitonParams(3.0, 1.0)
    # q = 1 is allowed (stated boundary), r <= 1 is rejected
    identity_residuals(params, 1.0, 1.5)
    with pytest.raises(DomainError):
        identity_residuals(params, 0.5, 1.5)
    with pytest.raises(DomainError):
        identity_residuals(params, 1.0, 1.0)
