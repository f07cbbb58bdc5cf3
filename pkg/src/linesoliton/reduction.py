"""Lyapunov-Schmidt reduction at the line-soliton pitchfork.

Splits F(omega, u) = 0 around (omega_p, R_{omega_p}) along the kernel mode
k = psi cos y: the auxiliary equation P_perp F(omega, R + a k + h) = 0 is
solved for h = eta(omega, a) in X_2, and the scalar bifurcation function
F_par(omega, a) = <F(omega, phi), k> carries the pitchfork.  All derivative
fields of phi and F_par through third order come from the analytic formulas
(right-hand sides assembled from V_k = p(p-1)...(p-k+1) phi^{p-k} and lower
derivatives, one constrained T-solve each); finite differencing is used only
by the test oracles.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .closed_form import (
    SolitonParams,
    omega_p,
    psi_value,
    soliton_power_integral,
    soliton_value,
)
from .fields import (
    Grid,
    EvenLU,
    PositivityError,
    SymField,
    apply_F,
    assemble_jacobian,
    from_collocation,
    inner_product,
    norm,
    to_collocation,
)

__all__ = [
    "AuxiliarySolveError",
    "Reduction",
    "LSState",
    "DerivativeBundle",
]

_V_FLOOR = 1e-280


class AuxiliarySolveError(RuntimeError):
    def __init__(self, message: str, residual_history: list[float]):
        super().__init__(message)
        self.residual_history = residual_history


@dataclass
class LSState:
    """Converged point (omega, a) of the auxiliary equation."""

    omega: float
    a: float
    eta: SymField
    phi: SymField
    aux_residual: float
    f_parallel: float
    newton_iters: int
    # E(omega, a) = F_par(omega, a) k is diagnosed by its scalar coefficient
    E_diag: float = 0.0
    _jacobian: sp.csc_matrix | None = field(default=None, repr=False)
    _bordered_lu: object = field(default=None, repr=False)


@dataclass
class DerivativeBundle:
    """Analytic derivative fields of phi and scalars of F_par at one state."""

    order: int
    da_phi: SymField
    dw_phi: SymField
    da2_phi: SymField | None = None
    dwda_phi: SymField | None = None
    dw2_phi: SymField | None = None
    da3_phi: SymField | None = None
    dwda2_phi: SymField | None = None
    dw2da_phi: SymField | None = None
    dw3_phi: SymField | None = None
    da_fpar: float = 0.0
    dw_fpar: float = 0.0
    da2_fpar: float | None = None
    dwda_fpar: float | None = None
    dw2_fpar: float | None = None
    da3_fpar: float | None = None
    dwda2_fpar: float | None = None
    dw2da_fpar: float | None = None
    dw3_fpar: float | None = None


class Reduction:
    """Reduction machinery for one exponent p on one grid."""

    def __init__(
        self,
        p: float,
        grid: Grid,
        newton_tol: float = 1e-12,
        max_newton: int = 50,
    ):
        self.p = float(p)
        self.grid = grid
        self.omega_p = omega_p(p)
        self.newton_tol = newton_tol
        self.max_newton = max_newton
        self.params_p = SolitonParams(p, self.omega_p)
        self.base_profile = soliton_value(self.params_p, grid.x)
        self.kernel = SymField.from_mode(grid, 1, psi_value(self.params_p, grid.x))
        self.k_vec = self.kernel.vector()
        self.k_dual = grid.wvec * self.k_vec  # row functional <., k>

    # -- projection ---------------------------------------------------------

    def kernel_amplitude(self, f: SymField) -> float:
        return float(np.dot(self.k_dual, f.vector()))

    def project_perp(self, f: SymField) -> SymField:
        """P_perp f = f - <f, k> k."""
        return f - self.kernel_amplitude(f) * self.kernel

    # -- auxiliary equation --------------------------------------------------

    def _bordered_factorization(self, jac: sp.csc_matrix):
        return EvenLU(jac, self.grid, border_col=self.k_vec, border_row=self.k_dual)

    def _state_lu(self, state: LSState):
        if state._bordered_lu is None:
            if state._jacobian is None:
                state._jacobian = assemble_jacobian(
                    self.grid, self.p, state.omega, state.phi
                )
            state._bordered_lu = self._bordered_factorization(state._jacobian)
        return state._bordered_lu

    def solve_auxiliary(
        self, omega: float, a: float, warm_start: SymField | None = None
    ) -> LSState:
        """Newton iteration for h in X_2 with P_perp F(omega, R + a k + h) = 0.

        Each step solves the bordered system [L_+, k; <., k>, 0], which keeps
        the update exactly in X_2; the border multiplier absorbs the kernel
        component of the residual.
        """
        grid = self.grid
        base = SymField.from_mode(grid, 0, self.base_profile) + a * self.kernel
        h = warm_start.copy() if warm_start is not None else SymField.zeros(grid)
        h = self.project_perp(h).symmetrized()

        history: list[float] = []
        growth = 0
        for it in range(self.max_newton):
            phi = base + h
            f_full = apply_F(grid, self.p, omega, phi)
            fpar = self.kernel_amplitude(f_full)
            res = norm(f_full - fpar * self.kernel)
            history.append(res)
            # the linear solves bottom out near eps/dx^2 in absolute terms on
            # fine grids; accept a stagnated residual within 1e4 of the target
            floor_hit = (
                len(history) >= 3
                and res < 1e4 * self.newton_tol
                and res > 0.5 * min(history[:-1])
            )
            if res < self.newton_tol or floor_hit:
                state = LSState(omega, a, h, phi, res, fpar, it, E_diag=fpar)
                return state
            if len(history) >= 2 and res > history[-2]:
                growth += 1
                if growth >= 5:
                    raise AuxiliarySolveError(
                        f"auxiliary Newton diverged at omega={omega}, a={a}", history
                    )
            else:
                growth = 0
            jac = assemble_jacobian(grid, self.p, omega, phi)
            lu = self._bordered_factorization(jac)
            rhs = np.concatenate([-f_full.vector(), [0.0]])
            sol = lu.solve(rhs)
            h = (h + SymField.from_vector(grid, sol[:-1])).symmetrized()
        raise AuxiliarySolveError(
            f"auxiliary Newton hit the iteration cap at omega={omega}, a={a}", history
        )

    # -- constrained inverse -------------------------------------------------

    def solve_T(self, state: LSState, rhs: SymField) -> SymField:
        """Unique x in X_2 with P_perp L_+(omega, a) x = P_perp rhs."""
        lu = self._state_lu(state)
        rhs_p = self.project_perp(rhs)
        full_rhs = np.concatenate([rhs_p.vector(), [0.0]])
        sol = lu.solve(full_rhs)
        if not np.all(np.isfinite(sol)):
            raise AuxiliarySolveError(
                "singular bordered system in solve_T (outside validity neighborhood)",
                [state.aux_residual],
            )
        return SymField.from_vector(self.grid, sol[:-1]).symmetrized()

    def apply_L_plus(self, state: LSState, f: SymField) -> SymField:
        if state._jacobian is None:
            state._jacobian = assemble_jacobian(self.grid, self.p, state.omega, state.phi)
        return SymField.from_vector(self.grid, state._jacobian @ f.vector())

    def f_parallel(self, state: LSState) -> float:
        return state.f_parallel

    # -- nonlinear potentials -----------------------------------------------

    def _v_colloc(self, state: LSState, k: int) -> np.ndarray:
        """V_k = p(p-1)...(p-k+1) phi^{p-k} on the collocation grid.

        Where the power p - k is negative, phi must be positive; below the
        floor the potential is zeroed (the products it multiplies decay
        faster than V_k grows, so the contribution is below roundoff there).
        """
        p = self.p
        coef = 1.0
        for j in range(k):
            coef *= p - j
        if coef == 0.0:
            return np.zeros((self.grid.n_colloc, self.grid.nx))
        phi_c = to_collocation(state.phi)
        expo = p - k
        if expo < 0.0:
            if np.any(phi_c < -1e-12):
                raise PositivityError(
                    f"phi not positive; cannot form V_{k} with exponent {expo}"
                )
            safe = np.where(phi_c > _V_FLOOR, phi_c, 1.0)
            return np.where(phi_c > _V_FLOOR, coef * safe**expo, 0.0)
        return coef * np.sign(phi_c) * np.abs(phi_c) ** expo if expo != 0.0 else np.full_like(phi_c, coef)

    def _project_product(self, *colloc_factors) -> SymField:
        prod = colloc_factors[0].copy()
        for f in colloc_factors[1:]:
            prod = prod * f
        return from_collocation(self.grid, prod)

    # -- derivative bundles ---------------------------------------------------

    def phi_derivatives(self, state: LSState, order: int = 3) -> DerivativeBundle:
        """Analytic derivative fields of phi(omega, a) at the state.

        First order:
          T dw_phi = -P_perp phi,   da_phi = k - T^{-1} P_perp L_+ k.
        Second order (differentiating T d phi = ... once more):
          T da2_phi  = P_perp( V2 (da_phi)^2 )
          T dwda_phi = P_perp( V2 dw_phi da_phi - da_phi )
          T dw2_phi  = P_perp( V2 (dw_phi)^2 - 2 dw_phi )
        Third order:
          T da3_phi   = P_perp( V3 (da_phi)^3 + 3 V2 da_phi da2_phi )
          T dwda2_phi = P_perp( V3 dw_phi (da_phi)^2 + 2 V2 da_phi dwda_phi
                                + V2 dw_phi da2_phi - da2_phi )
          T dw2da_phi = P_perp( V3 (dw_phi)^2 da_phi + V2 dw2_phi da_phi
                                + 2 V2 dw_phi dwda_phi - 2 dwda_phi )
          T dw3_phi   = P_perp( V3 (dw_phi)^3 + 3 V2 dw2_phi dw_phi - 3 dw2_phi )
        (see fpar_derivatives for the matching scalar formulas).
        """
        if order not in (1, 2, 3):
            raise ValueError("order must be 1, 2, or 3")
        grid = self.grid

        lk = self.apply_L_plus(state, self.kernel)
        da_phi = self.kernel - self.solve_T(state, lk)
        dw_phi = -1.0 * self.solve_T(state, state.phi)
        bundle = DerivativeBundle(order=order, da_phi=da_phi, dw_phi=dw_phi)
        if order == 1:
            return bundle

        v2 = self._v_colloc(state, 2)
        a_c = to_collocation(da_phi)
        w_c = to_collocation(dw_phi)

        da2 = self.solve_T(state, self._project_product(v2, a_c, a_c))
        dwda = self.solve_T(
            state, self._project_product(v2, w_c, a_c) - da_phi
        )
        dw2 = self.solve_T(
            state, self._project_product(v2, w_c, w_c) - 2.0 * dw_phi
        )
        bundle.da2_phi, bundle.dwda_phi, bundle.dw2_phi = da2, dwda, dw2
        if order == 2:
            return bundle

        v3 = self._v_colloc(state, 3)
        a2_c = to_collocation(da2)
        wa_c = to_collocation(dwda)
        w2_c = to_collocation(dw2)

        da3 = self.solve_T(
            state,
            self._project_product(v3, a_c, a_c, a_c)
            + 3.0 * self._project_product(v2, a_c, a2_c),
        )
        dwda2 = self.solve_T(
            state,
            self._project_product(v3, w_c, a_c, a_c)
            + 2.0 * self._project_product(v2, a_c, wa_c)
            + self._project_product(v2, w_c, a2_c)
            - da2,
        )
        dw2da = self.solve_T(
            state,
            self._project_product(v3, w_c, w_c, a_c)
            + self._project_product(v2, w2_c, a_c)
            + 2.0 * self._project_product(v2, w_c, wa_c)
            - 2.0 * dwda,
        )
        dw3 = self.solve_T(
            state,
            self._project_product(v3, w_c, w_c, w_c)
            + 3.0 * self._project_product(v2, w2_c, w_c)
            - 3.0 * dw2,
        )
        bundle.da3_phi, bundle.dwda2_phi = da3, dwda2
        bundle.dw2da_phi, bundle.dw3_phi = dw2da, dw3
        return bundle

    def fpar_derivatives(
        self, state: LSState, order: int = 3, bundle: DerivativeBundle | None = None
    ) -> DerivativeBundle:
        """Scalar derivatives of F_par, pairing the phi fields against k.

        First order:
          da F_par = <L_+ da_phi, k>,  dw F_par = <L_+ dw_phi, k> + a.
        Second order:
          da2 F_par  = <L_+ da2_phi - V2 (da_phi)^2, k>
          dwda F_par = 1 + <L_+ dwda_phi - V2 da_phi dw_phi, k>
          dw2 F_par  = <L_+ dw2_phi - V2 (dw_phi)^2, k>
        Third order:
          da3 F_par   = <L_+ da3_phi - 3 V2 da_phi da2_phi - V3 (da_phi)^3, k>
          dwda2 F_par = <L_+ dwda2_phi - V2 dw_phi da2_phi
                         - 2 V2 da_phi dwda_phi - V3 (da_phi)^2 dw_phi, k>
          dw2da F_par = <L_+ dw2da_phi - V2 da_phi dw2_phi
                         - 2 V2 dw_phi dwda_phi - V3 (dw_phi)^2 da_phi, k>
          dw3 F_par   = <L_+ dw3_phi - 3 V2 dw_phi dw2_phi - V3 (dw_phi)^3, k>
        """
        if bundle is None or bundle.order < order:
            bundle = self.phi_derivatives(state, order)
        k = self.kernel

        def pair(f: SymField) -> float:
            return inner_product(f, k)

        bundle.da_fpar = pair(self.apply_L_plus(state, bundle.da_phi))
        bundle.dw_fpar = pair(self.apply_L_plus(state, bundle.dw_phi)) + state.a
        if order == 1:
            return bundle

        v2 = self._v_colloc(state, 2)
        a_c = to_collocation(bundle.da_phi)
        w_c = to_collocation(bundle.dw_phi)
        bundle.da2_fpar = pair(
            self.apply_L_plus(state, bundle.da2_phi)
            - self._project_product(v2, a_c, a_c)
        )
        bundle.dwda_fpar = 1.0 + pair(
            self.apply_L_plus(state, bundle.dwda_phi)
            - self._project_product(v2, a_c, w_c)
        )
        bundle.dw2_fpar = pair(
            self.apply_L_plus(state, bundle.dw2_phi)
            - self._project_product(v2, w_c, w_c)
        )
        if order == 2:
            return bundle

        v3 = self._v_colloc(state, 3)
        a2_c = to_collocation(bundle.da2_phi)
        wa_c = to_collocation(bundle.dwda_phi)
        w2_c = to_collocation(bundle.dw2_phi)
        bundle.da3_fpar = pair(
            self.apply_L_plus(state, bundle.da3_phi)
            - 3.0 * self._project_product(v2, a_c, a2_c)
            - self._project_product(v3, a_c, a_c, a_c)
        )
        bundle.dwda2_fpar = pair(
            self.apply_L_plus(state, bundle.dwda2_phi)
            - self._project_product(v2, w_c, a2_c)
            - 2.0 * self._project_product(v2, a_c, wa_c)
            - self._project_product(v3, a_c, a_c, w_c)
        )
        bundle.dw2da_fpar = pair(
            self.apply_L_plus(state, bundle.dw2da_phi)
            - self._project_product(v2, a_c, w2_c)
            - 2.0 * self._project_product(v2, w_c, wa_c)
            - self._project_product(v3, w_c, w_c, a_c)
        )
        bundle.dw3_fpar = pair(
            self.apply_L_plus(state, bundle.dw3_phi)
            - 3.0 * self._project_product(v2, w_c, w2_c)
            - self._project_product(v3, w_c, w_c, w_c)
        )
        return bundle

    # -- reduced function g --------------------------------------------------

    def g_value_and_derivs(self, omega: float, a: float) -> tuple[float, float, float]:
        """g = F_par/a (a != 0) with the a = 0 limits:
        g(w,0) = da F_par, dw g(w,0) = dwda F_par, da g(w,0) = da2 F_par / 2."""
        if a == 0.0:
            state = self.solve_auxiliary(omega, 0.0)
            bundle = self.fpar_derivatives(state, 2)
            return bundle.da_fpar, 0.5 * bundle.da2_fpar, bundle.dwda_fpar
        state = self.solve_auxiliary(omega, a)
        bundle = self.fpar_derivatives(state, 1)
        g = state.f_parallel / a
        da_g = (a * bundle.da_fpar - state.f_parallel) / (a * a)
        dw_g = bundle.dw_fpar / a
        return g, da_g, dw_g

    # -- pitchfork and mass coefficients -------------------------------------

    def pitchfork_coefficient(self) -> dict:
        """omega''(0) by the direct formula and by (omega_p/3) da3 F_par.

        Along the branch g(omega(a), a) = 0 with g = F_par/a, so
        omega'' = -d_a^2 g / d_omega g = omega_p d_a^3 F_par / 3 at the
        bifurcation point (d_omega g = -1/omega_p there).  Direct route: with
        u2 = R^{p-2} (psi cos y)^2 (y-modes 0 and 2),
          omega'' = -omega_p [p(p-1)]^2 <T^{-1} u2, u2>
                    - (p(p-1)(p-2) omega_p / 3) <R^{p-3}, (psi cos y)^4>.
        The quartic pairing reduces to (3/(4 pi)) I_{3p-1} / I_{p+1}^2 with
        I_s = int R^s dx, which is also evaluated on the grid so the two
        routes share one discretization.
        """
        p, wp, grid = self.p, self.omega_p, self.grid
        state = self.solve_auxiliary(wp, 0.0)
        params = self.params_p

        cpsi = psi_value(params, grid.x)
        r = self.base_profile
        # R^{p-2} psi^2 = R^{2p-1} / (pi I_{p+1}), assembled without negative powers
        i_p1 = soliton_power_integral(params, p + 1.0)
        prof = np.sign(r) * np.abs(r) ** (2.0 * p - 1.0) / (math.pi * i_p1)
        u2 = SymField.zeros(grid)
        u2.coeffs[0] = 0.5 * prof
        u2.coeffs[2] = 0.5 * prof
        t_inv = self.solve_T(state, u2)
        quad_term = wp * (p * (p - 1.0)) ** 2 * inner_product(t_inv, u2)

        # <R^{p-3}, (psi cos y)^4> = (3 pi / 4) int R^{3p-1} dx / (pi I_{p+1})^2
        i_3pm1_grid = float(np.dot(grid.wx, np.abs(r) ** (3.0 * p - 1.0)))
        quartic = 0.75 * math.pi * i_3pm1_grid / (math.pi * i_p1) ** 2
        quartic_term = p * (p - 1.0) * (p - 2.0) * wp / 3.0 * quartic

        direct = -(quad_term + quartic_term)
        bundle = self.fpar_derivatives(state, 3)
        via_d3f = wp / 3.0 * bundle.da3_fpar
        denom = max(abs(direct), abs(via_d3f), 1e-300)
        return {
            "omega_p": wp,
            "omega2_direct": direct,
            "omega2_via_d3F": via_d3f,
            "discrepancy_rel": abs(direct - via_d3f) / denom,
            "da3_fpar": bundle.da3_fpar,
            "quartic_floor_active": bool(p < 2.0),
        }

    def mass_expansion_coefficient(self, omega2: float | None = None) -> dict:
        """Quadratic mass coefficient m2 and the reported constant term.

        ||Q(a)||^2 = ||R||^2_{L2(R x T)} + m2 a^2 + o(a^2) with
          m2 = (1/omega_p) ( omega''(0) (5-p)/(4(p-1)) ||R||^2_{L2(R x T)} - 1 ).
        The constant is reported as pi ||R||^2_{L2(R)}; the full-torus norm
        carries an extra factor 2 pi over the line norm, which the m2 formula
        must keep for the branch fit to close.
        """
        p, wp = self.p, self.omega_p
        if omega2 is None:
            omega2 = self.pitchfork_coefficient()["omega2_direct"]
        i2_line = soliton_power_integral(self.params_p, 2.0)
        factor = (5.0 - p) / (4.0 * (p - 1.0))
        m2 = (omega2 * factor * 2.0 * math.pi * i2_line - 1.0) / wp
        return {
            "mass2": m2,
            "constant_mass": math.pi * i2_line,
            "norm_R_sq_line": i2_line,
            "factor": factor,
        }
