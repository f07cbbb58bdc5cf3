"""Direct Newton continuation of F(omega, u) = 0 in the symmetric class.

The bifurcating branch is parametrized by the kernel-mode amplitude
a = <u, psi cos y>: each point solves the bordered (N+1)-system
{F(omega, u) = 0, <u, k> = a} for (u, omega).  The traced branch is the
ground truth against which the Lyapunov-Schmidt coefficients are checked.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .closed_form import SolitonParams, omega_p, psi_value, soliton_value
from .fields import EvenLU, Grid, SymField, apply_F, assemble_jacobian, inner_product, norm

__all__ = [
    "NewtonDivergenceError",
    "BranchPoint",
    "Branch",
    "newton_full",
    "trace_branch",
    "trace_trivial",
    "uniqueness_probe",
    "verify_decay",
    "fit_even_quadratic",
]


class NewtonDivergenceError(RuntimeError):
    def __init__(self, message: str, residual_history: list[float]):
        super().__init__(message)
        self.residual_history = residual_history


@dataclass
class BranchPoint:
    a: float
    omega: float
    field: SymField
    mass: float
    residual: float
    newton_iters: int
    min_field: float
    positivity_warning: bool = False


@dataclass
class Branch:
    points: list[BranchPoint]
    kind: str  # "trivial" or "bifurcating"
    provenance: str = ""

    def amplitudes(self) -> np.ndarray:
        return np.array([pt.a for pt in self.points])

    def omegas(self) -> np.ndarray:
        return np.array([pt.omega for pt in self.points])

    def masses(self) -> np.ndarray:
        return np.array([pt.mass for pt in self.points])


def _kernel_field(p: float, grid: Grid) -> SymField:
    wp = omega_p(p)
    return SymField.from_mode(grid, 1, psi_value(SolitonParams(p, wp), grid.x))


def _make_point(grid, a, omega, u, res, iters) -> BranchPoint:
    min_field = float(np.min(grid.cos_mat @ u.coeffs))
    return BranchPoint(
        a=a,
        omega=omega,
        field=u,
        mass=inner_product(u, u),
        residual=res,
        newton_iters=iters,
        min_field=min_field,
        positivity_warning=min_field < 0.0,
    )


def newton_full(
    p: float,
    a: float,
    init: tuple[float, SymField],
    grid: Grid,
    kernel: SymField | None = None,
    tol: float = 1e-12,
    max_iter: int = 25,
) -> BranchPoint:
    """Bordered Newton for {F(omega, u) = 0, <u, k> = a} in (u, omega).

    The omega-column of the Jacobian is u itself (F is affine in omega) and
    the constraint row is the kernel-mode functional.
    """
    if kernel is None:
        kernel = _kernel_field(p, grid)
    k_dual = grid.wvec * kernel.vector()
    omega, u = init
    u = u.symmetrized()

    history: list[float] = []
    growth = 0
    for it in range(max_iter):
        f_val = apply_F(grid, p, omega, u)
        res = norm(f_val)
        con = float(np.dot(k_dual, u.vector())) - a
        history.append(res)
        # accept a residual stagnated at the linear-solve floor on fine grids
        floor_hit = (
            len(history) >= 3
            and res < 1e4 * tol
            and res > 0.5 * min(history[:-1])
        )
        if (res < tol or floor_hit) and abs(con) < 1e4 * tol:
            return _make_point(grid, a, omega, u, res, it)
        if len(history) >= 2 and res > 2.0 * history[-2]:
            growth += 1
            if growth >= 3:
                raise NewtonDivergenceError(
                    f"full Newton diverged at a={a}", history
                )
        else:
            growth = 0
        jac = assemble_jacobian(grid, p, omega, u)
        rhs = np.concatenate([-f_val.vector(), [-con]])
        sol = EvenLU(jac, grid, border_col=u.vector(), border_row=k_dual).solve(rhs)
        u = (u + SymField.from_vector(grid, sol[:-1])).symmetrized()
        omega += float(sol[-1])
    raise NewtonDivergenceError(f"full Newton hit iteration cap at a={a}", history)


def trace_trivial(p: float, omega_list, grid: Grid) -> Branch:
    """The explicit trivial branch (a = 0, R_omega) sampled at given omegas."""
    points = []
    for omega in omega_list:
        r = SymField.from_mode(grid, 0, soliton_value(SolitonParams(p, omega), grid.x))
        res = norm(apply_F(grid, p, omega, r))
        points.append(_make_point(grid, 0.0, float(omega), r, res, 0))
    return Branch(points, "trivial")


def trace_branch(
    p: float,
    a_max: float,
    steps: int,
    grid: Grid,
    tol: float = 1e-12,
    adapt: bool = True,
) -> Branch:
    """March the bifurcating branch over a in [-a_max, a_max].

    Secant predictor with newton_full corrector and step halving (down to
    a_max/1024); with adapt=True the march stops early (truncating a_max)
    once a point needs more than 8 Newton iterations.
    """
    if steps < 8:
        raise ValueError("need steps >= 8")
    wp = omega_p(p)
    kernel = _kernel_field(p, grid)
    r_p = SymField.from_mode(grid, 0, soliton_value(SolitonParams(p, wp), grid.x))
    res0 = norm(apply_F(grid, p, wp, r_p))
    origin = _make_point(grid, 0.0, wp, r_p, res0, 0)

    def march(sign: float) -> list[BranchPoint]:
        pts: list[BranchPoint] = []
        da = a_max / steps
        min_da = a_max / 1024.0
        a_prev, prev = 0.0, origin
        prev2: BranchPoint | None = None
        a_prev2 = 0.0
        while abs(a_prev) < a_max - 1e-12 * a_max:
            da_try = min(da, a_max - abs(a_prev))
            while True:
                a_new = a_prev + sign * da_try
                if prev2 is not None and a_prev != a_prev2:
                    t = (a_new - a_prev) / (a_prev - a_prev2)
                    u0 = prev.field + t * (prev.field - prev2.field)
                    w0 = prev.omega + t * (prev.omega - prev2.omega)
                else:
                    u0 = prev.field + (a_new - a_prev) * kernel
                    w0 = prev.omega
                try:
                    pt = newton_full(p, a_new, (w0, u0), grid, kernel, tol)
                    break
                except NewtonDivergenceError:
                    da_try *= 0.5
                    if da_try < min_da:
                        raise
            if adapt and pt.newton_iters > 8:
                break
            pts.append(pt)
            prev2, a_prev2 = prev, a_prev
            prev, a_prev = pt, a_new
        return pts

    minus = march(-1.0)
    plus = march(+1.0)
    points = list(reversed(minus)) + [origin] + plus
    return Branch(points, "bifurcating")


def fit_even_quadratic(a: np.ndarray, values: np.ndarray) -> tuple[float, float]:
    """Least-squares fit values ~ c0 + c2 a^2; returns (c0, c2)."""
    design = np.column_stack([np.ones_like(a), a * a])
    sol, *_ = np.linalg.lstsq(design, values, rcond=None)
    return float(sol[0]), float(sol[1])


def uniqueness_probe(
    p: float,
    n_trials: int,
    perturbation_scale: float,
    grid: Grid,
    branch: Branch,
    seed: int = 0,
    omega_halfwidth: float = 0.1,
) -> dict:
    """Newton-polish random symmetric perturbations of (omega, R_omega) near
    (omega_p, R_{omega_p}) and classify every converged zero onto the trivial
    or bifurcating curve.

    Each trial fixes a random omega near omega_p, perturbs the sampled
    soliton by a smooth random even field of the given scale, and runs plain
    Newton on u alone.  Classification: kernel amplitude < 1e-8 -> trivial;
    otherwise the zero must match the interpolated branch point Q(a) at
    a = <u, k> within 1e-6.
    """
    rng = np.random.default_rng(seed)
    wp = omega_p(p)
    kernel = _kernel_field(p, grid)
    k_dual = grid.wvec * kernel.vector()
    amps = branch.amplitudes()
    order = np.argsort(amps)
    amps_sorted = amps[order]
    pts_sorted = [branch.points[i] for i in order]

    def interpolate_q(a: float) -> SymField | None:
        if a < amps_sorted[0] or a > amps_sorted[-1]:
            return None
        j = int(np.searchsorted(amps_sorted, a))
        # cubic Lagrange on the 4 nearest nodes; linear interpolation is too
        # coarse to resolve the 1e-6 classification tolerance
        lo = min(max(j - 2, 0), max(len(amps_sorted) - 4, 0))
        nodes = amps_sorted[lo:lo + 4]
        out = SymField.zeros(grid)
        for m, am in enumerate(nodes):
            w = 1.0
            for l, al in enumerate(nodes):
                if l != m:
                    w *= (a - al) / (am - al)
            out = out + w * pts_sorted[lo + m].field
        return out

    counts = {"trivial": 0, "bifurcating": 0, "unclassified": 0, "nonconverged": 0}
    records = []
    for _ in range(n_trials):
        # keep |omega - omega_p| away from 0 so the trivial branch is regular
        delta = rng.uniform(0.02, omega_halfwidth) * wp * rng.choice([-1.0, 1.0])
        omega = wp + delta
        r = SymField.from_mode(grid, 0, soliton_value(SolitonParams(p, omega), grid.x))
        bump = np.zeros((grid.n_modes, grid.nx))
        envelope = np.exp(-((grid.x / (2.0 + grid.L / 4.0)) ** 2))
        for n in range(min(4, grid.n_modes)):
            bump[n] = rng.standard_normal() * envelope
        u = (r + perturbation_scale * SymField(grid, bump)).symmetrized()

        converged = True
        res = norm(apply_F(grid, p, omega, u))
        for _ in range(60):
            if res < 1e-11:
                break
            jac = assemble_jacobian(grid, p, omega, u)
            try:
                du = EvenLU(jac, grid).solve(-apply_F(grid, p, omega, u).vector())
            except RuntimeError:
                converged = False
                break
            if not np.all(np.isfinite(du)):
                converged = False
                break
            step = SymField.from_vector(grid, du)
            # damped update: halve the step while the residual grows
            scale = 1.0
            for _ in range(8):
                u_try = (u + scale * step).symmetrized()
                res_try = norm(apply_F(grid, p, omega, u_try))
                if res_try < res or scale < 1e-2:
                    break
                scale *= 0.5
            u, res = u_try, res_try
        else:
            converged = False

        if not converged:
            counts["nonconverged"] += 1
            records.append({"omega": omega, "status": "nonconverged"})
            continue
        a_val = float(np.dot(k_dual, u.vector()))
        if abs(a_val) < 1e-8:
            counts["trivial"] += 1
            records.append({"omega": omega, "status": "trivial", "a": a_val})
            continue
        q_ref = interpolate_q(a_val)
        if q_ref is not None and norm(u - q_ref) < 1e-6:
            counts["bifurcating"] += 1
            records.append({"omega": omega, "status": "bifurcating", "a": a_val})
        else:
            counts["unclassified"] += 1
            records.append({"omega": omega, "status": "unclassified", "a": a_val})
    counts["trials"] = n_trials
    return {"counts": counts, "records": records}


def _fit_rate(x: np.ndarray, profile: np.ndarray, lo: float, hi: float) -> float | None:
    """Log-slope of |profile| over lo <= x <= hi; None when below floor."""
    mask = (x >= lo) & (x <= hi)
    vals = np.abs(profile[mask])
    if vals.size < 4 or np.any(vals < 1e-250):
        return None
    slope = np.polyfit(x[mask], np.log(vals), 1)[0]
    return float(-slope)


def verify_decay(
    point: BranchPoint,
    grid: Grid,
    p: float,
    epsilon: float,
    da_field: SymField | None = None,
    dw_field: SymField | None = None,
) -> dict:
    """Fit x-decay rates on |x| in [L/3, 2L/3] against sqrt(omega) envelopes.

    The mode-0 profile of any branch point must decay at rate sqrt(omega)
    within epsilon; the kernel-mode profile of Q(a) - R decays at the faster
    psi rate (p+1)/2 sqrt(omega); optional finite-difference derivative
    fields get the widened tolerance sqrt(omega) - 2 epsilon.
    """
    lo, hi = grid.L / 3.0, 2.0 * grid.L / 3.0
    w = point.omega
    sw = math.sqrt(w)
    report: dict = {"omega": w, "epsilon": epsilon, "checks": []}

    def add(name, rate, target, tol_lo, tol_hi):
        status = (
            "inconclusive"
            if rate is None
            else ("pass" if tol_lo <= rate <= tol_hi else "fail")
        )
        report["checks"].append(
            {
                "name": name,
                "fitted_rate": rate,
                "target": target,
                "window": [tol_lo, tol_hi],
                "status": status,
            }
        )

    rate0 = _fit_rate(grid.x, point.field.coeffs[0], lo, hi)
    add("mode0_profile", rate0, sw, sw - epsilon, sw + epsilon)

    if abs(point.a) > 0.0:
        psi_rate = 0.5 * (p + 1.0) * sw
        rate1 = _fit_rate(grid.x, point.field.coeffs[1], lo, hi)
        # the kernel profile decays at least at the psi rate
        add("kernel_mode_profile", rate1, psi_rate, psi_rate - epsilon, math.inf)

    for name, f in (("da_field", da_field), ("dw_field", dw_field)):
        if f is not None:
            rate = _fit_rate(grid.x, f.coeffs[0], lo, hi)
            add(name, rate, sw, sw - 2.0 * epsilon, math.inf)
    report["all_pass"] = all(c["status"] != "fail" for c in report["checks"])
    return report
