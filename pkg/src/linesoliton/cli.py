"""Command-line front end: scans over p, wires configs to the numerical
modules, and emits machine-readable JSON/CSV plus a reproducibility manifest.

Exit codes: 0 success, 1 config validation failure, 2 numerical failure
(non-convergence or a failed verify criterion).
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .closed_form import (
    DomainError,
    SolitonParams,
    identity_residuals,
    omega_p,
    psi_value,
    soliton_domega,
    soliton_dx,
    soliton_value,
)
from .continuation import (
    NewtonDivergenceError,
    fit_even_quadratic,
    trace_branch,
    verify_decay,
)
from .fields import Grid, save_field
from .reduction import AuxiliarySolveError, Reduction
from .spectral import EigenSolveError, kernel_eigen_check, spectrum_scan

__all__ = ["main", "RunConfig", "dumps_canonical", "config_hash"]


class ConfigError(ValueError):
    """Raised when a RunConfig invariant is violated; names the invariant."""


# -- canonical JSON -----------------------------------------------------------


def _fmt_value(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if math.isnan(f) or math.isinf(f):
            return "null"  # non-finite sentinels (e.g. one-sided fit windows)
        return format(f, ".17g")
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, dict):
        items = sorted(v.items())
        inner = ",".join(json.dumps(str(k)) + ":" + _fmt_value(u) for k, u in items)
        return "{" + inner + "}"
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ",".join(_fmt_value(u) for u in v) + "]"
    raise TypeError(f"cannot serialize {type(v).__name__}")


def dumps_canonical(obj) -> str:
    """Deterministic JSON: sorted keys, 17 significant digits for floats."""
    return _fmt_value(obj)


def config_hash(cfg: "RunConfig") -> str:
    return hashlib.sha256(dumps_canonical(cfg.to_dict()).encode()).hexdigest()[:16]


# -- configuration ------------------------------------------------------------


@dataclass
class RunConfig:
    p: list[float] = field(default_factory=lambda: [3.0])
    omega: list[float] | None = None  # None -> derived from omega_p per p
    L: float | None = None  # None -> 30/sqrt(min omega scanned)
    nx: int = 2049
    n_modes: int = 8
    newton_tol: float = 1e-12
    eigen_tol: float = 1e-10
    fit_window: float = 0.25  # fraction of a_max used in quadratic fits
    a_max: float = 0.2
    steps: int = 16
    eps: float = 0.05  # decay tolerance as a multiple of sqrt(omega)
    out: str = "out"
    seed: int = 0

    def omegas_scanned(self) -> list[float]:
        if self.omega is not None:
            return list(self.omega)
        out = []
        for p in self.p:
            wp = omega_p(p)
            out.extend([0.9 * wp, wp, 1.1 * wp])
        return out

    def validate(self) -> None:
        for p in self.p:
            if not p > 1.0:
                raise ConfigError(f"p must be > 1, got {p}")
        if self.nx % 2 == 0 or self.nx < 5:
            raise ConfigError(f"nx must be odd and >= 5, got {self.nx}")
        if self.n_modes < 2:
            raise ConfigError(f"n_modes must be >= 2, got {self.n_modes}")
        omegas = self.omegas_scanned()
        for w in omegas:
            if not w > 0.0:
                raise ConfigError(f"omega must be > 0, got {w}")
        if self.L is not None:
            needed = 30.0 / math.sqrt(min(omegas))
            if self.L < needed:
                raise ConfigError(
                    f"L must be >= 30/sqrt(min omega) = {needed:.3f}, got {self.L}"
                )
        for name in ("newton_tol", "eigen_tol", "fit_window", "a_max", "eps"):
            if not getattr(self, name) > 0.0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.steps < 8:
            raise ConfigError(f"steps must be >= 8, got {self.steps}")

    def grid_for(self, omega_min: float) -> Grid:
        L = self.L if self.L is not None else 30.0 / math.sqrt(omega_min)
        return Grid(L=L, nx=self.nx, n_modes=self.n_modes)

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "omega": self.omega,
            "L": self.L,
            "nx": self.nx,
            "n_modes": self.n_modes,
            "newton_tol": self.newton_tol,
            "eigen_tol": self.eigen_tol,
            "fit_window": self.fit_window,
            "a_max": self.a_max,
            "steps": self.steps,
            "eps": self.eps,
            "seed": self.seed,
        }


def _parse_float_list(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from exc


def _read_config_file(path: str) -> dict:
    """key=value lines; '#' starts a comment; list values are comma-separated."""
    values: dict = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"malformed config line {raw!r} (expected key=value)")
        key, val = (tok.strip() for tok in line.split("=", 1))
        values[key] = val
    return values


_FIELD_PARSERS = {
    "p": _parse_float_list,
    "omega": _parse_float_list,
    "L": float,
    "nx": int,
    "n_modes": int,
    "newton_tol": float,
    "eigen_tol": float,
    "fit_window": float,
    "a_max": float,
    "steps": int,
    "eps": float,
    "out": str,
    "seed": int,
}


def build_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        for key, raw in _read_config_file(args.config).items():
            if key not in _FIELD_PARSERS:
                raise ConfigError(f"unknown config key {key!r}")
            setattr(cfg, key, _FIELD_PARSERS[key](raw))
    # flags override file values
    overrides = {
        "p": args.p, "omega": args.omega, "L": args.L, "nx": args.nx,
        "n_modes": args.modes, "newton_tol": args.tol, "a_max": args.a_max,
        "steps": args.steps, "eps": args.eps, "out": args.out, "seed": args.seed,
    }
    for key, val in overrides.items():
        if val is not None:
            setattr(cfg, key, val)
    cfg.validate()
    return cfg


# -- subcommands --------------------------------------------------------------


def _run_soliton(cfg: RunConfig) -> dict:
    xs = [0.0, 0.5, 1.0, 2.0, 5.0, 10.0]
    records = []
    for p in cfg.p:
        wp = omega_p(p)
        omegas = cfg.omega if cfg.omega is not None else [wp]
        for omega in omegas:
            params = SolitonParams(p, omega)
            x_arr = np.array(xs)
            res_q, res_r = identity_residuals(params, 3.0, 2.0)
            records.append({
                "p": p,
                "omega": omega,
                "omega_p": wp,
                "R0": float(soliton_value(params, 0.0)),
                "table": [
                    {
                        "x": x,
                        "R": float(soliton_value(params, x)),
                        "dR_dx": float(soliton_dx(params, x)),
                        "dR_domega": float(soliton_domega(params, x)),
                        "psi": float(psi_value(params, x)),
                    }
                    for x in x_arr
                ],
                "identity_residual_q3": res_q,
                "identity_residual_r2": res_r,
            })
    return {"records": records}


def _run_spectrum(cfg: RunConfig) -> dict:
    records = []
    for p in cfg.p:
        wp = omega_p(p)
        omegas = cfg.omega if cfg.omega is not None else [0.9 * wp, wp, 1.1 * wp]
        scan = spectrum_scan(p, omegas, lambda w: cfg.grid_for(w))
        kc = kernel_eigen_check(p, wp, cfg.grid_for(min(omegas)))
        records.append({"p": p, "omega_p": wp, "scan": scan,
                        "kernel_check": kc})
    return {"records": records}


def _run_reduce(cfg: RunConfig) -> dict:
    records = []
    for p in cfg.p:
        wp = omega_p(p)
        grid = cfg.grid_for(0.8 * wp)
        red = Reduction(p, grid, newton_tol=cfg.newton_tol)
        state = red.solve_auxiliary(wp, 0.0)
        g, da_g, dw_g = red.g_value_and_derivs(wp, 0.0)
        pf = red.pitchfork_coefficient()
        me = red.mass_expansion_coefficient(pf["omega2_direct"])
        records.append({
            "p": p,
            "omega_p": wp,
            "aux_residual": state.aux_residual,
            "f_parallel": state.f_parallel,
            "newton_iters": state.newton_iters,
            "g": g, "da_g": da_g, "dw_g": dw_g,
            "pitchfork": pf,
            "mass": me,
        })
    return {"records": records}


def _run_branch(cfg: RunConfig, out_dir: Path, tag: str) -> dict:
    records = []
    for p in cfg.p:
        wp = omega_p(p)
        grid = cfg.grid_for(0.8 * wp)
        branch = trace_branch(p, cfg.a_max, cfg.steps, grid, tol=cfg.newton_tol)
        a = branch.amplitudes()
        om = branch.omegas()
        ms = branch.masses()
        window = cfg.fit_window * cfg.a_max
        sel = np.abs(a) <= window + 1e-12
        _, c2 = fit_even_quadratic(a[sel], om[sel])
        _, m2 = fit_even_quadratic(a[sel], ms[sel])
        red = Reduction(p, grid, newton_tol=cfg.newton_tol)
        pf = red.pitchfork_coefficient()
        me = red.mass_expansion_coefficient(pf["omega2_direct"])
        pt = max(branch.points, key=lambda q: q.a)
        decay = verify_decay(pt, grid, p, cfg.eps * math.sqrt(pt.omega))

        csv_path = out_dir / f"branch_p{p:g}_{tag}.csv"
        with open(csv_path, "w") as fh:
            fh.write(f"# config_hash={tag}\n")
            fh.write("a,omega,mass,residual,min_field,newton_iters\n")
            for q in sorted(branch.points, key=lambda q: q.a):
                fh.write(",".join([
                    format(q.a, ".17g"), format(q.omega, ".17g"),
                    format(q.mass, ".17g"), format(q.residual, ".17g"),
                    format(q.min_field, ".17g"), str(q.newton_iters),
                ]) + "\n")
        save_field(out_dir / f"branch_p{p:g}_{tag}_endpoint.csv", pt.field,
                   meta={"p": p, "omega": pt.omega, "a": pt.a, "config_hash": tag})
        records.append({
            "p": p,
            "omega_p": wp,
            "omega2_fit": 2.0 * c2,
            "omega2_formula": pf["omega2_direct"],
            "mass2_fit": m2,
            "mass2_formula": me["mass2"],
            "decay_report": decay,
            "n_points": len(branch.points),
            "csv": csv_path.name,
        })
    return {"records": records}


def _run_verify(cfg: RunConfig) -> tuple[dict, bool]:
    from .verification import run_all

    def progress(rec):
        status = "pass" if rec["passed"] else "FAIL"
        print(f"  [{rec['criterion']:2d}] {rec['name']}: {status}", flush=True)

    records = run_all(progress=progress, p_list=cfg.p)
    all_passed = all(r["passed"] for r in records)
    return {"records": records, "all_passed": all_passed}, all_passed


# -- entry point --------------------------------------------------------------


def _add_common_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--p", type=_parse_float_list, default=None,
                     help="comma-separated exponents, each > 1")
    sub.add_argument("--omega", type=_parse_float_list, default=None,
                     help="comma-separated frequencies")
    sub.add_argument("--L", type=float, default=None, help="half-width of the x-domain")
    sub.add_argument("--nx", type=int, default=None, help="odd node count on [-L, L]")
    sub.add_argument("--modes", type=int, default=None, help="number of y cosine modes")
    sub.add_argument("--a-max", dest="a_max", type=float, default=None,
                     help="largest kernel-mode amplitude traced")
    sub.add_argument("--steps", type=int, default=None, help="branch steps per side")
    sub.add_argument("--tol", type=float, default=None, help="Newton tolerance")
    sub.add_argument("--eps", type=float, default=None,
                     help="decay-rate tolerance as a multiple of sqrt(omega)")
    sub.add_argument("--out", type=str, default=None, help="output directory")
    sub.add_argument("--seed", type=int, default=None, help="uniqueness-probe seed")
    sub.add_argument("--config", type=str, default=None,
                     help="key=value config file; flags override it")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="linesoliton",
        description="Pitchfork bifurcation of NLS line solitons on R x T: "
                    "closed forms, Lyapunov-Schmidt reduction, continuation.",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("soliton", "closed-form soliton tables and identity residuals"),
        ("spectrum", "low-lying eigenvalues of the mode-block operators"),
        ("reduce", "Lyapunov-Schmidt state, g values, and coefficients"),
        ("branch", "Newton continuation of the bifurcating branch"),
        ("verify", "full acceptance suite"),
    ):
        _add_common_flags(subs.add_parser(name, help=help_text))
    args = parser.parse_args(argv)

    try:
        cfg = build_config(args)
    except (ConfigError, DomainError, OSError) as exc:
        print(dumps_canonical({"error": "validation", "message": str(exc)}))
        return 1

    tag = config_hash(cfg)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    ok = True
    try:
        if args.command == "soliton":
            result = _run_soliton(cfg)
        elif args.command == "spectrum":
            result = _run_spectrum(cfg)
        elif args.command == "reduce":
            result = _run_reduce(cfg)
        elif args.command == "branch":
            result = _run_branch(cfg, out_dir, tag)
        elif args.command == "verify":
            result, ok = _run_verify(cfg)
    except (AuxiliarySolveError, NewtonDivergenceError, EigenSolveError,
            DomainError, np.linalg.LinAlgError) as exc:
        payload = {"error": "numerical", "message": str(exc), "config_hash": tag}
        (out_dir / f"{args.command}_error_{tag}.json").write_text(
            dumps_canonical(payload) + "\n")
        print(dumps_canonical(payload))
        return 2

    result["config_hash"] = tag
    result["command"] = args.command
    result_path = out_dir / f"{args.command}_result_{tag}.json"
    result_path.write_text(dumps_canonical(result) + "\n")

    import scipy

    manifest = {
        "config_hash": tag,
        "config": cfg.to_dict(),
        "command": args.command,
        "package_version": __version__,
        "python_version": sys.version.split()[0],
        "numpy_version": np.__version__,
        "scipy_version": scipy.__version__,
        "wall_time_s": time.time() - t0,
    }
    (out_dir / f"{args.command}_manifest_{tag}.json").write_text(
        dumps_canonical(manifest) + "\n")
    print(f"{args.command}: wrote {result_path}")
    return 0 if ok else 2


if __name__ == "__main__":
    sys.exit(main())
