"""Discretization of H^2_sym on R x T: cosine-mode x-profiles on [-L, L].

A field u(x, y) = sum_n c_n(x) cos(n y), even in x, is stored as the real
matrix coeffs[n_modes, nx].  The x-line is truncated to [-L, L] with
homogeneous Dirichlet ends (values outside the grid are taken as zero) and
second derivatives use the 4th-order centered stencil (bandwidth 2).  The
nonlinearity |u|^{p-1} u acts on a dealiased y-collocation grid.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

__all__ = [
    "GridMismatchError",
    "PositivityError",
    "Grid",
    "SymField",
    "ModeOperator",
    "inner_product",
    "norm",
    "apply_F",
    "assemble_mode_operator",
    "assemble_linearized",
    "assemble_jacobian",
    "save_field",
    "load_field",
]


class GridMismatchError(ValueError):
    """Raised when two fields live on different grids."""


class PositivityError(ValueError):
    """Raised when a fractional power of a non-positive base is requested."""


# 4th-order centered second-derivative stencil, offsets -2..2, times 1/(12 dx^2).
_D2_STENCIL = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0


@dataclass
class Grid:
    """Truncated symmetric grid: x in [-L, L] with nx nodes, n_modes cosine modes."""

    L: float
    nx: int
    n_modes: int

    def __post_init__(self) -> None:
        if self.nx % 2 == 0 or self.nx < 5:
            raise ValueError(f"nx must be odd and >= 5, got {self.nx}")
        if self.n_modes < 2:
            raise ValueError(f"need n_modes >= 2, got {self.n_modes}")
        if not self.L > 0:
            raise ValueError(f"need L > 0, got {self.L}")
        self.x = np.linspace(-self.L, self.L, self.nx)
        self.dx = 2.0 * self.L / (self.nx - 1)
        # trapezoid x-quadrature weights
        self.wx = np.full(self.nx, self.dx)
        self.wx[0] = self.wx[-1] = 0.5 * self.dx
        # mode weights of int_0^{2pi} cos^2(n y) dy
        self.mode_weights = np.full(self.n_modes, math.pi)
        self.mode_weights[0] = 2.0 * math.pi
        # dealiased y-collocation: M >= 3 n_modes equispaced nodes on [0, 2pi)
        self.n_colloc = 3 * self.n_modes
        j = np.arange(self.n_colloc)
        y = 2.0 * math.pi * j / self.n_colloc
        n = np.arange(self.n_modes)
        self.y_nodes = y
        # colloc[j, n] = cos(n y_j); inverse transform with (2 - delta_{n0})/M
        self.cos_mat = np.cos(np.outer(y, n))
        self.inv_mat = (np.where(n == 0, 1.0, 2.0)[:, None] / self.n_colloc) * self.cos_mat.T
        # flattened quadrature weights for vectors coeffs.ravel()
        self.wvec = (self.mode_weights[:, None] * self.wx[None, :]).ravel()
        # node-major permutation: grouping all modes of one x-node makes the
        # Jacobian block-banded (bandwidth ~ 2 n_modes), keeping LU fill small
        n_idx = np.arange(self.n_modes)
        i_idx = np.arange(self.nx)
        self.node_major = (n_idx[None, :] * self.nx + i_idx[:, None]).ravel()

    def same_as(self, other: "Grid") -> bool:
        return (
            self.L == other.L and self.nx == other.nx and self.n_modes == other.n_modes
        )

    @property
    def size(self) -> int:
        return self.n_modes * self.nx


@dataclass
class SymField:
    """Even-in-x field as cosine-mode x-profiles coeffs[n_modes, nx]."""

    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.grid.n_modes, self.grid.nx):
            raise ValueError(
                f"coeffs shape {self.coeffs.shape} does not match grid "
                f"({self.grid.n_modes}, {self.grid.nx})"
            )

    @classmethod
    def zeros(cls, grid: Grid) -> "SymField":
        return cls(grid, np.zeros((grid.n_modes, grid.nx)))

    @classmethod
    def from_mode(cls, grid: Grid, n: int, profile: np.ndarray) -> "SymField":
        f = cls.zeros(grid)
        f.coeffs[n] = profile
        return f

    @classmethod
    def from_vector(cls, grid: Grid, vec: np.ndarray) -> "SymField":
        return cls(grid, vec.reshape(grid.n_modes, grid.nx).copy())

    def vector(self) -> np.ndarray:
        return self.coeffs.ravel()

    def copy(self) -> "SymField":
        return SymField(self.grid, self.coeffs.copy())

    def symmetrized(self) -> "SymField":
        """Exact even-in-x storage: average with the mirrored profiles."""
        return SymField(self.grid, 0.5 * (self.coeffs + self.coeffs[:, ::-1]))

    def mirror_defect(self) -> float:
        return float(np.max(np.abs(self.coeffs - self.coeffs[:, ::-1])))

    def shift_half_period(self) -> "SymField":
        """The field u(x, y + pi): flips the sign of odd cosine modes."""
        signs = (-1.0) ** np.arange(self.grid.n_modes)
        return SymField(self.grid, signs[:, None] * self.coeffs)

    def __add__(self, other: "SymField") -> "SymField":
        self._check(other)
        return SymField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SymField") -> "SymField":
        self._check(other)
        return SymField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "SymField":
        return SymField(self.grid, scalar * self.coeffs)

    __rmul__ = __mul__

    def _check(self, other: "SymField") -> None:
        if not self.grid.same_as(other.grid):
            raise GridMismatchError("fields live on different grids")


def inner_product(f: SymField, g: SymField) -> float:
    """<f, g> = sum_n w_n int f_n g_n dx with w_0 = 2 pi, w_n = pi (n >= 1)."""
    f._check(g)
    gr = f.grid
    per_mode = np.einsum("ni,ni->n", f.coeffs, g.coeffs * gr.wx[None, :])
    return float(np.dot(gr.mode_weights, per_mode))


def norm(f: SymField) -> float:
    return math.sqrt(max(inner_product(f, f), 0.0))


def signed_power(u: np.ndarray, p: float) -> np.ndarray:
    """sign(u) |u|^p, the odd extension of the power nonlinearity."""
    return np.sign(u) * np.abs(u) ** p


def to_collocation(f: SymField) -> np.ndarray:
    """Values on the y-collocation grid: array [n_colloc, nx]."""
    return f.grid.cos_mat @ f.coeffs


def from_collocation(grid: Grid, vals: np.ndarray) -> SymField:
    """Truncated cosine transform of collocation values back to mode profiles."""
    return SymField(grid, grid.inv_mat @ vals)


def _apply_dxx(coeffs: np.ndarray, dx: float) -> np.ndarray:
    """4th-order d^2/dx^2 rows with zero values outside the grid."""
    out = np.zeros_like(coeffs)
    for k, c in zip(range(-2, 3), _D2_STENCIL):
        src = slice(max(0, -k), coeffs.shape[1] - max(0, k))
        dst = slice(max(0, k), coeffs.shape[1] - max(0, -k))
        out[:, dst] += c * coeffs[:, src]
    return out / (dx * dx)


def apply_F(grid: Grid, p: float, omega: float, u: SymField) -> SymField:
    """F(omega, u) = -u_xx - u_yy + omega u - |u|^{p-1} u on the grid."""
    lin = -_apply_dxx(u.coeffs, grid.dx)
    n2 = np.arange(grid.n_modes, dtype=float) ** 2
    lin += (omega + n2)[:, None] * u.coeffs
    nl = from_collocation(grid, signed_power(to_collocation(u), p))
    return SymField(grid, lin - nl.coeffs)


def _dxx_bands(grid: Grid) -> np.ndarray:
    """Symmetric banded storage of -d^2/dx^2: rows = offsets 0, 1, 2."""
    nx, dx2 = grid.nx, grid.dx * grid.dx
    bands = np.zeros((3, nx))
    bands[0, :] = -_D2_STENCIL[2] / dx2
    bands[1, :] = -_D2_STENCIL[3] / dx2
    bands[2, :] = -_D2_STENCIL[4] / dx2
    return bands


@dataclass
class ModeOperator:
    """One y-mode block -D_xx + (omega + n^2) - diag(potential), banded symmetric.

    bands[k, i] holds the coefficient coupling node i to node i + k, k = 0..2
    (the lower triangle by symmetry).
    """

    grid: Grid
    n: int
    bands: np.ndarray
    shift: float = 0.0  # diagnostic: omega + n^2

    def apply(self, v: np.ndarray) -> np.ndarray:
        out = self.bands[0] * v
        for k in (1, 2):
            out[:-k] += self.bands[k, :-k] * v[k:]
            out[k:] += self.bands[k, :-k] * v[:-k]
        return out

    def ab_matrix(self, sigma: float = 0.0) -> np.ndarray:
        """LAPACK general band form of (A - sigma I) for solve_banded((2, 2), ...)."""
        nx = self.grid.nx
        ab = np.zeros((5, nx))
        ab[2] = self.bands[0] - sigma
        ab[1, 1:] = self.bands[1, :-1]
        ab[3, :-1] = self.bands[1, :-1]
        ab[0, 2:] = self.bands[2, :-2]
        ab[4, :-2] = self.bands[2, :-2]
        return ab

    def to_sparse(self) -> sp.csr_matrix:
        nx = self.grid.nx
        diags = [self.bands[0], self.bands[1, :-1], self.bands[1, :-1],
                 self.bands[2, :-2], self.bands[2, :-2]]
        return sp.diags(diags, [0, 1, -1, 2, -2], shape=(nx, nx), format="csr")


def assemble_mode_operator(
    grid: Grid, omega: float, n: int, potential: np.ndarray
) -> ModeOperator:
    """-D_xx + (omega + n^2) - diag(potential) as a banded symmetric block."""
    bands = _dxx_bands(grid)
    shift = omega + float(n * n)
    bands[0] += shift - potential
    return ModeOperator(grid, n, bands, shift)


def assemble_linearized(
    grid: Grid, p: float, omega: float, base_profile: np.ndarray, factor: str = "p_times"
) -> list[ModeOperator]:
    """Mode blocks of L_+ (factor='p_times') or L_- (factor='one_times') for a
    y-independent base profile; the potential c * base^{p-1} is shared."""
    if factor not in ("p_times", "one_times"):
        raise ValueError(f"unknown factor {factor!r}")
    if isinstance(base_profile, SymField):
        # y-independent base: only the mode-0 profile enters the potential
        base_profile = base_profile.coeffs[0]
    base = np.asarray(base_profile, dtype=float)
    if p < 2.0 and np.any(base <= 0.0):
        raise PositivityError("base must be positive for fractional power p - 1 < 1")
    c = p if factor == "p_times" else 1.0
    potential = c * np.abs(base) ** (p - 1.0)
    return [assemble_mode_operator(grid, omega, n, potential) for n in range(grid.n_modes)]


def assemble_jacobian(grid: Grid, p: float, omega: float, base: SymField) -> sp.csc_matrix:
    """Sparse Jacobian of apply_F at a general (possibly y-dependent) base.

    The potential W = p |u|^{p-1} is diagonal at each collocation node, so its
    mode coupling is pointwise in x: block (n, m) is diag(G[:, n, m]) with
    G[i] = inv_mat @ diag(W[:, i]) @ cos_mat, exactly the derivative of the
    dealiased collocation nonlinearity.
    """
    nx, nm = grid.nx, grid.n_modes
    n2 = np.arange(nm, dtype=float) ** 2
    dxx = _dxx_bands(grid)

    rows, cols, data = [], [], []
    idx = np.arange(nx)
    for n in range(nm):
        off = n * nx
        rows.append(off + idx)
        cols.append(off + idx)
        data.append(dxx[0] + omega + n2[n])
        for k in (1, 2):
            rows.append(off + idx[:-k])
            cols.append(off + idx[k:])
            data.append(dxx[k, :-k])
            rows.append(off + idx[k:])
            cols.append(off + idx[:-k])
            data.append(dxx[k, :-k])

    w_colloc = p * np.abs(to_collocation(base)) ** (p - 1.0)
    # G[i, n, m] = sum_j inv_mat[n, j] W[j, i] cos_mat[j, m]
    g = np.einsum("nj,ji,jm->inm", grid.inv_mat, w_colloc, grid.cos_mat)
    for n in range(nm):
        for m in range(nm):
            rows.append(n * nx + idx)
            cols.append(m * nx + idx)
            data.append(-g[:, n, m])

    mat = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid.size, grid.size),
    )
    return mat.tocsc()


class EvenLU:
    """LU of the even-x restriction of an operator, optionally bordered.

    All fields of interest are even in x, but the full-line discretization
    carries the spurious odd translation kernel of the mode-0 block.  Folding
    the unknowns onto x >= 0 removes it: columns are combined by the even
    expansion E (half -> full), rows are restricted to the right half.  The
    folded matrix is reordered node-major (block-banded, any border last) and
    factorized with natural ordering so the dense border causes no fill-in.
    One step of iterative refinement in the folded space tightens the solve.
    """

    def __init__(
        self,
        mat: sp.spmatrix,
        grid: Grid,
        border_col: np.ndarray | None = None,
        border_row: np.ndarray | None = None,
    ):
        import scipy.sparse.linalg as spla

        self.grid = grid
        sel, exp = _half_fold_matrices(grid)
        self._sel, self._exp = sel, exp
        half = (sel @ mat.tocsc() @ exp).tocsr()
        self.bordered = border_col is not None
        if self.bordered:
            col_h = sel @ border_col
            row_h = exp.T @ border_row
            nh = half.shape[0]
            half = sp.bmat(
                [[half, sp.csc_matrix(col_h[:, None])],
                 [sp.csc_matrix(row_h[None, :]), None]],
                format="csr",
            )
            q = np.concatenate([_node_major_half(grid), [nh]])
        else:
            q = _node_major_half(grid)
        self.q = q
        self._mat = half
        self.lu = spla.splu(half[q][:, q].tocsc(), permc_spec="NATURAL")

    def _half_solve(self, bh: np.ndarray) -> np.ndarray:
        y = self.lu.solve(bh[self.q])
        x = np.empty_like(y)
        x[self.q] = y
        x += self._raw_refine(bh, x)
        return x

    def _raw_refine(self, bh: np.ndarray, x: np.ndarray) -> np.ndarray:
        r = bh - self._mat @ x
        y = self.lu.solve(r[self.q])
        dx = np.empty_like(y)
        dx[self.q] = y
        return dx

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """rhs (and the solution) in full-line layout, border entry last."""
        if self.bordered:
            bh = np.concatenate([self._sel @ rhs[:-1], [rhs[-1]]])
            xh = self._half_solve(bh)
            return np.concatenate([self._exp @ xh[:-1], [xh[-1]]])
        xh = self._half_solve(self._sel @ rhs)
        return self._exp @ xh


def _half_fold_matrices(grid: Grid) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """(select, expand): rows x >= 0 selection and even expansion, all modes."""
    if not hasattr(grid, "_half_fold"):
        c = (grid.nx - 1) // 2
        half_nx = c + 1
        rows, cols = [], []
        for n in range(grid.n_modes):
            j = np.arange(half_nx)
            rows.append(n * half_nx + j)
            cols.append(n * grid.nx + c + j)
        sel = sp.csr_matrix(
            (np.ones(grid.n_modes * half_nx), (np.concatenate(rows), np.concatenate(cols))),
            shape=(grid.n_modes * half_nx, grid.size),
        )
        erows, ecols = [], []
        for n in range(grid.n_modes):
            i = np.arange(grid.nx)
            erows.append(n * grid.nx + i)
            ecols.append(n * half_nx + np.abs(i - c))
        exp = sp.csr_matrix(
            (np.ones(grid.n_modes * grid.nx), (np.concatenate(erows), np.concatenate(ecols))),
            shape=(grid.size, grid.n_modes * half_nx),
        )
        grid._half_fold = (sel, exp)
    return grid._half_fold


def _node_major_half(grid: Grid) -> np.ndarray:
    c = (grid.nx - 1) // 2
    half_nx = c + 1
    n_idx = np.arange(grid.n_modes)
    i_idx = np.arange(half_nx)
    return (n_idx[None, :] * half_nx + i_idx[:, None]).ravel()


def save_field(path, f: SymField, meta: dict | None = None) -> None:
    """Snapshot: line 1 a JSON header, then one CSV row per mode at 17 digits."""
    header = {
        "L": f.grid.L,
        "nx": f.grid.nx,
        "n_modes": f.grid.n_modes,
    }
    if meta:
        header.update(meta)
    with open(path, "w") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for row in f.coeffs:
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")


def load_field(path) -> tuple[SymField, dict]:
    with open(path) as fh:
        header = json.loads(fh.readline())
        coeffs = np.array(
            [[float(v) for v in line.split(",")] for line in fh if line.strip()]
        )
    grid = Grid(header["L"], header["nx"], header["n_modes"])
    return SymField(grid, coeffs), header
