"""Discrete linear systems for the standard and mixed formulations.

Matrices live in LAPACK-compatible band storage.  Complex-coefficient problems
are assembled in complex arithmetic, boundary conditions are imposed, and the
system is then split into a real system of twice the size with interleaved
(Re, Im) unknowns: each entry a+bi becomes the 2x2 block [[a, -b], [b, a]].

Weak statements, with n the outward normal and (.,.) the L2 pairing:

  standard:  -(eta_x, D u_x) + (eta, r u) = (eta, f) - (eta, D h n)_GN
             Dirichlet either strong (identity row + symmetric column purge)
             or weak with penalty rho.
  mixed:     v = -u_x;  (w, v) - (w_x, u) = -(w, g n)_GD
             -(q, D_x v) - (q, D v_x) + (q, r u) = (q, f)
             Neumann data enters the v-space strongly (v = -h), Dirichlet data
             only through the first equation's right-hand side.

The mixed unknowns are interleaved cell by cell so the monolithic matrix stays
banded; block (M, B, ...) views are kept alongside for the segregated solver.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .mesh_basis import LagrangeBasis, Mesh, gauss_legendre_rule
from .problem import ProblemSpec

DEFAULT_PENALTY = 1e6


class BandedMatrix:
    """Square banded matrix of order n with kl sub- and ku superdiagonals.

    Storage has 2*kl + ku + 1 rows: entry A[i, j] sits at ab[kl + ku + i - j, j]
    and the top kl rows are workspace for pivoting fill-in during LU.
    """

    __slots__ = ("n", "kl", "ku", "ab")

    def __init__(self, n: int, kl: int, ku: int, dtype=np.float64):
        if n < 1 or kl < 0 or ku < 0:
            raise ValueError("invalid band dimensions")
        self.n = n
        self.kl = kl
        self.ku = ku
        self.ab = np.zeros((2 * kl + ku + 1, n), dtype=dtype)

    @property
    def dtype(self):
        return self.ab.dtype

    def in_band(self, i: int, j: int) -> bool:
        return -self.ku <= i - j <= self.kl

    def get(self, i: int, j: int):
        if not (0 <= i < self.n and 0 <= j < self.n):
            raise IndexError("index out of range")
        if not self.in_band(i, j):
            return self.ab.dtype.type(0)
        return self.ab[self.kl + self.ku + i - j, j]

    def set(self, i: int, j: int, value) -> None:
        if not self.in_band(i, j):
            raise IndexError(f"entry ({i}, {j}) outside the band")
        self.ab[self.kl + self.ku + i - j, j] = value

    def add_at(self, rows: np.ndarray, cols: np.ndarray, values: np.ndarray) -> None:
        """Scatter-add; duplicate (row, col) pairs accumulate."""
        np.add.at(self.ab, (self.kl + self.ku + rows - cols, cols), values)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = np.zeros(self.n, dtype=np.result_type(self.dtype, x.dtype))
        r0 = self.kl + self.ku
        for d in range(-self.kl, self.ku + 1):
            lo = max(0, d)
            hi = self.n + min(0, d)
            if hi > lo:
                y[lo - d : hi - d] += self.ab[r0 - d, lo:hi] * x[lo:hi]
        return y

    def to_dense(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=self.dtype)
        r0 = self.kl + self.ku
        for d in range(-self.kl, self.ku + 1):
            lo = max(0, d)
            hi = self.n + min(0, d)
            if hi > lo:
                js = np.arange(lo, hi)
                a[js - d, js] = self.ab[r0 - d, lo:hi]
        return a

    def copy(self) -> "BandedMatrix":
        out = BandedMatrix(self.n, self.kl, self.ku, dtype=self.dtype)
        out.ab[...] = self.ab
        return out

    def row_indices(self, i: int) -> np.ndarray:
        """Column indices of row i that lie inside the band."""
        return np.arange(max(0, i - self.kl), min(self.n, i + self.ku + 1))

    def col_indices(self, j: int) -> np.ndarray:
        return np.arange(max(0, j - self.ku), min(self.n, j + self.kl + 1))


def eliminate_dirichlet(mat: BandedMatrix, rhs: np.ndarray, index: int, value) -> None:
    """Impose x[index] = value by identity-row substitution plus column purge.

    The purge moves the known value to the right-hand side and zeroes the
    column, which keeps a symmetric matrix symmetric.
    """
    r0 = mat.kl + mat.ku
    rows = mat.col_indices(index)
    col_vals = mat.ab[r0 + rows - index, index]
    rhs[rows] -= col_vals * value
    mat.ab[r0 + rows - index, index] = 0.0
    cols = mat.row_indices(index)
    mat.ab[r0 + index - cols, cols] = 0.0
    mat.ab[r0, index] = 1.0
    rhs[index] = value


def split_complex(mat: BandedMatrix, rhs: np.ndarray) -> tuple[BandedMatrix, np.ndarray]:
    """Real 2n-order image of a complex system with interleaved (Re, Im) rows."""
    if not np.iscomplexobj(mat.ab):
        raise ValueError("split_complex expects a complex matrix")
    n, kl, ku = mat.n, mat.kl, mat.ku
    out = BandedMatrix(2 * n, 2 * kl + 1, 2 * ku + 1)
    r0 = kl + ku
    s0 = out.kl + out.ku
    for d in range(-kl, ku + 1):
        lo = max(0, d)
        hi = n + min(0, d)
        if hi <= lo:
            continue
        js = np.arange(lo, hi)
        vals = mat.ab[r0 - d, lo:hi]
        a, b = vals.real, vals.imag
        i2 = 2 * (js - d)
        j2 = 2 * js
        out.ab[s0 + i2 - j2, j2] = a
        out.ab[s0 + i2 - (j2 + 1), j2 + 1] = -b
        out.ab[s0 + (i2 + 1) - j2, j2] = b
        out.ab[s0 + (i2 + 1) - (j2 + 1), j2 + 1] = a
    rhs2 = np.empty(2 * n)
    rhs2[0::2] = rhs.real
    rhs2[1::2] = rhs.imag
    return out, rhs2


def recombine_split(x: np.ndarray) -> np.ndarray:
    return x[0::2] + 1j * x[1::2]


# --- degree-of-freedom layouts -------------------------------------------------

def standard_dof_count(p: int, t: int, complex_valued: bool) -> int:
    n = p * t + 1
    return 2 * n if complex_valued else n


def mixed_dof_count(p: int, t: int, complex_valued: bool) -> int:
    n = 2 * p * t + 1
    return 2 * n if complex_valued else n


def mixed_v_positions(p: int, t: int) -> np.ndarray:
    """Monolithic position of each continuous v unknown (block index 0..p*t)."""
    pos = np.empty(p * t + 1, dtype=np.int64)
    pos[0] = 0
    k = np.arange(1, p * t + 1)
    c = (k - 1) // p
    pos[k] = 2 * p * c + p + (k - c * p)
    return pos

def mixed_u_positions(p: int, t: int) -> np.ndarray:
    """Monolithic position of each discontinuous u unknown, shape (t, p)."""
    c = np.arange(t)[:, None]
    e = np.arange(p)[None, :]
    return 2 * p * c + 1 + e


def mixed_is_u_position(q: np.ndarray, p: int) -> np.ndarray:
    q = np.asarray(q)
    return (q > 0) & (((q - 1) % (2 * p)) < p)


@dataclass
class ScalingInfo:
    """Record of an applied magnitude-scaling scheme."""

    scheme: str  # 'none' | 'S' | 'M1' | 'M2'
    norm_u: float = 1.0
    norm_v: float = 1.0

    def factor_for(self, var: str) -> float:
        if self.scheme in ("none",):
            return 1.0
        if self.scheme in ("S", "M2"):
            return self.norm_u
        if self.scheme == "M1":
            return self.norm_u if var == "u" else self.norm_v
        raise ValueError(f"unknown scheme {self.scheme!r}")


@dataclass
class SaddleBlocks:
    """Block view (M, B, right-hand sides) of a real mixed system.

    pure_saddle means the second-equation blocks are exactly (B^T, 0), which is
    what the segregated Schur path requires.
    """

    M: BandedMatrix
    B: sp.csr_matrix
    G: np.ndarray
    H: np.ndarray
    pure_saddle: bool


@dataclass
class LinearSystem:
    matrix: BandedMatrix
    rhs: np.ndarray
    flavor: str  # 'standard' | 'mixed'
    p: int
    mesh: Mesh
    spec: ProblemSpec
    complex_valued: bool
    n_quad: int
    blocks: Optional[SaddleBlocks] = None
    scaling: ScalingInfo = field(default_factory=lambda: ScalingInfo("none"))

    @property
    def n_unknowns(self) -> int:
        return self.matrix.n

    def scale_factor(self, var: str) -> float:
        return self.scaling.factor_for(var)


# --- standard formulation ------------------------------------------------------

def assemble_standard(
    spec: ProblemSpec,
    mesh: Mesh,
    p: int,
    dirichlet_mode: str = "strong",
    penalty: float = DEFAULT_PENALTY,
    n_quad: int | None = None,
) -> LinearSystem:
    if dirichlet_mode not in ("strong", "weak"):
        raise ValueError(f"unknown Dirichlet mode {dirichlet_mode!r}")
    basis = LagrangeBasis(p)
    n_quad = n_quad if n_quad is not None else p + 2
    quad = gauss_legendre_rule(n_quad)
    t, h = mesh.cell_count, mesh.h
    m = p * t + 1
    dtype = complex if spec.complex_valued else float

    phi = basis.eval(quad.points, 0)      # (nq, p+1)
    dphi = basis.eval(quad.points, 1)
    x_q = (np.arange(t)[:, None] + quad.points[None, :]) * h

    wd = quad.weights[None, :] * np.asarray(spec.D(x_q), dtype=dtype)
    ke = -(1.0 / h) * np.einsum("cq,qi,qj->cij", wd, dphi, dphi)
    rv = np.asarray(spec.r(x_q), dtype=dtype)
    if np.any(rv != 0):
        ke = ke + h * np.einsum("cq,qi,qj->cij", quad.weights[None, :] * rv, phi, phi)
    fe = h * np.einsum("cq,qi->ci", quad.weights[None, :] * np.asarray(spec.f(x_q), dtype=dtype), phi)

    gdof = np.arange(t)[:, None] * p + np.arange(p + 1)[None, :]  # (t, p+1)
    mat = BandedMatrix(m, p, p, dtype=dtype)
    rows = np.broadcast_to(gdof[:, :, None], ke.shape)
    cols = np.broadcast_to(gdof[:, None, :], ke.shape)
    mat.add_at(rows.ravel(), cols.ravel(), ke.ravel())
    rhs = np.zeros(m, dtype=dtype)
    np.add.at(rhs, gdof.ravel(), fe.ravel())

    # boundary terms; basis values at the endpoints are exact Kronecker deltas
    dphi_end = {0.0: basis.eval(np.array([0.0]), 1)[0], 1.0: basis.eval(np.array([1.0]), 1)[0]}
    strong: list[tuple[int, complex]] = []
    for bc in (spec.bc_left, spec.bc_right):
        x0, n = bc.location, bc.normal
        bdof = 0 if bc.side == "left" else m - 1
        cell_dofs = gdof[0] if bc.side == "left" else gdof[-1]
        if bc.kind == "neumann":
            rhs[bdof] -= np.asarray(spec.D(np.array([x0])), dtype=dtype)[0] * bc.value * n
            continue
        if dirichlet_mode == "strong":
            strong.append((bdof, bc.value))
            continue
        d_here = np.asarray(spec.D(np.array([x0])), dtype=dtype)[0]
        dvals = dphi_end[x0] / h
        mat.add_at(np.full(p + 1, bdof), cell_dofs, n * d_here * dvals)
        mat.add_at(cell_dofs, np.full(p + 1, bdof), -n * dvals)
        mat.ab[mat.kl + mat.ku, bdof] += n * penalty
        rhs[cell_dofs] += -n * bc.value * dvals
        rhs[bdof] += n * penalty * bc.value

    for bdof, value in strong:
        eliminate_dirichlet(mat, rhs, bdof, value)

    if spec.complex_valued:
        mat, rhs = split_complex(mat, rhs)

    return LinearSystem(
        matrix=mat,
        rhs=rhs,
        flavor="standard",
        p=p,
        mesh=mesh,
        spec=spec,
        complex_valued=spec.complex_valued,
        n_quad=n_quad,
    )


# --- mixed formulation ---------------------------------------------------------

def assemble_mixed(spec: ProblemSpec, mesh: Mesh, p: int, n_quad: int | None = None) -> LinearSystem:
    phi = LagrangeBasis(p)                      # continuous space carrying v
    psi = LagrangeBasis(p - 1, continuous=False)  # discontinuous space carrying u
    n_quad = n_quad if n_quad is not None else p + 2
    quad = gauss_legendre_rule(n_quad)
    t, h = mesh.cell_count, mesh.h
    nv, nu = p * t + 1, p * t
    total = 2 * p * t + 1
    dtype = complex if spec.complex_valued else float

    phi_v = phi.eval(quad.points, 0)     # (nq, p+1)
    dphi_v = phi.eval(quad.points, 1)
    psi_v = psi.eval(quad.points, 0)     # (nq, p)
    x_q = (np.arange(t)[:, None] + quad.points[None, :]) * h

    me = h * np.einsum("q,qi,qj->ij", quad.weights, phi_v, phi_v)
    be = -np.einsum("q,qi,qj->ij", quad.weights, dphi_v, psi_v)          # (p+1, p)
    dv = np.asarray(spec.D(x_q), dtype=dtype)
    dxv = np.asarray(spec.D_x(x_q), dtype=dtype)
    # -(q, D_x v) - (q, D v_x); the 1/h of the physical derivative cancels h dx
    ce = -(
        h * np.einsum("cq,qe,qi->cei", quad.weights[None, :] * dxv, psi_v, phi_v)
        + np.einsum("cq,qe,qi->cei", quad.weights[None, :] * dv, psi_v, dphi_v)
    )
    rv = np.asarray(spec.r(x_q), dtype=dtype)
    has_r = bool(np.any(rv != 0))
    re = (
        h * np.einsum("cq,qe,qj->cej", quad.weights[None, :] * rv, psi_v, psi_v)
        if has_r
        else None
    )
    he = h * np.einsum("cq,qe->ce", quad.weights[None, :] * np.asarray(spec.f(x_q), dtype=dtype), psi_v)

    be_t = -np.einsum("q,qe,qi->ei", quad.weights, psi_v, dphi_v)
    scale_c = np.max(np.abs(be_t)) + 1e-300
    pure_saddle = (not has_r) and bool(
        np.max(np.abs(ce - be_t[None, :, :])) <= 1e-13 * scale_c
    )

    pos_v = mixed_v_positions(p, t)
    pos_u = mixed_u_positions(p, t)
    vcell = pos_v[np.arange(t)[:, None] * p + np.arange(p + 1)[None, :]]  # (t, p+1)

    mat = BandedMatrix(total, 2 * p, 2 * p, dtype=dtype)
    rhs = np.zeros(total, dtype=dtype)
    # M block, identical on every cell
    rows = np.broadcast_to(vcell[:, :, None], (t, p + 1, p + 1))
    cols = np.broadcast_to(vcell[:, None, :], (t, p + 1, p + 1))
    mat.add_at(rows.ravel(), cols.ravel(), np.broadcast_to(me, (t, p + 1, p + 1)).ravel())
    # B block
    rows = np.broadcast_to(vcell[:, :, None], (t, p + 1, p))
    cols = np.broadcast_to(pos_u[:, None, :], (t, p + 1, p))
    mat.add_at(rows.ravel(), cols.ravel(), np.broadcast_to(be, (t, p + 1, p)).ravel())
    # second-equation blocks
    rows = np.broadcast_to(pos_u[:, :, None], (t, p, p + 1))
    cols = np.broadcast_to(vcell[:, None, :], (t, p, p + 1))
    mat.add_at(rows.ravel(), cols.ravel(), ce.ravel())
    if has_r:
        rows = np.broadcast_to(pos_u[:, :, None], (t, p, p))
        cols = np.broadcast_to(pos_u[:, None, :], (t, p, p))
        mat.add_at(rows.ravel(), cols.ravel(), re.ravel())
    np.add.at(rhs, pos_u.ravel(), he.ravel())

    # block view in (v, u) ordering for the segregated path
    m_block = BandedMatrix(nv, p, p, dtype=dtype)
    gv = np.arange(t)[:, None] * p + np.arange(p + 1)[None, :]
    rows = np.broadcast_to(gv[:, :, None], (t, p + 1, p + 1))
    cols = np.broadcast_to(gv[:, None, :], (t, p + 1, p + 1))
    m_block.add_at(rows.ravel(), cols.ravel(), np.broadcast_to(me, (t, p + 1, p + 1)).ravel())
    gu = np.arange(t)[:, None] * p + np.arange(p)[None, :]
    b_rows = np.broadcast_to(gv[:, :, None], (t, p + 1, p)).ravel()
    b_cols = np.broadcast_to(gu[:, None, :], (t, p + 1, p)).ravel()
    b_block = sp.csr_matrix(
        (np.broadcast_to(be, (t, p + 1, p)).ravel(), (b_rows, b_cols)), shape=(nv, nu)
    )
    g_block = np.zeros(nv, dtype=dtype)
    h_block = he.reshape(-1).copy()

    # Dirichlet data is natural here: G_k = -(w_k, g n) on the Dirichlet ends
    for bc in (spec.bc_left, spec.bc_right):
        v_idx = 0 if bc.side == "left" else nv - 1
        if bc.kind == "dirichlet":
            contrib = -bc.value * bc.normal
            rhs[pos_v[v_idx]] += contrib
            g_block[v_idx] += contrib
        else:
            # essential condition on the v space: v = -h on the Neumann end
            value = -bc.value
            eliminate_dirichlet(mat, rhs, int(pos_v[v_idx]), value)
            # mirror in the block view: second-equation column purge first
            # (with the pure saddle, C's column is B's row), then B-row zeroing
            if pure_saddle:
                c_col = np.asarray(b_block.getrow(v_idx).todense()).ravel()
            else:
                c_col = _c_column(ce, vcell, pos_u, v_idx, pos_v, nu)
            h_block -= c_col * value
            b_zero = b_block.tolil()
            b_zero[v_idx, :] = 0.0
            b_block = b_zero.tocsr()
            eliminate_dirichlet(m_block, g_block, v_idx, value)

    if spec.complex_valued:
        mat, rhs = split_complex(mat, rhs)
        blocks = None
    else:
        blocks = SaddleBlocks(
            M=m_block,
            B=b_block,
            G=np.asarray(g_block, dtype=float),
            H=np.asarray(h_block, dtype=float),
            pure_saddle=pure_saddle,
        )
        rhs = np.asarray(rhs, dtype=float)

    return LinearSystem(
        matrix=mat,
        rhs=rhs,
        flavor="mixed",
        p=p,
        mesh=mesh,
        spec=spec,
        complex_valued=spec.complex_valued,
        n_quad=n_quad,
        blocks=blocks,
    )


def _c_column(ce: np.ndarray, vcell: np.ndarray, pos_u: np.ndarray, v_idx: int, pos_v: np.ndarray, nu: int) -> np.ndarray:
    """Column of the second-equation v-coupling block for one v unknown."""
    t, p = pos_u.shape
    col = np.zeros(nu, dtype=ce.dtype)
    target = pos_v[v_idx]
    for c in range(t):
        hit = np.nonzero(vcell[c] == target)[0]
        if hit.size:
            col[c * p : (c + 1) * p] += ce[c, :, hit[0]]
    return col


# --- coefficient extraction ----------------------------------------------------

def extract_standard_coeffs(x: np.ndarray, system: LinearSystem) -> np.ndarray:
    """Per-cell nodal coefficients of the standard solution, shape (t, p+1)."""
    p, t = system.p, system.mesh.cell_count
    z = recombine_split(x) if system.complex_valued else x
    idx = np.arange(t)[:, None] * p + np.arange(p + 1)[None, :]
    return z[idx]


def extract_mixed_coeffs(x: np.ndarray, system: LinearSystem) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell (v, u) coefficients of the mixed solution: (t, p+1) and (t, p)."""
    p, t = system.p, system.mesh.cell_count
    z = recombine_split(x) if system.complex_valued else x
    pos_v = mixed_v_positions(p, t)
    vcell = pos_v[np.arange(t)[:, None] * p + np.arange(p + 1)[None, :]]
    return z[vcell], z[mixed_u_positions(p, t)]


def scale_system(system: LinearSystem, scheme: str, norm_u: float = 1.0, norm_v: float = 1.0,
                 in_place: bool = False) -> LinearSystem:
    """Apply a magnitude-scaling scheme to an assembled system.

    'S' divides the standard right-hand side by ||u||; 'M2' does the same for
    the whole mixed right-hand side; 'M1' additionally multiplies the gradient
    block (and any reaction block) by ||u||/||v|| while dividing the right-hand
    side by ||v||.  The recorded ScalingInfo maps each variable to the factor
    the solved unknowns were divided by.
    """
    if scheme == "none":
        return system
    if scheme == "S" and system.flavor != "standard":
        raise ValueError("scheme S applies to the standard formulation")
    if scheme in ("M1", "M2") and system.flavor != "mixed":
        raise ValueError(f"scheme {scheme} applies to the mixed formulation")
    if scheme not in ("S", "M1", "M2"):
        raise ValueError(f"unknown scaling scheme {scheme!r}")
    if norm_u <= 0 or norm_v <= 0:
        raise ValueError("scaling factors must be positive")

    out = system if in_place else replace(
        system,
        matrix=system.matrix.copy(),
        rhs=system.rhs.copy(),
        blocks=None if system.blocks is None else SaddleBlocks(
            M=system.blocks.M.copy(),
            B=system.blocks.B.copy(),
            G=system.blocks.G.copy(),
            H=system.blocks.H.copy(),
            pure_saddle=system.blocks.pure_saddle,
        ),
    )

    if scheme in ("S", "M2"):
        out.rhs /= norm_u
        if out.blocks is not None:
            out.blocks.G /= norm_u
            out.blocks.H /= norm_u
    else:  # M1
        ratio = norm_u / norm_v
        _scale_mixed_u_columns(out.matrix, out.p, out.complex_valued, ratio)
        out.rhs /= norm_v
        if out.blocks is not None:
            out.blocks.B = out.blocks.B * ratio
            out.blocks.G /= norm_v
            out.blocks.H /= norm_v
    out.scaling = ScalingInfo(scheme, norm_u=norm_u, norm_v=norm_v)
    return out


def _scale_mixed_u_columns(mat: BandedMatrix, p: int, is_split: bool, ratio: float) -> None:
    """Multiply every stored entry whose column is a u unknown by `ratio`."""
    r0 = mat.kl + mat.ku
    n = mat.n
    for d in range(-mat.kl, mat.ku + 1):
        lo = max(0, d)
        hi = n + min(0, d)
        if hi <= lo:
            continue
        js = np.arange(lo, hi)
        cols = js // 2 if is_split else js
        mask = mixed_is_u_position(cols, p)
        if np.any(mask):
            mat.ab[r0 - d, lo:hi][mask] *= ratio
