"""Direct and iterative solvers for the assembled systems.

The direct path is a banded LU with partial pivoting (LAPACK gbtrf/gbtrs) on
the band layout produced by assembly; upper bandwidth grows by the lower
bandwidth during pivoting and no iterative refinement is applied.  The
iterative path is plain conjugate gradients with the stopping rule
||F - A x||_2 <= tol_prm ||F||_2; since the standard-formulation operator is
negative definite by construction, a probe of random Rayleigh quotients
decides whether the system is negated before iterating.  Mixed saddle systems
can alternatively be solved segregated: an outer CG on the Schur complement
B^T M^{-1} B with a three-step matvec, then a mass solve recovers v.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from .assembly import BandedMatrix, LinearSystem, mixed_u_positions, mixed_v_positions

_PROBE_COUNT = 20
_PROBE_SEED = 2024


class SingularMatrixError(RuntimeError):
    def __init__(self, pivot: int):
        super().__init__(f"banded LU hit an exactly zero pivot at index {pivot}")
        self.pivot = pivot


class NonConvergenceError(RuntimeError):
    def __init__(self, stage: str, iterations: int, residual: float, best_x: np.ndarray):
        super().__init__(
            f"{stage} did not converge within {iterations} iterations "
            f"(relative residual {residual:.3e})"
        )
        self.stage = stage
        self.iterations = iterations
        self.residual = residual
        self.best_x = best_x


@dataclass
class SolveReport:
    x: np.ndarray
    method: str
    iterations: int
    rel_residual: float
    wall_time: float


class BandedLU:
    """Factorization PA = LU of a BandedMatrix, reusable for several solves."""

    def __init__(self, mat: BandedMatrix):
        if np.iscomplexobj(mat.ab):
            raise ValueError("factor the split real system, not the complex one")
        self.n, self.kl, self.ku = mat.n, mat.kl, mat.ku
        lu, ipiv, info = lapack.dgbtrf(np.asfortranarray(mat.ab), mat.kl, mat.ku)
        if info < 0:
            raise ValueError(f"illegal argument {-info} passed to the factorization")
        if info > 0:
            raise SingularMatrixError(info - 1)
        self._lu = lu
        self._ipiv = ipiv

    def solve(self, b: np.ndarray) -> np.ndarray:
        x, info = lapack.dgbtrs(self._lu, self.kl, self.ku, np.asfortranarray(b.reshape(-1, 1)), self._ipiv)
        if info != 0:
            raise ValueError(f"band back-substitution failed with code {info}")
        return np.ascontiguousarray(x[:, 0])

    def factors_dense(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Dense (L, U, ipiv) for verification on small systems."""
        n, kl, ku = self.n, self.kl, self.ku
        upper = np.zeros((n, n))
        lower = np.eye(n)
        r0 = kl + ku
        for j in range(n):
            i_lo = max(0, j - (kl + ku))
            for i in range(i_lo, j + 1):
                upper[i, j] = self._lu[r0 + i - j, j]
            for i in range(j + 1, min(n, j + kl + 1)):
                lower[i, j] = self._lu[r0 + i - j, j]
        return lower, upper, np.asarray(self._ipiv)

    def reconstruct_columns(self, cols: np.ndarray) -> np.ndarray:
        """Undo elimination and row interchanges on selected columns of U.

        Row operations act on each column independently, so reconstructing a
        sample of columns of A costs O(n (kl + k)) rather than dense n^2.
        """
        cols = np.asarray(cols, dtype=np.int64)
        n, kl, ku = self.n, self.kl, self.ku
        r0 = kl + ku
        m = np.zeros((n, cols.size))
        for k, j in enumerate(cols):
            i_lo = max(0, j - r0)
            m[i_lo : j + 1, k] = self._lu[r0 + i_lo - j : r0 + 1, j]
        for j in range(n - 1, -1, -1):
            hi = min(n, j + kl + 1)
            if hi > j + 1:
                lcol = self._lu[r0 + 1 : r0 + 1 + (hi - j - 1), j]
                m[j + 1 : hi, :] += np.outer(lcol, m[j, :])
            pj = self._ipiv[j]  # scipy's wrapper hands back zero-based pivots
            if pj != j:
                m[[j, pj], :] = m[[pj, j], :]
        return m

    def reconstruct_dense(self) -> np.ndarray:
        return self.reconstruct_columns(np.arange(self.n))


def lu_banded_solve(system: LinearSystem) -> SolveReport:
    start = time.perf_counter()
    factor = BandedLU(system.matrix)
    x = factor.solve(system.rhs)
    elapsed = time.perf_counter() - start
    rhs_norm = np.linalg.norm(system.rhs)
    res = np.linalg.norm(system.rhs - system.matrix.matvec(x)) / rhs_norm if rhs_norm else 0.0
    return SolveReport(x=x, method="lu", iterations=0, rel_residual=float(res), wall_time=elapsed)


def _constrained_rows(mat: BandedMatrix) -> np.ndarray:
    """Rows turned into identities by strong boundary elimination."""
    r0 = mat.kl + mat.ku
    diag_one = mat.ab[r0, :] == 1.0
    if not np.any(diag_one):
        return np.zeros(mat.n, dtype=bool)
    off = np.zeros(mat.n)
    for d in range(-mat.kl, mat.ku + 1):
        if d == 0:
            continue
        lo, hi = max(0, d), mat.n + min(0, d)
        if hi > lo:
            contrib = np.abs(mat.ab[r0 - d, lo:hi])
            off[lo - d : hi - d] += contrib  # row sums
            off[lo:hi] += contrib            # column sums
    return diag_one & (off == 0.0)


def _definiteness_sign(mat: BandedMatrix, active: np.ndarray) -> float:
    rng = np.random.default_rng(_PROBE_SEED)
    signs = []
    for _ in range(_PROBE_COUNT):
        v = rng.standard_normal(mat.n)
        v[~active] = 0.0
        q = np.dot(v, mat.matvec(v)) / np.dot(v, v)
        signs.append(np.sign(q))
    if all(s < 0 for s in signs):
        return -1.0
    if all(s > 0 for s in signs):
        return 1.0
    raise ValueError("definiteness probe found mixed signs; CG needs a definite operator")


def _cg_core(matvec, b: np.ndarray, tol: float, max_iter: int, x0: np.ndarray | None = None,
             stage: str = "cg"):
    x = np.zeros_like(b) if x0 is None else x0.copy()
    r = b - matvec(x)
    b_norm = np.linalg.norm(b)
    if b_norm == 0.0:
        return x, 0, 0.0
    p = r.copy()
    rs = np.dot(r, r)
    threshold = tol * b_norm
    for k in range(1, max_iter + 1):
        ap = matvec(p)
        denom = np.dot(p, ap)
        if denom <= 0.0:
            raise NonConvergenceError(stage, k, float(np.sqrt(rs) / b_norm), x)
        alpha = rs / denom
        x += alpha * p
        r -= alpha * ap
        rs_new = np.dot(r, r)
        if np.sqrt(rs_new) <= threshold:
            return x, k, float(np.sqrt(rs_new) / b_norm)
        p = r + (rs_new / rs) * p
        rs = rs_new
    raise NonConvergenceError(stage, max_iter, float(np.sqrt(rs) / b_norm), x)


def cg_solve(system: LinearSystem, tol_prm: float, max_iter: int | None = None) -> SolveReport:
    """Conjugate gradients on a definite (possibly negated) standard system.

    Strongly imposed boundary rows are identities; seeding the iterate with
    their values keeps the Krylov space inside the active subspace, so the
    definiteness of the interior block is what the probe sees.
    """
    start = time.perf_counter()
    mat, rhs = system.matrix, system.rhs
    constrained = _constrained_rows(mat)
    active = ~constrained
    sign = _definiteness_sign(mat, active)
    x0 = np.zeros(mat.n)
    x0[constrained] = rhs[constrained]

    def matvec(v):
        return sign * mat.matvec(v)

    max_iter = max_iter if max_iter is not None else 10 * mat.n
    x, iters, _ = _cg_core(matvec, sign * rhs, tol_prm, max_iter, x0=x0)
    elapsed = time.perf_counter() - start
    rhs_norm = np.linalg.norm(rhs)
    res = np.linalg.norm(rhs - mat.matvec(x)) / rhs_norm if rhs_norm else 0.0
    return SolveReport(x=x, method="cg", iterations=iters, rel_residual=float(res), wall_time=elapsed)


def schur_solve(
    system: LinearSystem,
    outer_tol: float = 1e-10,
    inner: str = "direct",
    inner_tol: float = 1e-12,
    max_iter: int | None = None,
) -> SolveReport:
    """Segregated solve of the real mixed saddle system.

    Outer CG runs on B^T M^{-1} B U = B^T M^{-1} G - H with the three-step
    matvec X = B W, M Y = X, Z = B^T Y; the gradient unknowns follow from
    M V = G - B U.
    """
    start = time.perf_counter()
    if system.flavor != "mixed" or system.blocks is None:
        raise ValueError("segregated solve needs the real mixed block system")
    blocks = system.blocks
    if not blocks.pure_saddle:
        raise ValueError(
            "segregated solve requires the pure saddle form (constant unit "
            "diffusion, no reaction term)"
        )
    if inner not in ("direct", "cg"):
        raise ValueError(f"unknown inner solver {inner!r}")

    if inner == "direct":
        factor = BandedLU(blocks.M)
        m_solve = factor.solve
    else:
        m_mat = blocks.M

        def m_solve(b):
            y, _, _ = _cg_core(m_mat.matvec, b, inner_tol, 10 * m_mat.n, stage="inner-cg")
            return y

    b_mat = blocks.B
    rhs_outer = b_mat.T @ m_solve(blocks.G) - blocks.H

    def s_matvec(w):
        return b_mat.T @ m_solve(b_mat @ w)

    max_iter = max_iter if max_iter is not None else 10 * len(rhs_outer)
    u, iters, res = _cg_core(s_matvec, rhs_outer, outer_tol, max_iter, stage="outer-cg")
    v = m_solve(blocks.G - b_mat @ u)

    p, t = system.p, system.mesh.cell_count
    x = np.empty(system.n_unknowns)
    x[mixed_v_positions(p, t)] = v
    x[mixed_u_positions(p, t).ravel()] = u  # block u ordering is cell-major already
    elapsed = time.perf_counter() - start
    return SolveReport(
        x=x, method=f"schur[{inner}]", iterations=iters, rel_residual=float(res), wall_time=elapsed
    )


def solve_system(system: LinearSystem, solver: str = "lu", tol_prm: float = 1e-10,
                 inner: str = "direct") -> SolveReport:
    """Dispatch to the named solver; drivers go through this single entry."""
    if solver == "lu":
        return lu_banded_solve(system)
    if solver == "cg":
        return cg_solve(system, tol_prm)
    if solver == "schur":
        return schur_solve(system, outer_tol=tol_prm, inner=inner)
    raise ValueError(f"unknown solver {solver!r}; expected lu, cg, or schur")
