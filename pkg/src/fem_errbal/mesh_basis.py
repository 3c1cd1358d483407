"""Uniform interval meshes, Lagrange bases on Gauss-Lobatto points, Gauss-Legendre quadrature.

All reference-cell machinery lives on [0, 1].  Physical cells are affine images
of the reference cell, so a basis function's k-th physical derivative is the
reference derivative divided by h**k.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as _leg

MAX_REFINEMENT = 40
MAX_DEGREE = 20
MAX_QUAD_POINTS = 32

_NEWTON_TOL = 1e-15
_NEWTON_MAX_STEPS = 100


@dataclass(frozen=True)
class Mesh:
    """Uniform mesh on (0, 1) with 2**refinement_level cells."""

    refinement_level: int

    @property
    def cell_count(self) -> int:
        return 1 << self.refinement_level

    @property
    def h(self) -> float:
        # exact dyadic, so vertex coordinates below are exact as well
        return 2.0 ** (-self.refinement_level)

    @property
    def vertices(self) -> np.ndarray:
        return np.arange(self.cell_count + 1) * self.h

    def refine(self) -> "Mesh":
        return build_mesh(self.refinement_level + 1)


def build_mesh(refinement_level: int) -> Mesh:
    if not isinstance(refinement_level, (int, np.integer)):
        raise ValueError("refinement level must be an integer")
    if refinement_level < 0 or refinement_level > MAX_REFINEMENT:
        raise ValueError(
            f"refinement level must be in [0, {MAX_REFINEMENT}], got {refinement_level}"
        )
    return Mesh(int(refinement_level))


def _legendre_deriv_coeffs(p: int) -> np.ndarray:
    c = np.zeros(p + 1)
    c[p] = 1.0
    return _leg.legder(c)


@lru_cache(maxsize=None)
def gauss_lobatto_nodes(p: int) -> np.ndarray:
    """Support points of the degree-p Lobatto family, mapped to [0, 1].

    Interior nodes are the roots of the derivative of the Legendre polynomial
    of degree p, found by Newton iteration from Chebyshev-Lobatto seeds with a
    bisection fallback for any root Newton fails to pin down.
    """
    if not 1 <= p <= MAX_DEGREE:
        raise ValueError(f"degree must be in [1, {MAX_DEGREE}], got {p}")
    if p == 1:
        return np.array([0.0, 1.0])

    dc = _legendre_deriv_coeffs(p)
    ddc = _leg.legder(dc)

    def f(x):
        return _leg.legval(x, dc)

    def df(x):
        return _leg.legval(x, ddc)

    roots = []
    # Chebyshev-Lobatto interior points, ordered left to right on [-1, 1]
    seeds = -np.cos(np.pi * np.arange(1, p) / p)
    for seed in seeds:
        x = seed
        converged = False
        for _ in range(_NEWTON_MAX_STEPS):
            step = f(x) / df(x)
            x -= step
            if abs(step) <= _NEWTON_TOL:
                converged = True
                break
        if not converged or not (-1.0 < x < 1.0):
            x = _bisect_root(f, seed)
        roots.append(x)

    interior = np.array(roots)
    # enforce the exact symmetry of the node family
    interior = 0.5 * (interior - interior[::-1])
    nodes = np.concatenate(([-1.0], interior, [1.0]))
    if np.any(np.diff(nodes) <= 0):
        raise RuntimeError(f"node computation failed for degree {p}")
    mapped = 0.5 * (nodes + 1.0)
    mapped[0], mapped[-1] = 0.0, 1.0
    mapped.setflags(write=False)
    return mapped


def _bisect_root(f, seed: float, width: float = 0.05) -> float:
    """Bisection fallback around a seed; widens the bracket until f changes sign."""
    lo, hi = seed - width, seed + width
    while f(lo) * f(hi) > 0:
        lo = max(lo - width, -1.0 + 1e-14)
        hi = min(hi + width, 1.0 - 1e-14)
        if lo <= -1.0 + 1e-14 and hi >= 1.0 - 1e-14 and f(lo) * f(hi) > 0:
            raise RuntimeError("bisection fallback could not bracket a root")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(lo) * f(mid) <= 0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= _NEWTON_TOL:
            break
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre rule on the reference cell [0, 1]."""

    points: np.ndarray
    weights: np.ndarray

    @property
    def n_points(self) -> int:
        return len(self.points)


@lru_cache(maxsize=None)
def gauss_legendre_rule(n_q: int) -> QuadratureRule:
    if not 1 <= n_q <= MAX_QUAD_POINTS:
        raise ValueError(f"quadrature point count must be in [1, {MAX_QUAD_POINTS}], got {n_q}")
    x, w = _leg.leggauss(n_q)
    pts = 0.5 * (x + 1.0)
    wts = 0.5 * w
    pts.setflags(write=False)
    wts.setflags(write=False)
    return QuadratureRule(pts, wts)


class LagrangeBasis:
    """Nodal Lagrange basis on [0, 1].

    Basis polynomials are stored as shifted-Legendre series, which keeps
    evaluation of values and derivatives stable up to degree 20.  Degree 0 is
    allowed only for the discontinuous flavor (a single constant function with
    support point 1/2).
    """

    def __init__(self, degree: int, continuous: bool = True):
        if continuous:
            if not 1 <= degree <= MAX_DEGREE:
                raise ValueError(f"continuous basis degree must be in [1, {MAX_DEGREE}]")
            nodes = gauss_lobatto_nodes(degree)
        else:
            if not 0 <= degree <= MAX_DEGREE:
                raise ValueError(f"basis degree must be in [0, {MAX_DEGREE}]")
            nodes = gauss_lobatto_nodes(degree) if degree >= 1 else np.array([0.5])
        self.degree = degree
        self.continuous = continuous
        self.nodes = nodes
        # V[j, k] = P_k(2 x_j - 1); columns of C are Legendre series of the
        # basis polynomials (V C = I)
        vander = _leg.legvander(2.0 * nodes - 1.0, degree)
        coeffs = np.linalg.solve(vander, np.eye(degree + 1))
        self._series = {0: coeffs}

    @property
    def n_dofs(self) -> int:
        return self.degree + 1

    def _series_for(self, order: int) -> np.ndarray:
        if order not in self._series:
            base = self._series[0]
            # chain rule for the shift x -> 2x - 1 contributes 2**order
            d = _leg.legder(base, order, axis=0) * (2.0 ** order)
            self._series[order] = d
        return self._series[order]

    def eval(self, x: np.ndarray, order: int = 0) -> np.ndarray:
        """Evaluate all basis functions (or their order-th derivatives) at x in [0, 1].

        Returns an array of shape (len(x), n_dofs).
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if order < 0:
            raise ValueError("derivative order must be nonnegative")
        if order > self.degree:
            return np.zeros((len(x), self.n_dofs))
        series = self._series_for(order)
        vals = _leg.legval(2.0 * x - 1.0, series)  # shape (n_dofs, len(x))
        return np.ascontiguousarray(vals.T)


def eval_basis(basis: LagrangeBasis, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Values and first derivatives of every basis function at reference points x."""
    x = np.asarray(x, dtype=float)
    if np.any(x < -1e-12) or np.any(x > 1 + 1e-12):
        raise ValueError("evaluation points must lie in the reference cell [0, 1]")
    return basis.eval(x, 0), basis.eval(x, 1)
