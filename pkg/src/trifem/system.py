"""Dirichlet elimination, sparse solves, error norms and rate fitting.

Dirichlet conditions are imposed by elimination: the constrained dofs
are assigned their boundary values exactly and the remaining free block

    A_ff x_f = b_f - A_fc x_c

is solved by a direct sparse factorization.  Error norms integrate
(u - u_h)^2 and |grad u - grad u_h|^2 by quadrature; convergence rates
are least-squares slopes of log(err) against log(h).
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import AssembledSystem, SparseTriples, compress
from .fespace import (coef_matrix_from_dofs, fe_space, quad_points_2d,
                      region_dofs)
from .quadrature import triangle_rule

__all__ = ["DirichletSpec", "RateReport", "apply_dirichlet_and_solve",
           "solve_sparse", "error_L2", "error_H1_semi", "fit_rate"]


@dataclass(frozen=True)
class DirichletSpec:
    """Which boundary regions are constrained, and by what.

    values[r] lists one boundary value function per component for the
    r-th selected region; None leaves that component unconstrained on
    the region.  A bare callable is promoted to a single-component set.
    """

    regions: tuple
    values: tuple

    def __post_init__(self):
        regions = tuple(int(r) for r in np.atleast_1d(self.regions))
        values = self.values if isinstance(self.values, (list, tuple)) else (self.values,)
        norm = []
        for v in values:
            if v is None or callable(v):
                norm.append((v,))
            else:
                norm.append(tuple(v))
        if len(norm) != len(regions):
            raise ValueError(f"{len(norm)} value sets for {len(regions)} regions")
        object.__setattr__(self, "regions", regions)
        object.__setattr__(self, "values", tuple(norm))


def _as_matrix(system):
    if isinstance(system, AssembledSystem):
        return system.matrix()
    if isinstance(system, SparseTriples):
        return compress(system)
    return sp.csr_matrix(system)


def solve_sparse(A, b):
    """Direct sparse factorization with iterative refinement.

    The refinement sweeps recover the digits a single backsolve loses on
    ill-conditioned systems (penalty-stabilized saddle points); raises
    on a numerically singular matrix.
    """
    A = sp.csc_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix is not square: {A.shape}")
    if A.shape[0] == 0:
        return np.zeros(0)
    b = np.asarray(b, dtype=float)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            lu = spla.splu(A)
            x = lu.solve(b)
            bnorm = max(np.linalg.norm(b), 1.0)
            for _ in range(2):
                r = b - A @ x
                if np.linalg.norm(r) <= 1e-14 * bnorm:
                    break
                x = x + lu.solve(r)
    except RuntimeError as exc:
        raise RuntimeError(f"sparse solve failed: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise RuntimeError("sparse solve produced non-finite values; "
                           "the matrix is numerically singular")
    residual = np.linalg.norm(A @ x - b) / bnorm
    if residual > 1e-8:
        raise RuntimeError(f"sparse solve residual {residual:.2e}; "
                           "the matrix is numerically singular")
    return x


def apply_dirichlet_and_solve(th, system, rhs=None, spec=None):
    """Impose Dirichlet values by elimination and solve.

    Fixed dofs are every dof of a constrained component whose carrying
    vertex or edge lies in one of the selected regions; they receive the
    boundary values exactly.  When a dof is claimed by several regions
    the first one wins.  rhs may live on the system itself.
    """
    if not isinstance(system, AssembledSystem):
        raise TypeError("apply_dirichlet_and_solve needs an AssembledSystem "
                        "(use assemble_system, or wrap scalar triples)")
    if spec is None:
        raise TypeError("a DirichletSpec is required")
    spaces = system.spaces
    A = _as_matrix(system).tocsr()
    if rhs is None:
        rhs = system.rhs
    rhs = np.asarray(rhs, dtype=float)
    total = system.num_dofs
    if A.shape != (total, total) or rhs.shape != (total,):
        raise ValueError("system, rhs and component layout disagree")
    offsets = system.offsets

    x = np.zeros(total)
    is_fixed = np.zeros(total, dtype=bool)
    for r, gset in zip(spec.regions, spec.values):
        if not 0 <= r < len(th.partition):
            raise IndexError(f"boundary region {r} out of range "
                             f"(partition has {len(th.partition)} regions)")
        region = th.partition[r]
        if len(gset) != len(spaces):
            raise ValueError(f"{len(gset)} boundary functions for "
                             f"{len(spaces)} components")
        for c, g in enumerate(gset):
            if g is None:
                continue
            local = region_dofs(th, spaces[c], region)
            if len(local) == 0:
                continue
            pts = th.dof_map(spaces[c]).dof_point[local]
            gv = np.asarray(g(pts), dtype=float)
            if gv.ndim == 0:
                gv = np.full(len(local), float(gv))
            gdofs = local + offsets[c]
            fresh = ~is_fixed[gdofs]
            x[gdofs[fresh]] = gv[fresh]
            is_fixed[gdofs[fresh]] = True

    free = np.nonzero(~is_fixed)[0]
    fixed = np.nonzero(is_fixed)[0]
    if len(free):
        b_free = rhs[free] - A[free][:, fixed] @ x[fixed]
        try:
            x[free] = solve_sparse(A[free][:, free], b_free)
        except RuntimeError as exc:
            hint = ("; no Dirichlet dof was fixed - an elliptic problem "
                    "needs at least one" if len(fixed) == 0 else "")
            raise RuntimeError(f"{exc}{hint}") from exc
    return x


def _exact_at_quad(exact, th, quad_order, ncomp):
    rule = triangle_rule(quad_order)
    pts = quad_points_2d(th.mesh, rule).reshape(-1, 2)
    vals = np.asarray(exact(pts), dtype=float)
    nt = len(th.mesh.elem)
    if ncomp == 1:
        if vals.ndim == 0:
            vals = np.full(len(pts), float(vals))
        return vals.reshape(nt, rule.npoints)
    if vals.shape != (len(pts), ncomp):
        raise ValueError(f"exact function returned shape {vals.shape}, "
                         f"expected ({len(pts)}, {ncomp})")
    return vals.reshape(nt, rule.npoints, ncomp)


def error_L2(th, space, quad_order, exact, dofs):
    """L2 norm of (exact - FE function) by quadrature."""
    space = fe_space(space)
    rule = triangle_rule(quad_order)
    uh = coef_matrix_from_dofs(dofs, "val", th, space, quad_order)
    ue = _exact_at_quad(exact, th, quad_order, 1)
    sq = (ue - uh) ** 2
    return float(np.sqrt(th.topo.area @ (sq @ rule.weight)))


def error_H1_semi(th, space, quad_order, exact_grad, dofs):
    """H1 seminorm of the error; exact_grad returns (m, 2) gradients."""
    space = fe_space(space)
    rule = triangle_rule(quad_order)
    dxh = coef_matrix_from_dofs(dofs, "dx", th, space, quad_order)
    dyh = coef_matrix_from_dofs(dofs, "dy", th, space, quad_order)
    ge = _exact_at_quad(exact_grad, th, quad_order, 2)
    sq = (ge[:, :, 0] - dxh) ** 2 + (ge[:, :, 1] - dyh) ** 2
    return float(np.sqrt(th.topo.area @ (sq @ rule.weight)))


def fit_rate(h, err):
    """Least-squares slope of log(err) against log(h)."""
    h = np.asarray(h, dtype=float)
    err = np.asarray(err, dtype=float)
    if len(h) < 2 or len(h) != len(err):
        raise ValueError("rate fit needs at least two matching levels")
    if np.any(h <= 0) or np.any(err <= 0):
        raise ValueError("rate fit needs positive mesh sizes and errors")
    return float(np.polyfit(np.log(h), np.log(err), 1)[0])


@dataclass
class RateReport:
    """Mesh sizes, error columns and fitted convergence slopes."""

    problem: str
    h: np.ndarray
    num_elems: np.ndarray
    columns: dict = field(default_factory=dict)
    slopes: dict = field(default_factory=dict)

    def fit(self):
        self.slopes = {name: fit_rate(self.h, vals)
                       for name, vals in self.columns.items()
                       if len(self.h) >= 2}
        return self
