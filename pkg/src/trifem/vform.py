"""The (Coef, Test, Trial) variational-form language.

A form is a list of entries, each pairing a coefficient with a test
term sum and (for bilinear forms) a trial term sum.  ``expand_extended``
rewrites every entry into elementary single-term products, distributing
'+'-joined sums and splitting grad.grad pairs into dx/dy products.
``standardize_symbols`` renames user symbols (say 'q', 'dp') to the
standard component names v1..vm / u1..un.  ``coef_to_matrix`` turns any
of the three coefficient forms (function or constant, finite element
function, precomputed matrix) into the per-element-per-quadrature-point
coefficient matrix the assembly kernels consume.
"""

from dataclasses import dataclass

import numpy as np

from .fespace import (FeFunction, coef_matrix_from_dofs, coef_matrix_on_edges,
                      quad_points_2d, trace_dof_map, trace_values)
from .quadrature import segment_rule, triangle_rule
from .terms import Term, TermSum, parse_term_sum

__all__ = ["FormEntry", "VarForm", "var_form", "expand_extended",
           "standardize_symbols", "coef_to_matrix", "FormError"]


class FormError(ValueError):
    """Inconsistent variational form."""


@dataclass(frozen=True)
class FormEntry:
    coef: object
    test: TermSum
    trial: TermSum | None


@dataclass(frozen=True)
class VarForm:
    """Parallel (Coef, Test, Trial) lists; trial is None in every entry
    of a linear form."""

    entries: tuple

    def __post_init__(self):
        kinds = {e.trial is None for e in self.entries}
        if len(kinds) > 1:
            raise FormError("form mixes entries with and without trial terms")

    @property
    def is_linear(self):
        return self.entries[0].trial is None

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)


def _aslist(x):
    if isinstance(x, (list, tuple)):
        return list(x)
    return [x]


def var_form(coef, test, trial=None):
    """Build a VarForm from paper-style lists (or single entries).

    With a single test term, a list-valued coefficient is that entry's
    (multi-component) coefficient; with a list of test terms the
    coefficient list runs parallel to it.
    """
    if isinstance(test, (list, tuple)):
        coefs = _aslist(coef)
        tests = [parse_term_sum(t) for t in test]
    else:
        coefs = [coef]
        tests = [parse_term_sum(test)]
    if len(coefs) != len(tests):
        raise FormError(f"{len(coefs)} coefficients for {len(tests)} test terms")
    if trial is None:
        trials = [None] * len(tests)
    else:
        trials = [parse_term_sum(t) for t in _aslist(trial)]
        if len(trials) != len(tests):
            raise FormError(f"{len(trials)} trial terms for {len(tests)} test terms")
    return VarForm(entries=tuple(FormEntry(c, t, u)
                                 for c, t, u in zip(coefs, tests, trials)))


def _split_grad_pair(vterm, uterm):
    """grad x grad -> (dx, dx) + (dy, dy); reject grad against a scalar tag."""
    if vterm.tag == "grad" or uterm.tag == "grad":
        if vterm.tag != uterm.tag:
            raise FormError(f"cannot pair {vterm} with {uterm}: 'grad' must "
                            "face 'grad' on the other side")
        return [(Term(vterm.symbol, "dx"), Term(uterm.symbol, "dx")),
                (Term(vterm.symbol, "dy"), Term(uterm.symbol, "dy"))]
    return [(vterm, uterm)]


def expand_extended(form):
    """Distribute term sums into elementary single-term combinations.

    Each entry with m test terms and n trial terms becomes m*n entries,
    all carrying the original coefficient; grad.grad pairs then split
    into their dx/dy products.  Idempotent on already-elementary forms.
    """
    out = []
    for entry in form:
        if entry.trial is None:
            for vterm in entry.test:
                if vterm.tag == "grad":
                    raise FormError(f"'{vterm}' is not allowed in a linear form")
                out.append(FormEntry(entry.coef, TermSum((vterm,)), None))
            continue
        for vterm in entry.test:
            for uterm in entry.trial:
                for v, u in _split_grad_pair(vterm, uterm):
                    out.append(FormEntry(entry.coef, TermSum((v,)), TermSum((u,))))
    return VarForm(entries=tuple(out))


def standardize_symbols(vstr, ustr, form):
    """Rename user test/trial symbols to the standard v1../u1.. names.

    vstr and ustr list the user's symbols in component order; the symbol
    at position i becomes v{i+1} or u{i+1}.
    """
    vmap = {s: f"v{i + 1}" for i, s in enumerate(vstr)}
    umap = {s: f"u{i + 1}" for i, s in enumerate(ustr or ())}

    def rename(ts, mapping, side):
        if ts is None:
            return None
        renamed = []
        for t in ts:
            if t.symbol not in mapping:
                raise FormError(f"{side} symbol {t.symbol!r} not found in "
                                f"{sorted(mapping)}")
            renamed.append(Term(mapping[t.symbol], t.tag))
        return TermSum(tuple(renamed))

    entries = tuple(FormEntry(e.coef, rename(e.test, vmap, "test"),
                              rename(e.trial, umap, "trial"))
                    for e in form)
    return VarForm(entries=entries)


def _eval_coef_at(coef, points):
    vals = np.asarray(coef(points), dtype=float)
    if vals.ndim == 0:
        vals = np.full(len(points), float(vals))
    if vals.ndim == 2 and vals.shape[1] == 1:
        vals = vals[:, 0]
    return vals


def coef_to_matrix(coef, th, quad_order, domain="2d", region=None,
                   space=None):
    """Normalize any coefficient form to a coefficient matrix.

    Functions and constants are evaluated at the quadrature points of
    every element (or region edge); a FeFunction delegates to its dof
    vector; a ready matrix is passed through after a shape check.  On
    the 1d domain a 2-component function is contracted with the outward
    normal, as for flux data.
    """
    if domain == "2d":
        shape = (len(th.mesh.elem), triangle_rule(quad_order).npoints)
    elif domain == "1d":
        if region is None:
            raise ValueError("1d coefficient needs an active boundary region")
        shape = (len(region.edge_idx), segment_rule(quad_order).npoints)
    else:
        raise ValueError(f"unknown coefficient domain {domain!r}")

    if isinstance(coef, FeFunction):
        if domain == "2d":
            return coef_matrix_from_dofs(coef.dofs, "val", th, coef.space, quad_order)
        rule = segment_rule(quad_order)
        tdm = trace_dof_map(th, coef.space, region)
        vals = trace_values(coef.space, rule.point)      # (k+1, ng)
        return np.einsum("ei,ip->ep", coef.dofs[tdm], vals)

    if callable(coef):
        if domain == "1d":
            return coef_matrix_on_edges(coef, th, region, quad_order)
        pts = quad_points_2d(th.mesh, triangle_rule(quad_order))
        vals = _eval_coef_at(coef, pts.reshape(-1, 2))
        if vals.shape != (shape[0] * shape[1],):
            raise FormError("2d coefficient function must return one value "
                            f"per point, got shape {vals.shape}")
        return vals.reshape(shape)

    arr = np.asarray(coef, dtype=float)
    if arr.ndim == 0:
        return np.full(shape, float(arr))
    if arr.shape != shape:
        raise FormError(f"coefficient matrix has shape {arr.shape}, "
                        f"expected {shape}")
    return arr
