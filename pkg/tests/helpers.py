"""Shared fixtures and independent oracles for the test suite.

The oracles here deliberately avoid the code paths they are used to check:
singular values come from polynomial root finding on the Gram matrix,
the secant recursion is coded directly, and synthetic run records are built
by hand.
"""
from __future__ import annotations

import mpmath

from broydenlab.linalg import Mat, PrecisionContext, Vec
from broydenlab.problems import Problem
from broydenlab.solvers import RunRecord, Status, TraceEntry


# -- ad-hoc problems -----------------------------------------------------------

def _f_sq_minus_1(u: Vec) -> Vec:
    x = u.entries[0]
    return Vec((x * x - 1,), u.ctx)


def _j_sq_minus_1(u: Vec) -> Mat:
    return Mat(((2 * u.entries[0],),), u.ctx)


def problem_sq_minus_1() -> Problem:
    """1-D F(u) = u**2 - 1 with the regular root u = 1."""
    return Problem(name="sq-minus-1", n=1, f=_f_sq_minus_1, jac=_j_sq_minus_1,
                   root_entries=(1,), has_a2=False, phi_entries=None,
                   psi_entries=None, singularity_order=0)


class _LinearMap:
    """F(u) = A u - b with constant Jacobian A (picklable callable pair)."""

    def __init__(self, a_rows, b_entries):
        self.a_rows = a_rows
        self.b_entries = b_entries

    def f(self, u: Vec) -> Vec:
        ctx = u.ctx
        out = []
        for row, bi in zip(self.a_rows, self.b_entries):
            acc = ctx.real(-bi)
            for a, x in zip(row, u.entries):
                acc += a * x
            out.append(acc)
        return Vec(tuple(out), ctx)

    def jac(self, u: Vec) -> Mat:
        return u.ctx.mat(self.a_rows)


def problem_linear(a_rows, b_entries, root_entries) -> Problem:
    """Linear system A u = b with integer data and known root."""
    lin = _LinearMap(a_rows, b_entries)
    return Problem(name="linear", n=len(b_entries), f=lin.f, jac=lin.jac,
                   root_entries=tuple(root_entries), has_a2=False,
                   phi_entries=None, psi_entries=None, singularity_order=0)


# -- independent oracles -------------------------------------------------------

def secant_iterates(f, u0, u1, ctx: PrecisionContext, count: int):
    """Classical secant recursion, kept independent of the solver module."""
    us = [ctx.real(u0), ctx.real(u1)]
    for _ in range(count):
        a, b = us[-2], us[-1]
        fa, fb = f(a), f(b)
        if fb == fa:
            break
        us.append(b - fb * (b - a) / (fb - fa))
    return us


def charpoly_singular_values(A: Mat, ctx: PrecisionContext):
    """Singular values via the characteristic polynomial of A^T A.

    Uses mpmath's generic polynomial root finder at raised precision, a path
    fully independent of the Jacobi sweep implementation.  Supports n = 2, 3.
    """
    n = A.n
    g = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            acc = ctx.zero
            for k in range(n):
                acc += A.rows[k][i] * A.rows[k][j]
            g[i][j] = acc
    if n == 2:
        tr = g[0][0] + g[1][1]
        det = g[0][0] * g[1][1] - g[0][1] * g[1][0]
        coeffs = [ctx.one, -tr, det]
    elif n == 3:
        tr = g[0][0] + g[1][1] + g[2][2]
        m01 = g[0][0] * g[1][1] - g[0][1] * g[1][0]
        m02 = g[0][0] * g[2][2] - g[0][2] * g[2][0]
        m12 = g[1][1] * g[2][2] - g[1][2] * g[2][1]
        det = (g[0][0] * (g[1][1] * g[2][2] - g[1][2] * g[2][1])
               - g[0][1] * (g[1][0] * g[2][2] - g[1][2] * g[2][0])
               + g[0][2] * (g[1][0] * g[2][1] - g[1][1] * g[2][0]))
        coeffs = [ctx.one, -tr, m01 + m02 + m12, -det]
    else:
        raise ValueError("oracle supports n = 2 or 3 only")
    with mpmath.workdps(ctx.decimal_digits + 30):
        roots = mpmath.polyroots([mpmath.mpf(str(c)) for c in coeffs],
                                 maxsteps=200, extraprec=120)
        svals = sorted(mpmath.sqrt(max(mpmath.re(r), mpmath.mpf(0)))
                       for r in roots)
        return [ctx.real(str(s)) for s in svals]


# -- synthetic run records -----------------------------------------------------

def synthetic_record(ctx: PrecisionContext, us, f_norms, eps=None, svals=None,
                     tol_exponent: int = 100) -> RunRecord:
    """RunRecord built from explicit iterates and norms.

    ``eps`` entries apply to indices 0..kbar-1; steps are the consecutive
    differences of ``us``.
    """
    kbar = len(us) - 1
    trace = []
    for k, u in enumerate(us):
        entry = TraceEntry(u=u, f_norm=ctx.real(f_norms[k]))
        if k < kbar:
            entry.s = us[k + 1] - u
            if eps is not None:
                entry.eps = ctx.real(eps[k])
        if svals is not None and svals[k] is not None:
            entry.e_svals = tuple(ctx.real(s) for s in svals[k])
            entry.e_norm = entry.e_svals[-1]
        trace.append(entry)
    return RunRecord(status=Status.CONVERGED, kbar=kbar, trace=trace,
                     b_final=None, tol_exponent=tol_exponent,
                     precision_digits=ctx.decimal_digits, method="bm",
                     broyden_updates_from=None)
